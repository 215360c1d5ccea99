import numpy as np
import pytest

from ovavss.config import RunConfig, with_overrides
from ovavss.data.generator import generate_dataset
from ovavss.numcore.random import manual_seed

TINY_MODEL = {
    "num_queries": 4,
    "num_layers": 3,
    "c_av": 16,
    "c_o": 16,
    "c_e": 16,
    "visual_widths": (8, 8, 16, 16),
    "stem_width": 8,
    "groups": 4,
    "fusion_heads": 1,
    "decoder_heads": 2,
    "ffn_dim": 32,
    "max_frames": 2,
}
TINY_DATA = {"n_train": 4, "n_val": 2, "n_test": 2, "height": 32, "width": 32, "frames": 2, "seed": 7}


def tiny_config(root=None, **sections) -> RunConfig:
    """Small shapes that keep forward/backward passes well under a second."""
    data = dict(TINY_DATA, **({"root": str(root)} if root else {}))
    base = with_overrides(
        RunConfig(),
        data=data,
        model=TINY_MODEL,
        optim={"epochs": 2, "lr": 1e-3},
        classifier={"embed_dim": 16, "views": (0,)},
    )
    return with_overrides(base, **sections) if sections else base


@pytest.fixture(autouse=True)
def seeded():
    manual_seed(0)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg(tmp_path):
    return tiny_config(tmp_path / "data", run_dir=str(tmp_path / "run"))


@pytest.fixture(scope="session")
def dataset_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    generate_dataset(tiny_config(root).data, root, concurrency=2)
    return root


@pytest.fixture
def make_cfg():
    return tiny_config
