import numpy as np

from ovavss.config import ClassifierConfig, ModelConfig
from ovavss.errors import DimensionError
from ovavss.model.backbones import VisualEncoder
from ovavss.numcore import ops
from ovavss.numcore.nn import Linear, Module
from ovavss.numcore.random import derive
from ovavss.numcore.tensor import no_grad


class FrozenImageEncoder(Module):
    """Never-trained visual encoder: pooled level 4 -> linear -> unit vector.

    Built from its own seed, independent of the localizer, so classes the
    localizer never saw are embedded exactly like the ones it did.
    """

    def __init__(
        self,
        embed_dim: int = 64,
        seed: int = 1234,
        widths: tuple[int, int, int, int] = (32, 64, 128, 128),
        stem_width: int = 16,
        groups: int = 8,
    ):
        rng = derive(seed, 1)
        self.backbone = VisualEncoder(widths, stem_width, groups, rng)
        self.head = Linear(widths[-1], embed_dim, rng)
        self.embed_dim = embed_dim
        self.freeze()

    @classmethod
    def from_config(cls, classifier: ClassifierConfig, model: ModelConfig | None = None) -> "FrozenImageEncoder":
        model = model or ModelConfig()
        return cls(classifier.embed_dim, classifier.encoder_seed, model.visual_widths, model.stem_width, model.groups)

    def forward(self, crops) -> np.ndarray:
        """(B, 3, S, S) or (3, S, S) crops -> (B, embed_dim) L2-normalized embeddings."""
        crops = np.asarray(crops, dtype=np.float64)
        if crops.ndim == 3:
            crops = crops[None]
        if crops.ndim != 4 or crops.shape[1] != 3:
            raise DimensionError("image_encode", crops.shape, (None, 3, None, None))
        with no_grad():
            level4 = self.backbone(crops).levels[-1]
            pooled = ops.mean(level4, axis=(2, 3))
            out = self.head(pooled).data
        return out / np.maximum(np.linalg.norm(out, axis=1, keepdims=True), 1e-12)
