import numpy as np
import pytest

from ovavss.errors import CheckpointError
from ovavss.numcore import AdamW, Linear, Parameter, StepDecay, adam_step, load_checkpoint, save_checkpoint
from ovavss.numcore.checkpoint import MAGIC
from ovavss.numcore.random import derive


def test_checkpoint_round_trip(tmp_path, rng):
    state = {"a.weight": rng.normal(size=(3, 4)), "b": np.array([1.5]), "scalar": np.array(2.0)}
    path = tmp_path / "w.ckpt"
    save_checkpoint(path, state)
    loaded = load_checkpoint(path)
    assert list(loaded) == list(state)
    for name in state:
        assert np.array_equal(loaded[name], state[name])
        assert loaded[name].shape == state[name].shape
    assert loaded["scalar"].ndim == 0
    assert path.read_bytes().startswith(MAGIC)


def test_truncated_checkpoint_reports_offset(tmp_path, rng):
    path = tmp_path / "w.ckpt"
    save_checkpoint(path, {"w": rng.normal(size=(4, 4))})
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path)
    assert err.value.offset > len(MAGIC)
    assert "truncated" in str(err.value)


def test_bad_magic(tmp_path):
    path = tmp_path / "w.ckpt"
    path.write_bytes(b"NOTACKPT")
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path)
    assert err.value.offset == 0


def test_module_state_dict_round_trip(rng):
    src, dst = Linear(3, 2, rng), Linear(3, 2, np.random.default_rng(99))
    dst.load_state_dict(src.state_dict())
    assert np.array_equal(dst.weight.data, src.weight.data)


def test_adam_step_first_update_is_lr_sized():
    p, g = np.array([1.0, -1.0]), np.array([0.3, -7.0])
    m, v = np.zeros(2), np.zeros(2)
    adam_step(p, g, m, v, t=1, lr=0.1)
    # bias-corrected first step moves every coordinate by ~lr against the gradient sign
    assert np.allclose(p, [0.9, -0.9], atol=1e-6)


def test_adamw_decays_matrices_not_vectors():
    w, b = Parameter(np.ones((2, 2))), Parameter(np.ones(2))
    opt = AdamW({"w": w, "b": b}, lr=0.1, weight_decay=0.5)
    w.grad, b.grad = np.zeros((2, 2)), np.zeros(2)
    opt.step()
    assert np.allclose(w.data, 0.95)
    assert np.allclose(b.data, 1.0)


def test_adamw_state_round_trip():
    w = Parameter(np.ones(3))
    opt = AdamW({"w": w}, lr=0.1)
    w.grad = np.array([1.0, 2.0, 3.0])
    opt.step()
    clone = AdamW({"w": Parameter(np.ones(3))}, lr=0.1)
    clone.load_state_dict(opt.state_dict())
    assert clone.t == 1
    assert np.array_equal(clone.m["w"], opt.m["w"])


def test_step_decay_milestone():
    sched = StepDecay(1e-4, total_steps=100, at=0.88, factor=0.1)
    assert sched.lr_at(87) == 1e-4
    assert sched.lr_at(88) == pytest.approx(1e-5)


def test_derived_streams_are_independent_and_repeatable():
    assert np.array_equal(derive(3, 0, 1).normal(size=4), derive(3, 0, 1).normal(size=4))
    assert not np.array_equal(derive(3, 0, 1).normal(size=4), derive(3, 0, 2).normal(size=4))
