"""The global seedable generator used for parameter initialization."""

import numpy as np

_generator = np.random.default_rng(0)


def manual_seed(seed: int) -> np.random.Generator:
    global _generator
    _generator = np.random.default_rng(seed)
    return _generator


def default_generator() -> np.random.Generator:
    return _generator


def derive(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for a (seed, index, ...) stream."""
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def xavier_uniform(fan_in: int, fan_out: int, shape: tuple[int, ...], rng: np.random.Generator | None = None) -> np.ndarray:
    rng = rng or _generator
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
