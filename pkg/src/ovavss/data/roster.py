from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from ovavss.config import RosterEntry
from ovavss.numcore.random import derive

AUDIO_DIM = 128
_SIGNATURE_STREAM = 9_999
_MAX_ABS_COS = 0.3


class ClassSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    class_id: int
    name: str
    shape_kind: Literal["circle", "square", "triangle", "cross", "ring", "bar"]
    texture_seed: int
    audio_signature: tuple[float, ...]
    split: Literal["base", "novel"]

    @property
    def signature(self) -> np.ndarray:
        return np.asarray(self.audio_signature, dtype=np.float64)


def audio_signatures(count: int, seed: int, dim: int = AUDIO_DIM) -> np.ndarray:
    """(count, dim) unit vectors, pairwise |cos| < 0.3: orthonormal basis plus noise."""
    rng = derive(seed, _SIGNATURE_STREAM)
    while True:
        basis, _ = np.linalg.qr(rng.normal(size=(dim, count)))
        sigs = basis.T + 0.05 * rng.normal(size=(count, dim)) / np.sqrt(dim)
        sigs /= np.linalg.norm(sigs, axis=1, keepdims=True)
        cos = sigs @ sigs.T
        np.fill_diagonal(cos, 0.0)
        if np.abs(cos).max() < _MAX_ABS_COS:
            return sigs


def build_roster(entries: Sequence[RosterEntry], seed: int) -> list[ClassSpec]:
    """Class ids start at 1; 0 is background."""
    sigs = audio_signatures(len(entries), seed)
    return [
        ClassSpec(
            class_id=i + 1,
            name=entry.name,
            shape_kind=entry.shape_kind,
            texture_seed=i + 1,
            audio_signature=tuple(float(v) for v in sigs[i]),
            split=entry.split,
        )
        for i, entry in enumerate(entries)
    ]
