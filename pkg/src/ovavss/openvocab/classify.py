"""Similarity classification of masked crops against a class-embedding table."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ovavss.errors import EmptyMaskError, InputError
from ovavss.openvocab.crop import crop_object
from ovavss.openvocab.encoder import FrozenImageEncoder
from ovavss.openvocab.table import EmbeddingTable

logger = logging.getLogger(__name__)


@dataclass
class Classification:
    name: str
    scores: np.ndarray  # (C,) distribution over table.names

    @property
    def score(self) -> float:
        return float(self.scores.max())


def similarity(image_embeds: np.ndarray, table: EmbeddingTable, temperature: float | None = None) -> np.ndarray:
    """Row-wise softmax over classes of eps * cosine; image_embeds must be unit rows."""
    if len(table) == 0:
        raise InputError("classification needs a nonempty class table")
    eps = table.temperature if temperature is None else temperature
    return softmax(eps * (np.atleast_2d(image_embeds) @ table.vectors.T), axis=1)


def classify(crops: list[np.ndarray], table: EmbeddingTable, encoder: FrozenImageEncoder) -> list[Classification]:
    if not crops:
        return []
    sims = similarity(encoder(np.stack(crops)), table)
    return [Classification(table.names[int(np.argmax(row))], row) for row in sims]


def classify_track(
    frames: np.ndarray,
    masks: np.ndarray,
    table: EmbeddingTable,
    encoder: FrozenImageEncoder,
    strategy: str = "square_crop",
    size: int = 32,
) -> Classification | None:
    """One label for an object over a clip.

    Score distributions are averaged over the frames where the mask is
    nonempty; None when it is empty everywhere.
    """
    crops = []
    for frame, mask in zip(frames, masks):
        try:
            crops.append(crop_object(frame, mask, strategy, size))
        except EmptyMaskError:
            continue
    if not crops:
        logger.warning("object mask is empty in every frame; skipped from classification")
        return None
    scores = np.mean([c.scores for c in classify(crops, table, encoder)], axis=0)
    return Classification(table.names[int(np.argmax(scores))], scores)
