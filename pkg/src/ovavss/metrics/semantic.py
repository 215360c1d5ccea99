import numpy as np
from scipy.special import expit

from ovavss.config import ThresholdConfig
from ovavss.errors import InputError
from ovavss.model.audiomaskdec import QueryOutputs
from ovavss.numcore.nn import resize_array


def assemble_semantic(
    output: QueryOutputs,
    classes: list[int | None],
    size: tuple[int, int],
    thresholds: ThresholdConfig | None = None,
) -> np.ndarray:
    """(T, H, W) class-id maps from the final decoder outputs.

    Queries scoring above the sounding threshold (and carrying a class) compete
    per pixel by mask probability; the winner labels the pixel when its
    probability clears the mask threshold.
    """
    thresholds = thresholds or ThresholdConfig()
    logits = output.mask_logits.data
    n, t_count = logits.shape[:2]
    if len(classes) != n:
        raise InputError(f"{len(classes)} classes for {n} queries")
    sounding = output.sounding.data
    kept = [i for i in range(n) if sounding[i] > thresholds.sounding and classes[i]]
    out = np.zeros((t_count, *size), dtype=np.int64)
    if not kept:
        return out
    probs = expit(resize_array(logits[kept], size))  # (K, T, H, W)
    winner = probs.argmax(axis=0)
    labels = np.array([classes[i] for i in kept], dtype=np.int64)[winner]
    return np.where(probs.max(axis=0) > thresholds.mask, labels, 0)
