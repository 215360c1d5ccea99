"""Dataset-wide per-class IoU with base/novel/harmonic summaries.

Intersections and unions are accumulated per class over every evaluated frame;
background (id 0) is never a class. A class whose union stays 0 is excluded
from every mean.
"""

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

from ovavss.errors import InputError


def harmonic_mean(base: float, novel: float) -> float:
    return 2.0 * base * novel / (base + novel) if base + novel > 0 else 0.0


@dataclass
class IouAccumulator:
    intersection: Counter = field(default_factory=Counter)
    union: Counter = field(default_factory=Counter)
    # class-agnostic foreground (any sounding object) vs background
    binary_intersection: int = 0
    binary_union: int = 0
    frames: int = 0

    def accumulate(self, pred_semantic, gt_semantic) -> "IouAccumulator":
        pred, gt = np.asarray(pred_semantic), np.asarray(gt_semantic)
        if pred.shape != gt.shape:
            raise InputError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
        for c in np.union1d(np.unique(pred), np.unique(gt)):
            c = int(c)
            if c == 0:
                continue
            p, g = pred == c, gt == c
            self.intersection[c] += int(np.count_nonzero(p & g))
            self.union[c] += int(np.count_nonzero(p | g))
        self.binary_intersection += int(np.count_nonzero((pred > 0) & (gt > 0)))
        self.binary_union += int(np.count_nonzero((pred > 0) | (gt > 0)))
        self.frames += 1 if pred.ndim == 2 else int(np.prod(pred.shape[:-2]))
        return self

    def merge(self, other: "IouAccumulator") -> "IouAccumulator":
        return IouAccumulator(
            intersection=self.intersection + other.intersection,
            union=self.union + other.union,
            binary_intersection=self.binary_intersection + other.binary_intersection,
            binary_union=self.binary_union + other.binary_union,
            frames=self.frames + other.frames,
        )


class EvalReport(BaseModel):
    per_class: dict[int, float]
    base: float
    novel: float
    harmonic: float
    miou: float
    binary_miou: float
    counts: dict[int, tuple[int, int]]

    def row(self) -> tuple[float, float, float, float]:
        return self.base, self.novel, self.harmonic, self.miou


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def finalize(acc: IouAccumulator, split: dict[int, str]) -> EvalReport:
    """`split` maps class id to "base" or "novel"."""
    per_class = {c: acc.intersection[c] / u for c, u in sorted(acc.union.items()) if u > 0}
    base = _mean([iou for c, iou in per_class.items() if split.get(c) == "base"])
    novel = _mean([iou for c, iou in per_class.items() if split.get(c) == "novel"])
    return EvalReport(
        per_class=per_class,
        base=base,
        novel=novel,
        harmonic=harmonic_mean(base, novel),
        miou=_mean(list(per_class.values())),
        binary_miou=acc.binary_intersection / acc.binary_union if acc.binary_union else 0.0,
        counts={c: (acc.intersection[c], acc.union[c]) for c in per_class},
    )
