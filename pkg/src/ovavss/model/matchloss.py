"""Bipartite query-to-object matching and the deep-supervised training loss.

The loss of one output set is

    L = w_ce * L_ce + w_focal * L_focal + w_dice * L_dice

with L_ce the binary cross-entropy of every query's sounding score (matched
queries target 1, the rest 0), averaged over queries, and the mask terms
averaged over matched pairs. Mask targets are ground-truth tubes max-pooled to
the mask-logit resolution, zeroed in frames where the object is silent.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import expit, log_expit

from ovavss.config import LossConfig
from ovavss.data.samples import VideoSample
from ovavss.errors import InputError
from ovavss.model.audiomaskdec import QueryOutputs
from ovavss.numcore import ops
from ovavss.numcore.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)


@dataclass
class CostMatrix:
    values: np.ndarray  # (N, K)
    terms: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]  # (query_index, gt_index), sorted by query index
    total: float

    @property
    def queries(self) -> list[int]:
        return [q for q, _ in self.pairs]

    @property
    def targets(self) -> list[int]:
        return [k for _, k in self.pairs]


@dataclass
class LossBreakdown:
    ce: float = 0.0
    focal: float = 0.0
    dice: float = 0.0
    total: float = 0.0


def _tie_break(values: np.ndarray, best: float) -> list[tuple[int, int]]:
    """Lexicographically smallest optimal assignment: query by query, the lowest target whose
    choice still admits a completion at the optimal total, else leave the query unmatched."""
    n, _ = values.shape
    tol = 1e-9 * max(1.0, abs(best))
    free = list(range(values.shape[1]))
    pairs: list[tuple[int, int]] = []
    spent = 0.0
    for q in range(n):
        if not free:
            break
        for choice in [*free, None]:
            cols = [j for j in free if j != choice]
            if len(cols) > n - q - 1:
                continue
            head = spent + (values[q, choice] if choice is not None else 0.0)
            rest = 0.0
            if cols:
                sub = values[q + 1 :][:, cols]
                rows, picked = linear_sum_assignment(sub)
                rest = float(sub[rows, picked].sum())
            if head + rest <= best + tol:
                if choice is not None:
                    pairs.append((q, choice))
                    free.remove(choice)
                    spent = head
                break
    return pairs


def hungarian(cost: CostMatrix | np.ndarray) -> Assignment:
    """Minimum-total-cost injective assignment of K targets to N >= K queries.

    Among equal-cost optima the pair list sorted by query is lexicographically
    smallest, so ties go to the lowest query index.
    """
    values = np.asarray(cost.values if isinstance(cost, CostMatrix) else cost, dtype=np.float64)
    if values.ndim != 2:
        raise InputError(f"cost matrix must be 2-D, got shape {values.shape}")
    n, k = values.shape
    if k > n:
        raise InputError(f"cannot match {k} targets to {n} queries")
    if not np.isfinite(values).all():
        raise InputError("cost matrix has non-finite entries")
    if k == 0:
        return Assignment(pairs=[], total=0.0)
    rows, cols = linear_sum_assignment(values)
    pairs = _tie_break(values, float(values[rows, cols].sum()))
    return Assignment(pairs=pairs, total=float(sum(values[q, j] for q, j in pairs)))


def focal_loss(pred_logits, target, alpha: float | None = 0.25, gamma: float = 2.0) -> Tensor:
    """Mean binary focal loss; alpha=None gives alpha_t = 1."""
    logits = as_tensor(pred_logits)
    t = np.asarray(target, dtype=np.float64)
    if t.shape != logits.shape:
        raise InputError(f"focal_loss: logits {logits.shape} vs target {t.shape}")
    log_pt = ops.log_sigmoid(logits) * t + ops.log_sigmoid(-logits) * (1.0 - t)
    loss = -log_pt
    if gamma != 0:
        loss = loss * ops.power(1.0 - ops.exp(log_pt), gamma)
    if alpha is not None:
        loss = loss * (alpha * t + (1.0 - alpha) * (1.0 - t))
    return ops.mean(loss)


def dice_loss(pred_probs, target, smooth: float = 1.0) -> Tensor:
    p = as_tensor(pred_probs)
    t = np.asarray(target, dtype=np.float64)
    if t.shape != p.shape:
        raise InputError(f"dice_loss: prediction {p.shape} vs target {t.shape}")
    inter = ops.sum(p * t)
    return 1.0 - (inter * 2.0 + smooth) / (ops.sum(p) + float(t.sum()) + smooth)


def max_pool(masks: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Max-pool the last two axes of a boolean array down to `size`."""
    h, w = masks.shape[-2:]
    fy, fx = h // size[0], w // size[1]
    lead = masks.shape[:-2]
    return masks.reshape(*lead, size[0], fy, size[1], fx).max(axis=(-3, -1))


def mask_targets(sample: VideoSample, size: tuple[int, int]) -> np.ndarray:
    """(K, T, h, w) float tubes of the objects that sound in at least one frame."""
    tubes = [
        max_pool(obj.masks, size) & obj.sounding.reshape(-1, 1, 1)
        for obj in sample.objects
        if obj.sounds
    ]
    if not tubes:
        return np.zeros((0, sample.num_frames, *size))
    return np.stack(tubes).astype(np.float64)


def match_cost(output: QueryOutputs, targets: np.ndarray, weights: LossConfig) -> CostMatrix:
    """(N, K) matching cost computed on detached predictions."""
    n = output.mask_logits.shape[0]
    x = output.mask_logits.data.reshape(n, -1)
    pixels = x.shape[1]
    t = targets.reshape(targets.shape[0], pixels)
    p = expit(x)
    alpha, gamma = weights.focal_alpha, weights.focal_gamma
    pos = -alpha * (1.0 - p) ** gamma * log_expit(x)
    neg = -(1.0 - alpha) * p**gamma * log_expit(-x)
    focal = (pos @ t.T + neg @ (1.0 - t).T) / pixels
    dice = 1.0 - (2.0 * p @ t.T + 1.0) / (p.sum(axis=1, keepdims=True) + t.sum(axis=1)[None, :] + 1.0)
    sound = 1.0 - output.sounding.data
    sound = np.repeat(sound[:, None], t.shape[0], axis=1)
    values = weights.focal * focal + weights.dice * dice + weights.ce * sound
    return CostMatrix(values=values, terms={"cost_sound": sound, "cost_focal": focal, "cost_dice": dice})


def layer_loss(output: QueryOutputs, targets: np.ndarray, weights: LossConfig) -> tuple[Tensor, LossBreakdown]:
    n = output.mask_logits.shape[0]
    assignment = hungarian(match_cost(output, targets, weights))
    logger.debug(f"assignment {assignment.pairs} (cost {assignment.total:.4f})")

    is_matched = np.zeros(n)
    is_matched[assignment.queries] = 1.0
    log_probs = ops.log_softmax(output.sound_logits, axis=-1)
    ce = -ops.mean(log_probs[:, 0] * is_matched + log_probs[:, 1] * (1.0 - is_matched))
    total = ce * weights.ce
    breakdown = LossBreakdown(ce=ce.item())

    if assignment.pairs:
        logits = output.mask_logits[np.array(assignment.queries)]
        matched = targets[np.array(assignment.targets)]
        focal = focal_loss(logits, matched, weights.focal_alpha, weights.focal_gamma)
        probs = ops.sigmoid(logits)
        dice = ops.mean(ops.stack([dice_loss(probs[i], matched[i]) for i in range(len(assignment.pairs))]))
        total = total + focal * weights.focal + dice * weights.dice
        breakdown.focal, breakdown.dice = focal.item(), dice.item()
    breakdown.total = total.item()
    return total, breakdown


def total_loss(outputs: list[QueryOutputs], sample: VideoSample, weights: LossConfig | None = None) -> tuple[Tensor, LossBreakdown]:
    """Sum of the per-output-set losses (deep supervision)."""
    weights = weights or LossConfig()
    size = outputs[0].mask_logits.shape[2:]
    targets = mask_targets(sample, size)
    total, summary = None, LossBreakdown()
    for output in outputs:
        loss, part = layer_loss(output, targets, weights)
        total = loss if total is None else total + loss
        summary.ce += part.ce
        summary.focal += part.focal
        summary.dice += part.dice
    summary.total = total.item()
    return total, summary
