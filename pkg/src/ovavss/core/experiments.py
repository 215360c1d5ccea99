"""Multi-seed ablation sweeps and the directional checks over their results.

A suite is a list of labelled flag sets. Every row is trained and evaluated
once per seed; the seed means are appended to an ablation CSV. Rows that
differ only in stage-two flags (``crop``) share one trained localizer per seed.
"""

import itertools
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ovavss.config import RunConfig, apply_ablations, with_overrides
from ovavss.core.evaluator import EvaluationResult, Evaluator
from ovavss.core.trainer import Trainer
from ovavss.errors import ConfigurationError
from ovavss.metrics.tables import AblationRow, append_row

logger = logging.getLogger(__name__)

STAGE_TWO_FLAGS = ("crop",)


class AblationSpec(BaseModel):
    label: str
    flags: tuple[str, ...] = ()


SUITES: dict[str, tuple[AblationSpec, ...]] = {
    "fusion": (
        AblationSpec(label="full"),
        AblationSpec(label="fusion=add", flags=("fusion=add",)),
        AblationSpec(label="fusion=none", flags=("fusion=none",)),
        AblationSpec(label="bi_attn single level", flags=("multi_level=false",)),
    ),
    "prompt": (
        AblationSpec(label="audiomaskdec"),
        AblationSpec(label="cross_attn", flags=("audio_prompt=cross_attn",)),
        AblationSpec(label="concat_add", flags=("audio_prompt=concat_add",)),
        AblationSpec(label="none", flags=("audio_prompt=none",)),
    ),
    "crop": (
        AblationSpec(label="square_crop"),
        AblationSpec(label="crop_resize", flags=("crop=crop_resize",)),
        AblationSpec(label="none", flags=("crop=none",)),
    ),
}

# (suite, ordered labels, metric): each mean must be >= the next one
TRENDS: tuple[tuple[str, tuple[str, ...], str], ...] = (
    ("fusion", ("full", "fusion=add", "fusion=none"), "miou"),
    ("prompt", ("audiomaskdec", "cross_attn"), "miou"),
    ("prompt", ("audiomaskdec", "concat_add"), "miou"),
    ("prompt", ("audiomaskdec", "none"), "miou"),
    ("crop", ("square_crop", "crop_resize", "none"), "gt_mask_accuracy"),
)

ABLATION_AXES: dict[str, tuple[str, ...]] = {
    "fusion": ("none", "add", "bi_attn"),
    "multi_level": ("true", "false"),
    "audio_prompt": ("none", "concat_add", "cross_attn", "audiomaskdec"),
    "crop": ("none", "crop_resize", "square_crop"),
    "top_down": ("true", "false"),
}


def all_flag_sets() -> list[tuple[str, ...]]:
    """Every combination of ablation flags."""
    keys = list(ABLATION_AXES)
    return [
        tuple(f"{k}={v}" for k, v in zip(keys, values))
        for values in itertools.product(*(ABLATION_AXES[k] for k in keys))
    ]


class ExperimentRow(BaseModel):
    label: str
    seeds: list[int]
    base: float
    novel: float
    harmonic: float
    miou: float
    gt_mask_accuracy: float
    novel_localized_accuracy: float

    @classmethod
    def from_results(cls, label: str, seeds: list[int], results: list[EvaluationResult]) -> "ExperimentRow":
        def mean(values) -> float:
            return float(np.mean(list(values)))

        return cls(
            label=label,
            seeds=seeds,
            base=mean(r.report.base for r in results),
            novel=mean(r.report.novel for r in results),
            harmonic=mean(r.report.harmonic for r in results),
            miou=mean(r.report.miou for r in results),
            gt_mask_accuracy=mean(r.stage2.gt_mask_accuracy for r in results),
            novel_localized_accuracy=mean(r.stage2.novel_localized_accuracy for r in results),
        )

    def table_row(self) -> AblationRow:
        return AblationRow(
            label=self.label,
            base=100.0 * self.base,
            novel=100.0 * self.novel,
            harmonic=100.0 * self.harmonic,
            miou=100.0 * self.miou,
        )


def _model_key(flags: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(sorted(f for f in flags if f.split("=", 1)[0] not in STAGE_TWO_FLAGS))


class ExperimentRunner:
    """Train and evaluate every row of a suite for every seed."""

    def __init__(
        self,
        cfg: RunConfig,
        data_root: Path,
        run_root: Path,
        split: str = "val",
        workers: int = 4,
        max_steps: int | None = None,
    ):
        self.cfg = cfg
        self.data_root = Path(data_root)
        self.run_root = Path(run_root)
        self.split = split
        self.workers = workers
        self.max_steps = max_steps
        self._models: dict[tuple[int, tuple[str, ...]], Trainer] = {}

    def row_config(self, spec: AblationSpec, seed: int) -> RunConfig:
        return apply_ablations(with_overrides(self.cfg, seed=seed), list(spec.flags))

    def trained(self, spec: AblationSpec, seed: int) -> Trainer:
        key = (seed, _model_key(spec.flags))
        if key not in self._models:
            cfg = self.row_config(spec, seed)
            name = "-".join(key[1]).replace("=", "_") or "full"
            trainer = Trainer(cfg, data_root=self.data_root, run_dir=self.run_root / f"seed{seed}" / name)
            trainer.train(max_steps=self.max_steps)
            self._models[key] = trainer
        return self._models[key]

    def evaluate(self, spec: AblationSpec, seed: int) -> EvaluationResult:
        trainer = self.trained(spec, seed)
        cfg = self.row_config(spec, seed)
        return Evaluator(cfg, trainer.model, self.data_root, workers=self.workers).run(self.split)

    def run(
        self, specs: tuple[AblationSpec, ...] | list[AblationSpec], seeds: list[int], table: Path | None = None
    ) -> list[ExperimentRow]:
        if not seeds:
            raise ConfigurationError("an experiment needs at least one seed")
        rows = []
        for spec in specs:
            results = [self.evaluate(spec, seed) for seed in seeds]
            row = ExperimentRow.from_results(spec.label, list(seeds), results)
            logger.info(
                f"{row.label}: mIoU {row.miou:.4f}, harmonic {row.harmonic:.4f}, "
                f"GT-mask accuracy {row.gt_mask_accuracy:.4f} over seeds {seeds}"
            )
            if table is not None:
                append_row(table, row.table_row())
            rows.append(row)
        return rows


def trend_violations(suite: str, rows: list[ExperimentRow]) -> list[str]:
    """Orderings of `suite` that the seed means break; empty when all hold."""
    by_label = {r.label: r for r in rows}
    problems = []
    for name, labels, metric in TRENDS:
        if name != suite or not all(label in by_label for label in labels):
            continue
        values = [getattr(by_label[label], metric) for label in labels]
        for (a, va), (b, vb) in zip(zip(labels, values), zip(labels[1:], values[1:])):
            if va < vb:
                problems.append(f"{metric}: {a} ({va:.4f}) < {b} ({vb:.4f})")
    return problems


def learning_violations(
    row: ExperimentRow, num_classes: int, min_base: float = 0.5, min_novel: float = 0.15
) -> list[str]:
    """End-to-end learning and zero-shot checks on the seed means of a trained row.

    The all-background predictor scores 0 on every class, so the base floor
    also clears any multiple of it.
    """
    problems = []
    if row.base < min_base:
        problems.append(f"Base mIoU {row.base:.4f} < {min_base}")
    if row.novel <= min_novel:
        problems.append(f"Novel mIoU {row.novel:.4f} <= {min_novel}")
    chance = 1.0 / num_classes
    if row.novel_localized_accuracy <= 2.0 * chance:
        problems.append(f"novel accuracy on localized objects {row.novel_localized_accuracy:.4f} <= 2 x chance")
    return problems
