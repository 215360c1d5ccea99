import asyncio
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ovavss.config import RunConfig
from ovavss.core.pipeline import OpenVocabPipeline
from ovavss.data.generator import load_manifest, split_dirs
from ovavss.data.samples import load_sample, semantic_gt
from ovavss.metrics.iou import EvalReport, IouAccumulator, finalize
from ovavss.model.localizer import SoundLocalizer

logger = logging.getLogger(__name__)

# a predicted object counts as localized above this tube IoU
LOCALIZED_IOU = 0.5


class Stage2Diagnostics(BaseModel):
    gt_mask_accuracy: float
    gt_mask_count: int
    novel_localized_accuracy: float
    novel_localized_count: int


class EvaluationResult(BaseModel):
    split: str
    samples: int
    report: EvalReport
    stage2: Stage2Diagnostics
    config: dict

    def to_json(self) -> str:
        payload = self.report.model_dump(mode="json")
        payload.update(
            split=self.split,
            samples=self.samples,
            stage2=self.stage2.model_dump(mode="json"),
            config=self.config,
        )
        return json.dumps(payload, indent=2, sort_keys=True)


@dataclass
class SampleResult:
    acc: IouAccumulator = field(default_factory=IouAccumulator)
    gt_correct: int = 0
    gt_total: int = 0
    novel_correct: int = 0
    novel_total: int = 0

    def merge(self, other: "SampleResult") -> "SampleResult":
        return SampleResult(
            acc=self.acc.merge(other.acc),
            gt_correct=self.gt_correct + other.gt_correct,
            gt_total=self.gt_total + other.gt_total,
            novel_correct=self.novel_correct + other.novel_correct,
            novel_total=self.novel_total + other.novel_total,
        )


def tube_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


class Evaluator:
    """Stage one + stage two over a split, sharded across `workers`."""

    def __init__(self, cfg: RunConfig, model: SoundLocalizer, data_root: Path | None = None, workers: int = 4):
        self.cfg = cfg
        self.data_root = Path(data_root or cfg.data.root)
        self.manifest = load_manifest(self.data_root)
        self.split_of = self.manifest.split_of()
        self.names = {c.class_id: c.name for c in self.manifest.classes}
        self.pipeline = OpenVocabPipeline(cfg, model, self.manifest.classes)
        self.workers = max(1, workers)

    def evaluate_sample(self, directory: Path) -> SampleResult:
        sample = load_sample(directory)
        seg = self.pipeline.segment(sample)
        result = SampleResult()
        for t in range(sample.num_frames):
            result.acc.accumulate(seg.semantic[t], semantic_gt(sample, t))

        for obj in sample.objects:
            if not obj.sounds:
                continue
            gt_tube = obj.masks & obj.sounding[:, None, None]
            label = self.pipeline.name_masks(sample.frames[obj.sounding], obj.masks[obj.sounding])
            if label is not None:
                result.gt_total += 1
                result.gt_correct += int(label.name == self.names[obj.class_id])
            if self.split_of.get(obj.class_id) != "novel" or not seg.objects:
                continue
            best = max(seg.objects, key=lambda d: tube_iou(d.masks, gt_tube))
            if tube_iou(best.masks, gt_tube) > LOCALIZED_IOU:
                result.novel_total += 1
                result.novel_correct += int(best.meta.class_id == obj.class_id)
        return result

    async def _evaluate_wrapper(self, semaphore: asyncio.Semaphore, directory: Path) -> SampleResult:
        async with semaphore:
            return await asyncio.to_thread(self.evaluate_sample, directory)

    async def _run(self, dirs: list[Path]) -> SampleResult:
        semaphore = asyncio.Semaphore(self.workers)
        tasks = [asyncio.create_task(self._evaluate_wrapper(semaphore, d)) for d in dirs]
        total = SampleResult()
        for part in await asyncio.gather(*tasks):
            total = total.merge(part)
        return total

    def run(self, split: str = "val") -> EvaluationResult:
        dirs = split_dirs(self.data_root, self.manifest, split)
        logger.info(f"Evaluating {len(dirs)} {split} samples with {self.workers} workers")
        total = asyncio.run(self._run(dirs))
        report = finalize(total.acc, self.split_of)
        stage2 = Stage2Diagnostics(
            gt_mask_accuracy=total.gt_correct / total.gt_total if total.gt_total else 0.0,
            gt_mask_count=total.gt_total,
            novel_localized_accuracy=total.novel_correct / total.novel_total if total.novel_total else 0.0,
            novel_localized_count=total.novel_total,
        )
        return EvaluationResult(
            split=split,
            samples=len(dirs),
            report=report,
            stage2=stage2,
            config=self.cfg.model_dump(mode="json"),
        )
