import asyncio
import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ovavss.config import DataConfig
from ovavss.data.render import background, class_texture, shape_mask
from ovavss.data.roster import AUDIO_DIM, ClassSpec, build_roster
from ovavss.data.samples import ObjectTrack, VideoSample, save_sample
from ovavss.errors import DatasetLoadError, InputError
from ovavss.numcore.random import derive

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
_SPLIT_CODES = {name: i for i, name in enumerate(SPLITS)}

AUDIO_NOISE = 0.1
TOGGLE_PROB = 0.2
# P(1, 2, 3 objects); together with DISTRACTOR_PROB, >= 50% of samples have a silent object
OBJECT_COUNT_PROBS = (0.2, 0.4, 0.4)
DISTRACTOR_PROB = 0.75
DEFAULT_CONCURRENCY = 4


class DatasetManifest(BaseModel):
    seed: int
    height: int
    width: int
    frames: int
    audio_dim: int
    classes: list[ClassSpec]
    splits: dict[str, list[str]]

    def class_by_id(self) -> dict[int, ClassSpec]:
        return {c.class_id: c for c in self.classes}

    def split_of(self) -> dict[int, str]:
        return {c.class_id: c.split for c in self.classes}


def _place(rng: np.random.Generator, size: int, r: float, steps: int) -> tuple[float, float]:
    """Start coordinate and per-frame velocity keeping the object inside [r, size - r]."""
    v = rng.uniform(-0.05, 0.05) * size
    travel = v * steps
    lo, hi = r + max(0.0, -travel), size - r - max(0.0, travel)
    if lo > hi:
        v, lo, hi = 0.0, r, size - r
    return rng.uniform(lo, hi), v


def draw_sample(cfg: DataConfig, roster: list[ClassSpec], split: str, index: int) -> VideoSample:
    """Deterministic function of (seed, split, index)."""
    rng = derive(cfg.seed, _SPLIT_CODES[split], index)
    t_count, h, w = cfg.frames, cfg.height, cfg.width
    by_id = {c.class_id: c for c in roster}
    ids = np.array([c.class_id for c in roster])

    n_obj = int(rng.choice([1, 2, 3], p=OBJECT_COUNT_PROBS))
    while True:
        chosen = [int(c) for c in rng.choice(ids, size=n_obj)]
        if split != "train" or all(by_id[c].split == "base" for c in chosen):
            break
        logger.debug(f"{split}_{index}: rejected draw with a novel class {chosen}")

    distractor = n_obj >= 2 and rng.random() < DISTRACTOR_PROB
    frames = np.repeat(background(rng, h, w)[None], t_count, axis=0)
    footprints = np.zeros((n_obj, t_count, h, w), dtype=bool)
    sounding = np.zeros((n_obj, t_count), dtype=bool)
    for i, class_id in enumerate(chosen):
        spec = by_id[class_id]
        r = rng.uniform(0.12, 0.2) * min(h, w)
        x0, vx = _place(rng, w, r, t_count - 1)
        y0, vy = _place(rng, h, r, t_count - 1)
        silent = distractor and i == n_obj - 1
        state = (i == 0) or (not silent and rng.random() < 0.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        for t in range(t_count):
            if t > 0 and rng.random() < TOGGLE_PROB:
                state = not state
            sounding[i, t] = state and not silent
            cx, cy = x0 + vx * t, y0 + vy * t
            footprints[i, t] = shape_mask(spec.shape_kind, cx, cy, r, h, w)
            texture = class_texture(spec, h, w, cx, cy, r, phase)
            frames[t][:, footprints[i, t]] = texture[:, footprints[i, t]]

    # later objects are drawn on top; visible masks are therefore disjoint
    visible = footprints.copy()
    for i in range(n_obj):
        for j in range(i + 1, n_obj):
            visible[i] &= ~footprints[j]

    audio = np.zeros((t_count, AUDIO_DIM))
    for t in range(t_count):
        active = [i for i in range(n_obj) if sounding[i, t]]
        for i in active:
            noise = rng.normal(size=AUDIO_DIM) / np.sqrt(AUDIO_DIM)
            audio[t] += by_id[chosen[i]].signature + AUDIO_NOISE * noise
        if not active:
            audio[t] = AUDIO_NOISE * rng.normal(size=AUDIO_DIM) / np.sqrt(AUDIO_DIM)

    quantized = np.round(np.clip(frames, 0.0, 1.0) * 255.0).astype(np.uint8).astype(np.float64) / 255.0
    return VideoSample(
        sample_id=f"{split}_{index:05d}",
        frames=quantized,
        audio_feats=audio,
        objects=[
            ObjectTrack(class_id=c, masks=visible[i], sounding=sounding[i]) for i, c in enumerate(chosen)
        ],
    )


class AsyncDatasetWriter:
    """Renders and writes samples concurrently; every sample owns its generator."""

    def __init__(self, cfg: DataConfig, root: Path, concurrency: int = DEFAULT_CONCURRENCY):
        self.cfg = cfg
        self.root = Path(root)
        self.roster = build_roster(cfg.roster, cfg.seed)
        self.semaphore = asyncio.Semaphore(concurrency)
        self.written = 0

    def _write_one(self, split: str, index: int) -> str:
        sample = draw_sample(self.cfg, self.roster, split, index)
        save_sample(sample, self.root / split / sample.sample_id)
        return sample.sample_id

    async def _write_wrapper(self, split: str, index: int) -> str:
        async with self.semaphore:
            sample_id = await asyncio.to_thread(self._write_one, split, index)
            self.written += 1
            if self.written % 50 == 0:
                logger.info(f"Wrote {self.written} samples")
            return sample_id

    async def run(self) -> DatasetManifest:
        counts = {"train": self.cfg.n_train, "val": self.cfg.n_val, "test": self.cfg.n_test}
        logger.info(f"Generating dataset at {self.root}: {counts}, seed={self.cfg.seed}")
        self.root.mkdir(parents=True, exist_ok=True)
        splits: dict[str, list[str]] = {}
        for split in SPLITS:
            tasks = [asyncio.create_task(self._write_wrapper(split, i)) for i in range(counts[split])]
            splits[split] = sorted(await asyncio.gather(*tasks))
        manifest = DatasetManifest(
            seed=self.cfg.seed,
            height=self.cfg.height,
            width=self.cfg.width,
            frames=self.cfg.frames,
            audio_dim=AUDIO_DIM,
            classes=self.roster,
            splits=splits,
        )
        (self.root / "manifest.json").write_text(
            json.dumps(manifest.model_dump(), indent=2, sort_keys=True), encoding="utf-8"
        )
        logger.info(f"✔ Dataset complete: {sum(len(v) for v in splits.values())} samples")
        return manifest


def generate_dataset(cfg: DataConfig, root: Path | None = None, concurrency: int = DEFAULT_CONCURRENCY) -> DatasetManifest:
    return asyncio.run(AsyncDatasetWriter(cfg, root or cfg.root, concurrency).run())


def load_manifest(root: Path) -> DatasetManifest:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise DatasetLoadError(path, "missing file")
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise DatasetLoadError(path, f"malformed manifest: {e}") from e


def split_dirs(root: Path, manifest: DatasetManifest, split: str) -> list[Path]:
    if split not in manifest.splits:
        raise InputError(f"unknown split {split!r}; expected one of {sorted(manifest.splits)}")
    return [Path(root) / split / sample_id for sample_id in manifest.splits[split]]
