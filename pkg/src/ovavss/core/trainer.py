import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from ovavss.config import RunConfig
from ovavss.data.generator import load_manifest, split_dirs
from ovavss.data.samples import load_sample
from ovavss.errors import CheckpointError, ConfigurationError, DimensionError, InputError
from ovavss.model.localizer import SoundLocalizer
from ovavss.model.matchloss import total_loss
from ovavss.numcore.checkpoint import load_checkpoint, save_checkpoint
from ovavss.numcore.optim import AdamW, StepDecay
from ovavss.numcore.random import derive

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.ckpt"
LOG_NAME = "train_log.jsonl"
_STEP_KEY = "trainer.step"


class StepRecord(BaseModel):
    step: int
    epoch: int
    lr: float
    L_ce: float
    L_focal: float
    L_dice: float
    total: float


def build_localizer(cfg: RunConfig) -> SoundLocalizer:
    return SoundLocalizer(cfg.model, cfg.ablation, seed=cfg.seed)


def load_localizer(cfg: RunConfig, checkpoint: Path) -> SoundLocalizer:
    """A localizer with weights from `checkpoint`; optimizer state is ignored."""
    model = build_localizer(cfg)
    state = load_checkpoint(checkpoint)
    own = {k: v for k, v in state.items() if not k.startswith(("optim.", "trainer."))}
    try:
        model.load_state_dict(own)
    except (ConfigurationError, DimensionError) as e:
        raise CheckpointError(checkpoint, 0, f"does not fit the configured model: {e}") from e
    return model


class Trainer:
    """Single-clip steps over the train split; one epoch visits every clip once."""

    def __init__(self, cfg: RunConfig, data_root: Path | None = None, run_dir: Path | None = None):
        self.cfg = cfg
        self.data_root = Path(data_root or cfg.data.root)
        self.run_dir = Path(run_dir or cfg.run_dir)
        self.manifest = load_manifest(self.data_root)
        self.samples = split_dirs(self.data_root, self.manifest, "train")
        if not self.samples:
            raise InputError(f"no training samples under {self.data_root}")
        self.model = build_localizer(cfg)
        opt = cfg.optim
        self.optimizer = AdamW(
            dict(self.model.named_parameters()), opt.lr, opt.betas, opt.eps, opt.weight_decay
        )
        self.total_steps = opt.epochs * len(self.samples)
        self.schedule = StepDecay(opt.lr, self.total_steps, opt.decay_at, opt.decay_factor)
        self.step = 0

    @property
    def checkpoint_path(self) -> Path:
        return self.run_dir / CHECKPOINT_NAME

    def order(self, epoch: int) -> np.ndarray:
        return derive(self.cfg.seed, 1, epoch).permutation(len(self.samples))

    def save(self, path: Path | None = None) -> Path:
        path = Path(path or self.checkpoint_path)
        state = {**self.model.state_dict(), **self.optimizer.state_dict()}
        state[_STEP_KEY] = np.array([float(self.step)])
        save_checkpoint(path, state)
        logger.info(f"Saved checkpoint at step {self.step} to {path}")
        return path

    def resume(self, path: Path) -> None:
        state = load_checkpoint(path)
        if _STEP_KEY not in state:
            raise CheckpointError(path, 0, "not a training checkpoint (no step counter)")
        self.model.load_state_dict({k: v for k, v in state.items() if not k.startswith(("optim.", "trainer."))})
        self.optimizer.load_state_dict(state)
        self.step = int(state[_STEP_KEY][0])
        logger.warning(f"Resumed from {path} at step {self.step}")

    def train_step(self, epoch: int, index: int) -> StepRecord:
        sample = load_sample(self.samples[index])
        lr = self.schedule.lr_at(self.step)
        self.optimizer.lr = lr
        self.optimizer.zero_grad()
        outputs = self.model(sample.frames, sample.audio_feats)
        loss, parts = total_loss(outputs, sample, self.cfg.loss)
        loss.backward()
        self.optimizer.step()
        record = StepRecord(
            step=self.step, epoch=epoch, lr=lr, L_ce=parts.ce, L_focal=parts.focal, L_dice=parts.dice, total=parts.total
        )
        self.step += 1
        logger.debug(f"step {record.step}: total={record.total:.5f} ce={record.L_ce:.5f}")
        return record

    def train(self, max_steps: int | None = None) -> list[StepRecord]:
        """Train until the configured epochs (or `max_steps` total steps) are done."""
        end = self.total_steps if max_steps is None else min(max_steps, self.total_steps)
        n = len(self.samples)
        every = self.cfg.optim.checkpoint_every
        self.run_dir.mkdir(parents=True, exist_ok=True)
        records: list[StepRecord] = []
        # a run from step 0 starts a fresh log; resumed or continued runs extend it
        mode = "a" if self.step > 0 else "w"
        with (self.run_dir / LOG_NAME).open(mode, encoding="utf-8") as log:
            while self.step < end:
                epoch, position = divmod(self.step, n)
                record = self.train_step(epoch, int(self.order(epoch)[position]))
                log.write(json.dumps(record.model_dump()) + "\n")
                records.append(record)
                if self.step % n == 0:
                    done = self.step // n
                    window = records[-n:]
                    logger.info(
                        f"Epoch {done}/{self.cfg.optim.epochs}: mean loss "
                        f"{sum(r.total for r in window) / len(window):.4f}, lr {record.lr:g}"
                    )
                    if every and done % every == 0 and self.step < end:
                        self.save()
        self.save()
        return records
