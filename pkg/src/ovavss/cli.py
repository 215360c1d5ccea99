import logging
from functools import wraps
from pathlib import Path
from typing import Optional

import typer
from dotenv import find_dotenv, load_dotenv

from ovavss.config import RunConfig, apply_ablations, get_settings, load_run_config, with_overrides
from ovavss.core.evaluator import Evaluator
from ovavss.core.experiments import SUITES, ExperimentRunner, trend_violations
from ovavss.core.pipeline import OpenVocabPipeline
from ovavss.core.predictor import predict_sample
from ovavss.core.trainer import Trainer, load_localizer
from ovavss.data.generator import generate_dataset, load_manifest
from ovavss.data.samples import load_sample
from ovavss.errors import OvavssError
from ovavss.metrics.tables import AblationRow, append_row, format_row

app = typer.Typer(add_completion=False, help="Open-vocabulary audio-visual semantic segmentation, desk scale.")

ConfigOpt = typer.Option(None, "--config", help="RunConfig JSON file.")
SeedOpt = typer.Option(None, "--seed", help="Override the run seed.")
AblateOpt = typer.Option(None, "--ablate", help="Ablation flag key=value (repeatable).")


@app.callback()
def main():
    load_dotenv(find_dotenv(usecwd=True))
    logging.basicConfig(
        level=get_settings().log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _exits_on_error(fn):
    """Report package errors as a one-line message and exit code 1."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OvavssError as e:
            typer.echo(f"error: {e}", err=True)
            raise typer.Exit(code=1) from e

    return wrapper


def _run_config(config: Optional[Path], seed: Optional[int], ablate: Optional[list[str]], **sections) -> RunConfig:
    cfg = load_run_config(config)
    if seed is not None:
        sections["seed"] = seed
    if sections:
        cfg = with_overrides(cfg, **sections)
    return apply_ablations(cfg, ablate or [])


@app.command("gen-data")
@_exits_on_error
def gen_data(
    out: Path = typer.Option(..., "--out", help="Dataset root to create."),
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
):
    """Generate the synthetic train/val/test dataset."""
    cfg = load_run_config(config)
    data = {"root": str(out)}
    if seed is not None:
        data["seed"] = seed
    cfg = with_overrides(cfg, data=data)
    manifest = generate_dataset(cfg.data, out, concurrency=get_settings().workers)
    typer.echo(f"wrote {sum(len(v) for v in manifest.splits.values())} samples to {out}")


@app.command()
@_exits_on_error
def train(
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset root (default: config data.root)."),
    out: Optional[Path] = typer.Option(None, "--out", help="Run directory for checkpoints and the log."),
    ckpt: Optional[Path] = typer.Option(None, "--ckpt", help="Resume from this checkpoint."),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", help="Stop after this many total steps."),
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    ablate: Optional[list[str]] = AblateOpt,
):
    """Train the sounding-object localizer."""
    cfg = _run_config(config, seed, ablate)
    trainer = Trainer(cfg, data_root=data, run_dir=out)
    if ckpt is not None:
        trainer.resume(ckpt)
    records = trainer.train(max_steps=max_steps)
    if records:
        typer.echo(f"step {records[-1].step}: total loss {records[-1].total:.4f}")
    typer.echo(f"checkpoint: {trainer.checkpoint_path}")


@app.command("eval")
@_exits_on_error
def evaluate(
    ckpt: Path = typer.Option(..., "--ckpt", help="Trained checkpoint."),
    split: str = typer.Option("val", "--split"),
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset root (default: config data.root)."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the report JSON here."),
    table: Optional[Path] = typer.Option(None, "--table", help="Append an ablation row to this CSV."),
    label: str = typer.Option("run", "--label", help="Row label for --table."),
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    ablate: Optional[list[str]] = AblateOpt,
):
    """Evaluate both stages on a split and print Base / Novel / Harmonic / mIoU."""
    cfg = _run_config(config, seed, ablate)
    root = data or cfg.data.root
    manifest = load_manifest(root)
    if split not in manifest.splits:
        raise typer.BadParameter(f"unknown split {split!r}; expected one of {sorted(manifest.splits)}", param_hint="--split")
    evaluator = Evaluator(cfg, load_localizer(cfg, ckpt), data_root=root, workers=get_settings().workers)
    result = evaluator.run(split)
    text = result.to_json()
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    else:
        typer.echo(text)
    row = AblationRow.from_report(label, result.report)
    typer.echo(format_row(row))
    if table is not None:
        append_row(table, row)


@app.command()
@_exits_on_error
def predict(
    ckpt: Path = typer.Option(..., "--ckpt", help="Trained checkpoint."),
    sample: Path = typer.Option(..., "--sample", help="Sample directory."),
    out: Path = typer.Option(..., "--out", help="Output directory (created if absent)."),
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset root holding manifest.json."),
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    ablate: Optional[list[str]] = AblateOpt,
):
    """Write per-frame semantic maps, overlays and objects.json for one sample."""
    cfg = _run_config(config, seed, ablate)
    manifest = load_manifest(data or cfg.data.root)
    pipeline = OpenVocabPipeline(cfg, load_localizer(cfg, ckpt), manifest.classes)
    seg = predict_sample(pipeline, load_sample(sample), out)
    typer.echo(f"{len(seg.objects)} sounding objects -> {out}")


@app.command()
@_exits_on_error
def ablate(
    suite: str = typer.Option("fusion", "--suite", help=f"One of {sorted(SUITES)}."),
    seeds: list[int] = typer.Option([0, 1, 2], "--seed", help="Seed to train each row with (repeatable)."),
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset root (default: config data.root)."),
    out: Path = typer.Option(Path("runs/ablations"), "--out", help="Root for the per-seed run directories."),
    table: Optional[Path] = typer.Option(None, "--table", help="Append one row per ablation to this CSV."),
    split: str = typer.Option("val", "--split"),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", help="Cap the training steps of every run."),
    strict: bool = typer.Option(False, "--strict", help="Exit 1 when an expected ordering does not hold."),
    config: Optional[Path] = ConfigOpt,
):
    """Train and evaluate an ablation suite over several seeds."""
    if suite not in SUITES:
        raise typer.BadParameter(f"unknown suite {suite!r}; expected one of {sorted(SUITES)}", param_hint="--suite")
    cfg = load_run_config(config)
    runner = ExperimentRunner(
        cfg, data or Path(cfg.data.root), out, split=split, workers=get_settings().workers, max_steps=max_steps
    )
    rows = runner.run(SUITES[suite], seeds, table=table)
    for row in rows:
        typer.echo(format_row(row.table_row()))
    problems = trend_violations(suite, rows)
    for problem in problems:
        typer.echo(f"trend not met: {problem}", err=True)
    if strict and problems:
        raise typer.Exit(code=1)


if __name__ == "__main__":
    app()
