"""Ablation rows: label, Base, Novel, Harmonic, mIoU (percent)."""

import csv
import logging
from pathlib import Path

from pydantic import BaseModel

from ovavss.metrics.iou import EvalReport

logger = logging.getLogger(__name__)

COLUMNS = ("label", "Base", "Novel", "Harmonic", "mIoU")


class AblationRow(BaseModel):
    label: str
    base: float
    novel: float
    harmonic: float
    miou: float

    @classmethod
    def from_report(cls, label: str, report: EvalReport) -> "AblationRow":
        return cls(
            label=label,
            base=100.0 * report.base,
            novel=100.0 * report.novel,
            harmonic=100.0 * report.harmonic,
            miou=100.0 * report.miou,
        )

    def cells(self) -> list[str]:
        return [self.label] + [f"{v:.2f}" for v in (self.base, self.novel, self.harmonic, self.miou)]


def format_row(row: AblationRow) -> str:
    return " | ".join(f"{name} {cell}" for name, cell in zip(COLUMNS, row.cells()))


def append_row(path: Path, row: AblationRow) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(COLUMNS)
        writer.writerow(row.cells())
    logger.info(f"Appended ablation row {row.label!r} to {path}")


def read_rows(path: Path) -> list[AblationRow]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        return [
            AblationRow(label=r["label"], base=r["Base"], novel=r["Novel"], harmonic=r["Harmonic"], miou=r["mIoU"])
            for r in csv.DictReader(f)
        ]
