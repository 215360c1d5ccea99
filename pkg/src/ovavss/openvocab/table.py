"""Class-embedding tables for open-vocabulary classification.

Tables come from one of two providers:

* ``file``: a JSON file ``{"dim": D, "temperature": eps, "classes": {name: [floats]}}``
  whose vectors are L2-normalized on load;
* ``toy``: canonical renderings of every class, one per render-variation seed,
  embedded by the frozen image encoder, averaged and normalized.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from ovavss.data.render import render_canonical
from ovavss.data.roster import ClassSpec
from ovavss.errors import ConfigurationError, DatasetLoadError, InputError
from ovavss.openvocab.encoder import FrozenImageEncoder

logger = logging.getLogger(__name__)


class EmbeddingFile(BaseModel):
    dim: int
    temperature: float = 100.0
    classes: dict[str, list[float]]


def _normalize(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise InputError("cannot normalize a zero embedding")
    return vectors / norms


@dataclass
class EmbeddingTable:
    names: list[str]
    vectors: np.ndarray  # (C, D), unit rows
    temperature: float = 100.0

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise InputError(f"class names must be unique: {self.names}")
        if self.vectors.shape[0] != len(self.names):
            raise InputError(f"{len(self.names)} names for {self.vectors.shape[0]} vectors")
        self.vectors = _normalize(np.asarray(self.vectors, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector(self, name: str) -> np.ndarray:
        return self.vectors[self.names.index(name)]

    def save(self, path: Path) -> None:
        payload = EmbeddingFile(
            dim=self.dim,
            temperature=self.temperature,
            classes={n: v.tolist() for n, v in zip(self.names, self.vectors)},
        )
        Path(path).write_text(json.dumps(payload.model_dump(), indent=2), encoding="utf-8")


def load_table(path: Path, class_names: list[str]) -> EmbeddingTable:
    path = Path(path)
    if not path.is_file():
        raise DatasetLoadError(path, "missing file")
    try:
        payload = EmbeddingFile.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DatasetLoadError(path, f"malformed embedding file: {e}") from e
    missing = [n for n in class_names if n not in payload.classes]
    if missing:
        raise DatasetLoadError(path, f"missing classes {missing}")
    vectors = np.array([payload.classes[n] for n in class_names], dtype=np.float64)
    if vectors.shape[1] != payload.dim:
        raise DatasetLoadError(path, f"vectors have {vectors.shape[1]} values, header says dim={payload.dim}")
    return EmbeddingTable(list(class_names), vectors, payload.temperature)


def toy_table(
    classes: list[ClassSpec],
    encoder: FrozenImageEncoder,
    views: tuple[int, ...] = (0,),
    size: int = 32,
    temperature: float = 100.0,
) -> EmbeddingTable:
    if not views:
        raise ConfigurationError("the toy provider needs at least one render variation")
    rows = []
    for spec in classes:
        crops = np.stack([render_canonical(spec, size, v) for v in views])
        rows.append(encoder(crops).mean(axis=0))
    logger.info(f"Built toy class table: {len(classes)} classes x {len(views)} views")
    return EmbeddingTable([c.name for c in classes], np.stack(rows), temperature)


def build_class_table(
    classes: list[ClassSpec],
    provider: str = "toy",
    encoder: FrozenImageEncoder | None = None,
    views: tuple[int, ...] = (0,),
    size: int = 32,
    temperature: float = 100.0,
    embedding_file: Path | None = None,
) -> EmbeddingTable:
    names = [c.name for c in classes]
    if len(set(names)) != len(names):
        raise InputError(f"class names must be unique: {names}")
    if provider == "file":
        if embedding_file is None:
            raise ConfigurationError("provider 'file' needs classifier.embedding_file")
        return load_table(embedding_file, names)
    if provider == "toy":
        return toy_table(classes, encoder or FrozenImageEncoder(), views, size, temperature)
    raise ConfigurationError(f"unknown embedding provider {provider!r}")
