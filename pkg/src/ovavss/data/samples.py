"""VideoSample and its on-disk form.

A sample directory holds ``meta.json``, ``frames_<t>.ppm`` (P6),
``mask_obj<i>_t<t>.pgm`` (P5, {0, 255}) and ``audio.f64`` (little-endian
float64, T x 128, row-major).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ValidationError

from ovavss.data.roster import AUDIO_DIM
from ovavss.errors import DatasetLoadError, InputError


@dataclass(eq=False)
class ObjectTrack:
    class_id: int
    masks: np.ndarray  # (T, H, W) bool
    sounding: np.ndarray  # (T,) bool

    @property
    def sounds(self) -> bool:
        return bool(self.sounding.any())


@dataclass(eq=False)
class VideoSample:
    sample_id: str
    frames: np.ndarray  # (T, 3, H, W) in [0, 1], multiples of 1/255
    audio_feats: np.ndarray  # (T, 128)
    objects: list[ObjectTrack] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]

    def __eq__(self, other) -> bool:
        if not isinstance(other, VideoSample):
            return NotImplemented
        return (
            self.sample_id == other.sample_id
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.audio_feats, other.audio_feats)
            and len(self.objects) == len(other.objects)
            and all(
                a.class_id == b.class_id
                and np.array_equal(a.masks, b.masks)
                and np.array_equal(a.sounding, b.sounding)
                for a, b in zip(self.objects, other.objects)
            )
        )


class ObjectMeta(BaseModel):
    index: int
    class_id: int
    sounding: list[bool]


class SampleMeta(BaseModel):
    sample_id: str
    frames: int
    height: int
    width: int
    objects: list[ObjectMeta]


def semantic_gt(sample: VideoSample, t: int) -> np.ndarray:
    """(H, W) int64 map: class id of the object sounding at t, 0 elsewhere."""
    if not 0 <= t < sample.num_frames:
        raise InputError(f"frame {t} outside [0, {sample.num_frames})")
    out = np.zeros(sample.size, dtype=np.int64)
    for obj in sample.objects:
        if obj.sounding[t]:
            out[obj.masks[t]] = obj.class_id
    return out


def save_sample(sample: VideoSample, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    t_count = sample.num_frames
    h, w = sample.size
    meta = SampleMeta(
        sample_id=sample.sample_id,
        frames=t_count,
        height=h,
        width=w,
        objects=[
            ObjectMeta(index=i, class_id=o.class_id, sounding=[bool(s) for s in o.sounding])
            for i, o in enumerate(sample.objects)
        ],
    )
    (directory / "meta.json").write_text(
        json.dumps(meta.model_dump(), indent=2, sort_keys=True), encoding="utf-8"
    )
    pixels = np.round(np.clip(sample.frames, 0.0, 1.0) * 255.0).astype(np.uint8)
    for t in range(t_count):
        Image.fromarray(np.ascontiguousarray(pixels[t].transpose(1, 2, 0)), "RGB").save(
            directory / f"frames_{t}.ppm"
        )
        for i, obj in enumerate(sample.objects):
            Image.fromarray(obj.masks[t].astype(np.uint8) * 255, "L").save(directory / f"mask_obj{i}_t{t}.pgm")
    np.ascontiguousarray(sample.audio_feats, dtype="<f8").tofile(directory / "audio.f64")


def _read_image(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    if not path.is_file():
        raise DatasetLoadError(path, "missing file")
    try:
        with Image.open(path) as im:
            arr = np.asarray(im).copy()
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetLoadError(path, f"unreadable image: {e}") from e
    if arr.shape != shape:
        raise DatasetLoadError(path, f"shape mismatch: expected {shape}, found {arr.shape}")
    return arr


def load_sample(directory: Path) -> VideoSample:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise DatasetLoadError(meta_path, "missing file")
    try:
        meta = SampleMeta.model_validate_json(meta_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DatasetLoadError(meta_path, f"malformed metadata: {e}") from e
    t_count, h, w = meta.frames, meta.height, meta.width

    frames = np.stack(
        [_read_image(directory / f"frames_{t}.ppm", (h, w, 3)).transpose(2, 0, 1) for t in range(t_count)]
    ).astype(np.float64) / 255.0

    objects = []
    for om in meta.objects:
        if len(om.sounding) != t_count:
            raise DatasetLoadError(meta_path, f"object {om.index} has {len(om.sounding)} sounding flags for {t_count} frames")
        masks = np.stack(
            [_read_image(directory / f"mask_obj{om.index}_t{t}.pgm", (h, w)) > 127 for t in range(t_count)]
        )
        objects.append(ObjectTrack(class_id=om.class_id, masks=masks, sounding=np.array(om.sounding, dtype=bool)))

    audio_path = directory / "audio.f64"
    if not audio_path.is_file():
        raise DatasetLoadError(audio_path, "missing file")
    audio = np.fromfile(audio_path, dtype="<f8").astype(np.float64)
    if audio.size != t_count * AUDIO_DIM:
        raise DatasetLoadError(audio_path, f"shape mismatch: expected {t_count * AUDIO_DIM} values, found {audio.size}")
    return VideoSample(
        sample_id=meta.sample_id,
        frames=frames,
        audio_feats=audio.reshape(t_count, AUDIO_DIM),
        objects=objects,
    )
