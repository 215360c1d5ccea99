"""Per-sample prediction files.

``mask_<t>.pgm`` holds class ids per pixel, ``overlay_<t>.ppm`` the frame with
predicted objects tinted by class, and ``objects.json`` one entry per detected
sounding object.
"""

import colorsys
import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from ovavss.core.pipeline import OpenVocabPipeline, Segmentation
from ovavss.data.samples import VideoSample

logger = logging.getLogger(__name__)

_GOLDEN = 0.618033988749895
OVERLAY_ALPHA = 0.5


def class_color(class_id: int) -> np.ndarray:
    return np.array(colorsys.hsv_to_rgb((class_id * _GOLDEN) % 1.0, 0.9, 1.0))


def overlay(frame: np.ndarray, semantic: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 frame with labelled pixels blended toward their class colour."""
    rgb = frame.transpose(1, 2, 0).copy()
    for c in np.unique(semantic):
        if c == 0:
            continue
        hit = semantic == c
        rgb[hit] = (1.0 - OVERLAY_ALPHA) * rgb[hit] + OVERLAY_ALPHA * class_color(int(c))
    return np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_prediction(sample: VideoSample, seg: Segmentation, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t in range(sample.num_frames):
        Image.fromarray(seg.semantic[t].astype(np.uint8), "L").save(out_dir / f"mask_{t}.pgm")
        Image.fromarray(overlay(sample.frames[t], seg.semantic[t]), "RGB").save(out_dir / f"overlay_{t}.ppm")
    objects = [o.meta.model_dump() for o in seg.objects]
    (out_dir / "objects.json").write_text(json.dumps(objects, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Wrote {sample.num_frames} frames and {len(objects)} objects to {out_dir}")
    return out_dir


def predict_sample(pipeline: OpenVocabPipeline, sample: VideoSample, out_dir: Path) -> Segmentation:
    seg = pipeline.segment(sample)
    write_prediction(sample, seg, out_dir)
    return seg
