"""Rasterisation of class shapes, class textures and background noise."""

import colorsys

import numpy as np
from PIL import Image, ImageDraw

from ovavss.data.roster import ClassSpec
from ovavss.numcore.nn import resize_array

_GOLDEN = 0.618033988749895


def shape_mask(kind: str, cx: float, cy: float, r: float, height: int, width: int) -> np.ndarray:
    """Boolean (H, W) footprint of a shape of radius r centred at (cx, cy)."""
    img = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(img)
    if kind == "circle":
        draw.ellipse((cx - r, cy - r, cx + r, cy + r), fill=255)
    elif kind == "square":
        s = 0.8 * r
        draw.rectangle((cx - s, cy - s, cx + s, cy + s), fill=255)
    elif kind == "triangle":
        draw.polygon([(cx, cy - r), (cx - r, cy + 0.8 * r), (cx + r, cy + 0.8 * r)], fill=255)
    elif kind == "cross":
        t = 0.35 * r
        draw.rectangle((cx - r, cy - t, cx + r, cy + t), fill=255)
        draw.rectangle((cx - t, cy - r, cx + t, cy + r), fill=255)
    elif kind == "ring":
        draw.ellipse((cx - r, cy - r, cx + r, cy + r), fill=255)
        inner = 0.55 * r
        draw.ellipse((cx - inner, cy - inner, cx + inner, cy + inner), fill=0)
    elif kind == "bar":
        draw.rectangle((cx - r, cy - 0.35 * r, cx + r, cy + 0.35 * r), fill=255)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    return np.asarray(img) > 0


def class_texture(
    spec: ClassSpec, height: int, width: int, cx: float, cy: float, r: float, phase: float = 0.0
) -> np.ndarray:
    """(3, H, W) striped texture in the class colour, in object-local coordinates."""
    rng = np.random.default_rng(spec.texture_seed)
    hue = (spec.texture_seed * _GOLDEN) % 1.0
    color = np.array(colorsys.hsv_to_rgb(hue, 0.85, 0.95))
    cycles = rng.uniform(0.6, 1.5)  # stripes per radius
    angle = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    u, v = (xx - cx) / r, (yy - cy) / r
    wave = np.sin(2.0 * np.pi * cycles * (u * np.cos(angle) + v * np.sin(angle)) + phase)
    return color[:, None, None] * (0.75 + 0.25 * wave)[None]


def background(rng: np.random.Generator, height: int, width: int, amplitude: float = 0.2) -> np.ndarray:
    """(3, H, W) smooth low-amplitude value noise."""
    coarse = rng.uniform(0.0, 1.0, size=(3, height // 16 + 2, width // 16 + 2))
    return 0.1 + amplitude * resize_array(coarse, (height, width))


def render_canonical(spec: ClassSpec, size: int, variation: int = 0) -> np.ndarray:
    """Object alone on black, centred and filling the canvas; `variation` jitters it."""
    rng = np.random.default_rng([spec.texture_seed, variation])
    jitter = rng.uniform(-0.5, 0.5, size=2) if variation else np.zeros(2)
    r = size * 0.48 * (1.0 + (rng.uniform(-0.04, 0.04) if variation else 0.0))
    c = (size - 1) / 2.0
    mask = shape_mask(spec.shape_kind, c + jitter[0], c + jitter[1], r, size, size)
    phase = rng.uniform(0.0, 0.5) if variation else 0.0
    return class_texture(spec, size, size, c + jitter[0], c + jitter[1], r, phase) * mask[None]
