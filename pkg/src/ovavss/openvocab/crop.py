"""Cropping a masked object out of a frame for the frozen image encoder.

Three strategies are supported:

* ``square_crop``: square window centred on the mask's bounding box, side equal
  to the longer bbox side, zero-padded where it leaves the frame;
* ``crop_resize``: the bounding box itself, resized with aspect distortion;
* ``none``: the whole masked frame, resized.

The background is always zeroed before cropping and every result is resized
bilinearly to ``size x size``.
"""

from dataclasses import dataclass

import numpy as np

from ovavss.errors import ConfigurationError, EmptyMaskError, InputError
from ovavss.numcore.nn import resize_array

CROP_STRATEGIES = ("none", "crop_resize", "square_crop")


@dataclass(frozen=True)
class CropSpec:
    center: tuple[float, float]  # (cx, cy) in pixels
    side: int
    # zero padding added on the (left, top, right, bottom) edges
    clamp_pad: tuple[int, int, int, int] = (0, 0, 0, 0)

    @property
    def window(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) of the square window, half-open, frame coordinates."""
        x0 = int(round(self.center[0] - self.side / 2))
        y0 = int(round(self.center[1] - self.side / 2))
        return x0, y0, x0 + self.side, y0 + self.side


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """(x0, y0, x1, y1), half-open; raises EmptyMaskError for an empty mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyMaskError("mask has no positive pixel")
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def _masked(frame, mask) -> tuple[np.ndarray, np.ndarray]:
    frame = np.asarray(getattr(frame, "data", frame), dtype=np.float64)
    mask = np.asarray(getattr(mask, "data", mask)) > 0
    if frame.ndim != 3 or frame.shape[1:] != mask.shape:
        raise InputError(f"frame {frame.shape} and mask {mask.shape} do not align")
    return frame * mask[None], mask


def square_window(frame, mask) -> tuple[np.ndarray, CropSpec]:
    """Square side x side window of the masked frame, before resizing."""
    masked, mask = _masked(frame, mask)
    x0, y0, x1, y1 = mask_bbox(mask)
    side = max(x1 - x0, y1 - y0)
    spec = CropSpec(center=((x0 + x1) / 2.0, (y0 + y1) / 2.0), side=side)
    wx0, wy0, wx1, wy1 = spec.window
    _, h, w = masked.shape
    pad = (max(0, -wx0), max(0, -wy0), max(0, wx1 - w), max(0, wy1 - h))
    out = np.zeros((3, side, side))
    sx0, sy0, sx1, sy1 = max(wx0, 0), max(wy0, 0), min(wx1, w), min(wy1, h)
    out[:, sy0 - wy0 : sy1 - wy0, sx0 - wx0 : sx1 - wx0] = masked[:, sy0:sy1, sx0:sx1]
    return out, CropSpec(center=spec.center, side=side, clamp_pad=pad)


def square_crop(frame, mask, size: int = 32) -> tuple[np.ndarray, CropSpec]:
    window, spec = square_window(frame, mask)
    return resize_array(window, (size, size)), spec


def crop_resize(frame, mask, size: int = 32) -> np.ndarray:
    masked, mask = _masked(frame, mask)
    x0, y0, x1, y1 = mask_bbox(mask)
    return resize_array(masked[:, y0:y1, x0:x1], (size, size))


def full_frame(frame, mask, size: int = 32) -> np.ndarray:
    masked, mask = _masked(frame, mask)
    mask_bbox(mask)
    return resize_array(masked, (size, size))


def crop_object(frame, mask, strategy: str = "square_crop", size: int = 32) -> np.ndarray:
    """(3, size, size) crop by the named strategy; EmptyMaskError on an empty mask."""
    if strategy == "square_crop":
        return square_crop(frame, mask, size)[0]
    if strategy == "crop_resize":
        return crop_resize(frame, mask, size)
    if strategy == "none":
        return full_frame(frame, mask, size)
    raise ConfigurationError(f"crop strategy {strategy!r} not in {CROP_STRATEGIES}")
