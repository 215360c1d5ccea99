"""Trainable toy feature extractors with the hierarchical-backbone shape contract.

Level k (k = 1..4) of the visual pyramid has shape (D_k, H / 2^(k+1), W / 2^(k+1)).
"""

from dataclasses import dataclass

import numpy as np

from ovavss.errors import ConfigurationError, DimensionError
from ovavss.numcore import ops
from ovavss.numcore.nn import Conv2d, GroupNorm, Linear, Module, Parameter
from ovavss.numcore.tensor import Tensor, as_tensor


@dataclass
class VisualPyramid:
    levels: list[Tensor]  # each (B, D_k, H_k, W_k)

    def __post_init__(self):
        if len(self.levels) != 4:
            raise ConfigurationError(f"a visual pyramid has 4 levels, got {len(self.levels)}")

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [lvl.shape for lvl in self.levels]


class ConvBlock(Module):
    """conv3x3 -> groupnorm -> gelu."""

    def __init__(self, in_ch: int, out_ch: int, stride: int, groups: int, rng=None):
        self.conv = Conv2d(in_ch, out_ch, 3, stride, rng)
        self.norm = GroupNorm(out_ch, groups)

    def forward(self, x) -> Tensor:
        return ops.gelu(self.norm(self.conv(x)))


class VisualEncoder(Module):
    def __init__(
        self,
        widths: tuple[int, ...] = (32, 64, 128, 128),
        stem_width: int = 16,
        groups: int = 8,
        rng: np.random.Generator | None = None,
    ):
        self.stem = ConvBlock(3, stem_width, 2, groups, rng)
        self.stages = []
        in_ch = stem_width
        for width in widths:
            self.stages.append([ConvBlock(in_ch, width, 2, groups, rng), ConvBlock(width, width, 1, groups, rng)])
            in_ch = width

    def forward(self, frames) -> VisualPyramid:
        """frames: (3, H, W) or (B, 3, H, W), H and W multiples of 32."""
        x = as_tensor(frames)
        if x.ndim == 3:
            x = x.reshape(1, *x.shape)
        if x.ndim != 4 or x.shape[1] != 3:
            raise DimensionError("visual_encode", x.shape, (None, 3, None, None))
        h, w = x.shape[2], x.shape[3]
        if h % 32 or w % 32:
            raise ConfigurationError(f"frame size {h}x{w}: H and W must be divisible by 32")
        x = self.stem(x)
        levels = []
        for down, refine in self.stages:
            x = refine(down(x))
            levels.append(x)
        return VisualPyramid(levels)


class AudioAdapter(Module):
    """Residual 2-layer MLP over audio features.

    The output layer starts at zero, so a fresh adapter is the identity map and
    training begins in the raw signature space.
    """

    def __init__(self, dim: int = 128, rng: np.random.Generator | None = None):
        self.hidden = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self.out.weight = Parameter(np.zeros((dim, dim)))
        self.dim = dim

    def forward(self, audio) -> Tensor:
        audio = as_tensor(audio)
        if audio.shape[-1] != self.dim:
            raise DimensionError("audio_encode", audio.shape, (self.dim,))
        return audio + self.out(ops.gelu(self.hidden(audio)))


def visual_encode(frame, params: VisualEncoder) -> VisualPyramid:
    return params(frame)


def audio_encode(audio_feat, params: AudioAdapter) -> Tensor:
    return params(audio_feat)
