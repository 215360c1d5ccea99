"""Top-down multi-scale pixel decoder.

Each input level is laterally projected to C_e; coarser maps are upsampled and
added into finer ones, and every sum is smoothed by a 3x3 conv. Levels 4, 3, 2
become the decoder memory; the level-1 grid (H/4, W/4) becomes the per-pixel
embedding after a final conv.
"""

from dataclasses import dataclass

import numpy as np

from ovavss.model.fusion import FusedFrame
from ovavss.numcore import ops
from ovavss.numcore.nn import Conv2d, GroupNorm, Module, bilinear_upsample
from ovavss.numcore.tensor import Tensor


@dataclass
class PixelDecoderOut:
    memory: list[Tensor]  # levels 4, 3, 2; each (T, C_e, H_k, W_k)
    pixel_embed: Tensor  # (T, C_e, H/4, W/4)


class SmoothBlock(Module):
    def __init__(self, dim: int, groups: int, rng=None):
        self.conv = Conv2d(dim, dim, 3, 1, rng)
        self.norm = GroupNorm(dim, groups)

    def forward(self, x) -> Tensor:
        return ops.relu(self.norm(self.conv(x)))


class PixelDecoder(Module):
    def __init__(
        self,
        fused_dim: int = 128,
        level1_dim: int = 32,
        dim: int = 128,
        groups: int = 8,
        top_down: bool = True,
        rng: np.random.Generator | None = None,
    ):
        # lateral[0] handles level 1, lateral[1:] levels 2, 3, 4
        self.lateral = [Conv2d(level1_dim, dim, 1, 1, rng)] + [Conv2d(fused_dim, dim, 1, 1, rng) for _ in range(3)]
        self.smooth = [SmoothBlock(dim, groups, rng) for _ in range(4)]
        self.output = Conv2d(dim, dim, 3, 1, rng)
        self.top_down = top_down

    def forward(self, fused: FusedFrame, level1: Tensor) -> PixelDecoderOut:
        inputs = [level1] + list(fused.f_va)
        refined: list[Tensor] = [None] * 4
        coarser = None
        for k in (3, 2, 1, 0):
            x = self.lateral[k](inputs[k])
            if coarser is not None and self.top_down:
                x = x + bilinear_upsample(coarser, 2)
            refined[k] = self.smooth[k](x)
            coarser = refined[k]
        return PixelDecoderOut(memory=[refined[3], refined[2], refined[1]], pixel_embed=self.output(refined[0]))


def pixel_decode(fused: FusedFrame, level1: Tensor, params: PixelDecoder) -> PixelDecoderOut:
    return params(fused, level1)
