"""Audio-visual early fusion by bi-directional cross-attention.

Levels 2-4 of the pyramid and the audio embedding are projected to C_av, the
visual levels are flattened into one token sequence s, and

    f_av = Attn(q=a, k=s, v=s) + a        (audio enriched by vision)
    f_va = Attn(q=s, k=a, v=a) + s        (vision enriched by audio)

f_va is unflattened back to the three level grids.
"""

from dataclasses import dataclass

import numpy as np

from ovavss.errors import ConfigurationError
from ovavss.model.backbones import VisualPyramid
from ovavss.numcore import ops
from ovavss.numcore.nn import Conv2d, GroupNorm, Linear, Module, MultiHeadAttention
from ovavss.numcore.tensor import Tensor, as_tensor

FUSION_MODES = ("none", "add", "bi_attn")


@dataclass
class FusedFrame:
    f_av: Tensor  # (T, C_av)
    f_va: list[Tensor]  # levels 2, 3, 4, each (T, C_av, H_k, W_k)


@dataclass
class ProjectedInputs:
    audio: Tensor  # (T, C_av)
    tokens: Tensor  # (T, L, C_av), level 2 tokens first
    grids: list[tuple[int, int]]


class EarlyFusion(Module):
    def __init__(
        self,
        level_channels: tuple[int, int, int],
        audio_dim: int = 128,
        dim: int = 128,
        heads: int = 1,
        groups: int = 8,
        mode: str = "bi_attn",
        multi_level: bool = True,
        rng: np.random.Generator | None = None,
    ):
        if mode not in FUSION_MODES:
            raise ConfigurationError(f"fusion mode {mode!r} not in {FUSION_MODES}")
        self.visual_proj = [Conv2d(c, dim, 1, 1, rng) for c in level_channels]
        self.visual_norm = [GroupNorm(dim, groups) for _ in level_channels]
        self.audio_proj = Linear(audio_dim, dim, rng)
        self.audio_norm = GroupNorm(dim, groups)
        self.a2v = MultiHeadAttention(dim, heads, rng)
        self.v2a = MultiHeadAttention(dim, heads, rng)
        self.dim = dim
        self.mode = mode
        self.multi_level = multi_level

    def project(self, audio, pyramid: VisualPyramid) -> ProjectedInputs:
        """Pointwise projection + group norm of audio and levels 2-4, flattened."""
        levels = pyramid.levels[1:]
        if len(levels) != 3:
            raise ConfigurationError("early fusion needs pyramid levels 2, 3 and 4")
        audio = as_tensor(audio)
        t_count = audio.shape[0]
        a = self.audio_proj(audio)
        a = self.audio_norm(a.reshape(t_count, self.dim, 1, 1)).reshape(t_count, self.dim)
        tokens, grids = [], []
        for level, conv, norm in zip(levels, self.visual_proj, self.visual_norm):
            x = norm(conv(level))
            _, c, h, w = x.shape
            grids.append((h, w))
            tokens.append(x.reshape(t_count, c, h * w).permute(0, 2, 1))
        return ProjectedInputs(audio=a, tokens=ops.concat(tokens, axis=1), grids=grids)

    def unflatten(self, tokens: Tensor, grids: list[tuple[int, int]]) -> list[Tensor]:
        t_count = tokens.shape[0]
        out, start = [], 0
        for h, w in grids:
            chunk = tokens[:, start : start + h * w, :]
            out.append(chunk.permute(0, 2, 1).reshape(t_count, self.dim, h, w))
            start += h * w
        return out

    def forward(self, audio, pyramid: VisualPyramid) -> FusedFrame:
        p = self.project(audio, pyramid)
        a, s = p.audio, p.tokens
        if self.mode == "none":
            return FusedFrame(f_av=a, f_va=self.unflatten(s, p.grids))

        # single-level fusion touches only the level-4 tokens
        first = 0 if self.multi_level else sum(h * w for h, w in p.grids[:2])
        fused = s[:, first:, :]
        a_q = a.reshape(a.shape[0], 1, self.dim)
        if self.mode == "add":
            f_av, fused = a, fused + a_q
        else:
            f_av = (self.a2v(a_q, fused, fused) + a_q).reshape(a.shape[0], self.dim)
            fused = self.v2a(fused, a_q, a_q) + fused
        if first:
            fused = ops.concat([s[:, :first, :], fused], axis=1)
        return FusedFrame(f_av=f_av, f_va=self.unflatten(fused, p.grids))


def early_fuse(audio, pyramid: VisualPyramid, params: EarlyFusion) -> FusedFrame:
    return params(audio, pyramid)
