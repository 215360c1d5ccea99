"""Audio-conditioned query decoder.

N class-agnostic object queries are refined by L layers. Each layer runs, in
order, spatio-temporal cross-attention over one pyramid level of every frame,
object self-attention, audio self-attention over the T audio tokens,
audio-aware cross-attention (queries attend to the audio tokens) and an FFN.
All sublayers are pre-norm residual blocks. The sound and mask heads are applied
to the initial queries and after every layer, so decoding yields L + 1 output
sets.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ovavss.errors import ConfigurationError, DimensionError, InputError
from ovavss.model.pixeldec import PixelDecoderOut
from ovavss.numcore import ops
from ovavss.numcore.nn import MLP, LayerNorm, Linear, Module, MultiHeadAttention, Parameter, resize_array
from ovavss.numcore.random import default_generator
from ovavss.numcore.tensor import Tensor, as_tensor

AUDIO_PROMPTS = ("none", "concat_add", "cross_attn", "audiomaskdec")
MASK_BIAS = -1e9


@lru_cache(maxsize=16)
def sine_position_embedding(h: int, w: int, dim: int) -> np.ndarray:
    """Fixed 2D sinusoidal encoding, (h * w, dim); first half encodes y, second x."""
    half = dim // 2
    freqs = 10000.0 ** (-2.0 * (np.arange(half) // 2) / half)
    ys, xs = np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5, indexing="ij")

    def encode(coord: np.ndarray) -> np.ndarray:
        angles = coord.reshape(-1, 1) * freqs.reshape(1, -1)
        return np.where(np.arange(half) % 2 == 0, np.sin(angles), np.cos(angles))

    out = np.zeros((h * w, dim))
    out[:, :half] = encode(ys)
    out[:, half : 2 * half] = encode(xs)
    out.setflags(write=False)
    return out


class QuerySet(Module):
    def __init__(self, num_queries: int, dim: int, rng: np.random.Generator | None = None):
        rng = rng or default_generator()
        self.q = Parameter(rng.normal(size=(num_queries, dim)))
        self.pe = Parameter(rng.normal(size=(num_queries, dim)))

    @property
    def num_queries(self) -> int:
        return self.q.shape[0]

    def permuted(self, order) -> "QuerySet":
        """A QuerySet whose rows are this one's, reordered by `order`."""
        out = QuerySet.__new__(QuerySet)
        out.q = Parameter(self.q.data[np.asarray(order)])
        out.pe = Parameter(self.pe.data[np.asarray(order)])
        return out


@dataclass
class QueryOutputs:
    sound_logits: Tensor  # (N, 2); channel 0 = sounding
    mask_logits: Tensor  # (N, T, H/4, W/4), pre-sigmoid
    embeddings: Tensor  # (N, C_o)

    @property
    def sounding(self) -> Tensor:
        return ops.softmax(self.sound_logits, axis=-1)[:, 0]


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng=None):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x) -> Tensor:
        return self.fc2(ops.relu(self.fc1(x)))


class DecoderLayer(Module):
    def __init__(self, dim: int, heads: int, ffn_dim: int, rng=None):
        self.cross_norm = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, rng)
        self.self_norm = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, heads, rng)
        self.audio_norm = LayerNorm(dim)
        self.audio_self_attn = MultiHeadAttention(dim, heads, rng)
        self.audio_cross_norm = LayerNorm(dim)
        self.audio_cross_attn = MultiHeadAttention(dim, heads, rng)
        self.ffn_norm = LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_dim, rng)

    def forward(
        self,
        x: Tensor,
        pe: Tensor,
        mem: Tensor,
        mem_pos: Tensor,
        audio: Tensor | None,
        audio_pos: Tensor | None,
        attn_bias: np.ndarray | None = None,
    ) -> tuple[Tensor, Tensor | None]:
        h = self.cross_norm(x)
        x = x + self.cross_attn(h + pe, mem + mem_pos, mem, attn_bias)

        h = self.self_norm(x)
        x = x + self.self_attn(h + pe, h + pe, h)

        if audio is not None:
            ha = self.audio_norm(audio)
            audio = audio + self.audio_self_attn(ha + audio_pos, ha + audio_pos, ha)
            h = self.audio_cross_norm(x)
            x = x + self.audio_cross_attn(h + pe, audio + audio_pos, audio)

        return x + self.ffn(self.ffn_norm(x)), audio


class AudioMaskDecoder(Module):
    def __init__(
        self,
        num_queries: int = 20,
        num_layers: int = 6,
        dim: int = 128,
        audio_dim: int = 128,
        heads: int = 8,
        ffn_dim: int = 256,
        max_frames: int = 5,
        audio_prompt: str = "audiomaskdec",
        masked_attention: bool = False,
        rng: np.random.Generator | None = None,
    ):
        if audio_prompt not in AUDIO_PROMPTS:
            raise ConfigurationError(f"audio prompt {audio_prompt!r} not in {AUDIO_PROMPTS}")
        rng = rng or default_generator()
        self.queries = QuerySet(num_queries, dim, rng)
        self.level_embed = Parameter(0.1 * rng.normal(size=(3, dim)))
        self.temporal_pe = Parameter(0.1 * rng.normal(size=(max_frames, dim)))
        self.audio_proj = Linear(audio_dim, dim, rng) if audio_dim != dim else None
        self.layers = [DecoderLayer(dim, heads, ffn_dim, rng) for _ in range(num_layers)]
        self.prompt = None
        self.prompt_norm = None
        if audio_prompt == "concat_add":
            self.prompt = Linear(max_frames * dim, dim, rng)
        elif audio_prompt == "cross_attn":
            self.prompt_norm = LayerNorm(dim)
            self.prompt = MultiHeadAttention(dim, heads, rng)
        self.norm = LayerNorm(dim)
        self.sound_mlp = MLP([dim, dim, dim, 2], rng)
        self.mask_mlp = MLP([dim, dim, dim, dim], rng)
        self.dim = dim
        self.max_frames = max_frames
        self.audio_prompt = audio_prompt
        self.masked_attention = masked_attention

    def predict(self, x: Tensor, pixel_embed: Tensor) -> QueryOutputs:
        h = self.norm(x)
        return QueryOutputs(
            sound_logits=self.sound_mlp(h),
            mask_logits=mask_head(h, pixel_embed, self),
            embeddings=h,
        )

    def _memory_tokens(self, level: Tensor, index: int) -> tuple[Tensor, Tensor]:
        t_count, c, h, w = level.shape
        tokens = level.reshape(t_count, c, h * w).permute(0, 2, 1)
        pos = (
            Tensor(sine_position_embedding(h, w, c)).reshape(1, h * w, c)
            + self.temporal_pe[:t_count].reshape(t_count, 1, c)
            + self.level_embed[index].reshape(1, 1, c)
        )
        return tokens.reshape(t_count * h * w, c), pos.reshape(t_count * h * w, c)

    def _mask_bias(self, previous: QueryOutputs, size: tuple[int, int]) -> np.ndarray:
        """Additive (1, 1, N, T*h*w) bias hiding keys outside each query's previous mask."""
        logits = previous.mask_logits.data
        n, t_count = logits.shape[:2]
        resized = resize_array(logits, size).reshape(n, t_count * size[0] * size[1])
        hidden = resized < 0.0  # sigmoid < 0.5
        # a query that would see nothing attends everywhere instead
        hidden[hidden.all(axis=1)] = False
        return np.where(hidden, MASK_BIAS, 0.0).reshape(1, 1, n, -1)

    def forward(self, memory: PixelDecoderOut, audio, queries: QuerySet | None = None) -> list[QueryOutputs]:
        queries = queries or self.queries
        t_count = memory.pixel_embed.shape[0]
        if t_count > self.max_frames:
            raise ConfigurationError(f"clip has {t_count} frames, decoder supports at most {self.max_frames}")
        audio = as_tensor(audio)
        if audio.shape[0] != t_count:
            raise DimensionError("decode", audio.shape, memory.pixel_embed.shape)
        if self.audio_proj is not None:
            audio = self.audio_proj(audio)
        audio_pos = self.temporal_pe[:t_count]

        x, pe = queries.q, queries.pe
        if self.audio_prompt == "concat_add":
            flat = audio.reshape(1, t_count * self.dim)
            if t_count < self.max_frames:
                flat = ops.concat([flat, Tensor(np.zeros((1, (self.max_frames - t_count) * self.dim)))], axis=1)
            x = x + self.prompt(flat)
        elif self.audio_prompt == "cross_attn":
            h = self.prompt_norm(x)
            x = x + self.prompt(h + pe, audio + audio_pos, audio)
        layer_audio = audio if self.audio_prompt == "audiomaskdec" else None

        outputs = [self.predict(x, memory.pixel_embed)]
        for i, layer in enumerate(self.layers):
            index = i % 3
            level = memory.memory[index]
            mem, mem_pos = self._memory_tokens(level, index)
            bias = self._mask_bias(outputs[-1], level.shape[2:]) if self.masked_attention else None
            x, layer_audio = layer(x, pe, mem, mem_pos, layer_audio, audio_pos, bias)
            outputs.append(self.predict(x, memory.pixel_embed))
        return outputs


def sound_head(embeddings, params: AudioMaskDecoder) -> Tensor:
    """Per-query probability of the sounding channel, in (0, 1)."""
    return ops.softmax(params.sound_mlp(embeddings), axis=-1)[:, 0]


def mask_head(embeddings, pixel_embed, params: AudioMaskDecoder) -> Tensor:
    """mask_logits[n, t, y, x] = <MLP_mask(emb_n), pixel_embed[t, :, y, x]>."""
    mask_embed = params.mask_mlp(embeddings)
    pixel_embed = as_tensor(pixel_embed)
    if pixel_embed.ndim == 3:
        pixel_embed = pixel_embed.reshape(1, *pixel_embed.shape)
    t_count, c, h, w = pixel_embed.shape
    if mask_embed.shape[-1] != c:
        raise ConfigurationError(f"mask embedding has {mask_embed.shape[-1]} channels, pixel embedding {c}")
    n = mask_embed.shape[0]
    logits = ops.matmul(mask_embed, pixel_embed.reshape(t_count, c, h * w))  # (T, N, hw)
    return logits.permute(1, 0, 2).reshape(n, t_count, h, w)


def decode(
    queries: QuerySet,
    memory: PixelDecoderOut | list[PixelDecoderOut],
    audio,
    params: AudioMaskDecoder,
) -> list[QueryOutputs]:
    """Run the decoder; memory is batched over frames or a per-frame list."""
    if isinstance(memory, list):
        if not memory:
            raise InputError("decode needs at least one frame of memory")
        memory = PixelDecoderOut(
            memory=[ops.concat([_batched(m.memory[k]) for m in memory], axis=0) for k in range(3)],
            pixel_embed=ops.concat([_batched(m.pixel_embed) for m in memory], axis=0),
        )
        if isinstance(audio, list):
            audio = ops.stack([as_tensor(a).reshape(-1) for a in audio], axis=0)
    elif memory.pixel_embed.shape[0] == 0:
        raise InputError("decode needs at least one frame of memory")
    return params(memory, audio, queries)


def _batched(x: Tensor) -> Tensor:
    return x.reshape(1, *x.shape) if x.ndim == 3 else x
