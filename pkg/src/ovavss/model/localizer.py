"""Stage one: class-agnostic sounding-object localization for one clip."""

import logging

from ovavss.config import AblationConfig, ModelConfig
from ovavss.model.audiomaskdec import AudioMaskDecoder, QueryOutputs
from ovavss.model.backbones import AudioAdapter, VisualEncoder
from ovavss.model.fusion import EarlyFusion
from ovavss.model.pixeldec import PixelDecoder
from ovavss.numcore.nn import Module
from ovavss.numcore.random import derive

logger = logging.getLogger(__name__)


class SoundLocalizer(Module):
    """backbones -> early fusion -> pixel decoder -> audio-conditioned decoder."""

    def __init__(self, model: ModelConfig, ablation: AblationConfig, seed: int = 0):
        rng = derive(seed, 0)
        widths = model.visual_widths
        self.visual = VisualEncoder(widths, model.stem_width, model.groups, rng)
        self.audio = AudioAdapter(model.audio_dim, rng)
        self.fusion = EarlyFusion(
            level_channels=(widths[1], widths[2], widths[3]),
            audio_dim=model.audio_dim,
            dim=model.c_av,
            heads=model.fusion_heads,
            groups=model.groups,
            mode=ablation.fusion,
            multi_level=ablation.multi_level,
            rng=rng,
        )
        self.pixel_decoder = PixelDecoder(
            fused_dim=model.c_av,
            level1_dim=widths[0],
            dim=model.c_e,
            groups=model.groups,
            top_down=ablation.top_down,
            rng=rng,
        )
        self.decoder = AudioMaskDecoder(
            num_queries=model.num_queries,
            num_layers=model.num_layers,
            dim=model.c_o,
            audio_dim=model.c_av,
            heads=model.decoder_heads,
            ffn_dim=model.ffn_dim,
            max_frames=model.max_frames,
            audio_prompt=ablation.audio_prompt,
            masked_attention=model.masked_attention,
            rng=rng,
        )
        logger.debug(
            f"SoundLocalizer: {sum(p.size for p in self.parameters())} parameters, "
            f"fusion={ablation.fusion} multi_level={ablation.multi_level} prompt={ablation.audio_prompt}"
        )

    def forward(self, frames, audio_feats) -> list[QueryOutputs]:
        """frames (T, 3, H, W), audio_feats (T, audio_dim); returns L + 1 output sets."""
        pyramid = self.visual(frames)
        audio = self.audio(audio_feats)
        fused = self.fusion(audio, pyramid)
        pixels = self.pixel_decoder(fused, pyramid.levels[0])
        return self.decoder(pixels, fused.f_av)
