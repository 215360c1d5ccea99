from .backbones import AudioAdapter, VisualEncoder, VisualPyramid, audio_encode, visual_encode  # noqa: F401
from .fusion import EarlyFusion, FusedFrame, early_fuse  # noqa: F401
from .pixeldec import PixelDecoder, PixelDecoderOut, pixel_decode  # noqa: F401
from .audiomaskdec import AudioMaskDecoder, QueryOutputs, QuerySet, decode, mask_head, sound_head  # noqa: F401
from .localizer import SoundLocalizer  # noqa: F401
from .matchloss import (  # noqa: F401
    Assignment,
    CostMatrix,
    LossBreakdown,
    dice_loss,
    focal_loss,
    hungarian,
    mask_targets,
    total_loss,
)
