from .tensor import Function, Tape, Tensor, as_tensor, is_grad_enabled, no_grad  # noqa: F401
from .ops import (  # noqa: F401
    concat,
    conv2d,
    exp,
    gelu,
    getitem,
    log,
    log_sigmoid,
    log_softmax,
    matmul,
    mean,
    permute,
    relu,
    reshape,
    sigmoid,
    softmax,
    stack,
    transpose,
)
from .ops import sum as reduce_sum  # noqa: F401
from .nn import (  # noqa: F401
    MLP,
    Conv2d,
    GroupNorm,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    bilinear_upsample,
    group_norm,
    layer_norm,
    multi_head_attention,
    resize_array,
    resize_bilinear,
)
from .optim import AdamW, StepDecay, adam_step  # noqa: F401
from .gradcheck import grad_check  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from .random import default_generator, derive, manual_seed  # noqa: F401
