from .adam import AdamState, adam_step
from .loss import l2_loss
from .model import (
    LayerSpec,
    NetworkParams,
    backward,
    backward_batch,
    forward,
    forward_batch,
    layer_specs,
    output_shape,
)
from .ops import conv2d, deconv2d, prelu

__all__ = [
    "AdamState",
    "LayerSpec",
    "NetworkParams",
    "adam_step",
    "backward",
    "backward_batch",
    "conv2d",
    "deconv2d",
    "forward",
    "forward_batch",
    "l2_loss",
    "layer_specs",
    "output_shape",
    "prelu",
]
