from .tensor import Parameter, Tensor, grad_enabled, no_grad
from .ops import (
    add,
    affine,
    conv2d,
    conv2d_output_shape,
    conv_transpose2d,
    instance_norm,
    l1_loss,
    leaky_relu,
    mse_loss,
    relu,
    scale,
    sigmoid,
    tanh,
)
from .optim import Adam, adam_step
from .gradcheck import GradCheckReport, gradient_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam",
    "GradCheckReport",
    "Parameter",
    "Tensor",
    "adam_step",
    "add",
    "affine",
    "conv2d",
    "conv2d_output_shape",
    "conv_transpose2d",
    "grad_enabled",
    "gradient_check",
    "instance_norm",
    "l1_loss",
    "leaky_relu",
    "load_checkpoint",
    "mse_loss",
    "no_grad",
    "relu",
    "save_checkpoint",
    "scale",
    "sigmoid",
    "tanh",
]
