from lsrl.nn.functional import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    leaky_relu,
    relu,
    softmax_channels,
    tconv2d_backward,
    tconv2d_forward,
    td_loss,
    weighted_ce_loss,
)
from lsrl.nn.gradcheck import check_module, grad_check, numeric_gradient, relative_error
from lsrl.nn.layers import Conv2d, ConvTranspose2d, Dense, Layer, LeakyReLU, ReLU, Sequential
from lsrl.nn.optim import SGD, Adam, adam_step, make_optimizer, sgd_step
from lsrl.nn.serialize import read_arrays, write_arrays

__all__ = [
    "Adam", "Conv2d", "ConvTranspose2d", "Dense", "Layer", "LeakyReLU", "ReLU", "SGD",
    "Sequential", "adam_step", "check_module", "conv2d_backward", "conv2d_forward",
    "dense_backward", "dense_forward", "grad_check", "leaky_relu", "make_optimizer",
    "numeric_gradient", "read_arrays", "relative_error", "relu", "sgd_step",
    "softmax_channels", "tconv2d_backward", "tconv2d_forward", "td_loss",
    "weighted_ce_loss", "write_arrays",
]
