"""Stateless forward/backward kernels on float64 numpy arrays.

Image tensors are NCHW. Convolutions use cross-correlation; the transposed
convolution is the exact adjoint of the convolution with the same
hyperparameters, so it maps conv output shapes back to conv input shapes.
"""

from __future__ import annotations

import numpy as np


def _check_shape(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


# -- dense ------------------------------------------------------------------


def dense_forward(weight: np.ndarray, bias: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = x W^T + b for a batch ``x`` of shape (N, in) (or a single vector)."""
    _check_shape(
        x.shape[-1] == weight.shape[1],
        f"dense layer expects {weight.shape[1]} inputs, got {x.shape[-1]}",
    )
    return x @ weight.T + bias


def dense_backward(weight: np.ndarray, x: np.ndarray, dy: np.ndarray):
    """Returns (dx, dW, db) for :func:`dense_forward`."""
    _check_shape(dy.shape[-1] == weight.shape[0], "dense upstream gradient has wrong width")
    x2 = x.reshape(-1, weight.shape[1])
    dy2 = dy.reshape(-1, weight.shape[0])
    dx = (dy2 @ weight).reshape(x.shape)
    return dx, dy2.T @ x2, dy2.sum(axis=0)


# -- convolution --------------------------------------------------------------


def conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if span < 0 or span % stride:
        raise ValueError(
            f"conv with k={k}, stride={stride}, pad={pad} does not tile input size {size}"
        )
    return span // stride + 1


def tconv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    out = (size - 1) * stride + k - 2 * pad
    if out <= 0:
        raise ValueError(f"transposed conv produces non-positive size {out}")
    return out


def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Padded (N, C, Hp, Wp) -> (k*k*C, N*Ho*Wo) patch matrix, rows ordered (i, j, c)."""
    n, c = xp.shape[:2]
    xc = xp.transpose(1, 0, 2, 3)
    cols = np.empty((k, k, c, n, ho, wo))
    for i in range(k):
        for j in range(k):
            cols[i, j] = xc[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
    return cols.reshape(k * k * c, n * ho * wo)


def _col2im(cols: np.ndarray, shape, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patches into a padded (N, C, Hp, Wp) array."""
    n, c, hp, wp = shape
    cols = cols.reshape(k, k, c, n, ho, wo)
    out = np.zeros((c, n, hp, wp))
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[i, j]
    return out.transpose(1, 0, 2, 3)


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _crop(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return x[:, :, pad:-pad, pad:-pad]


def _conv_matrix(weight: np.ndarray) -> np.ndarray:
    # (C_out, C_in, k, k) -> (C_out, k*k*C_in) matching the patch row order
    return weight.transpose(0, 2, 3, 1).reshape(weight.shape[0], -1)


def _tconv_matrix(weight: np.ndarray) -> np.ndarray:
    # (C_in, C_out, k, k) -> (k*k*C_out, C_in)
    return weight.transpose(2, 3, 1, 0).reshape(-1, weight.shape[0])


def conv2d_forward(weight, bias, x, stride: int, pad: int):
    """Cross-correlation. ``weight`` is (C_out, C_in, k, k). Returns (y, cols)."""
    cout, cin, k, _ = weight.shape
    _check_shape(x.ndim == 4 and x.shape[1] == cin, f"conv expects (N, {cin}, H, W), got {x.shape}")
    n, _, h, w = x.shape
    ho, wo = conv_output_size(h, k, stride, pad), conv_output_size(w, k, stride, pad)
    cols = _im2col(_pad(x, pad), k, stride, ho, wo)
    y = _conv_matrix(weight) @ cols + bias[:, None]
    return np.ascontiguousarray(y.reshape(cout, n, ho, wo).transpose(1, 0, 2, 3)), cols


def conv2d_backward(weight, x_shape, cols, dy, stride: int, pad: int):
    """Returns (dx, dW, db) given the patch matrix cached by the forward pass."""
    cout, cin, k, _ = weight.shape
    n, _, h, w = x_shape
    ho, wo = dy.shape[2:]
    g = dy.transpose(1, 0, 2, 3).reshape(cout, -1)
    dw = (g @ cols.T).reshape(cout, k, k, cin).transpose(0, 3, 1, 2)
    db = g.sum(axis=1)
    dcols = _conv_matrix(weight).T @ g
    dxp = _col2im(dcols, (n, cin, h + 2 * pad, w + 2 * pad), k, stride, ho, wo)
    return np.ascontiguousarray(_crop(dxp, pad)), np.ascontiguousarray(dw), db


def tconv2d_forward(weight, bias, x, stride: int, pad: int) -> np.ndarray:
    """Transposed convolution. ``weight`` is (C_in, C_out, k, k)."""
    cin, cout, k, _ = weight.shape
    _check_shape(x.ndim == 4 and x.shape[1] == cin, f"tconv expects (N, {cin}, H, W), got {x.shape}")
    n, _, h, w = x.shape
    ho, wo = tconv_output_size(h, k, stride, pad), tconv_output_size(w, k, stride, pad)
    xm = x.transpose(1, 0, 2, 3).reshape(cin, -1)
    cols = _tconv_matrix(weight) @ xm
    yp = _col2im(cols, (n, cout, ho + 2 * pad, wo + 2 * pad), k, stride, h, w)
    return np.ascontiguousarray(_crop(yp, pad)) + bias[None, :, None, None]


def tconv2d_backward(weight, x, dy, stride: int, pad: int):
    """Returns (dx, dW, db) for :func:`tconv2d_forward`."""
    cin, cout, k, _ = weight.shape
    n, _, h, w = x.shape
    cols = _im2col(_pad(dy, pad), k, stride, h, w)
    dx = (_tconv_matrix(weight).T @ cols).reshape(cin, n, h, w).transpose(1, 0, 2, 3)
    xm = x.transpose(1, 0, 2, 3).reshape(cin, -1)
    dw = (cols @ xm.T).reshape(k, k, cout, cin).transpose(3, 2, 0, 1)
    return np.ascontiguousarray(dx), np.ascontiguousarray(dw), dy.sum(axis=(0, 2, 3))


# -- activations --------------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x: np.ndarray, dy: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x > 0, dy, slope * dy)


def softmax_channels(logits: np.ndarray, axis: int = -3) -> np.ndarray:
    """Softmax over the channel axis (axis -3 for CHW or NCHW inputs)."""
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# -- losses --------------------------------------------------------------------


def weighted_ce_loss(logits: np.ndarray, target: np.ndarray, weights: np.ndarray):
    """Class-weighted categorical cross-entropy, averaged over pixels.

    ``logits`` and the one-hot ``target`` are (13, H, W) or (N, 13, H, W).
    Returns ``(loss, dloss/dlogits)``.
    """
    _check_shape(logits.shape == target.shape, f"logits {logits.shape} vs target {target.shape}")
    weights = np.asarray(weights, dtype=np.float64)
    _check_shape(weights.shape == (logits.shape[-3],), "one weight per channel required")
    wshape = (-1, 1, 1)
    z = logits - logits.max(axis=-3, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=-3, keepdims=True))
    n_pix = logits.size // logits.shape[-3]
    # per-pixel weight of the true class
    w_true = (target * weights.reshape(wshape)).sum(axis=-3, keepdims=True)
    loss = -float((target * log_p * weights.reshape(wshape)).sum()) / n_pix
    grad = w_true * np.exp(log_p) - target * weights.reshape(wshape)
    return loss, grad / n_pix


def td_loss(predicted_q, target_q):
    """Half squared temporal-difference error; the target is held constant."""
    err = np.asarray(target_q, dtype=np.float64) - np.asarray(predicted_q, dtype=np.float64)
    return 0.5 * err**2, -err
