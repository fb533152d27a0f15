"""Pure NumPy implementations of the hot kernels.

Same surface as the compiled ``diagseq._core`` extension; ``diagseq.backend``
picks whichever is available at import time.  All functions take and return
C-contiguous arrays, 2-d ``(rows, cols)`` for the reductions and flat for the
elementwise pair.  Shapes are arranged by the caller (``diagseq.autodiff``).
"""

import numpy as np

# tanh-form GELU constant sqrt(2/pi)
_GELU_C = 0.7978845608028654
_GELU_A = 0.044715


def masked_softmax_fwd(scores, visible):
    """Row-wise softmax over the positions where ``visible`` is nonzero.

    Masked positions get probability exactly 0.  Raises ``ValueError`` if any
    row has no visible position at all.
    """
    vis = visible.astype(bool, copy=False)
    if not vis.any(axis=1).all():
        bad = int(np.flatnonzero(~vis.any(axis=1))[0])
        raise ValueError(f"softmax row {bad} has every key masked")
    neg = np.finfo(scores.dtype).min
    shifted = np.where(vis, scores, neg)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted, where=vis, out=np.zeros_like(scores))
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_bwd(probs, grad_out):
    dot = (probs * grad_out).sum(axis=1, keepdims=True)
    return probs * (grad_out - dot)


def layer_norm_fwd(x, gain, bias, eps):
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layer_norm_bwd(x, mean, rstd, gain, grad_out):
    xhat = (x - mean[:, None]) * rstd[:, None]
    gxhat = grad_out * gain
    h_mean = gxhat.mean(axis=1, keepdims=True)
    proj = (gxhat * xhat).mean(axis=1, keepdims=True)
    gx = rstd[:, None] * (gxhat - h_mean - xhat * proj)
    return gx, (grad_out * xhat).sum(axis=0), grad_out.sum(axis=0)


def gelu_fwd(x):
    inner = _GELU_C * (x + _GELU_A * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def gelu_bwd(x, grad_out):
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    return grad_out * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)
