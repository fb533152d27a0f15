"""Kernel backend selection.

At import time the compiled extension (``diagseq._core``) is preferred when
present; otherwise the pure NumPy fallback (``diagseq._core_py``) is used.
``DIAGSEQ_BACKEND=python|compiled`` forces the choice, and ``set_backend``
flips it at runtime (used by the parity tests and the benchmark).
"""

import os

from . import _core_py

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"python": _core_py}
if _core is not None:
    _BACKENDS["compiled"] = _core

_impl = _core_py


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return "compiled" if _impl is _core else "python"


def set_backend(name):
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _impl = _BACKENDS[name]


def masked_softmax_fwd(scores, visible):
    return _impl.masked_softmax_fwd(scores, visible)


def masked_softmax_bwd(probs, grad_out):
    return _impl.masked_softmax_bwd(probs, grad_out)


def layer_norm_fwd(x, gain, bias, eps):
    return _impl.layer_norm_fwd(x, gain, bias, eps)


def layer_norm_bwd(x, mean, rstd, gain, grad_out):
    return _impl.layer_norm_bwd(x, mean, rstd, gain, grad_out)


def gelu_fwd(x):
    return _impl.gelu_fwd(x)


def gelu_bwd(x, grad_out):
    return _impl.gelu_bwd(x, grad_out)


_requested = os.environ.get("DIAGSEQ_BACKEND", "").strip().lower()
if _requested:
    set_backend(_requested)
elif _core is not None:
    _impl = _core
