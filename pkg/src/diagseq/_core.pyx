# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused single-pass loops for the ops the training
step spends its time in.  Mirrors ``diagseq._core_py`` exactly; the pure
version is the reference in the parity tests."""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh

cnp.import_array()

ctypedef fused floating:
    float
    double

cdef double _GELU_C = 0.7978845608028654
cdef double _GELU_A = 0.044715


def masked_softmax_fwd(floating[:, ::1] scores, const unsigned char[:, ::1] visible):
    cdef Py_ssize_t rows = scores.shape[0], cols = scores.shape[1]
    cdef cnp.ndarray out_arr = np.empty((rows, cols), dtype=np.asarray(scores).dtype)
    cdef floating[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef floating m, s, v
    cdef bint any_visible
    for i in range(rows):
        any_visible = False
        m = 0
        for j in range(cols):
            if visible[i, j]:
                if not any_visible or scores[i, j] > m:
                    m = scores[i, j]
                any_visible = True
        if not any_visible:
            raise ValueError(f"softmax row {i} has every key masked")
        s = 0
        for j in range(cols):
            if visible[i, j]:
                v = <floating>exp(scores[i, j] - m)
                out[i, j] = v
                s += v
            else:
                out[i, j] = 0
        for j in range(cols):
            out[i, j] /= s
    return out_arr


def masked_softmax_bwd(floating[:, ::1] probs, floating[:, ::1] grad_out):
    cdef Py_ssize_t rows = probs.shape[0], cols = probs.shape[1]
    cdef cnp.ndarray out_arr = np.empty((rows, cols), dtype=np.asarray(probs).dtype)
    cdef floating[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef floating dot
    for i in range(rows):
        dot = 0
        for j in range(cols):
            dot += probs[i, j] * grad_out[i, j]
        for j in range(cols):
            out[i, j] = probs[i, j] * (grad_out[i, j] - dot)
    return out_arr


def layer_norm_fwd(floating[:, ::1] x, floating[::1] gain, floating[::1] bias,
                   double eps):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    dtype = np.asarray(x).dtype
    cdef cnp.ndarray y_arr = np.empty((rows, cols), dtype=dtype)
    cdef cnp.ndarray mean_arr = np.empty(rows, dtype=dtype)
    cdef cnp.ndarray rstd_arr = np.empty(rows, dtype=dtype)
    cdef floating[:, ::1] y = y_arr
    cdef floating[::1] mean = mean_arr, rstd = rstd_arr
    cdef Py_ssize_t i, j
    cdef floating mu, var, d, r
    for i in range(rows):
        mu = 0
        for j in range(cols):
            mu += x[i, j]
        mu /= cols
        var = 0
        for j in range(cols):
            d = x[i, j] - mu
            var += d * d
        var /= cols
        r = <floating>(1.0 / sqrt(var + eps))
        mean[i] = mu
        rstd[i] = r
        for j in range(cols):
            y[i, j] = (x[i, j] - mu) * r * gain[j] + bias[j]
    return y_arr, mean_arr, rstd_arr


def layer_norm_bwd(floating[:, ::1] x, floating[::1] mean, floating[::1] rstd,
                   floating[::1] gain, floating[:, ::1] grad_out):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    dtype = np.asarray(x).dtype
    cdef cnp.ndarray gx_arr = np.empty((rows, cols), dtype=dtype)
    cdef cnp.ndarray ggain_arr = np.zeros(cols, dtype=dtype)
    cdef cnp.ndarray gbias_arr = np.zeros(cols, dtype=dtype)
    cdef floating[:, ::1] gx = gx_arr
    cdef floating[::1] ggain = ggain_arr, gbias = gbias_arr
    cdef Py_ssize_t i, j
    cdef floating mu, r, xhat, gxhat, h_mean, proj
    for i in range(rows):
        mu = mean[i]
        r = rstd[i]
        h_mean = 0
        proj = 0
        for j in range(cols):
            xhat = (x[i, j] - mu) * r
            gxhat = grad_out[i, j] * gain[j]
            h_mean += gxhat
            proj += gxhat * xhat
            ggain[j] += grad_out[i, j] * xhat
            gbias[j] += grad_out[i, j]
        h_mean /= cols
        proj /= cols
        for j in range(cols):
            xhat = (x[i, j] - mu) * r
            gx[i, j] = r * (grad_out[i, j] * gain[j] - h_mean - xhat * proj)
    return gx_arr, ggain_arr, gbias_arr


def gelu_fwd(floating[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray out_arr = np.empty(n, dtype=np.asarray(x).dtype)
    cdef floating[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v
    for i in range(n):
        v = x[i]
        out[i] = <floating>(0.5 * v * (1.0 + tanh(_GELU_C * (v + _GELU_A * v * v * v))))
    return out_arr


def gelu_bwd(floating[::1] x, floating[::1] grad_out):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray out_arr = np.empty(n, dtype=np.asarray(x).dtype)
    cdef floating[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double v, t, dinner
    for i in range(n):
        v = x[i]
        t = tanh(_GELU_C * (v + _GELU_A * v * v * v))
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * v * v)
        out[i] = <floating>(grad_out[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner))
    return out_arr
