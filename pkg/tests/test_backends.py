import subprocess
import sys

import numpy as np
import pytest

from diagseq import _core_py, backend

HAS_COMPILED = "compiled" in backend.available_backends()

needs_compiled = pytest.mark.skipif(not HAS_COMPILED, reason="compiled extension not built")


def _inputs(dtype):
    rng = np.random.default_rng(0)
    scores = np.ascontiguousarray(rng.normal(size=(37, 11)).astype(dtype) * 3)
    visible = rng.random((37, 11)) < 0.5
    visible[:, 3] = True
    visible = np.ascontiguousarray(visible.astype(np.uint8))
    x = np.ascontiguousarray(rng.normal(size=(29, 16)).astype(dtype))
    gain = np.linspace(0.5, 1.5, 16).astype(dtype)
    bias = np.linspace(-1, 1, 16).astype(dtype)
    flat = np.ascontiguousarray(rng.normal(size=301).astype(dtype) * 2)
    grad = np.ascontiguousarray(rng.normal(size=301).astype(dtype))
    return scores, visible, x, gain, bias, flat, grad


@needs_compiled
@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_compiled_matches_python(dtype):
    from diagseq import _core

    scores, visible, x, gain, bias, flat, grad = _inputs(dtype)
    tol = 1e-12 if dtype == np.float64 else 1e-5

    p_probs = _core_py.masked_softmax_fwd(scores, visible)
    c_probs = _core.masked_softmax_fwd(scores, visible)
    np.testing.assert_allclose(c_probs, p_probs, atol=tol)
    g = np.ascontiguousarray(scores * 0.1)
    np.testing.assert_allclose(_core.masked_softmax_bwd(c_probs, g),
                               _core_py.masked_softmax_bwd(p_probs, g), atol=tol)

    py = _core_py.layer_norm_fwd(x, gain, bias, 1e-5)
    cy = _core.layer_norm_fwd(x, gain, bias, 1e-5)
    for a, b in zip(cy, py):
        np.testing.assert_allclose(a, b, atol=tol)
    gy = np.ascontiguousarray(x * 0.3)
    for a, b in zip(_core.layer_norm_bwd(x, cy[1], cy[2], gain, gy),
                    _core_py.layer_norm_bwd(x, py[1], py[2], gain, gy)):
        np.testing.assert_allclose(a, b, atol=tol)

    np.testing.assert_allclose(_core.gelu_fwd(flat), _core_py.gelu_fwd(flat), atol=tol)
    np.testing.assert_allclose(_core.gelu_bwd(flat, grad), _core_py.gelu_bwd(flat, grad), atol=tol)


@needs_compiled
def test_compiled_rejects_fully_masked_row():
    from diagseq import _core

    scores = np.zeros((2, 3))
    visible = np.array([[1, 0, 0], [0, 0, 0]], dtype=np.uint8)
    with pytest.raises(ValueError, match="row 1"):
        _core.masked_softmax_fwd(scores, visible)


def test_set_backend_round_trip():
    original = backend.active_backend()
    try:
        for name in backend.available_backends():
            backend.set_backend(name)
            assert backend.active_backend() == name
    finally:
        backend.set_backend(original)
    with pytest.raises(ValueError, match="unknown backend"):
        backend.set_backend("jit")


def test_env_var_forces_python_backend():
    code = ("import diagseq.backend as b; print(b.active_backend())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"DIAGSEQ_BACKEND": "python", "PATH": "/usr/bin:/bin"})
    assert out.stdout.strip() == "python"


def test_forward_identical_across_backends(vocab8, record_235):
    if not HAS_COMPILED:
        pytest.skip("compiled extension not built")
    from conftest import tiny_model
    from diagseq.layout import build_input
    from diagseq.model import pack_batch

    model = tiny_model(vocab8)
    seq = build_input(record_235, list(record_235.implicit), vocab8,
                      segment_orders=[list(record_235.implicit)[::-1]])
    batch = pack_batch([seq])
    outs = {}
    original = backend.active_backend()
    try:
        for name in ("python", "compiled"):
            backend.set_backend(name)
            s_logits, d_logits = model.forward(batch)
            outs[name] = (s_logits.data.copy(), d_logits.data.copy())
    finally:
        backend.set_backend(original)
    np.testing.assert_allclose(outs["python"][0], outs["compiled"][0], atol=1e-10)
    np.testing.assert_allclose(outs["python"][1], outs["compiled"][1], atol=1e-10)
