"""Reverse-mode automatic differentiation on NumPy buffers.

Small define-by-run engine: every op builds a ``Tensor`` holding the result
plus a closure that scatters the incoming gradient into its parents.  The
op set is exactly what a small transformer needs — matmul, masked softmax,
layer norm, GELU, embeddings, dropout, the classification losses — nothing
speculative.  Heavy elementwise/reduction kernels go through
``diagseq.backend`` so the compiled extension is picked up when built.

Precision is selectable repo-wide (``float32``/``float64``); float64 is the
default and what the tight gradient-check tolerances assume.
"""

import math

import numpy as np

from . import backend

DEFAULT_DTYPE = np.float64

# Finite stand-in for the -inf entries of an additive attention mask; large
# enough that masked weights underflow to exactly 0 after the softmax.
MASK_NEG = -1e9
_MASK_THRESHOLD = -1e8


class MaskError(ValueError):
    """An attention row has every key masked."""


def set_default_dtype(dtype):
    global DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    DEFAULT_DTYPE = dtype.type


class Tensor:
    """Dense n-d value with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=DEFAULT_DTYPE if not isinstance(data, np.ndarray) else data.dtype)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        if self.data.size != 1:
            raise ValueError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g, fresh=False):
        # fresh=True promises g is exclusively owned and may be adopted as
        # the gradient buffer outright instead of copied
        if self.grad is None:
            self.grad = g if fresh else g.copy()
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return scale(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter:
    """Trainable tensor plus its Adam moment buffers."""

    __slots__ = ("tensor", "adam_m", "adam_v", "step_count", "name")

    def __init__(self, data, name=""):
        self.tensor = Tensor(np.array(data), requires_grad=True)
        self.adam_m = np.zeros_like(self.tensor.data)
        self.adam_v = np.zeros_like(self.tensor.data)
        self.step_count = 0
        self.name = name

    @property
    def data(self):
        return self.tensor.data

    @data.setter
    def data(self, value):
        self.tensor.data[...] = value

    @property
    def grad(self):
        return self.tensor.grad

    def zero_grad(self):
        self.tensor.grad = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.shape})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of NumPy broadcasting).

    Also reports whether the result is a fresh buffer (a reduction
    happened) or just ``g`` passed through."""
    fresh = False
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
        fresh = True
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
        fresh = True
    return g, fresh


def _make(data, parents, backward_fn):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=tuple(parents) if req else (),
                  _backward=backward_fn if req else None)


# ---------------------------------------------------------------------------
# elementwise / structural ops

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(*_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(*_unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bwd)


def scale(a, s):
    a = _as_tensor(a)
    s = float(s)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * s, fresh=True)

    return _make(a.data * s, (a,), bwd)


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.shape

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g.reshape(old))  # view: must be copied on adopt

    return _make(a.data.reshape(shape), (a,), bwd)


def transpose(a, axes):
    a = _as_tensor(a)
    inverse = np.argsort(axes)

    def bwd(g):
        if a.requires_grad:
            back = np.ascontiguousarray(g.transpose(inverse))
            a._accumulate(back, fresh=back.base is None and back is not g)

    return _make(np.ascontiguousarray(a.data.transpose(axes)), (a,), bwd)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shapes do not agree: {a.shape} x {b.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.shape)[0], fresh=True)
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b._accumulate(_unbroadcast(gb, b.shape)[0], fresh=True)

    return _make(out_data, (a, b), bwd)


def linear(x, w, b=None):
    out = matmul(x, w)
    return out if b is None else add(out, b)


def gelu(a):
    a = _as_tensor(a)
    flat = np.ascontiguousarray(a.data.reshape(-1))
    out_data = backend.gelu_fwd(flat).reshape(a.shape)

    def bwd(g):
        if a.requires_grad:
            gx = backend.gelu_bwd(flat, np.ascontiguousarray(g.reshape(-1)))
            a._accumulate(gx.reshape(a.shape), fresh=True)

    return _make(out_data, (a,), bwd)


def dropout(a, p, rng):
    """Inverted dropout; identity when p == 0."""
    a = _as_tensor(a)
    if p <= 0.0:
        return a
    keep = 1.0 - p
    mask = (rng.random(a.shape) < keep).astype(a.dtype) / keep

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * mask, fresh=True)

    return _make(a.data * mask, (a,), bwd)


# ---------------------------------------------------------------------------
# normalization / attention

def layer_norm(x, gain, bias, eps=1e-5):
    """Zero-mean unit-variance over the last axis, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    h = x.shape[-1]
    if gain.shape != (h,) or bias.shape != (h,):
        raise ValueError(f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match feature dim {h}")
    rows = np.ascontiguousarray(x.data.reshape(-1, h))
    y, mean, rstd = backend.layer_norm_fwd(rows, gain.data, bias.data, eps)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, h))
        gx, ggain, gbias = backend.layer_norm_bwd(rows, mean, rstd, gain.data, g2)
        if x.requires_grad:
            x._accumulate(gx.reshape(x.shape), fresh=True)
        if gain.requires_grad:
            gain._accumulate(ggain, fresh=True)
        if bias.requires_grad:
            bias._accumulate(gbias, fresh=True)

    return _make(y.reshape(x.shape), (x, gain, bias), bwd)


def masked_softmax(scores, mask):
    """Softmax over the last axis restricted to visible keys.

    ``mask`` is not differentiated: either a boolean visibility array or an
    additive float mask whose entries are 0 (visible) / <= -1e8 (masked),
    broadcastable to ``scores``.  Masked positions come out exactly 0; a row
    with nothing visible raises ``MaskError``.
    """
    scores = _as_tensor(scores)
    mask = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    if mask.dtype == bool:
        visible = mask
    else:
        visible = mask > _MASK_THRESHOLD
    visible = np.broadcast_to(visible, scores.shape)
    if not visible.any(axis=-1).all():
        raise MaskError("attention mask leaves at least one query with no visible key")
    cols = scores.shape[-1]
    rows = np.ascontiguousarray(scores.data.reshape(-1, cols))
    vis2 = np.ascontiguousarray(visible.reshape(-1, cols).astype(np.uint8))
    probs = backend.masked_softmax_fwd(rows, vis2)

    def bwd(g):
        g2 = np.ascontiguousarray(g.reshape(-1, cols))
        gs = backend.masked_softmax_bwd(probs, g2)
        if scores.requires_grad:
            scores._accumulate(gs.reshape(scores.shape), fresh=True)

    return _make(probs.reshape(scores.shape), (scores,), bwd)


# ---------------------------------------------------------------------------
# gather / scatter

def embedding(table, ids):
    """Row lookup ``table[ids]`` with scatter-add backward."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range for table of {table.shape[0]} rows")
    out_data = table.data[ids]

    def bwd(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
            table._accumulate(acc, fresh=True)

    return _make(out_data, (table,), bwd)


def take_positions(x, batch_idx, pos_idx):
    """Select rows ``x[batch_idx[i], pos_idx[i], :]`` -> (N, H)."""
    x = _as_tensor(x)
    batch_idx = np.asarray(batch_idx)
    pos_idx = np.asarray(pos_idx)
    out_data = x.data[batch_idx, pos_idx]

    def bwd(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, (batch_idx, pos_idx), g)
            x._accumulate(acc, fresh=True)

    return _make(out_data, (x,), bwd)


# ---------------------------------------------------------------------------
# reductions / losses

def mean(a):
    a = _as_tensor(a)
    n = a.data.size

    def bwd(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g) / n), fresh=True)

    return _make(a.data.mean(), (a,), bwd)


def segment_mean(x, seg_ids, num_segments):
    """Per-segment mean of a 1-d tensor; segments must be non-empty."""
    x = _as_tensor(x)
    seg_ids = np.asarray(seg_ids)
    counts = np.bincount(seg_ids, minlength=num_segments)
    if (counts == 0).any():
        raise ValueError("segment_mean: empty segment")
    sums = np.bincount(seg_ids, weights=x.data, minlength=num_segments)
    out_data = (sums / counts).astype(x.dtype)

    def bwd(g):
        if x.requires_grad:
            x._accumulate((g / counts)[seg_ids].astype(x.dtype), fresh=True)

    return _make(out_data, (x,), bwd)


def softmax_np(z):
    """Plain softmax on a NumPy vector/matrix (inference-side, no grad)."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, labels):
    """-log softmax(logits)[label].

    1-d logits with an int label give a scalar; (N, C) logits with an (N,)
    label array give the per-row loss vector.
    """
    logits = _as_tensor(logits)
    single = logits.data.ndim == 1
    z = logits.data[None, :] if single else logits.data
    lab = np.asarray([labels] if single else labels, dtype=np.int64)
    c = z.shape[-1]
    if lab.min() < 0 or lab.max() >= c:
        raise IndexError(f"class label out of range [0, {c})")
    zmax = z.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(z - zmax).sum(axis=-1)) + zmax[:, 0]
    losses = logsumexp - z[np.arange(len(lab)), lab]

    def bwd(g):
        if logits.requires_grad:
            p = softmax_np(z).astype(z.dtype)
            p[np.arange(len(lab)), lab] -= 1.0
            g2 = np.asarray(g).reshape(-1, 1)
            gz = p * g2
            logits._accumulate(gz[0] if single else gz, fresh=not single)

    out_data = losses[0] if single else losses
    return _make(out_data.astype(logits.dtype), (logits,), bwd)


def concurrent_softmax_loss(logits, labels):
    """Multi-label softmax loss where co-labeled classes drop out of each
    other's denominators, averaged over the label set.

    For labels Y and logits z:  loss = -(1/|Y|) * sum_{i in Y} log s_i with
    s_i = exp(z_i) / (sum_j (1 - y_j) exp(z_j) + exp(z_i)).  With a single
    label this is exactly ``cross_entropy``.  ``labels`` is a collection of
    class ids for 1-d logits, or a list of collections for (N, C) logits.
    """
    logits = _as_tensor(logits)
    single = logits.data.ndim == 1
    z = logits.data[None, :] if single else logits.data
    label_sets = [labels] if single else list(labels)
    n, c = z.shape
    if len(label_sets) != n:
        raise ValueError(f"{n} logit rows but {len(label_sets)} label sets")
    y = np.zeros((n, c), dtype=z.dtype)
    for i, ls in enumerate(label_sets):
        ids = sorted(set(int(v) for v in ls))
        if not ids:
            raise ValueError(f"label set {i} is empty")
        if ids[0] < 0 or ids[-1] >= c:
            raise IndexError(f"label set {i} has class out of range [0, {c})")
        y[i, ids] = 1.0
    counts = y.sum(axis=1)

    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    s_neg = ((1.0 - y) * e).sum(axis=1, keepdims=True)
    denom = s_neg + e  # denom[i, j]: denominator if j were the label
    # -(1/|Y|) sum_labels (z_i - log denom_i), in shifted coordinates
    losses = (y * (np.log(denom) - np.log(e))).sum(axis=1) / counts

    def bwd(g):
        if not logits.requires_grad:
            return
        sigma = e / denom
        # labeled k: -(1 - s_k)/|Y| ; unlabeled k: e_k/|Y| * sum_labels 1/denom_i
        inv_sum = (y / denom).sum(axis=1, keepdims=True)
        gz = np.where(y > 0, -(1.0 - sigma), e * inv_sum) / counts[:, None]
        g2 = np.asarray(g).reshape(-1, 1)
        out = gz * g2
        logits._accumulate(out[0] if single else out.astype(z.dtype), fresh=not single)

    out_data = losses[0] if single else losses
    return _make(out_data.astype(logits.dtype), (logits,), bwd)


# ---------------------------------------------------------------------------
# optimizer / gradient checking

def adam_step(params, lr, betas=(0.9, 0.999), eps=1e-8):
    """One Adam update with bias correction; zeroes gradients afterward.

    Parameters with no accumulated gradient are skipped (their moments and
    step count stay put).
    """
    b1, b2 = betas
    for p in params:
        g = p.tensor.grad
        if g is None:
            continue
        p.step_count += 1
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * g
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * np.square(g)
        m_hat = p.adam_m / (1.0 - b1 ** p.step_count)
        v_hat = p.adam_v / (1.0 - b2 ** p.step_count)
        p.tensor.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.tensor.grad = None


def clip_grad_norm(params, max_norm):
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in params:
        if p.tensor.grad is not None:
            total += float(np.square(p.tensor.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        factor = max_norm / norm
        for p in params:
            if p.tensor.grad is not None:
                p.tensor.grad *= factor
    return norm


def grad_check(f, params, step=None, max_coords_per_param=None, rng=None,
               floor=1.0):
    """Compare reverse-mode gradients of ``f()`` against central differences.

    ``f`` must be a deterministic closure over ``params`` returning a scalar
    Tensor.  The default difference step is chosen per precision (near the
    cube root of the machine epsilon): 1e-5 for float64 parameters, 3e-3
    for float32.  Reported error per coordinate is |ad - fd| / max(|ad|,
    |fd|, floor); with the default floor of 1 this is an absolute error for
    small gradients and a relative one for large ones.  Set
    ``max_coords_per_param`` to check a deterministic random subsample of
    each parameter instead of every coordinate.  Returns the max error.
    """
    for p in params:
        p.zero_grad()
    out = f()
    out.backward()
    grads = [None if p.tensor.grad is None else p.tensor.grad.copy() for p in params]

    worst = 0.0
    for p, g in zip(params, grads):
        h_base = step if step is not None else (
            3e-3 if p.tensor.dtype == np.float32 else 1e-5)
        flat = p.tensor.data.reshape(-1)
        gflat = np.zeros_like(flat) if g is None else g.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords_per_param is not None and flat.size > max_coords_per_param:
            r = rng if rng is not None else np.random.default_rng(0)
            idx = r.choice(flat.size, size=max_coords_per_param, replace=False)
        for i in idx:
            orig = flat[i]
            h = h_base * max(1.0, abs(orig))
            flat[i] = orig + h
            up = f().item()
            flat[i] = orig - h
            down = f().item()
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            ad = gflat[i]
            err = abs(ad - fd) / max(abs(ad), abs(fd), floor)
            if err > worst:
                worst = err
    for p in params:
        p.zero_grad()
    return worst
