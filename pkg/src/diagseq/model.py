"""The inquiry/diagnosis transformer.

Input positions are embedded as token + state + type sums (no position
embedding: order information is carried entirely by the visibility mask,
which is what makes attention over a visible set order-independent).
Pre-layer-norm blocks with residual connections, GELU feed-forward of
width ``ffn_mult * hidden``, a final layer norm, then two linear heads:
inquiry-class logits read at the inquiry slots, disease logits at the
diagnosis slot.

The training loss is disease cross-entropy plus the mean over all inquiry
slots of the concurrent-softmax loss on their synchronous label sets.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .layout import Kind, Polarity

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    num_token_ids: int
    num_inquiry_classes: int
    num_diseases: int
    layers: int = 5
    hidden: int = 512
    heads: int = 8
    ffn_mult: int = 4
    dropout: float = 0.1
    num_states: int = 3
    num_kinds: int = 3
    dtype: str = "float64"

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden size {self.hidden} is not divisible by {self.heads} heads")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @classmethod
    def for_vocab(cls, vocab, **overrides):
        return cls(num_token_ids=vocab.num_token_ids,
                   num_inquiry_classes=vocab.num_inquiry_classes,
                   num_diseases=vocab.num_diseases, **overrides)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class PackedBatch:
    """Padded arrays for a batch of training sequences."""

    token_ids: np.ndarray  # (B, T)
    state_ids: np.ndarray
    type_ids: np.ndarray
    visibility: np.ndarray  # (B, T, T); padded queries see only themselves
    s_batch_idx: np.ndarray  # (Ns,) example index of each inquiry slot
    s_pos: np.ndarray  # (Ns,) position of each inquiry slot
    s_label_sets: list  # (Ns,) label sets
    d_pos: np.ndarray  # (B,)
    disease_labels: np.ndarray  # (B,)

    @property
    def size(self):
        return len(self.token_ids)


def pack_batch(seqs):
    b = len(seqs)
    t = max(s.length for s in seqs)
    token_ids = np.zeros((b, t), dtype=np.int64)
    state_ids = np.full((b, t), Polarity.NONE, dtype=np.int64)
    type_ids = np.full((b, t), Kind.SPECIAL, dtype=np.int64)
    vis = np.zeros((b, t, t), dtype=bool)
    s_batch_idx, s_pos, s_label_sets = [], [], []
    d_pos = np.zeros(b, dtype=np.int64)
    disease = np.zeros(b, dtype=np.int64)
    for i, seq in enumerate(seqs):
        n = seq.length
        token_ids[i, :n] = seq.token_ids
        state_ids[i, :n] = seq.state_ids
        type_ids[i, :n] = seq.type_ids
        vis[i, :n, :n] = seq.visibility
        for p, labels in zip(seq.s_positions, seq.s_labels):
            s_batch_idx.append(i)
            s_pos.append(p)
            s_label_sets.append(labels)
        d_pos[i] = seq.d_position
        disease[i] = seq.disease_label
        vis[i, range(n, t), range(n, t)] = True  # padded queries self-attend
    return PackedBatch(
        token_ids=token_ids, state_ids=state_ids, type_ids=type_ids,
        visibility=vis,
        s_batch_idx=np.asarray(s_batch_idx, dtype=np.int64),
        s_pos=np.asarray(s_pos, dtype=np.int64),
        s_label_sets=s_label_sets,
        d_pos=d_pos, disease_labels=disease,
    )


def _truncated_normal(rng, shape, std, dtype):
    """Normal(0, std) redrawn until within 2 std, the usual embedding init."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(dtype)


class DiagnosisTransformer:
    def __init__(self, config, rng=None, init=True):
        self.config = config
        self.params = {}
        if init:
            rng = rng if rng is not None else np.random.default_rng(0)
            self._init_params(rng)

    def _add(self, name, data):
        self.params[name] = ad.Parameter(data, name=name)

    def _init_params(self, rng, std=0.02):
        cfg = self.config
        dt = cfg.np_dtype
        h = cfg.hidden

        def tn(*shape):
            return _truncated_normal(rng, shape, std, dt)

        def zeros(*shape):
            return np.zeros(shape, dtype=dt)

        def ones(*shape):
            return np.ones(shape, dtype=dt)

        self._add("tok_emb", tn(cfg.num_token_ids, h))
        self._add("state_emb", tn(cfg.num_states, h))
        self._add("kind_emb", tn(cfg.num_kinds, h))
        for i in range(cfg.layers):
            self._add(f"l{i}.ln1.g", ones(h))
            self._add(f"l{i}.ln1.b", zeros(h))
            for proj in ("wq", "wk", "wv", "wo"):
                self._add(f"l{i}.attn.{proj}", tn(h, h))
                self._add(f"l{i}.attn.{proj[1]}b", zeros(h))
            self._add(f"l{i}.ln2.g", ones(h))
            self._add(f"l{i}.ln2.b", zeros(h))
            self._add(f"l{i}.ffn.w1", tn(h, cfg.ffn_mult * h))
            self._add(f"l{i}.ffn.b1", zeros(cfg.ffn_mult * h))
            self._add(f"l{i}.ffn.w2", tn(cfg.ffn_mult * h, h))
            self._add(f"l{i}.ffn.b2", zeros(h))
        self._add("ln_f.g", ones(h))
        self._add("ln_f.b", zeros(h))
        self._add("head_sym.w", tn(h, cfg.num_inquiry_classes))
        self._add("head_sym.b", zeros(cfg.num_inquiry_classes))
        self._add("head_dis.w", tn(h, cfg.num_diseases))
        self._add("head_dis.b", zeros(cfg.num_diseases))

    def parameters(self):
        return list(self.params.values())

    def _p(self, name):
        return self.params[name].tensor

    def forward(self, batch, train=False, rng=None):
        """Returns (inquiry-slot logits (Ns, C_inq), disease logits (B, C_dis))."""
        cfg = self.config
        if train and cfg.dropout > 0 and rng is None:
            raise ValueError("training forward with dropout needs an rng")
        b, t = batch.token_ids.shape
        heads = cfg.heads
        hd = cfg.hidden // heads

        x = ad.add(ad.add(ad.embedding(self._p("tok_emb"), batch.token_ids),
                          ad.embedding(self._p("state_emb"), batch.state_ids)),
                   ad.embedding(self._p("kind_emb"), batch.type_ids))
        mask = batch.visibility[:, None, :, :]  # broadcast over heads

        def drop(v):
            return ad.dropout(v, cfg.dropout, rng) if train else v

        for i in range(cfg.layers):
            hn = ad.layer_norm(x, self._p(f"l{i}.ln1.g"), self._p(f"l{i}.ln1.b"))
            q = ad.linear(hn, self._p(f"l{i}.attn.wq"), self._p(f"l{i}.attn.qb"))
            k = ad.linear(hn, self._p(f"l{i}.attn.wk"), self._p(f"l{i}.attn.kb"))
            v = ad.linear(hn, self._p(f"l{i}.attn.wv"), self._p(f"l{i}.attn.vb"))
            q = ad.transpose(ad.reshape(q, (b, t, heads, hd)), (0, 2, 1, 3))
            k = ad.transpose(ad.reshape(k, (b, t, heads, hd)), (0, 2, 1, 3))
            v = ad.transpose(ad.reshape(v, (b, t, heads, hd)), (0, 2, 1, 3))
            scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(hd))
            probs = drop(ad.masked_softmax(scores, mask))
            ctx = ad.reshape(ad.transpose(ad.matmul(probs, v), (0, 2, 1, 3)), (b, t, cfg.hidden))
            x = ad.add(x, ad.linear(ctx, self._p(f"l{i}.attn.wo"), self._p(f"l{i}.attn.ob")))

            hn = ad.layer_norm(x, self._p(f"l{i}.ln2.g"), self._p(f"l{i}.ln2.b"))
            inner = drop(ad.gelu(ad.linear(hn, self._p(f"l{i}.ffn.w1"), self._p(f"l{i}.ffn.b1"))))
            x = ad.add(x, ad.linear(inner, self._p(f"l{i}.ffn.w2"), self._p(f"l{i}.ffn.b2")))

        x = ad.layer_norm(x, self._p("ln_f.g"), self._p("ln_f.b"))
        s_h = ad.take_positions(x, batch.s_batch_idx, batch.s_pos)
        d_h = ad.take_positions(x, np.arange(b), batch.d_pos)
        s_logits = ad.linear(s_h, self._p("head_sym.w"), self._p("head_sym.b"))
        d_logits = ad.linear(d_h, self._p("head_dis.w"), self._p("head_dis.b"))
        return s_logits, d_logits

    def loss(self, s_logits, d_logits, batch):
        """Total loss tensor plus the float means of its two components."""
        s_losses = ad.concurrent_softmax_loss(s_logits, batch.s_label_sets)
        l_sym = ad.segment_mean(s_losses, batch.s_batch_idx, batch.size)
        l_dis = ad.cross_entropy(d_logits, batch.disease_labels)
        total = ad.mean(ad.add(l_sym, l_dis))
        return total, float(l_dis.data.mean()), float(l_sym.data.mean())

    # -- persistence ---------------------------------------------------

    def save(self, path, vocab):
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "vocab": {"symptoms": list(vocab.symptoms), "diseases": list(vocab.diseases)},
        }
        arrays = {f"p:{name}": p.tensor.data for name, p in self.params.items()}
        np.savez(path, _meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path):
        from .data import SymptomVocab

        with np.load(path, allow_pickle=False) as blob:
            meta = json.loads(str(blob["_meta"][()]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
            config = ModelConfig(**meta["config"])
            model = cls(config, init=False)
            rng = np.random.default_rng(0)
            model._init_params(rng)  # establishes names/shapes
            for name, p in model.params.items():
                key = f"p:{name}"
                if key not in blob:
                    raise ValueError(f"checkpoint missing parameter {name}")
                data = blob[key]
                if data.shape != p.tensor.data.shape:
                    raise ValueError(f"checkpoint parameter {name} has shape {data.shape}, expected {p.tensor.data.shape}")
                p.tensor.data[...] = data
        vocab = SymptomVocab(symptoms=tuple(meta["vocab"]["symptoms"]),
                             diseases=tuple(meta["vocab"]["diseases"]))
        return model, vocab
