"""Training/inference sequence assembly and the visibility mask.

A training sequence lays out one case as

    [explicit x m][implicit x n, shuffled][inquiry slots x (n+1)]
    [extra segments x R][diagnosis slot]

The n+1 inquiry slots drive symptom generation: slot i predicts the
symptoms not yet visible at step i and the last slot predicts END.  Each
extra segment re-teaches the same case in a fresh symptom order without
re-running the model: it interleaves the first n-1 symptoms of its own
permutation with n-1 inquiry slots that predict the remainder of that
permutation.  The first prediction of every segment's order and the END
prediction are shared with the base slots, so segments add 2*(n-1)
positions each and nothing when n <= 1.

Visibility is strictly "no peeking": a query may only attend to the
explicit block, to the symbols that precede its own prediction step within
its own block, and to itself.  Slots and the diagnosis position are never
visible to anything else, and segments are mutually invisible.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Polarity(IntEnum):
    """Symptom state embedding ids."""

    TRUE = 0
    FALSE = 1
    NONE = 2


class Kind(IntEnum):
    """Symptom type embedding ids."""

    EXPLICIT = 0
    IMPLICIT = 1
    SPECIAL = 2


class Role(IntEnum):
    """Structural role of a position; drives the visibility rules."""

    EXPLICIT = 0
    IMPLICIT = 1
    INQUIRY = 2
    DIAGNOSIS = 3
    SEG_SYMPTOM = 4
    SEG_INQUIRY = 5


@dataclass
class TrainingSequence:
    token_ids: np.ndarray
    state_ids: np.ndarray
    type_ids: np.ndarray
    visibility: np.ndarray  # (T, T) bool, query x key
    s_positions: list  # inquiry-slot positions, base slots first
    s_labels: list  # per-slot synchronous label sets (inquiry class ids)
    d_position: int
    disease_label: int
    # structural metadata: role per position, and for ordered blocks the
    # 1-based step index within the block; segment_id is -1 outside segments
    roles: np.ndarray
    step_index: np.ndarray
    segment_id: np.ndarray

    @property
    def length(self):
        return len(self.token_ids)


class LayoutError(ValueError):
    pass


def _check_permutation(order, implicit, what):
    if sorted(order) != sorted(implicit):
        raise LayoutError(f"{what} {order!r} is not a permutation of the implicit set {sorted(implicit)}")


def build_input(record, imp_order, vocab, segment_orders=(), sync_learning=True):
    """Assemble one training sequence.

    ``imp_order``: the implicit symptom names in generation order.
    ``segment_orders``: zero or more fresh permutations of the same names,
    one extra segment each; must be empty when the case has fewer than two
    implicit symptoms.
    """
    if vocab.num_symptoms == 0:
        raise LayoutError("empty symptom vocabulary")
    implicit_names = list(record.implicit)
    imp_order = list(imp_order)
    _check_permutation(imp_order, implicit_names, "imp_order")
    segment_orders = [list(seg) for seg in segment_orders]
    n = len(imp_order)
    if n <= 1 and segment_orders:
        raise LayoutError(f"extra segments need at least 2 implicit symptoms, got {n}")
    for seg in segment_orders:
        _check_permutation(seg, implicit_names, "segment order")

    explicit_names = list(record.explicit)
    m = len(explicit_names)
    seg_len = 2 * (n - 1) if n >= 2 else 0
    total = m + n + (n + 1) + len(segment_orders) * seg_len + 1

    token_ids = np.zeros(total, dtype=np.int64)
    state_ids = np.full(total, Polarity.NONE, dtype=np.int64)
    type_ids = np.full(total, Kind.SPECIAL, dtype=np.int64)
    roles = np.zeros(total, dtype=np.int64)
    step_index = np.zeros(total, dtype=np.int64)
    segment_id = np.full(total, -1, dtype=np.int64)

    pos = 0
    for name in explicit_names:
        token_ids[pos] = vocab.symptom_id(name)
        state_ids[pos] = Polarity.TRUE if record.explicit[name] else Polarity.FALSE
        type_ids[pos] = Kind.EXPLICIT
        roles[pos] = Role.EXPLICIT
        pos += 1
    for i, name in enumerate(imp_order, start=1):
        token_ids[pos] = vocab.symptom_id(name)
        state_ids[pos] = Polarity.TRUE if record.implicit[name] else Polarity.FALSE
        type_ids[pos] = Kind.IMPLICIT
        roles[pos] = Role.IMPLICIT
        step_index[pos] = i
        pos += 1

    s_positions = []
    s_labels = []
    for i in range(1, n + 2):
        token_ids[pos] = vocab.inquiry_token
        roles[pos] = Role.INQUIRY
        step_index[pos] = i
        s_positions.append(pos)
        if i <= n:
            if sync_learning:
                labels = [vocab.symptom_id(nm) for nm in imp_order[i - 1:]]
            else:
                labels = [vocab.symptom_id(imp_order[i - 1])]
        else:
            labels = [vocab.end_class]
        s_labels.append(labels)
        pos += 1

    for seg_idx, seg in enumerate(segment_orders):
        # segment teaches generation order seg[0], seg[1], ..., seg[n-1];
        # tokens are seg[0 : n-1], each slot k predicts the rest of seg
        for k in range(2, n + 1):
            name = seg[k - 2]
            token_ids[pos] = vocab.symptom_id(name)
            state_ids[pos] = Polarity.TRUE if record.implicit[name] else Polarity.FALSE
            type_ids[pos] = Kind.IMPLICIT
            roles[pos] = Role.SEG_SYMPTOM
            step_index[pos] = k - 1
            segment_id[pos] = seg_idx
            pos += 1
            token_ids[pos] = vocab.inquiry_token
            roles[pos] = Role.SEG_INQUIRY
            step_index[pos] = k
            segment_id[pos] = seg_idx
            s_positions.append(pos)
            if sync_learning:
                s_labels.append([vocab.symptom_id(nm) for nm in seg[k - 1:]])
            else:
                s_labels.append([vocab.symptom_id(seg[k - 1])])
            pos += 1

    token_ids[pos] = vocab.diagnosis_token
    roles[pos] = Role.DIAGNOSIS
    d_position = pos
    pos += 1
    assert pos == total

    seq = TrainingSequence(
        token_ids=token_ids,
        state_ids=state_ids,
        type_ids=type_ids,
        visibility=None,
        s_positions=s_positions,
        s_labels=s_labels,
        d_position=d_position,
        disease_label=vocab.disease_id(record.disease),
        roles=roles,
        step_index=step_index,
        segment_id=segment_id,
    )
    seq.visibility = build_attention_mask(seq)
    return seq


def build_attention_mask(seq):
    """Visibility matrix (query x key) for an assembled sequence."""
    roles = seq.roles
    rq = roles[:, None]
    rk = roles[None, :]
    sq = seq.step_index[:, None]
    sk = seq.step_index[None, :]
    same_seg = seq.segment_id[:, None] == seq.segment_id[None, :]

    imp_key = rk == Role.IMPLICIT
    seg_key = rk == Role.SEG_SYMPTOM
    vis = (rk == Role.EXPLICIT)
    vis = vis | ((rq == Role.IMPLICIT) & imp_key & (sk <= sq))
    vis = vis | ((rq == Role.INQUIRY) & imp_key & (sk < sq))
    vis = vis | ((rq == Role.DIAGNOSIS) & imp_key)
    vis = vis | ((rq == Role.SEG_SYMPTOM) & seg_key & same_seg & (sk <= sq))
    vis = vis | ((rq == Role.SEG_INQUIRY) & seg_key & same_seg & (sk < sq))
    np.fill_diagonal(vis, True)
    return vis


def build_inference_input(explicit_items, acquired_items, vocab, slot):
    """Sequence for one inference step: [explicit, acquired, slot].

    ``slot`` is ``"inquiry"`` or ``"diagnosis"``; items are (symptom_id,
    present) pairs.  Matches the training-time visibility of the final
    inquiry slot / the diagnosis position, so a state with zero acquired
    symptoms reproduces the n=0 training layout exactly.
    """
    m = len(explicit_items)
    n = len(acquired_items)
    total = m + n + 1
    token_ids = np.zeros(total, dtype=np.int64)
    state_ids = np.full(total, Polarity.NONE, dtype=np.int64)
    type_ids = np.full(total, Kind.SPECIAL, dtype=np.int64)

    for i, (sid, present) in enumerate(explicit_items):
        token_ids[i] = sid
        state_ids[i] = Polarity.TRUE if present else Polarity.FALSE
        type_ids[i] = Kind.EXPLICIT
    for j, (sid, present) in enumerate(acquired_items):
        p = m + j
        token_ids[p] = sid
        state_ids[p] = Polarity.TRUE if present else Polarity.FALSE
        type_ids[p] = Kind.IMPLICIT
    token_ids[total - 1] = vocab.inquiry_token if slot == "inquiry" else vocab.diagnosis_token

    vis = np.zeros((total, total), dtype=bool)
    vis[:, :m] = True
    for j in range(n):
        q = m + j
        vis[q, m:q + 1] = True
    vis[total - 1, m:m + n] = True
    np.fill_diagonal(vis, True)
    return token_ids, state_ids, type_ids, vis
