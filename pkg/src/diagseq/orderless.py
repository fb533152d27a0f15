"""The three order-bias reducers used when a case is turned into a sequence.

The implicit symptoms of a case are a set, but the model learns them as a
sequence; left alone it would overfit whatever order the data happens to be
in.  Three mechanisms fight that:

* fresh uniform shuffle of the implicit order at every training step,
* synchronous labels: each inquiry slot is trained on *all* symptoms still
  hidden from it rather than only the next one,
* extra segments: additional shuffled replays of the same case appended to
  the sequence (see ``diagseq.layout``), teaching other generation orders
  in the same forward pass.

With all three disabled, training degenerates to plain ordered next-symptom
generation on the dataset order.
"""

from . import layout

END_SYMBOL = "<END>"


def shuffle_sequence(implicit, rng):
    """Uniformly random permutation of the implicit symptom names."""
    implicit = list(implicit)
    return [implicit[i] for i in rng.permutation(len(implicit))]


def build_sync_labels(imp_order, sync_learning=True):
    """Label sets for the n+1 base inquiry slots.

    Slot i gets every symptom at order position >= i (or just the i-th when
    ``sync_learning`` is off); the final slot always gets ``END_SYMBOL``.
    """
    imp_order = list(imp_order)
    n = len(imp_order)
    labels = []
    for i in range(1, n + 1):
        labels.append(list(imp_order[i - 1:]) if sync_learning else [imp_order[i - 1]])
    labels.append([END_SYMBOL])
    return labels


def build_repeated_sequences(implicit, repeats, rng):
    """``repeats`` fresh permutations for the extra segments.

    Empty when the case has fewer than two implicit symptoms (a segment
    would add nothing: its first prediction and END are shared with the
    base slots).
    """
    implicit = list(implicit)
    if repeats < 0:
        raise ValueError(f"repeats must be >= 0, got {repeats}")
    if len(implicit) <= 1:
        return []
    return [shuffle_sequence(implicit, rng) for _ in range(repeats)]


def make_training_sequence(record, vocab, rng, repeats=4, shuffle=True,
                           sync_learning=True):
    """Draw this step's orders and assemble the full training sequence."""
    implicit = list(record.implicit)
    imp_order = shuffle_sequence(implicit, rng) if shuffle else implicit
    segments = build_repeated_sequences(implicit, repeats, rng)
    return layout.build_input(record, imp_order, vocab, segment_orders=segments,
                              sync_learning=sync_learning)
