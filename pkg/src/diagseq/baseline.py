"""Linear softmax baselines over symptom bags.

``explicit_only_baseline`` trains on the self-reported symptoms alone (no
inquiry): the floor any inquiring agent should beat.  The full-information
variant feeds the entire goal symptom set instead: a ceiling check that the
planted structure actually rewards inquiry.
"""

import numpy as np

from . import autodiff as ad


def _bag_features(records, vocab, explicit_only):
    x = np.zeros((len(records), vocab.num_symptoms))
    y = np.zeros(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        items = dict(rec.explicit)
        if not explicit_only:
            items.update(rec.implicit)
        for name, present in items.items():
            x[i, vocab.symptom_id(name)] = 1.0 if present else -1.0
        y[i] = vocab.disease_id(rec.disease)
    return x, y


def _train_linear(x, y, num_classes, steps=400, lr=0.05, seed=0):
    rng = np.random.default_rng(seed)
    w = ad.Parameter(rng.normal(0, 0.01, size=(x.shape[1], num_classes)))
    b = ad.Parameter(np.zeros(num_classes))
    xt = ad.Tensor(x)
    for _ in range(steps):
        logits = ad.linear(xt, w.tensor, b.tensor)
        loss = ad.mean(ad.cross_entropy(logits, y))
        loss.backward()
        ad.adam_step([w, b], lr)
    return w.tensor.data, b.tensor.data


def _dacc(w, b, x, y):
    pred = np.argmax(x @ w + b, axis=1)
    return float(np.mean(pred == y))


def explicit_only_baseline(train_records, test_records, vocab, steps=400, lr=0.05, seed=0):
    """Test diagnosis accuracy of a classifier that never asks anything."""
    xtr, ytr = _bag_features(train_records, vocab, explicit_only=True)
    xte, yte = _bag_features(test_records, vocab, explicit_only=True)
    w, b = _train_linear(xtr, ytr, vocab.num_diseases, steps=steps, lr=lr, seed=seed)
    return _dacc(w, b, xte, yte)


def full_information_dacc(train_records, test_records, vocab, steps=400, lr=0.05, seed=0):
    """Accuracy with every goal symptom known (exhaustive-inquiry ceiling)."""
    xtr, ytr = _bag_features(train_records, vocab, explicit_only=False)
    xte, yte = _bag_features(test_records, vocab, explicit_only=False)
    w, b = _train_linear(xtr, ytr, vocab.num_diseases, steps=steps, lr=lr, seed=seed)
    return _dacc(w, b, xte, yte)
