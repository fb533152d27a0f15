from diagseq.baseline import explicit_only_baseline, full_information_dacc
from diagseq.data import DiagnosisRecord, build_vocab
from diagseq.synthetic import acceptance_spec, generate_synthetic


def test_linearly_separable_toy_data_scores_one():
    records = []
    for _ in range(30):
        records.append(DiagnosisRecord(explicit={"a": True, "b": False}, implicit={}, disease="x"))
        records.append(DiagnosisRecord(explicit={"b": True}, implicit={}, disease="y"))
    vocab = build_vocab(records)
    assert explicit_only_baseline(records, records, vocab) == 1.0


def test_inquiry_headroom_on_planted_structure():
    spec = acceptance_spec(n_diseases=5, n_symptoms=20)
    train = generate_synthetic(spec, 400, seed=3)
    test = generate_synthetic(spec, 150, seed=4)
    vocab = build_vocab(train + test)
    base = explicit_only_baseline(train, test, vocab)
    full = full_information_dacc(train, test, vocab)
    assert full > base + 0.15


def test_deterministic():
    spec = acceptance_spec(n_diseases=3, n_symptoms=9)
    train = generate_synthetic(spec, 120, seed=5)
    test = generate_synthetic(spec, 60, seed=6)
    vocab = build_vocab(train + test)
    assert explicit_only_baseline(train, test, vocab) == explicit_only_baseline(train, test, vocab)
