import numpy as np
import pytest

from diagseq.data import DiagnosisRecord, SymptomVocab
from diagseq.model import DiagnosisTransformer, ModelConfig


@pytest.fixture
def vocab8():
    return SymptomVocab(symptoms=tuple(f"s{i}" for i in range(8)),
                        diseases=("flu", "measles", "pox"))


@pytest.fixture
def record_235(vocab8):
    # the running figure-shaped case: 2 explicit, 3 implicit
    return DiagnosisRecord(explicit={"s0": True, "s1": True},
                           implicit={"s2": True, "s3": True, "s4": False},
                           disease="measles")


def tiny_model(vocab, layers=2, hidden=32, heads=2, seed=0, dropout=0.0, dtype="float64"):
    config = ModelConfig.for_vocab(vocab, layers=layers, hidden=hidden, heads=heads,
                                   dropout=dropout, dtype=dtype)
    return DiagnosisTransformer(config, rng=np.random.default_rng(seed))


def random_record(rng, vocab, m, n):
    """A record with m explicit / n implicit symptoms drawn from the vocab."""
    names = [vocab.symptoms[i] for i in rng.choice(vocab.num_symptoms, size=m + n, replace=False)]
    explicit = {name: bool(rng.integers(2)) for name in names[:m]}
    implicit = {name: bool(rng.integers(2)) for name in names[m:]}
    disease = vocab.diseases[int(rng.integers(vocab.num_diseases))]
    return DiagnosisRecord(explicit=explicit, implicit=implicit, disease=disease)
