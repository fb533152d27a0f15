import json

import numpy as np
import pytest

from diagseq.data import save_dataset
from diagseq.synthetic import (GeneratorSpec, GeneratorSpecError,
                               acceptance_spec, generate_synthetic)


def test_single_certain_symptom_every_record_identical():
    spec = GeneratorSpec(diseases=["d"], symptoms=["s"], rows=[[1.0]],
                         explicit_count={1: 1.0}, denial_rate=0.0)
    records = generate_synthetic(spec, 20, seed=5)
    assert all(r == records[0] for r in records)
    assert records[0].explicit == {"s": True}
    assert records[0].implicit == {}


def test_same_seed_byte_identical(tmp_path):
    spec = acceptance_spec(n_diseases=4, n_symptoms=12)
    paths = []
    for run in range(2):
        records = generate_synthetic(spec, 100, seed=42)
        path = tmp_path / f"run{run}.json"
        save_dataset(records, path)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1]


def test_different_seeds_differ():
    spec = acceptance_spec(n_diseases=4, n_symptoms=12)
    assert generate_synthetic(spec, 50, seed=1) != generate_synthetic(spec, 50, seed=2)


def test_records_satisfy_invariants():
    spec = acceptance_spec(n_diseases=5, n_symptoms=16, denial_rate=0.3)
    for rec in generate_synthetic(spec, 300, seed=9):
        assert rec.explicit  # non-empty self-report
        assert not (rec.explicit.keys() & rec.implicit.keys())
        assert all(v is True for v in rec.explicit.values())


def test_explicit_count_distribution_respected():
    spec = acceptance_spec(n_diseases=4, n_symptoms=20)
    spec.explicit_count = {1: 0.5, 2: 0.5}
    spec.__post_init__()
    counts = [len(r.explicit) for r in generate_synthetic(spec, 500, seed=3)]
    assert set(counts) <= {1, 2}
    share_two = sum(c == 2 for c in counts) / len(counts)
    assert 0.35 < share_two < 0.65


def test_implicit_count_cap():
    spec = acceptance_spec(n_diseases=4, n_symptoms=20)
    spec.implicit_count = {1: 1.0}
    spec.__post_init__()
    assert all(len(r.implicit) <= 1 for r in generate_synthetic(spec, 200, seed=4))


def test_probability_rows_validated():
    with pytest.raises(GeneratorSpecError, match=r"\[0, 1\]"):
        GeneratorSpec(diseases=["d"], symptoms=["s"], rows=[[1.5]])
    with pytest.raises(GeneratorSpecError, match="shape"):
        GeneratorSpec(diseases=["d"], symptoms=["s", "t"], rows=[[0.5]])
    with pytest.raises(GeneratorSpecError, match="denial_rate"):
        GeneratorSpec(diseases=["d"], symptoms=["s"], rows=[[0.5]], denial_rate=2.0)


def test_spec_json_round_trip(tmp_path):
    spec = acceptance_spec(n_diseases=3, n_symptoms=9)
    path = tmp_path / "spec.json"
    spec.save(path)
    loaded = GeneratorSpec.load(path)
    assert loaded.diseases == spec.diseases
    assert loaded.symptoms == spec.symptoms
    np.testing.assert_array_equal(loaded.rows, spec.rows)
    assert loaded.seed == spec.seed
    # the JSON document is plain data
    obj = json.loads(path.read_text())
    assert set(obj) == {"diseases", "symptoms", "rows", "explicit_count",
                        "implicit_count", "denial_rate", "seed"}


def test_empirical_frequencies_track_rows():
    spec = acceptance_spec()
    records = generate_synthetic(spec, 2000, seed=spec.seed)
    count = np.zeros((len(spec.diseases), len(spec.symptoms)))
    totals = np.zeros(len(spec.diseases))
    d_index = {d: i for i, d in enumerate(spec.diseases)}
    s_index = {s: i for i, s in enumerate(spec.symptoms)}
    for rec in records:
        d = d_index[rec.disease]
        totals[d] += 1
        for name, present in rec.goal().items():
            if present:
                count[d, s_index[name]] += 1
    freq = count / totals[:, None]
    assert np.abs(freq - spec.rows).max() <= 0.05
