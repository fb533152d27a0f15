"""Parametric synthetic dataset generator.

Plants a controllable disease/symptom structure: each disease has a row of
per-symptom presence probabilities; a record samples a disease uniformly,
draws present symptoms from its row, optionally salts in denied (false)
symptoms, then reveals a configured number of the positives as the
patient's self-report and leaves the rest to be discovered by inquiry.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .data import DiagnosisRecord


class GeneratorSpecError(ValueError):
    pass


def _normalize_count_dist(dist, what):
    if not dist:
        raise GeneratorSpecError(f"{what} distribution is empty")
    counts = []
    probs = []
    for key, prob in dist.items():
        count = int(key)
        if count < 0:
            raise GeneratorSpecError(f"{what} count {count} is negative")
        if prob < 0:
            raise GeneratorSpecError(f"{what} probability {prob} is negative")
        counts.append(count)
        probs.append(float(prob))
    total = sum(probs)
    if total <= 0:
        raise GeneratorSpecError(f"{what} distribution sums to zero")
    return np.array(counts), np.array(probs) / total


@dataclass
class GeneratorSpec:
    """Declarative recipe for a synthetic dataset."""

    diseases: list
    symptoms: list
    rows: list  # per-disease symptom presence probabilities, shape (D, S)
    explicit_count: dict = field(default_factory=lambda: {1: 1.0})
    implicit_count: dict = None  # None: keep every remaining sampled symptom
    denial_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.shape != (len(self.diseases), len(self.symptoms)):
            raise GeneratorSpecError(
                f"rows shape {rows.shape} does not match {len(self.diseases)} diseases x {len(self.symptoms)} symptoms")
        if (rows < 0).any() or (rows > 1).any():
            raise GeneratorSpecError("symptom probabilities must lie in [0, 1]")
        if not 0 <= self.denial_rate <= 1:
            raise GeneratorSpecError(f"denial_rate {self.denial_rate} must lie in [0, 1]")
        self.rows = rows
        self._exp_counts = _normalize_count_dist(self.explicit_count, "explicit_count")
        self._imp_counts = None if self.implicit_count is None else _normalize_count_dist(
            self.implicit_count, "implicit_count")

    def to_json(self):
        return {
            "diseases": list(self.diseases),
            "symptoms": list(self.symptoms),
            "rows": self.rows.tolist(),
            "explicit_count": {str(k): v for k, v in self.explicit_count.items()},
            "implicit_count": None if self.implicit_count is None
            else {str(k): v for k, v in self.implicit_count.items()},
            "denial_rate": self.denial_rate,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            diseases=list(obj["diseases"]),
            symptoms=list(obj["symptoms"]),
            rows=obj["rows"],
            explicit_count={int(k): float(v) for k, v in obj.get("explicit_count", {"1": 1.0}).items()},
            implicit_count=None if obj.get("implicit_count") is None
            else {int(k): float(v) for k, v in obj["implicit_count"].items()},
            denial_rate=float(obj.get("denial_rate", 0.05)),
            seed=int(obj.get("seed", 0)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def generate_synthetic(spec, n_records, seed=None):
    """Draw ``n_records`` cases; byte-identical for identical seeds."""
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    exp_counts, exp_probs = spec._exp_counts
    records = []
    n_sym = len(spec.symptoms)
    for _ in range(n_records):
        d = int(rng.integers(len(spec.diseases)))
        present = rng.random(n_sym) < spec.rows[d]
        if not present.any():
            present[int(np.argmax(spec.rows[d]))] = True
        denied = (~present) & (rng.random(n_sym) < spec.denial_rate)

        true_ids = rng.permutation(np.flatnonzero(present))
        n_exp = int(rng.choice(exp_counts, p=exp_probs))
        n_exp = max(1, min(n_exp, len(true_ids)))
        explicit = {spec.symptoms[i]: True for i in true_ids[:n_exp]}

        pool = [(int(i), True) for i in true_ids[n_exp:]]
        pool += [(int(i), False) for i in np.flatnonzero(denied)]
        order = rng.permutation(len(pool))
        if spec._imp_counts is not None:
            imp_counts, imp_probs = spec._imp_counts
            n_imp = min(int(rng.choice(imp_counts, p=imp_probs)), len(pool))
            order = order[:n_imp]
        implicit = {spec.symptoms[pool[j][0]]: pool[j][1] for j in order}

        records.append(DiagnosisRecord(explicit=explicit, implicit=implicit,
                                       disease=spec.diseases[d]))
    return records


def acceptance_spec(n_diseases=10, n_symptoms=40, signature_size=5, overlap=3,
                    signature_prob=0.96, noise_prob=0.02, denial_rate=0.02,
                    seed=2026):
    """The default planted-structure recipe used by the acceptance suite.

    Each disease has a window of ``signature_size`` near-certain symptoms;
    adjacent windows share ``overlap`` of them, so a single self-reported
    symptom is ambiguous between neighbours while the full symptom set
    separates the diseases well.  Probabilities are kept extreme so that
    empirical per-disease frequencies concentrate tightly around the rows.
    """
    diseases = [f"disease_{d:02d}" for d in range(n_diseases)]
    symptoms = [f"symptom_{s:02d}" for s in range(n_symptoms)]
    rows = np.full((n_diseases, n_symptoms), noise_prob)
    stride = signature_size - overlap
    for d in range(n_diseases):
        start = d * stride
        for k in range(signature_size):
            rows[d, (start + k) % n_symptoms] = signature_prob
    return GeneratorSpec(
        diseases=diseases,
        symptoms=symptoms,
        rows=rows.tolist(),
        explicit_count={1: 1.0},
        implicit_count=None,
        denial_rate=denial_rate,
        seed=seed,
    )
