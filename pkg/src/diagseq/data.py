"""Dataset schema, vocabulary, and the rule-based patient simulator.

A case record holds the symptoms a patient volunteers up front (explicit),
the ones only discoverable by asking (implicit, each with a true/false
polarity), and the target disease.  The on-disk format is a JSON array of
objects with exactly the keys ``explicit_symptoms``, ``implicit_symptoms``
and ``disease_tag``.
"""

import json
from dataclasses import dataclass, field
from enum import Enum


class Answer(Enum):
    """Reply to a symptom inquiry."""

    TRUE = "true"
    FALSE = "false"
    NOT_SURE = "not_sure"

    @classmethod
    def from_wire(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"answer must be one of 'true', 'false', 'not_sure'; got {value!r}") from None


class DatasetError(ValueError):
    """Malformed dataset file or record."""


_RECORD_KEYS = {"explicit_symptoms", "implicit_symptoms", "disease_tag"}


@dataclass(frozen=True)
class DiagnosisRecord:
    """One diagnosis case: explicit symptoms, implicit symptoms, disease."""

    explicit: dict
    implicit: dict
    disease: str

    def __post_init__(self):
        for side, mapping in (("explicit", self.explicit), ("implicit", self.implicit)):
            for name, polarity in mapping.items():
                if not isinstance(name, str) or not name:
                    raise DatasetError(f"{side} symptom name must be a non-empty string, got {name!r}")
                if not isinstance(polarity, bool):
                    raise DatasetError(f"{side} symptom {name!r} has non-boolean value {polarity!r}")
        overlap = self.explicit.keys() & self.implicit.keys()
        if overlap:
            raise DatasetError(f"symptoms in both explicit and implicit sets: {sorted(overlap)}")
        if not isinstance(self.disease, str) or not self.disease:
            raise DatasetError(f"disease_tag must be a non-empty string, got {self.disease!r}")

    def goal(self):
        """All symptoms the simulator can answer definitively."""
        merged = dict(self.explicit)
        merged.update(self.implicit)
        return merged


def _reject_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise DatasetError(f"duplicate symptom name {key!r} within one object")
        obj[key] = value
    return obj


def _record_from_obj(obj, index):
    if not isinstance(obj, dict):
        raise DatasetError(f"record {index}: expected an object, got {type(obj).__name__}")
    unknown = obj.keys() - _RECORD_KEYS
    if unknown:
        raise DatasetError(f"record {index}: unknown fields {sorted(unknown)}")
    missing = _RECORD_KEYS - obj.keys()
    if missing:
        raise DatasetError(f"record {index}: missing fields {sorted(missing)}")
    try:
        return DiagnosisRecord(
            explicit=dict(obj["explicit_symptoms"]),
            implicit=dict(obj["implicit_symptoms"]),
            disease=obj["disease_tag"],
        )
    except DatasetError as exc:
        raise DatasetError(f"record {index}: {exc}") from None


def load_dataset(path):
    """Read a JSON dataset file into validated records."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh, object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, list):
        raise DatasetError(f"{path}: top level must be a JSON array of records")
    return [_record_from_obj(obj, i) for i, obj in enumerate(raw)]


def save_dataset(records, path):
    payload = [
        {
            "explicit_symptoms": rec.explicit,
            "implicit_symptoms": rec.implicit,
            "disease_tag": rec.disease,
        }
        for rec in records
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class SymptomVocab:
    """Dense, stable ids for symptoms and diseases.

    Symptom id == inquiry class id; the extra inquiry class ``end_class``
    (the highest id) means "stop asking".  Token ids extend the symptom ids
    with the two special positions: the inquiry slot and the diagnosis slot.
    """

    symptoms: tuple
    diseases: tuple
    _sym_index: dict = field(init=False, repr=False, compare=False)
    _dis_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_sym_index", {s: i for i, s in enumerate(self.symptoms)})
        object.__setattr__(self, "_dis_index", {d: i for i, d in enumerate(self.diseases)})

    @property
    def num_symptoms(self):
        return len(self.symptoms)

    @property
    def num_diseases(self):
        return len(self.diseases)

    @property
    def num_inquiry_classes(self):
        # all symptoms plus END
        return len(self.symptoms) + 1

    @property
    def end_class(self):
        return len(self.symptoms)

    @property
    def inquiry_token(self):
        return len(self.symptoms)

    @property
    def diagnosis_token(self):
        return len(self.symptoms) + 1

    @property
    def num_token_ids(self):
        return len(self.symptoms) + 2

    def symptom_id(self, name):
        try:
            return self._sym_index[name]
        except KeyError:
            raise KeyError(f"unknown symptom {name!r}") from None

    def symptom_name(self, sid):
        return self.symptoms[sid]

    def disease_id(self, name):
        try:
            return self._dis_index[name]
        except KeyError:
            raise KeyError(f"unknown disease {name!r}") from None

    def disease_name(self, did):
        return self.diseases[did]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"version": 1, "symptoms": list(self.symptoms), "diseases": list(self.diseases)},
                      fh, ensure_ascii=False)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(symptoms=tuple(obj["symptoms"]), diseases=tuple(obj["diseases"]))


def build_vocab(records):
    """Collect every symptom/disease name, sorted for stable ids."""
    if not records:
        raise DatasetError("cannot build a vocabulary from zero records")
    symptoms = set()
    diseases = set()
    for rec in records:
        symptoms.update(rec.explicit)
        symptoms.update(rec.implicit)
        diseases.add(rec.disease)
    return SymptomVocab(symptoms=tuple(sorted(symptoms)), diseases=tuple(sorted(diseases)))


def simulator_answer(record, symptom, vocab=None):
    """Answer one inquiry against a record's goal.

    TRUE/FALSE when the symptom appears (with that polarity) in the
    explicit or implicit set, NOT_SURE otherwise.  ``symptom`` may be a
    name, or an id when ``vocab`` is given.
    """
    if isinstance(symptom, str):
        name = symptom
    else:
        if vocab is None:
            raise ValueError("symptom given as id but no vocab supplied")
        name = vocab.symptom_name(symptom)
    goal = record.goal()
    if name not in goal:
        return Answer.NOT_SURE
    return Answer.TRUE if goal[name] else Answer.FALSE
