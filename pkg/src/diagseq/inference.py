"""Thresholded generative inference and the evaluation harness.

One dialogue: repeatedly put an inquiry slot after the known symptoms,
read the model's distribution over inquiry classes, and ask the best not
yet inquired candidate.  Stopping: END mass above ``rho_e``, the candidate
about to be asked below ``rho_p``, the turn budget, or every symptom
already inquired.  Not-sure answers consume a turn and mask the symptom
but never enter the sequence; true/false answers are appended and the
distribution is recomputed.  Afterwards a diagnosis slot is appended and
the disease head read out.

``DialogueEngine`` is resumable between answers, so the simulator-driven
evaluator and the interactive HTTP service share this single code path.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import autodiff as ad
from .data import Answer, simulator_answer
from .layout import build_inference_input
from .model import PackedBatch


class StopReason(Enum):
    END_SYMBOL = "end_symbol"
    LOW_PROBABILITY = "low_probability"
    TURN_BUDGET = "turn_budget"
    EXHAUSTED = "exhausted"


@dataclass
class InferenceConfig:
    rho_e: float = 0.9
    rho_p: float = 0.01
    max_turns: int = 20

    def __post_init__(self):
        if not 0 < self.rho_p < self.rho_e <= 1:
            raise ValueError(
                f"thresholds must satisfy 0 < rho_p < rho_e <= 1, got rho_p={self.rho_p}, rho_e={self.rho_e}")
        if self.max_turns < 0:
            raise ValueError(f"max_turns must be >= 0, got {self.max_turns}")


@dataclass
class DialogueState:
    known: list = field(default_factory=list)  # (symptom_id, present), explicit first
    explicit_len: int = 0
    inquired: set = field(default_factory=set)
    turns: int = 0
    stop_reason: StopReason = None
    diagnosis: tuple = None  # (disease_id, probability)
    distribution: np.ndarray = None  # disease distribution once diagnosed

    @property
    def acquired(self):
        """Symptoms learned through inquiry, in acquisition order."""
        return self.known[self.explicit_len:]


def _slot_logits(model, vocab, explicit, acquired, slot):
    token_ids, state_ids, type_ids, vis = build_inference_input(explicit, acquired, vocab, slot)
    t = len(token_ids)
    last = t - 1
    if slot == "inquiry":
        s_batch, s_pos = np.array([0]), np.array([last])
        d_pos = np.array([last])  # unused; points at the slot itself
    else:
        s_batch, s_pos = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        d_pos = np.array([last])
    batch = PackedBatch(
        token_ids=token_ids[None, :], state_ids=state_ids[None, :],
        type_ids=type_ids[None, :], visibility=vis[None, :, :],
        s_batch_idx=s_batch, s_pos=s_pos, s_label_sets=[],
        d_pos=d_pos, disease_labels=np.zeros(1, dtype=np.int64),
    )
    s_logits, d_logits = model.forward(batch, train=False)
    return s_logits.data[0] if slot == "inquiry" else d_logits.data[0]


def next_inquiry_distribution(model, vocab, explicit, acquired):
    """Softmax over inquiry classes at a fresh inquiry slot."""
    return ad.softmax_np(_slot_logits(model, vocab, explicit, acquired, "inquiry"))


def diagnose(model, vocab, explicit, acquired):
    """(argmax disease id, full distribution) at a fresh diagnosis slot."""
    dist = ad.softmax_np(_slot_logits(model, vocab, explicit, acquired, "diagnosis"))
    return int(np.argmax(dist)), dist


class DialogueEngine:
    """One dialogue, advanced answer by answer.

    After construction either ``pending_question`` holds the symptom id to
    ask, or the dialogue already stopped and ``state.diagnosis`` is set.
    Explicit symptoms are treated as already inquired: the agent never asks
    about what the patient volunteered.
    """

    def __init__(self, model, vocab, config, explicit):
        self.model = model
        self.vocab = vocab
        self.config = config
        self.state = DialogueState(known=list(explicit), explicit_len=len(explicit),
                                   inquired={sid for sid, _ in explicit})
        self.pending_question = None
        self._candidates = None  # descending-probability class order
        self._dist = None
        self._cursor = 0
        self._advance()

    @property
    def done(self):
        return self.state.stop_reason is not None

    def _stop(self, reason):
        self.state.stop_reason = reason
        self.pending_question = None
        disease, dist = diagnose(self.model, self.vocab,
                                 self.state.known[:self.state.explicit_len],
                                 self.state.acquired)
        self.state.diagnosis = (disease, float(dist[disease]))
        self.state.distribution = dist

    def _advance(self):
        state, cfg, vocab = self.state, self.config, self.vocab
        while True:
            if state.turns >= cfg.max_turns:
                self._stop(StopReason.TURN_BUDGET)
                return
            if self._candidates is None:
                dist = next_inquiry_distribution(self.model, vocab,
                                                 state.known[:state.explicit_len],
                                                 state.acquired)
                if dist[vocab.end_class] > cfg.rho_e:
                    self._stop(StopReason.END_SYMBOL)
                    return
                order = np.argsort(-dist, kind="stable")
                self._candidates = [int(c) for c in order if c != vocab.end_class]
                self._dist = dist
                self._cursor = 0
            while self._cursor < len(self._candidates):
                cand = self._candidates[self._cursor]
                if cand in state.inquired:
                    self._cursor += 1
                    continue
                if self._dist[cand] < cfg.rho_p:
                    self._stop(StopReason.LOW_PROBABILITY)
                    return
                self.pending_question = cand
                return
            self._stop(StopReason.EXHAUSTED)
            return

    def submit_answer(self, answer):
        if self.pending_question is None:
            raise RuntimeError("no question pending")
        sid = self.pending_question
        self.pending_question = None
        self.state.turns += 1
        self.state.inquired.add(sid)
        if answer is Answer.NOT_SURE:
            self._cursor += 1  # keep scanning the same distribution
        else:
            self.state.known.append((sid, answer is Answer.TRUE))
            self._candidates = None
        self._advance()


def run_dialogue(answer_fn, model, vocab, config, explicit):
    """Drive a full dialogue against an answer source; returns the state."""
    engine = DialogueEngine(model, vocab, config, explicit)
    while engine.pending_question is not None:
        engine.submit_answer(answer_fn(engine.pending_question))
    return engine.state


def simulator_source(record, vocab):
    def answer(symptom_id):
        return simulator_answer(record, symptom_id, vocab)

    return answer


def dialogue_for_record(record, model, vocab, config):
    explicit = [(vocab.symptom_id(name), present) for name, present in record.explicit.items()]
    return run_dialogue(simulator_source(record, vocab), model, vocab, config, explicit)


def evaluate(records, model, vocab, config, dialogue_fn=None):
    """Dialogue-free metrics over a test set.

    dacc: fraction of correct argmax diagnoses.  srec: mean recall of the
    implicit symptoms (cases with none count as 1.0).  aturn: mean inquiry
    turns, not-sure misses included.
    """
    if not records:
        raise ValueError("evaluate needs a non-empty record list")
    dialogue_fn = dialogue_fn or (lambda rec: dialogue_for_record(rec, model, vocab, config))
    correct = 0
    recalls = []
    turns = []
    reasons = {}
    for rec in records:
        state = dialogue_fn(rec)
        if vocab.disease_name(state.diagnosis[0]) == rec.disease:
            correct += 1
        imp_ids = {vocab.symptom_id(name) for name in rec.implicit}
        if imp_ids:
            got = {sid for sid, _ in state.acquired}
            recalls.append(len(got & imp_ids) / len(imp_ids))
        else:
            recalls.append(1.0)
        turns.append(state.turns)
        key = state.stop_reason.value
        reasons[key] = reasons.get(key, 0) + 1
    return {
        "dacc": correct / len(records),
        "srec": float(np.mean(recalls)),
        "aturn": float(np.mean(turns)),
        "n_records": len(records),
        "stop_reason_histogram": reasons,
    }
