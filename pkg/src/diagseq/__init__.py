"""diagseq: symptom-inquiry diagnosis via orderless sequence generation.

A small transformer learns, from diagnosis cases, both which symptom to
ask about next and which disease to predict; a visibility mask makes one
forward pass teach every inquiry step at once, and three order-bias
reducers keep the learned inquiry policy independent of symptom order.
Includes a simulator-driven evaluator, a CLI, and an interactive HTTP
service.
"""

from .autodiff import Parameter, Tensor, adam_step, grad_check
from .data import (Answer, DiagnosisRecord, SymptomVocab, build_vocab,
                   load_dataset, save_dataset, simulator_answer)
from .inference import (DialogueEngine, DialogueState, InferenceConfig,
                        StopReason, diagnose, evaluate,
                        next_inquiry_distribution, run_dialogue)
from .layout import TrainingSequence, build_attention_mask, build_input
from .model import DiagnosisTransformer, ModelConfig, pack_batch
from .orderless import (build_repeated_sequences, build_sync_labels,
                        make_training_sequence, shuffle_sequence)
from .synthetic import GeneratorSpec, acceptance_spec, generate_synthetic
from .training import TrainConfig, train, train_epoch

__version__ = "0.1.0"

__all__ = [
    "Answer", "DiagnosisRecord", "DiagnosisTransformer", "DialogueEngine",
    "DialogueState", "GeneratorSpec", "InferenceConfig", "ModelConfig",
    "Parameter", "StopReason", "SymptomVocab", "Tensor", "TrainConfig",
    "TrainingSequence", "acceptance_spec", "adam_step", "build_attention_mask",
    "build_input", "build_repeated_sequences", "build_sync_labels",
    "build_vocab", "diagnose", "evaluate", "generate_synthetic", "grad_check",
    "load_dataset", "make_training_sequence", "next_inquiry_distribution",
    "pack_batch", "run_dialogue", "save_dataset", "shuffle_sequence",
    "simulator_answer", "train", "train_epoch",
]
