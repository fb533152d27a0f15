"""Mini-batch training loop.

Every step rebuilds its sequences from scratch: fresh implicit-order
shuffle and fresh extra-segment permutations per record (unless disabled),
so no two epochs see the same sequence for the same case.  Runs are fully
reproducible from the config seed.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import orderless
from .model import pack_batch


class TrainingDiverged(RuntimeError):
    def __init__(self, step, record_ids, value):
        super().__init__(
            f"non-finite loss ({value}) at step {step}; batch record indices {record_ids}")
        self.step = step
        self.record_ids = record_ids


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 5e-5
    repeats: int = 4
    shuffle_each_step: bool = True
    sync_learning: bool = True
    seed: int = 0
    grad_clip: float = 1.0
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    patience: int = 10  # early stop on validation diagnosis accuracy

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.repeats < 0:
            raise ValueError(f"repeats must be >= 0, got {self.repeats}")


def train_epoch(model, vocab, records, config, rng, step_offset=0):
    """One pass over the data; returns (mean loss, mean L_dis, mean L_sym)."""
    order = rng.permutation(len(records))
    params = model.parameters()
    losses, dis_losses, sym_losses = [], [], []
    step = step_offset
    for start in range(0, len(order), config.batch_size):
        idx = order[start:start + config.batch_size]
        seqs = [
            orderless.make_training_sequence(
                records[i], vocab, rng, repeats=config.repeats,
                shuffle=config.shuffle_each_step, sync_learning=config.sync_learning)
            for i in idx
        ]
        batch = pack_batch(seqs)
        s_logits, d_logits = model.forward(batch, train=True, rng=rng)
        total, l_dis, l_sym = model.loss(s_logits, d_logits, batch)
        value = total.item()
        if not np.isfinite(value):
            raise TrainingDiverged(step, [int(i) for i in idx], value)
        total.backward()
        if config.grad_clip > 0:
            ad.clip_grad_norm(params, config.grad_clip)
        ad.adam_step(params, config.lr, betas=config.adam_betas, eps=config.adam_eps)
        losses.append(value)
        dis_losses.append(l_dis)
        sym_losses.append(l_sym)
        step += 1
    return float(np.mean(losses)), float(np.mean(dis_losses)), float(np.mean(sym_losses))


def train(model, vocab, train_records, config, val_records=None,
          inference_config=None, metrics_path=None, log=None):
    """Full training run with optional per-epoch evaluation and early stop.

    Returns the history: one dict per epoch with losses and, when a
    validation set is given, dacc/srec/aturn on it.  With a validation set
    the model is rolled back to the epoch with the best dacc.
    """
    from .inference import InferenceConfig, evaluate  # cycle-free at call time

    rng = np.random.default_rng(config.seed)
    inference_config = inference_config or InferenceConfig()
    history = []
    best = None  # (dacc, epoch, snapshot)
    sink = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            loss, l_dis, l_sym = train_epoch(model, vocab, train_records, config, rng)
            entry = {"epoch": epoch, "loss": loss, "l_dis": l_dis, "l_sym": l_sym}
            if val_records:
                metrics = evaluate(val_records, model, vocab, inference_config)
                entry.update(dacc=metrics["dacc"], srec=metrics["srec"], aturn=metrics["aturn"])
                if best is None or entry["dacc"] > best[0]:
                    best = (entry["dacc"], epoch,
                            {k: p.tensor.data.copy() for k, p in model.params.items()})
            history.append(entry)
            if sink:
                sink.write(json.dumps(entry) + "\n")
                sink.flush()
            if log:
                log(json.dumps(entry))
            if val_records and best and config.patience > 0 and epoch - best[1] >= config.patience:
                break
    finally:
        if sink:
            sink.close()
    if best is not None:
        for name, data in best[2].items():
            model.params[name].tensor.data[...] = data
    return history
