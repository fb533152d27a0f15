"""Build the frontend test fixture: a tiny trained checkpoint plus the
reference transcript of one scripted dialogue.

The transcript is produced by the library's own dialogue engine (the same
code path `diagseq eval` uses), so the browser client's end-to-end test can
assert it reproduces the session question for question.

Usage: python3 scripts/make_fixture.py [outdir]
"""

import json
import sys
from pathlib import Path

import numpy as np

import diagseq as dq
from diagseq.data import simulator_answer
from diagseq.inference import DialogueEngine


def main():
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "fixture"
    outdir.mkdir(parents=True, exist_ok=True)

    spec = dq.acceptance_spec(n_diseases=4, n_symptoms=12, signature_size=4,
                              overlap=2, seed=77)
    records = dq.generate_synthetic(spec, 240, seed=77)
    vocab = dq.build_vocab(records)
    config = dq.ModelConfig.for_vocab(vocab, layers=1, hidden=32, heads=2, dropout=0.1)
    model = dq.DiagnosisTransformer(config, rng=np.random.default_rng(77))
    dq.train(model, vocab, records, dq.TrainConfig(epochs=2, lr=3e-4, seed=77))
    ckpt = outdir / "checkpoint.npz"
    model.save(ckpt, vocab)

    # scripted dialogue: the simulator answers for one held-out record
    target = dq.generate_synthetic(spec, 260, seed=77)[-1]
    inference = dq.InferenceConfig(rho_e=0.9, rho_p=0.01, max_turns=8)
    explicit = [(vocab.symptom_id(n), v) for n, v in target.explicit.items()]
    engine = DialogueEngine(model, vocab, inference, explicit)
    steps = []
    while engine.pending_question is not None:
        question = vocab.symptom_name(engine.pending_question)
        answer = simulator_answer(target, engine.pending_question, vocab)
        engine.submit_answer(answer)
        steps.append({"question": question, "answer": answer.value})
    state = engine.state

    transcript = {
        "explicit": dict(target.explicit),
        "inference": {"rho_e": inference.rho_e, "rho_p": inference.rho_p,
                      "max_turns": inference.max_turns},
        "steps": steps,
        "turns": state.turns,
        "stop_reason": state.stop_reason.value,
        "diagnosis": vocab.disease_name(state.diagnosis[0]),
        "probability": state.diagnosis[1],
    }
    (outdir / "transcript.json").write_text(json.dumps(transcript, indent=1))
    print(f"fixture written to {outdir} ({len(steps)} scripted steps, "
          f"diagnosis {transcript['diagnosis']!r})")


if __name__ == "__main__":
    main()
