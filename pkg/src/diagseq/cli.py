"""Command-line entry points: train, eval, generate-data, gradcheck, serve."""

import argparse
import json
import os
import sys

import numpy as np

from . import autodiff as ad
from .baseline import explicit_only_baseline
from .data import build_vocab, load_dataset, save_dataset
from .inference import InferenceConfig, evaluate
from .model import DiagnosisTransformer, ModelConfig, pack_batch
from .synthetic import GeneratorSpec, acceptance_spec, generate_synthetic
from .training import TrainConfig, train


def _add_inference_flags(p):
    p.add_argument("--max-turns", type=int, default=20)
    p.add_argument("--rho-e", type=float, default=0.9)
    p.add_argument("--rho-p", type=float, default=0.01)


def _inference_config(args):
    return InferenceConfig(rho_e=args.rho_e, rho_p=args.rho_p, max_turns=args.max_turns)


def _cmd_train(args):
    records = load_dataset(args.data)
    val = load_dataset(args.val) if args.val else None
    vocab = build_vocab(records if not val else records + val)
    config = ModelConfig.for_vocab(vocab, layers=args.layers, hidden=args.hidden,
                                   heads=args.heads, dropout=args.dropout, dtype=args.dtype)
    model = DiagnosisTransformer(config, rng=np.random.default_rng(args.seed))
    tc = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                     repeats=args.repeats, shuffle_each_step=not args.no_shuffle,
                     sync_learning=not args.no_sync, seed=args.seed,
                     patience=args.patience)
    train(model, vocab, records, tc, val_records=val,
          inference_config=_inference_config(args), metrics_path=args.metrics,
          log=print if not args.quiet else None)
    model.save(args.out, vocab)
    print(f"checkpoint written to {args.out}")
    return 0


def _cmd_eval(args):
    model, vocab = DiagnosisTransformer.load(args.ckpt)
    records = load_dataset(args.data)
    metrics = evaluate(records, model, vocab, _inference_config(args))
    text = json.dumps(metrics, indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    if args.baseline:
        train_records = load_dataset(args.baseline)
        dacc = explicit_only_baseline(train_records, records, vocab)
        print(json.dumps({"explicit_only_baseline_dacc": dacc}))
    return 0


def _cmd_generate_data(args):
    if args.preset:
        spec = acceptance_spec()
    else:
        spec = GeneratorSpec.load(args.spec)
    records = generate_synthetic(spec, args.n, seed=args.seed)
    save_dataset(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_gradcheck(args):
    from .data import DiagnosisRecord, SymptomVocab
    from .layout import build_input

    symptoms = tuple(f"s{i}" for i in range(6))
    vocab = SymptomVocab(symptoms=symptoms, diseases=("d0", "d1", "d2"))
    record = DiagnosisRecord(explicit={"s0": True, "s1": False},
                             implicit={"s2": True, "s3": False, "s4": True},
                             disease="d1")
    config = ModelConfig.for_vocab(vocab, layers=args.layers, hidden=args.hidden,
                                   heads=args.heads, dropout=0.0, dtype=args.dtype)
    model = DiagnosisTransformer(config, rng=np.random.default_rng(args.seed))
    imp = list(record.implicit)
    seq = build_input(record, imp, vocab, segment_orders=[imp[::-1], imp[1:] + imp[:1]])
    batch = pack_batch([seq])

    def f():
        s_logits, d_logits = model.forward(batch, train=False)
        total, _, _ = model.loss(s_logits, d_logits, batch)
        return total

    err = ad.grad_check(f, model.parameters(), max_coords_per_param=args.coords,
                        rng=np.random.default_rng(args.seed))
    print(f"max gradient error: {err:.3e} (threshold {args.threshold:.1e})")
    return 0 if err < args.threshold else 2


def resolve_bind(host, port, env=None):
    """Fill missing host/port from DIAGSEQ_BIND ("host:port"), then defaults."""
    bind = (env if env is not None else os.environ).get("DIAGSEQ_BIND")
    if bind and (host is None or port is None):
        bhost, _, bport = bind.rpartition(":")
        host = host or bhost
        port = port if port is not None else int(bport)
    return host or "127.0.0.1", port if port is not None else 8100


def _cmd_serve(args):
    from .service import make_server

    model, vocab = DiagnosisTransformer.load(args.ckpt)
    host, port = resolve_bind(args.host, args.port)
    server = make_server(model, vocab, _inference_config(args), host=host, port=port,
                         ttl=args.ttl, verbose=not args.quiet)
    print(f"serving on http://{host}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="diagseq",
                                     description="symptom-inquiry diagnosis agent")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--val")
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--repeats", type=int, default=4)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--no-sync", action="store_true")
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    p.add_argument("--quiet", action="store_true")
    _add_inference_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--baseline", metavar="TRAIN_DATA",
                   help="also report the explicit-only linear baseline trained on this file")
    _add_inference_flags(p)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("generate-data", help="write a synthetic dataset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", help="generator spec JSON file")
    group.add_argument("--preset", choices=("acceptance",),
                       help="use the built-in acceptance recipe")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_generate_data)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check on a fresh model")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float64")
    p.add_argument("--coords", type=int, default=30,
                   help="random coordinates checked per parameter")
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("serve", help="run the interactive diagnosis HTTP service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default=None, help="default from DIAGSEQ_BIND or 127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ttl", type=int, default=1800)
    p.add_argument("--quiet", action="store_true")
    _add_inference_flags(p)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
