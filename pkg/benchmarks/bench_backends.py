"""Compare the compiled kernel extension against the pure NumPy fallback.

Times each hot kernel at training-representative shapes, then a full
training epoch through each backend.  Run from a checkout:

    python benchmarks/bench_backends.py [--records 400]
"""

import argparse
import time

import numpy as np

import diagseq as dq
from diagseq import backend
from diagseq.training import train_epoch


def timeit(fn, *args, reps=100):
    fn(*args)  # warmup
    start = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - start) / reps


def kernel_shapes():
    rng = np.random.default_rng(0)
    b, heads, t, hidden, ffn = 16, 2, 48, 64, 256
    scores = np.ascontiguousarray(rng.normal(size=(b * heads * t, t)))
    visible = rng.random((b * heads * t, t)) < 0.4
    visible[:, 0] = True
    visible = np.ascontiguousarray(visible.astype(np.uint8))
    x = np.ascontiguousarray(rng.normal(size=(b * t, hidden)))
    gain = np.ones(hidden)
    bias = np.zeros(hidden)
    flat = np.ascontiguousarray(rng.normal(size=b * t * ffn))
    grad = np.ascontiguousarray(rng.normal(size=flat.shape))
    return scores, visible, x, gain, bias, flat, grad


def bench_kernels():
    scores, visible, x, gain, bias, flat, grad = kernel_shapes()
    rows = {}
    for name in backend.available_backends():
        backend.set_backend(name)
        probs = backend.masked_softmax_fwd(scores, visible)
        y, mean, rstd = backend.layer_norm_fwd(x, gain, bias, 1e-5)
        rows[name] = {
            "masked_softmax_fwd": timeit(backend.masked_softmax_fwd, scores, visible),
            "masked_softmax_bwd": timeit(backend.masked_softmax_bwd, probs, scores),
            "layer_norm_fwd": timeit(backend.layer_norm_fwd, x, gain, bias, 1e-5),
            "layer_norm_bwd": timeit(backend.layer_norm_bwd, x, mean, rstd, gain, y),
            "gelu_fwd": timeit(backend.gelu_fwd, flat, reps=30),
            "gelu_bwd": timeit(backend.gelu_bwd, flat, grad, reps=30),
        }
    return rows


def bench_epoch(n_records):
    spec = dq.acceptance_spec()
    records = dq.generate_synthetic(spec, n_records, seed=1)
    vocab = dq.build_vocab(records)
    times = {}
    for name in backend.available_backends():
        backend.set_backend(name)
        config = dq.ModelConfig.for_vocab(vocab, layers=2, hidden=64, heads=2, dropout=0.1)
        model = dq.DiagnosisTransformer(config, rng=np.random.default_rng(0))
        tc = dq.TrainConfig(epochs=1, seed=0)
        start = time.perf_counter()
        train_epoch(model, vocab, records, tc, np.random.default_rng(0))
        times[name] = time.perf_counter() - start
    return times


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--records", type=int, default=400,
                        help="records for the end-to-end epoch timing")
    args = parser.parse_args()

    available = backend.available_backends()
    print(f"backends available: {', '.join(available)}")
    if "compiled" not in available:
        print("compiled extension not built; run `python setup.py build_ext --inplace`")

    rows = bench_kernels()
    kernels = list(next(iter(rows.values())))
    print(f"\n{'kernel':22s}" + "".join(f"{name:>14s}" for name in rows)
          + ("       speedup" if len(rows) == 2 else ""))
    for kernel in kernels:
        line = f"{kernel:22s}"
        for name in rows:
            line += f"{rows[name][kernel] * 1e6:>12.0f}us"
        if len(rows) == 2:
            py, comp = rows["python"][kernel], rows["compiled"][kernel]
            line += f"{py / comp:>12.2f}x"
        print(line)

    times = bench_epoch(args.records)
    print(f"\ntraining epoch ({args.records} records):")
    for name, seconds in times.items():
        print(f"  {name:10s} {seconds:6.2f}s")
    if len(times) == 2:
        print(f"  speedup    {times['python'] / times['compiled']:6.2f}x")
    backend.set_backend("compiled" if "compiled" in available else "python")


if __name__ == "__main__":
    main()
