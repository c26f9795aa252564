"""Benchmark the LSTM integrator kernels: numpy loop vs numba @njit.

Runs the full forward+backward wrapper (shared BLAS projections included)
at configurable shapes and reports per-call times and the speedup of
numba over numpy. Output-vector sizes default to the desk-scale training
shapes.

Run: python benchmarks/bench_kernels.py [--T 40 --B 32 --d-in 64 --H 128]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from scraps import kernels


def bench_backend(backend, x, mask, Wx, Wh, b, d_last, repeats):
    kernels.set_backend(backend)
    h, cache = kernels.lstm_forward(x, mask, Wx, Wh, b)  # warm-up / compile
    kernels.lstm_backward(d_last, cache)
    t0 = time.perf_counter()
    for _ in range(repeats):
        h, cache = kernels.lstm_forward(x, mask, Wx, Wh, b)
    t1 = time.perf_counter()
    for _ in range(repeats):
        kernels.lstm_backward(d_last, cache)
    t2 = time.perf_counter()
    return (t1 - t0) / repeats, (t2 - t1) / repeats, h


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--T", type=int, default=40, help="time steps")
    parser.add_argument("--B", type=int, default=32, help="batch size")
    parser.add_argument("--d-in", type=int, default=64, help="input feature size")
    parser.add_argument("--H", type=int, default=128, help="hidden/output size")
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--dtype", choices=["float32", "float64"], default="float32")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    dtype = np.dtype(args.dtype)
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((args.T, args.B, args.d_in)).astype(dtype)
    lengths = rng.integers(args.T // 2, args.T + 1, size=args.B)
    mask = (np.arange(args.T)[:, None] < lengths[None, :]).astype(dtype)
    Wx = (rng.standard_normal((args.d_in, 4 * args.H)) * 0.1).astype(dtype)
    Wh = (rng.standard_normal((args.H, 4 * args.H)) * 0.1).astype(dtype)
    b = np.zeros(4 * args.H, dtype)
    d_last = rng.standard_normal((args.B, args.H)).astype(dtype)

    print(f"shape T={args.T} B={args.B} d_in={args.d_in} H={args.H} "
          f"dtype={args.dtype} repeats={args.repeats}")
    results = {}
    outputs = {}
    for backend in kernels.available_backends():
        fwd, bwd, h = bench_backend(backend, x, mask, Wx, Wh, b, d_last, args.repeats)
        results[backend] = (fwd, bwd)
        outputs[backend] = h
        print(f"{backend:>6}: forward {1e3 * fwd:8.2f} ms   backward {1e3 * bwd:8.2f} ms")
    if len(results) == 2:
        f_np, b_np = results["numpy"]
        f_nb, b_nb = results["numba"]
        print(f"numba speedup over numpy: forward {f_np / f_nb:.2f}x, "
              f"backward {b_np / b_nb:.2f}x")
        diff = np.abs(outputs["numpy"] - outputs["numba"]).max()
        print(f"max |numpy - numba| on last state: {diff:.3e}")


if __name__ == "__main__":
    main()
