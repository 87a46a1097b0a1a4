"""Benchmark the numpy and numba kernel backends against each other.

Runs every hot kernel on pipeline-sized inputs with both backends, checks
that the outputs agree, and prints per-kernel timings with the speedup.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats N] [--scale small|default|large]

The numba backend is skipped (with a note) when numba is unavailable or
disabled via LAGONN_NUMBA=0.
"""

import argparse
import time

import numpy as np

from lagonn.accel import HAS_NUMBA, NUMBA_KERNELS, get_kernels

SCALES = {
    # (rows, dim, labels, pairs, queries)
    "small": (200, 32, 2, 2_000, 50),
    "default": (1_000, 64, 3, 20_000, 200),
    "large": (3_000, 256, 5, 60_000, 500),
}


def build_cases(scale: str, seed: int = 7):
    rows, dim, labels, n_pairs, queries = SCALES[scale]
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Q = rng.normal(size=(queries, dim))
    W_adapter = np.eye(dim) + 0.05 * rng.normal(size=(dim, dim))
    idx_i = rng.integers(0, rows, size=n_pairs)
    idx_j = (idx_i + 1 + rng.integers(0, rows - 1, size=n_pairs)) % rows
    targets = rng.integers(0, 2, size=n_pairs).astype(np.float64)
    W_head = 0.1 * rng.normal(size=(labels, dim))
    b_head = 0.1 * rng.normal(size=labels)
    y = rng.integers(0, labels, size=rows)
    return {
        "sqdist_matrix": (Q, X),
        "pair_loss": (W_adapter, X, idx_i, idx_j, targets),
        "pair_loss_grad": (W_adapter, X, idx_i, idx_j, targets),
        "logreg_probs": (W_head, b_head, X),
        "logreg_loss": (W_head, b_head, X, y, 1.0),
        "logreg_loss_grad": (W_head, b_head, X, y, 1.0),
    }


def time_call(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def flatten(result):
    if isinstance(result, tuple):
        return np.concatenate([np.ravel(np.asarray(part)) for part in result])
    return np.ravel(np.asarray(result))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--scale", choices=sorted(SCALES), default="default")
    args = parser.parse_args()

    cases = build_cases(args.scale)
    numpy_kernels = get_kernels("numpy")
    rows, dim, labels, n_pairs, queries = SCALES[args.scale]
    print(
        f"scale={args.scale}: rows={rows} dim={dim} labels={labels}"
        f" pairs={n_pairs} queries={queries}, best of {args.repeats}"
    )

    if NUMBA_KERNELS is None:
        reason = "numba not installed" if not HAS_NUMBA else "disabled via LAGONN_NUMBA=0"
        print(f"numba backend unavailable ({reason}); timing numpy only\n")
        for name, case in cases.items():
            elapsed = time_call(numpy_kernels[name], case, args.repeats)
            print(f"{name:18s} numpy {elapsed * 1e3:9.3f} ms")
        return 0

    numba_kernels = get_kernels("numba")
    for name, case in cases.items():  # compile outside the timed region
        numba_kernels[name](*case)

    print(f"{'kernel':18s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, case in cases.items():
        ref = flatten(numpy_kernels[name](*case))
        alt = flatten(numba_kernels[name](*case))
        if not np.allclose(ref, alt, rtol=1e-9, atol=1e-11):
            raise SystemExit(f"backend outputs disagree for {name}")
        t_np = time_call(numpy_kernels[name], case, args.repeats)
        t_nb = time_call(numba_kernels[name], case, args.repeats)
        print(
            f"{name:18s} {t_np * 1e3:9.3f} ms {t_nb * 1e3:9.3f} ms"
            f" {t_np / t_nb:8.2f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
