"""Time each hot kernel through its numba and pure-numpy implementations.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Both paths are imported side by side, so the env flag does not matter here.
Each case is called once before timing to exclude JIT compilation; the
outputs of the two paths are compared before timing too: exactly for the
deterministic kernels, and within 5 standard errors for the Monte Carlo one,
whose two paths draw from different generators.
"""

from __future__ import annotations

import argparse
import csv
import sys
import timeit

import numpy as np

from selfplay.kernels import numba_impl, numpy_impl


def _cases(rng):
    logits = rng.normal(size=1298)
    mask = rng.random(1298) < 0.5
    probs = numpy_impl.masked_softmax(logits, mask, 1.0)
    returns = rng.choice([-1.0, 0.0, 1.0], size=100_000)
    grids = rng.integers(0, 3, size=(2000, 6, 7)).astype(np.int8)
    theta, grad = rng.normal(size=1298), rng.normal(size=1298)

    def adam(impl):
        t, m, v = theta.copy(), np.zeros_like(theta), np.zeros_like(theta)
        for step in range(1, 51):
            impl.adam_update(t, grad, m, v, step, 1e-2, 0.9, 0.95, 1e-8, 0.0)
        return t

    def winners(impl):
        return np.array([impl.line_winners(g, 4) for g in grids])

    return {
        "masked_softmax[1298]": lambda impl: impl.masked_softmax(logits, mask, 0.7),
        "sample_index[1298]": lambda impl: impl.sample_index(probs, 0.61803),
        "logprob_grad[1298]": lambda impl: impl.logprob_grad(probs, int(np.argmax(probs)), 0.7, mask),
        "adam_update[1298]x50": adam,
        "ema_scan[1e5]": lambda impl: impl.ema_scan(0.0, 0.95, returns),
        "line_winners[2000 boards]": winners,
        "pig_hold_at_mc[2e4]": lambda impl: impl.pig_hold_at_mc(20_000, 20, 100, 200, 7),
    }


def run(repeat: int = 5, number: int = 3):
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in _cases(rng).items():
        a, b = np.asarray(fn(numba_impl), dtype=float), np.asarray(fn(numpy_impl), dtype=float)
        if name.startswith("pig_hold_at_mc"):
            pa, pb = a / a.sum(), b / b.sum()
            se = np.sqrt(pa * (1 - pa) / a.sum() + pb * (1 - pb) / b.sum()) + 1e-12
            agree = bool(np.all(np.abs(pa - pb) <= 5 * se))
        else:
            agree = bool(np.allclose(a, b, rtol=1e-12, atol=1e-12))
        t_nb = min(timeit.repeat(lambda: fn(numba_impl), number=number, repeat=repeat)) / number
        t_np = min(timeit.repeat(lambda: fn(numpy_impl), number=number, repeat=repeat)) / number
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb, "agree": agree})
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=3)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)
    rows = run(args.repeat, args.number)
    print(f"{'kernel':28} {'numba [s]':>12} {'numpy [s]':>12} {'speedup':>9}  agree")
    for r in rows:
        print(f"{r['kernel']:28} {r['numba_s']:12.3e} {r['numpy_s']:12.3e} {r['speedup']:9.1f}  {r['agree']}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
