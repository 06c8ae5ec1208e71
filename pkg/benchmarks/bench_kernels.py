"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 2000] [--repeat 3] [--json out.json]

Each kernel is run once per backend before timing so JIT compilation is
excluded. Results are also cross-checked: both backends must agree.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from pilotwave import _accel, kernels
from pilotwave.ensemble import sample_initial


def _cases(n):
    init = sample_initial(7, n, 1.0)
    u0, v0 = init[:, 0].copy(), init[:, 1].copy()
    h = 1e-3
    grid_vals = np.exp(-np.linspace(-20, 20, 1024, endpoint=False) ** 2)[None, :] * np.ones((3, 1))
    xq = np.random.default_rng(0).uniform(-5, 5, 10 * n)
    return {
        "pair_final": lambda: kernels.pair_final(u0, v0, h, 10_000)[2],
        "retarded_final T=2": lambda: kernels.retarded_final(u0, v0, 2.0, h, 10_000, 2000)[2],
        "solo_path": lambda: kernels.solo_path(0.3, h, 10_000)[1],
        "cubic_interp_periodic": lambda: kernels.cubic_interp_periodic(grid_vals, -20.0, 40 / 1024, xq)[0],
    }


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="ensemble size per kernel call")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = _accel.available_backends()
    cases = _cases(args.n)
    rows = []
    for name, fn in cases.items():
        timings, outputs = {}, {}
        for b in backends:
            with _accel.backend(b):
                fn()  # warm-up / compile
                timings[b], outputs[b] = _time(fn, args.repeat)
        diff = (float(np.max(np.abs(outputs["numba"] - outputs["numpy"])))
                if len(backends) == 2 else 0.0)
        rows.append({"kernel": name, **{f"{b}_s": timings[b] for b in backends}, "max_abs_diff": diff})

    print(f"{'kernel':24s} " + " ".join(f"{b + ' [s]':>12s}" for b in backends) + f" {'speedup':>8s} {'max|diff|':>10s}")
    for r in rows:
        speed = r["numpy_s"] / r["numba_s"] if "numba_s" in r else 1.0
        print(f"{r['kernel']:24s} " + " ".join(f"{r[b + '_s']:12.4f}" for b in backends)
              + f" {speed:8.1f} {r['max_abs_diff']:10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"n": args.n, "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
