"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Both backends are imported directly, so the environment switch
``RANDTHERM_PURE`` does not matter here.  Each row reports the best of
``--repeat`` wall-clock timings and checks that both backends returned the
same result.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from randtherm import _pykernels
from randtherm.cones import ConeParams, convex_hull_chains, max_offset_for
from randtherm.transfer import sample_cone_pairs

try:
    from randtherm import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _cases(rng: np.random.Generator):
    n = 4096
    v = np.cumsum(rng.normal(size=n)) / n
    yield "holder_local n=4096 offset=2048", "holder_local", (v, 1.0, n // 2)

    params = ConeParams(1.0, 0.25, 100.0)
    (a, b), = sample_cone_pairs(n, params, 1, rng)
    lx, ly, ux, uy = convex_hull_chains(a.values, b.values)
    yield ("theta_bounds n=4096 delta=0.25", "theta_bounds",
           (a.values, b.values, 1.0, 100.0, max_offset_for(n, 0.25), ux, uy, lx, ly))

    s = rng.normal(0.2, 0.5, size=20_000)
    yield "hyperbolic_times len=20000", "hyperbolic_times", (s, 0.1)

    m = 1 << 16
    x = np.arange(m) / m
    orbits = [x]
    for _ in range(7):
        y = 2 * orbits[-1] + 0.5 * np.sin(2 * np.pi * orbits[-1]) / (2 * np.pi)
        orbits.append(y - np.floor(y))
    yield "greedy_separated m=65536 steps=8", "greedy_separated", (np.array(orbits), 0.01)


def _best(fn, args, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", default=None, help="also write the rows to this file")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'kernel':36s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  same")
    for label, name, kargs in _cases(rng):
        tp, rp = _best(getattr(_pykernels, name), kargs, args.repeat)
        if _ckernels is None:
            tc, same = float("nan"), None
        else:
            tc, rc = _best(getattr(_ckernels, name), kargs, args.repeat)
            same = _same(rp, rc)
        rows.append({"kernel": label, "python_s": tp, "cython_s": tc, "speedup": tp / tc,
                     "identical": same})
        print(f"{label:36s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}  {same}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
