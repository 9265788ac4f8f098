"""Degree-d circle maps given by increasing lifts, their potentials and expansion data.

A fiber map is stored through its lift ``G`` with ``G(x + 1) = G(x) + d`` and
``G' > 0``.  Built-in families:

``linear d``
    ``G(x) = d x``.
``sine d a``
    ``G(x) = d x + a sin(2 pi x) / (2 pi)``, so ``G'(x) = d + a cos(2 pi x)``.
``manneville beta``
    ``G(x) = x + 2**beta x**(1+beta)`` on ``[0, 1/2)`` and ``2x`` on ``[1/2, 1)``.

Tabulated lifts are read from a CSV of ``(x, G(x), G'(x))`` rows and
interpolated with a cubic Hermite spline.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

__all__ = [
    "FiberMap",
    "PotentialFiber",
    "FiberFamily",
    "ExpansionProfile",
    "PreimageError",
    "linear_map",
    "sine_map",
    "manneville_map",
    "tabulated_map",
    "parse_map",
    "potential_from_spec",
    "constant_potential",
    "cos_potential",
    "circle_distance",
    "eval_map",
    "lift_inverse",
    "preimages",
    "expansion_constant",
    "branch_index",
    "build_expansion_profile",
]

TWO_PI = 2.0 * math.pi


class PreimageError(RuntimeError):
    """Branch inversion failed (non-monotone lift or non-convergence)."""


def circle_distance(a, b):
    """Arc distance on ``R/Z``."""
    d = np.abs(np.asarray(a, dtype=np.float64) - b)
    d = d - np.floor(d)
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True, eq=False)
class FiberMap:
    """Orientation-preserving degree-``d`` circle map given by its lift.

    ``lift`` and ``derivative`` must accept numpy arrays.  ``deriv_min`` is an
    optional exact minimum of ``G'`` on intervals ``[lo, hi]`` (arrays, lift
    coordinates); without it minima are estimated by sampling.
    """

    degree: int
    lift: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    label: str
    deriv_min: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    max_derivative: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if self.degree < 2:
            raise ValueError("degree must be at least 2")
        xs = np.linspace(0.0, 1.0, 8193)
        g = self.lift(xs)
        if not np.all(np.diff(g) > 0):
            raise ValueError(f"{self.label}: lift is not strictly increasing")
        if abs(g[-1] - g[0] - self.degree) > 1e-10:
            raise ValueError(f"{self.label}: G(1) - G(0) differs from the degree")
        dg = self.derivative(xs)
        if not np.all(dg > 0):
            raise ValueError(f"{self.label}: derivative not positive")
        if math.isnan(self.max_derivative):
            object.__setattr__(self, "max_derivative", float(dg.max()))

    def __call__(self, x):
        return eval_map(self, x)

    def min_derivative(self, lo, hi) -> np.ndarray:
        """Minimum of ``G'`` over each lift interval ``[lo, hi]``."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.deriv_min is not None:
            return self.deriv_min(lo, hi)
        t = np.linspace(0.0, 1.0, 33)
        pts = lo[..., None] + (hi - lo)[..., None] * t
        return self.derivative(pts).min(axis=-1)


@dataclass(frozen=True, eq=False)
class PotentialFiber:
    """Fiber potential with a closed form and a grid cache.

    Parameters
    ----------
    func : callable
        Vectorised closed form on ``[0, 1)`` (periodic).
    label : str
        Human-readable description, e.g. ``"cos 0.1"``.
    holder_exponent : float
        Exponent ``alpha`` used for its seminorms.
    eps_phi : float
        Small-variation constant attached to the potential.
    """

    func: Callable[[np.ndarray], np.ndarray]
    label: str
    holder_exponent: float = 1.0
    eps_phi: float = 0.01
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=np.float64) % 1.0)

    def on_grid(self, n: int) -> np.ndarray:
        """Values at the nodes ``i/n`` (cached, read-only)."""
        arr = self._cache.get(n)
        if arr is None:
            arr = np.asarray(self.func(np.arange(n) / n), dtype=np.float64)
            arr = np.broadcast_to(arr, (n,)).copy()
            arr.setflags(write=False)
            self._cache[n] = arr
        return arr

    def scaled(self, t: float) -> "PotentialFiber":
        f = self.func
        return PotentialFiber(
            lambda x: t * f(x), f"{t!r}*({self.label})", self.holder_exponent, self.eps_phi
        )


@dataclass(frozen=True, eq=False)
class FiberFamily:
    """Per-symbol fiber maps and potentials."""

    maps: tuple[FiberMap, ...]
    potentials: tuple[PotentialFiber, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "potentials", tuple(self.potentials))
        if not self.maps:
            raise ValueError("empty family")
        if len(self.maps) != len(self.potentials):
            raise ValueError("every symbol needs a map and a potential")

    @property
    def degree(self) -> int:
        return max(f.degree for f in self.maps)

    def __len__(self) -> int:
        return len(self.maps)


@dataclass(frozen=True, eq=False)
class ExpansionProfile:
    """Grid classification of a fiber map into good and bad regions."""

    L_of_x: np.ndarray = field(repr=False)
    sigma: float
    L_bound: float
    bad_region: tuple[tuple[float, float], ...]
    q: int
    p: int
    degree: int
    probe_radius: float
    condition_I: bool
    condition_II: bool
    bad_mask: np.ndarray = field(repr=False)

    def in_bad_region(self, x) -> np.ndarray:
        """Nearest-node lookup of the padded bad mask."""
        n = self.bad_mask.shape[0]
        idx = np.rint(np.asarray(x, dtype=np.float64) % 1.0 * n).astype(np.int64) % n
        return self.bad_mask[idx]


# ---------------------------------------------------------------------------
# built-in families


def linear_map(d: int) -> FiberMap:
    d = int(d)
    return FiberMap(
        d,
        lambda x: d * np.asarray(x, dtype=np.float64),
        lambda x: np.full(np.shape(x), float(d)),
        f"linear {d}",
        deriv_min=lambda lo, hi: np.full(np.broadcast(lo, hi).shape, float(d)),
        max_derivative=float(d),
    )


def _sine_deriv_min(d: float, a: float):
    def dmin(lo, hi):
        ends = np.minimum(d + a * np.cos(TWO_PI * lo), d + a * np.cos(TWO_PI * hi))
        # interior critical point of cos: minimum at 1/2 (a > 0) or 0 (a < 0) mod 1
        c0 = 0.5 if a > 0 else 0.0
        m = np.ceil(lo - c0)
        inside = m + c0 <= hi
        return np.where(inside & (a != 0.0), d - abs(a), ends)

    return dmin


def sine_map(d: int, a: float) -> FiberMap:
    """Lift ``d x + a sin(2 pi x)/(2 pi)``; requires ``|a| < d``."""
    d = int(d)
    a = float(a)
    if abs(a) >= d:
        raise ValueError("sine family needs |a| < d for a positive derivative")
    return FiberMap(
        d,
        lambda x: d * np.asarray(x, dtype=np.float64) + a * np.sin(TWO_PI * np.asarray(x)) / TWO_PI,
        lambda x: d + a * np.cos(TWO_PI * np.asarray(x, dtype=np.float64)),
        f"sine {d} {a!r}",
        deriv_min=_sine_deriv_min(d, a),
        max_derivative=d + abs(a),
    )


def manneville_map(beta: float) -> FiberMap:
    """Degree-2 intermittent map with a neutral fixed point at 0."""
    beta = float(beta)
    if beta <= 0:
        raise ValueError("beta must be positive")
    c = 2.0**beta

    def lift(x):
        x = np.asarray(x, dtype=np.float64)
        k = np.floor(x)
        r = x - k
        left = r + c * r ** (1.0 + beta)
        return 2.0 * k + np.where(r < 0.5, left, 2.0 * r)

    def deriv(x):
        r = np.asarray(x, dtype=np.float64) % 1.0
        return np.where(r < 0.5, 1.0 + c * (1.0 + beta) * r**beta, 2.0)

    def dmin(lo, hi):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        # G' increases on [0, 1/2), equals 2 on [1/2, 1); minimum is at the left
        # end of the interval unless an integer (value 1) lies inside.
        contains_int = np.ceil(lo) <= hi
        return np.where(contains_int, 1.0, np.minimum(deriv(lo), 2.0))

    return FiberMap(2, lift, deriv, f"manneville {beta!r}", deriv_min=dmin,
                    max_derivative=max(2.0, 1.0 + c * (1.0 + beta) * 0.5**beta))


def tabulated_map(path: str | Path, label: str | None = None) -> FiberMap:
    """Lift from a CSV file of ``x, G(x), G'(x)`` rows covering ``[0, 1]``."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec[:3]])
            except ValueError:
                continue  # header line
    tab = np.asarray(rows, dtype=np.float64)
    if tab.ndim != 2 or tab.shape[0] < 3 or tab.shape[1] != 3:
        raise ValueError(f"{path}: need at least three (x, G, G') rows")
    x, g, dg = tab.T
    if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
        raise ValueError(f"{path}: table must span [0, 1]")
    deg = int(round(g[-1] - g[0]))
    spline = CubicHermiteSpline(x, g, dg)
    dspline = spline.derivative()

    def lift(t):
        t = np.asarray(t, dtype=np.float64)
        k = np.floor(t)
        return deg * k + spline(t - k)

    def deriv(t):
        t = np.asarray(t, dtype=np.float64)
        return dspline(t - np.floor(t))

    return FiberMap(deg, lift, deriv, label or f"table {Path(path).name}")


def parse_map(spec: str, base_dir: str | Path | None = None) -> FiberMap:
    """Build a map from a textual spec such as ``"sine 2 0.5"``."""
    parts = spec.split()
    if not parts:
        raise ValueError("empty map spec")
    name, args = parts[0].lower(), parts[1:]
    try:
        if name == "linear" and len(args) == 1:
            return linear_map(int(args[0]))
        if name == "sine" and len(args) == 2:
            return sine_map(int(args[0]), float(args[1]))
        if name == "manneville" and len(args) == 1:
            return manneville_map(float(args[0]))
        if name == "table" and len(args) == 1:
            p = Path(args[0])
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            return tabulated_map(p, spec)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad map spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown map spec {spec!r}")


def constant_potential(c: float, eps_phi: float = 0.01, alpha: float = 1.0) -> PotentialFiber:
    c = float(c)
    return PotentialFiber(lambda x: np.full(np.shape(x), c), f"constant {c!r}", alpha, eps_phi)


def cos_potential(amp: float, freq: int = 1, eps_phi: float = 0.01, alpha: float = 1.0) -> PotentialFiber:
    amp = float(amp)
    freq = int(freq)
    return PotentialFiber(
        lambda x: amp * np.cos(TWO_PI * freq * np.asarray(x, dtype=np.float64)),
        f"cos {amp!r} {freq}",
        alpha,
        eps_phi,
    )


def potential_from_spec(spec: str, eps_phi: float, alpha: float = 1.0) -> PotentialFiber:
    """Potential from ``"zero"``, ``"constant c"``, ``"cos A [m]"`` or ``"sin A [m]"``."""
    parts = spec.split()
    if not parts:
        raise ValueError("empty potential spec")
    name, args = parts[0].lower(), parts[1:]
    try:
        if name == "zero" and not args:
            return PotentialFiber(lambda x: np.zeros(np.shape(x)), "zero", alpha, eps_phi)
        if name == "constant" and len(args) == 1:
            return constant_potential(float(args[0]), eps_phi, alpha)
        if name == "cos" and len(args) in (1, 2):
            return cos_potential(float(args[0]), int(args[1]) if len(args) > 1 else 1, eps_phi, alpha)
        if name == "sin" and len(args) in (1, 2):
            amp = float(args[0])
            m = int(args[1]) if len(args) > 1 else 1
            return PotentialFiber(
                lambda x: amp * np.sin(TWO_PI * m * np.asarray(x, dtype=np.float64)),
                f"sin {amp!r} {m}", alpha, eps_phi,
            )
    except ValueError as exc:
        raise ValueError(f"bad potential spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown potential spec {spec!r}")


# ---------------------------------------------------------------------------
# evaluation and inversion


def eval_map(f: FiberMap, x):
    """``G(x) mod 1``."""
    y = f.lift(np.asarray(x, dtype=np.float64))
    return y - np.floor(y)


def lift_inverse(f: FiberMap, t, tol: float = 1e-14, max_iter: int = 200) -> np.ndarray:
    """Solve ``G(y) = t`` for real ``y`` (vectorised safeguarded Newton).

    Each target is bracketed by ``[m, m + 1]`` with ``m = floor((t - G(0)) / d)``,
    which contains the unique root because ``G`` is increasing and
    ``G(m) = G(0) + m d``.
    """
    t = np.asarray(t, dtype=np.float64)
    d = f.degree
    g0 = float(f.lift(np.array(0.0)))
    m = np.floor((t - g0) / d)
    lo = m.copy()
    hi = m + 1.0
    y = lo + (t - (g0 + d * m)) / d
    y = np.clip(y, lo, hi)
    scale = np.maximum(1.0, np.abs(t))
    done = np.zeros(t.shape, dtype=bool)
    for _ in range(max_iter):
        r = f.lift(y) - t
        done = np.abs(r) <= tol * scale
        if done.all():
            return y
        pos = r > 0
        hi = np.where(pos, np.minimum(hi, y), hi)
        lo = np.where(~pos, np.maximum(lo, y), lo)
        step = r / f.derivative(y)
        y_new = y - step
        bad = ~np.isfinite(y_new) | (y_new <= lo) | (y_new >= hi)
        y_new = np.where(bad, 0.5 * (lo + hi), y_new)
        y = np.where(done, y, y_new)
        if np.all((hi - lo)[~done] <= 4e-16 * np.maximum(1.0, np.abs(hi[~done]))):
            return y
    r = np.abs(f.lift(y) - t)
    worst = int(np.argmax(r)) if r.size else 0
    raise PreimageError(
        f"{f.label}: branch inversion did not converge (residual {r.max():.3e} at target "
        f"{np.ravel(t)[worst]!r})"
    )


def preimages(f: FiberMap, x, tol: float = 1e-12) -> np.ndarray:
    """The ``d`` preimages of circle points ``x``, sorted, in ``[0, 1)``.

    Returns an array of shape ``x.shape + (d,)``.
    """
    x = np.asarray(x, dtype=np.float64)
    g0 = float(f.lift(np.array(0.0)))
    base = x + np.ceil(g0 - x)  # smallest lift of x at or above G(0)
    k = np.arange(f.degree, dtype=np.float64)
    t = base[..., None] + k
    y = lift_inverse(f, t)
    y = y - np.floor(y)
    y = np.sort(y, axis=-1)
    err = circle_distance(eval_map(f, y), x[..., None])
    if np.any(err > tol):
        raise PreimageError(f"{f.label}: preimage residual {err.max():.3e} exceeds tol {tol:.1e}")
    if f.degree > 1 and np.any(np.diff(y, axis=-1) <= 0):
        raise PreimageError(f"{f.label}: preimages not distinct")
    return y


def expansion_constant(f: FiberMap, x, probe_radius: float):
    """Local inverse-Lipschitz constant: max of ``1/G'`` on ``[x - r, x + r]``."""
    x = np.asarray(x, dtype=np.float64)
    m = f.min_derivative(x - probe_radius, x + probe_radius)
    if np.any(m <= 0):
        raise ValueError(f"{f.label}: nonpositive derivative near {x!r}")
    out = 1.0 / m
    return float(out) if out.ndim == 0 else out


def branch_index(f: FiberMap, x, t0: float) -> np.ndarray:
    """Injectivity-domain label of ``x`` for the domains cut at ``G^{-1}(t0 + k)``."""
    g = f.lift(np.asarray(x, dtype=np.float64) % 1.0)
    return (np.floor(g - t0).astype(np.int64)) % f.degree


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal circular runs of True as (start, stop_inclusive) node indices."""
    n = mask.shape[0]
    if mask.all():
        return [(0, n - 1)]
    if not mask.any():
        return []
    shift = int(np.argmin(mask))  # a False node; start scanning after it
    rolled = np.roll(mask, -shift)
    edges = np.diff(np.concatenate([[0], rolled.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return [((s + shift) % n, (e + shift) % n) for s, e in zip(starts, stops)]


def build_expansion_profile(
    f: FiberMap,
    sigma: float,
    L_bound: float,
    grid_n: int,
    probe_radius: float | None = None,
    n_offsets: int = 256,
) -> ExpansionProfile:
    """Classify grid nodes into the bad region and count the branches it meets.

    A node is bad when its probed inverse-Lipschitz constant is at least
    ``1/sigma`` up to a relative rounding allowance of ``1e-12``; the bad set is
    then padded by one node on each side.  ``q`` is the smallest number of
    injectivity domains meeting the bad set over ``n_offsets`` choices of the
    domain cut points (any cover by domains is admissible), with ``q = 1``
    when the bad set is empty.
    """
    if not sigma > 1.0:
        raise ValueError("sigma must exceed 1")
    if not L_bound >= 1.0:
        raise ValueError("L_bound must be at least 1")
    r = 2.0 / grid_n if probe_radius is None else float(probe_radius)
    x = np.arange(grid_n) / grid_n
    L = np.asarray(expansion_constant(f, x, r), dtype=np.float64)
    raw = L > (1.0 / sigma) * (1.0 + 1e-12)
    bad = raw | np.roll(raw, 1) | np.roll(raw, -1)
    runs = _runs(bad)
    h = 1.0 / grid_n
    region = tuple((s * h, ((e + 1) % grid_n) * h) for s, e in runs)
    cond_I = bool(np.all(L[bad] <= L_bound * (1.0 + 1e-12))) if bad.any() else True
    if not bad.any():
        q = 1
    else:
        g0 = float(f.lift(np.array(0.0)))
        xb = x[bad]
        cuts = list(g0 + np.arange(n_offsets) / n_offsets)
        # also cut exactly at the edges of the bad runs
        for s, e in runs:
            cuts.append(float(f.lift(np.array(s * h))) - 0.5 * h)
            cuts.append(float(f.lift(np.array((e + 1) * h))) - 0.5 * h)
        q = f.degree
        for t0 in cuts:
            q = min(q, int(np.unique(branch_index(f, xb, t0)).size))
            if q == 1:
                break
    L.setflags(write=False)
    bad.setflags(write=False)
    return ExpansionProfile(
        L_of_x=L,
        sigma=float(sigma),
        L_bound=float(L_bound),
        bad_region=region,
        q=q,
        p=f.degree - q,
        degree=f.degree,
        probe_radius=r,
        condition_I=cond_I,
        condition_II=q < f.degree,
        bad_mask=bad,
    )
