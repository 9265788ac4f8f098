"""Grid functions on the circle, local Hölder seminorms, cones and projective metrics.

The cone with parameters ``(alpha, delta, k)`` consists of positive functions
whose Hölder quotients over pairs closer than ``delta`` are at most ``k`` times
their infimum.  The projective metric between two members is ``log(B/A)``,
where ``A`` and ``B`` are the extreme values over triples ``(x, y, z)`` of

    (k d(x,y)^alpha phi(z) - (phi(x) - phi(y))) / (k d(x,y)^alpha psi(z) - (psi(x) - psi(y))).

For fixed ``(x, y)`` this is a slope from a point to the planar cloud
``{(psi(z), phi(z))}``, so the extremes over ``z`` are found on its convex
hull.  Every node is therefore used as a ``z`` candidate, well above any
subsampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "GridFunction",
    "ConeParams",
    "ProjectiveDistance",
    "ConeViolation",
    "holder_seminorm",
    "globalize_seminorm",
    "cone_member",
    "theta_metric",
    "sandwich_check",
    "convex_hull_chains",
    "max_offset_for",
]

DIAM = 0.5  # diameter of the circle in arc length


class ConeViolation(ValueError):
    """A function expected in a cone is not in it."""


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values at the nodes ``i/n`` with circular piecewise-linear interpolation."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError("grid function needs a 1-d array of at least two values")
        n = v.shape[0]
        if n & (n - 1):
            raise ValueError(f"grid size {n} is not a power of two")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, func, n: int = 4096) -> "GridFunction":
        return cls(np.broadcast_to(func(np.arange(n) / n), (n,)))

    @classmethod
    def constant(cls, c: float, n: int = 4096) -> "GridFunction":
        return cls(np.full(n, float(c)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def interp(self, y) -> np.ndarray:
        """Piecewise-linear periodic interpolation; exact at nodes."""
        y = np.asarray(y, dtype=np.float64)
        n = self.n
        s = (y - np.floor(y)) * n
        i0 = np.floor(s).astype(np.int64)
        fr = s - i0
        i0 %= n
        i1 = (i0 + 1) % n
        v = self.values
        return (1.0 - fr) * v[i0] + fr * v[i1]

    __call__ = interp

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def __mul__(self, other: float) -> "GridFunction":
        return GridFunction(self.values * float(other))

    __rmul__ = __mul__

    def to_csv_rows(self):
        return zip(range(self.n), self.values.tolist())


@dataclass(frozen=True)
class ConeParams:
    """Cone parameters; ``m`` is derived as ``ceil(1/(2 delta)) + 1``."""

    alpha: float = 1.0
    delta: float = 0.05
    k: float = 100.0
    m: int = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.k > 0:
            raise ValueError("k must be positive")
        object.__setattr__(self, "m", int(math.ceil(1.0 / (2.0 * self.delta) - 1e-12)) + 1)

    def with_k(self, k: float) -> "ConeParams":
        return ConeParams(self.alpha, self.delta, k)

    @property
    def R_bound(self) -> float:
        """Bound on ``sup g / inf g`` for cone members."""
        return 1.0 + self.m * self.k * DIAM**self.alpha


@dataclass(frozen=True)
class ProjectiveDistance:
    """Sampled projective distance together with its sampling density."""

    value: float
    A: float
    B: float
    n_grid: int
    n_pairs: int
    n_z: int

    def __post_init__(self) -> None:
        if self.value < 0 and not math.isclose(self.value, 0.0, abs_tol=1e-12):
            raise ValueError("projective distance must be nonnegative")
        if self.value < 0:
            object.__setattr__(self, "value", 0.0)

    def __float__(self) -> float:
        return float(self.value)


def max_offset_for(n: int, delta: float) -> int:
    """Largest node offset ``o`` with ``o/n < delta`` (and ``o <= n/2``)."""
    o = int(math.ceil(delta * n)) - 1
    return max(0, min(o, n // 2))


def holder_seminorm(g: GridFunction, alpha: float, delta: float) -> float:
    """Largest ``|g(x)-g(y)| / d(x,y)^alpha`` over node pairs closer than ``delta``."""
    n = g.n
    if delta < 2.0 / n:
        raise ValueError(f"delta={delta} is below the grid resolution 2/{n}")
    return float(kernels.holder_local(g.values, float(alpha), max_offset_for(n, delta)))


def globalize_seminorm(local: float, params: ConeParams) -> float:
    """Global Hölder constant implied by a local one: ``local * m``."""
    if local < 0:
        raise ValueError("seminorm must be nonnegative")
    return float(local) * params.m


def cone_member(g: GridFunction, params: ConeParams) -> tuple[bool, float]:
    """Membership test and margin ``k - seminorm/inf``."""
    lo = g.min()
    if not lo > 0:
        return False, -math.inf
    ratio = holder_seminorm(g, params.alpha, params.delta) / lo
    return bool(ratio <= params.k), float(params.k - ratio)


def convex_hull_chains(xs: np.ndarray, ys: np.ndarray):
    """Lower and upper hull chains of a planar cloud, both sorted by ``x``.

    Andrew's monotone chain; collinear points are dropped.  Returns
    ``(lower_x, lower_y, upper_x, upper_y)``.
    """
    order = np.lexsort((ys, xs))
    px = xs[order]
    py = ys[order]
    # drop exact duplicates
    keep = np.ones(px.shape[0], dtype=bool)
    keep[1:] = (np.diff(px) != 0) | (np.diff(py) != 0)
    px = px[keep].tolist()
    py = py[keep].tolist()

    def build(ix):
        cx: list[float] = []
        cy: list[float] = []
        for i in ix:
            x, y = px[i], py[i]
            while len(cx) >= 2 and (
                (cx[-1] - cx[-2]) * (y - cy[-2]) - (cy[-1] - cy[-2]) * (x - cx[-2])
            ) <= 0:
                cx.pop()
                cy.pop()
            cx.append(x)
            cy.append(y)
        return cx, cy

    lx, ly = build(range(len(px)))
    ux, uy = build(range(len(px) - 1, -1, -1))
    return (
        np.asarray(lx),
        np.asarray(ly),
        np.asarray(ux[::-1]),
        np.asarray(uy[::-1]),
    )


def _bounds(phi: GridFunction, psi: GridFunction, params: ConeParams):
    """``(A, B)`` with the quotient written as psi-expression over phi-expression."""
    n = phi.n
    lx, ly, ux, uy = convex_hull_chains(phi.values, psi.values)
    lo, hi, gap = kernels.theta_bounds(
        phi.values,
        psi.values,
        float(params.alpha),
        float(params.k),
        max_offset_for(n, params.delta),
        ux,
        uy,
        lx,
        ly,
    )
    return lo, hi, gap


def _require_member(g: GridFunction, params: ConeParams, name: str) -> None:
    ok, margin = cone_member(g, params)
    if not ok:
        raise ConeViolation(f"{name} is outside the cone (margin {margin:.6g})")


def theta_metric(phi: GridFunction, psi: GridFunction, params: ConeParams,
                 check: bool = True) -> ProjectiveDistance:
    """Projective distance ``log(B/A)`` between two cone members.

    ``A`` and ``B`` are the infimum and supremum over all node pairs closer than
    ``delta`` (both orientations) and all nodes ``z`` of the quotient with the
    ``phi`` expression on top, so that ``A <= inf phi/psi`` and
    ``B >= sup phi/psi``.  The value is symmetric in the two arguments.
    """
    if phi.n != psi.n:
        raise ValueError("grid sizes differ")
    if check:
        _require_member(phi, params, "phi")
        _require_member(psi, params, "psi")
    # quotient = (k d^a psi(z) - dpsi) / (k d^a phi(z) - dphi); its extremes give
    # the coefficients of psi relative to phi; invert to put phi on top.
    lo, hi, gap = _bounds(phi, psi, params)
    if not gap > 0:
        raise ConeViolation("nonpositive denominator: phi is outside the cone")
    if not lo > 0:
        raise ConeViolation("nonpositive numerator: psi is outside the cone")
    A = 1.0 / hi
    B = 1.0 / lo
    n = phi.n
    n_pairs = 2 * n * max_offset_for(n, params.delta)
    return ProjectiveDistance(float(math.log(B / A)), A, B, n, n_pairs, n)


def sandwich_check(phi: GridFunction, psi: GridFunction, params: ConeParams) -> bool:
    """``A <= inf(phi/psi)`` and ``B >= sup(phi/psi)`` on the grid."""
    d = theta_metric(phi, psi, params)
    r = phi.values / psi.values
    tol = 1e-12
    return bool(d.A <= r.min() * (1 + tol) and d.B >= r.max() * (1 - tol))
