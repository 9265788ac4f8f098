"""Fiberwise transfer operators, reference measures, densities and an Ulam oracle.

Conventions
-----------
* ``(L_j g)(x) = sum_{f_j(y) = x} exp(phi_j(y)) g(y)`` with ``f_j`` the fiber map
  over the ``j``-th shift of the base point.  On the grid, ``g(y)`` is read by
  linear interpolation, so ``L_j`` is a sparse matrix acting on node values.
* Measures on the grid are weight vectors ``rho`` (mass at each node).  The
  discrete adjoint ``L_j^*`` deposits the mass of a node on the two nodes next
  to each of its preimages with the same hat weights as the interpolation, so
  ``<L_j g, rho> = <g, L_j^* rho>`` holds to rounding error.
* Reference measures are computed from the preimage tree of an anchor point
  with leaf masses ``exp(S_depth phi)``, deposited with the same hat weights.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .base import BaseOrbit, OrbitWindowError, symbol_at
from .cones import (
    ConeParams,
    ConeViolation,
    GridFunction,
    cone_member,
    holder_seminorm,
    theta_metric,
)
from .fibers import FiberFamily, FiberMap, PotentialFiber, eval_map, preimages

logger = logging.getLogger(__name__)

__all__ = [
    "TransferContext",
    "EquilibriumData",
    "UlamMatrix",
    "DecayConstants",
    "InvariantMeasure",
    "TreeBudgetError",
    "apply_transfer",
    "apply_adjoint",
    "hat_deposit",
    "reference_measure",
    "lambda_at",
    "density_pullback",
    "ulam_matrix",
    "invariant_measure",
    "decay_bound_constants",
    "sample_cone_pairs",
    "contraction_samples",
    "compute_equilibrium",
    "TEST_OBSERVABLES",
]

TREE_BUDGET = 2**24
_CHUNK = 2**20

TEST_OBSERVABLES = {
    "cos1": lambda x: np.cos(2 * np.pi * x),
    "sin1": lambda x: np.sin(2 * np.pi * x),
    "cos2": lambda x: np.cos(4 * np.pi * x),
    "sin2": lambda x: np.sin(4 * np.pi * x),
    "cos3": lambda x: np.cos(6 * np.pi * x),
}


class TreeBudgetError(ValueError):
    """Preimage tree would exceed the leaf budget."""


@dataclass(frozen=True)
class _Stencil:
    """Preimages of every node for one symbol, with interpolation data."""

    y: np.ndarray  # (n, d) preimage points
    weight: np.ndarray  # (n, d) exp(phi(y))
    i0: np.ndarray  # (n, d) left node index
    frac: np.ndarray  # (n, d) hat weight of the right node


@dataclass(eq=False)
class TransferContext:
    """Fiber family, base orbit and grid for transfer-operator work."""

    family: FiberFamily
    orbit: BaseOrbit
    grid_n: int = 4096
    preimage_tol: float = 1e-12
    _stencils: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        n = self.grid_n
        if n < 2 or n & (n - 1):
            raise ValueError("grid_n must be a power of two")
        used = set(np.unique(self.orbit.symbols).tolist())
        if used and max(used) >= len(self.family):
            raise ValueError("orbit uses a symbol without a map and potential")

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.grid_n) / self.grid_n

    def symbol(self, j: int) -> int:
        return symbol_at(self.orbit, j)

    def fiber(self, j: int) -> FiberMap:
        return self.family.maps[self.symbol(j)]

    def potential(self, j: int) -> PotentialFiber:
        return self.family.potentials[self.symbol(j)]

    def stencil(self, s: int) -> _Stencil:
        st = self._stencils.get(s)
        if st is None:
            f = self.family.maps[s]
            pot = self.family.potentials[s]
            n = self.grid_n
            y = preimages(f, self.nodes, self.preimage_tol)
            w = np.exp(pot(y))
            pos = y * n
            i0 = np.floor(pos).astype(np.int64)
            fr = pos - i0
            i0 %= n
            st = _Stencil(y, w, i0, fr)
            self._stencils[s] = st
        return st

    def with_grid(self, n: int) -> "TransferContext":
        return TransferContext(self.family, self.orbit, n, self.preimage_tol)


def _apply_values(st: _Stencil, v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    i1 = st.i0 + 1
    i1[i1 == n] = 0
    gy = (1.0 - st.frac) * v[st.i0] + st.frac * v[i1]
    return (st.weight * gy).sum(axis=1)


def apply_transfer(ctx: TransferContext, j: int, g: GridFunction) -> GridFunction:
    """Transfer operator of the fiber at position ``j`` applied to ``g``."""
    if g.n != ctx.grid_n:
        raise ValueError("grid size mismatch")
    return GridFunction(_apply_values(ctx.stencil(ctx.symbol(j)), g.values))


def hat_deposit(points: np.ndarray, mass: np.ndarray, n: int) -> np.ndarray:
    """Spread point masses onto the two neighbouring nodes with hat weights."""
    pos = (np.asarray(points, dtype=np.float64) % 1.0) * n
    i0 = np.floor(pos).astype(np.int64)
    fr = pos - i0
    i0 %= n
    i1 = (i0 + 1) % n
    return np.bincount(i0.ravel(), ((1.0 - fr) * mass).ravel(), n) + np.bincount(
        i1.ravel(), (fr * mass).ravel(), n
    )


def apply_adjoint(ctx: TransferContext, j: int, rho: np.ndarray) -> np.ndarray:
    """Discrete adjoint of :func:`apply_transfer` acting on node weights."""
    st = ctx.stencil(ctx.symbol(j))
    n = ctx.grid_n
    rho = np.asarray(rho, dtype=np.float64)
    mass = st.weight * rho[:, None]
    i1 = st.i0 + 1
    i1[i1 == n] = 0
    return np.bincount(st.i0.ravel(), ((1.0 - st.frac) * mass).ravel(), n) + np.bincount(
        i1.ravel(), (st.frac * mass).ravel(), n
    )


def tree_depth_budget(ctx: TransferContext, j: int, depth: int) -> int:
    """Number of leaves of the preimage tree from position ``j + depth`` down to ``j``."""
    degs = [ctx.family.maps[s].degree for s in ctx.orbit.window(j, j + depth)]
    return int(np.prod(np.asarray(degs, dtype=np.float64)))


def reference_measure(
    ctx: TransferContext, j: int, depth: int = 18, anchor: float = 0.0
) -> np.ndarray:
    """Grid weights of the reference measure at position ``j``.

    The measure ``g -> L^depth g(anchor) / L^depth 1(anchor)`` (operators along
    positions ``j .. j+depth-1``) is evaluated exactly on the preimage tree of
    ``anchor`` and deposited on the grid with hat weights.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    if not (ctx.orbit.contains(j) and ctx.orbit.contains(j + depth)):
        raise OrbitWindowError(f"positions {j}..{j + depth} not all in the orbit window")
    leaves = tree_depth_budget(ctx, j, depth)
    if leaves > TREE_BUDGET:
        raise TreeBudgetError(f"preimage tree has {leaves} leaves (budget {TREE_BUDGET})")
    n = ctx.grid_n
    acc = np.zeros(n)
    # log weights are shifted by a running reference to avoid underflow; the
    # reference is shared by all chunks so masses stay comparable.
    shift = 0.0
    for p in range(j + depth - 1, j - 1, -1):
        pot = ctx.potential(p)
        shift += float(np.max(pot.on_grid(1024)))
    stack = [(np.array([float(anchor) % 1.0]), np.zeros(1), j + depth)]
    while stack:
        pts, logw, level = stack.pop()
        if level == j:
            acc += hat_deposit(pts, np.exp(logw - shift), n)
            continue
        f = ctx.fiber(level - 1)
        if pts.shape[0] * f.degree > _CHUNK and pts.shape[0] > 1:
            half = pts.shape[0] // 2
            stack.append((pts[half:], logw[half:], level))
            stack.append((pts[:half], logw[:half], level))
            continue
        y = preimages(f, pts, ctx.preimage_tol)
        lw = logw[:, None] + ctx.potential(level - 1)(y)
        stack.append((y.ravel(), lw.ravel(), level - 1))
    total = acc.sum()
    if not (total > 0 and np.isfinite(total)):
        raise FloatingPointError("reference-measure mass collapsed (underflow or overflow)")
    return acc / total


def lambda_at(ctx: TransferContext, j: int, nu_next: np.ndarray) -> float:
    """``nu_{j+1}(L_j 1)``."""
    l1 = apply_transfer(ctx, j, GridFunction.constant(1.0, ctx.grid_n)).values
    return float(np.dot(np.asarray(nu_next, dtype=np.float64), l1))


@dataclass(frozen=True)
class Pullback:
    """Result of :func:`density_pullback`."""

    h: GridFunction
    log_factors: np.ndarray
    lam: float
    residual: float

    def __iter__(self):
        yield self.h
        yield self.log_factors


def _pullback_values(ctx: TransferContext, j: int, past_depth: int, params: ConeParams | None):
    start = j - past_depth
    if not ctx.orbit.contains(start):
        raise OrbitWindowError(f"past depth {past_depth} at position {j} leaves the window")
    v = np.ones(ctx.grid_n)
    logs = np.empty(past_depth)
    for step, p in enumerate(range(start, j)):
        v = _apply_values(ctx.stencil(ctx.symbol(p)), v)
        m = v.mean()
        logs[step] = math.log(m)
        v = v / m
        if params is not None:
            ok, margin = cone_member(GridFunction(v), params)
            if not ok:
                raise ConeViolation(f"pullback iterate left the cone at position {p} (margin {margin:.4g})")
    return v, logs


def density_pullback(
    ctx: TransferContext,
    j: int,
    past_depth: int = 30,
    nu: np.ndarray | None = None,
    nu_next: np.ndarray | None = None,
    params: ConeParams | None = None,
    nu_depth: int = 18,
) -> Pullback:
    """Density at position ``j`` as the normalized pullback of the constant 1.

    ``nu`` and ``nu_next`` are the reference weights at positions ``j`` and
    ``j+1``; they are computed with :func:`reference_measure` when omitted.
    The residual compares ``L_j h_j / lambda_j`` with an independent pullback
    of the same depth at position ``j+1``.  When ``params`` is given every
    iterate is checked for cone membership.
    """
    if nu is None:
        nu = reference_measure(ctx, j, nu_depth)
    if nu_next is None:
        nu_next = reference_measure(ctx, j + 1, nu_depth)
    v, logs = _pullback_values(ctx, j, past_depth, params)
    v = v / float(np.dot(nu, v))
    w, _ = _pullback_values(ctx, j + 1, past_depth, params)
    w = w / float(np.dot(nu_next, w))
    lam = lambda_at(ctx, j, nu_next)
    lh = _apply_values(ctx.stencil(ctx.symbol(j)), v) / lam
    residual = float(np.abs(lh - w).max())
    return Pullback(GridFunction(v), logs, lam, residual)


@dataclass(eq=False)
class UlamMatrix:
    """Hat-basis discretization of one fiber's transfer operator.

    Row ``i`` corresponds to the target node ``x_i`` and column ``i'`` to the
    source node, so ``(U @ g)[i]`` approximates ``L g(x_i)``; the right
    eigenvector is a density and the left eigenvector a reference measure.
    """

    matrix: sp.csr_matrix
    symbol: int
    n: int

    def leading(self, side: str = "right", tol: float = 1e-12, max_iter: int = 100_000):
        """Leading eigenvalue and eigenvector by power iteration.

        Right vectors are scaled to mean 1, left vectors to sum 1.
        """
        op = self.matrix if side == "right" else self.matrix.T.tocsr()
        v = np.ones(self.n)
        lam = 0.0
        for it in range(max_iter):
            w = op @ v
            lam_new = w.sum() / v.sum()
            w = w / w.mean()
            if it > 0 and abs(lam_new - lam) <= tol * lam_new and np.abs(w - v).max() <= tol:
                v = w
                lam = lam_new
                break
            v = w
            lam = lam_new
        else:
            raise RuntimeError("power iteration stagnated")
        if side == "left":
            v = v / v.sum()
        return float(lam), v


def ulam_matrix(ctx: TransferContext, symbol: int, n: int | None = None) -> UlamMatrix:
    """Assemble the Ulam matrix of ``symbol`` on an ``n``-node grid."""
    n = ctx.grid_n if n is None else int(n)
    if n & (n - 1) or n > 2**14:
        raise ValueError("n must be a power of two at most 2**14")
    f = ctx.family.maps[symbol]
    pot = ctx.family.potentials[symbol]
    x = np.arange(n) / n
    y = preimages(f, x, ctx.preimage_tol)
    w = np.exp(pot(y))
    cell = y * n
    left = np.floor(cell).astype(np.int64)
    t = cell - left
    rows = np.repeat(np.arange(n), f.degree)
    r = np.concatenate([rows, rows])
    c = np.concatenate([(left % n).ravel(), ((left + 1) % n).ravel()])
    data = np.concatenate([(w * (1.0 - t)).ravel(), (w * t).ravel()])
    m = sp.coo_matrix((data, (r, c)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    return UlamMatrix(m, int(symbol), n)


@dataclass(frozen=True)
class InvariantMeasure:
    weights: np.ndarray
    defects: dict

    @property
    def max_defect(self) -> float:
        return max(self.defects.values()) if self.defects else 0.0


def invariant_measure(ctx: TransferContext, j: int, eq: "EquilibriumData",
                      observables: dict | None = None) -> InvariantMeasure:
    """Weights ``h nu`` at position ``j`` and pushforward defects on test observables."""
    obs = TEST_OBSERVABLES if observables is None else observables
    mu = eq.mu(j)
    mu_next = eq.mu(j + 1)
    x = ctx.nodes
    fx = eval_map(ctx.fiber(j), x)
    defects = {name: float(abs(np.dot(mu, g(fx)) - np.dot(mu_next, g(x)))) for name, g in obs.items()}
    return InvariantMeasure(mu, defects)


@dataclass(frozen=True)
class DecayConstants:
    """Sampled projective diameter of operator images and the implied rate."""

    delta_hat: float
    tau_hat: float
    delta_by_fiber: dict
    n_pairs: int
    empirical: bool = True

    def __iter__(self):
        yield self.delta_hat
        yield self.tau_hat


def decay_bound_constants(params: ConeParams, samples: Iterable, labels: Sequence | None = None) -> DecayConstants:
    """``Delta_hat`` = largest projective distance among image pairs; ``tau_hat = 1 - exp(-Delta_hat)``.

    ``samples`` yields pairs of image grid functions; ``labels`` optionally tags
    each pair with its fiber symbol so the per-fiber maxima are also reported.
    """
    pairs = list(samples)
    if len(pairs) < 32:
        raise ValueError("need at least 32 sampled cone pairs")
    labels = list(labels) if labels is not None else [None] * len(pairs)
    per: dict = {}
    best = 0.0
    for (a, b), lab in zip(pairs, labels):
        d = theta_metric(a, b, params).value
        best = max(best, d)
        if lab is not None:
            per[lab] = max(per.get(lab, 0.0), d)
    return DecayConstants(best, 1.0 - math.exp(-best), per, len(pairs))


def sample_cone_pairs(n: int, params: ConeParams, count: int, rng: np.random.Generator,
                      fill: tuple[float, float] = (0.2, 0.9), max_freq: int = 4):
    """Random pairs of cone members built from low-frequency trigonometric polynomials.

    Each function is ``c + p`` with ``p`` a random trigonometric polynomial and
    ``c`` chosen so that the cone ratio equals ``k`` times a uniform draw from
    ``fill``.
    """
    x = np.arange(n) / n
    out = []

    def one():
        p = np.zeros(n)
        for m in range(1, max_freq + 1):
            a, b = rng.normal(size=2) / m
            p += a * np.cos(2 * np.pi * m * x) + b * np.sin(2 * np.pi * m * x)
        sem = holder_seminorm(GridFunction(p), params.alpha, params.delta)
        target = params.k * rng.uniform(*fill)
        c = sem / target - p.min()
        return GridFunction(c + p)

    for _ in range(count):
        out.append((one(), one()))
    return out


def contraction_samples(ctx: TransferContext, j: int, params: ConeParams, pairs):
    """Projective distances before and after one normalized operator step.

    Returns a list of ``(theta_before, theta_after, image_pair)``.
    """
    rows = []
    for a, b in pairs:
        before = theta_metric(a, b, params).value
        la = apply_transfer(ctx, j, a)
        lb = apply_transfer(ctx, j, b)
        la = la * (1.0 / la.values.mean())
        lb = lb * (1.0 / lb.values.mean())
        after = theta_metric(la, lb, params).value
        rows.append((before, after, (la, lb)))
    return rows


@dataclass(eq=False)
class EquilibriumData:
    """Eigendata along the positions ``0..n_positions`` of an orbit.

    ``lambda_by_pos[j]`` is defined for ``j < n_positions``; densities and
    reference weights are stored for ``j <= n_positions``.
    """

    lambda_by_pos: np.ndarray
    h_by_pos: np.ndarray = field(repr=False)
    nu_weights_by_pos: np.ndarray = field(repr=False)
    pressure: float
    residual_h: float
    R_bound: float
    h_convergence: float = float("nan")
    log_factor_gap: float = float("nan")
    grid_n: int = 0
    past_depth: int = 0
    nu_depth: int = 0
    anchor: float = 0.0

    @property
    def n_positions(self) -> int:
        return self.lambda_by_pos.shape[0]

    def h(self, j: int) -> GridFunction:
        return GridFunction(self.h_by_pos[j])

    def nu(self, j: int) -> np.ndarray:
        return self.nu_weights_by_pos[j]

    def mu(self, j: int) -> np.ndarray:
        w = self.h_by_pos[j] * self.nu_weights_by_pos[j]
        return w / w.sum()

    def summary(self) -> dict:
        lam = self.lambda_by_pos
        return {
            "n_positions": int(self.n_positions),
            "grid_n": int(self.grid_n),
            "past_depth": int(self.past_depth),
            "nu_depth": int(self.nu_depth),
            "anchor": float(self.anchor),
            "pressure": float(self.pressure),
            "residual_h": float(self.residual_h),
            "h_convergence": float(self.h_convergence),
            "log_factor_gap": float(self.log_factor_gap),
            "R_bound": float(self.R_bound),
            "h_min": float(self.h_by_pos.min()),
            "h_max": float(self.h_by_pos.max()),
            "lambda_min": float(lam.min()),
            "lambda_max": float(lam.max()),
            "lambda_by_pos": lam.tolist(),
        }


def compute_equilibrium(
    ctx: TransferContext,
    n_positions: int,
    params: ConeParams,
    past_depth: int = 30,
    nu_depth: int = 18,
    anchor: float = 0.0,
) -> EquilibriumData:
    """Eigendata at positions ``0..n_positions`` in one forward and one backward sweep.

    Densities come from a single forward sweep of mean-normalized operator
    applications started at ``-past_depth``.  The reference measure is built
    from the preimage tree at position ``n_positions`` and carried back with
    the discrete adjoint, which is the conformality relation
    ``L_j^* nu_{j+1} = lambda_j nu_j``; ``lambda_j`` is its normalizer.
    """
    if n_positions < 1:
        raise ValueError("need at least one position")
    n = ctx.grid_n
    P = n_positions
    if not ctx.orbit.contains(-past_depth):
        raise OrbitWindowError("orbit window too short for the requested past depth")
    # forward sweep for densities
    H = np.empty((P + 1, n))
    logs = np.empty(P + past_depth)
    v = np.ones(n)
    for step, p in enumerate(range(-past_depth, P)):
        if p == 0:
            H[0] = v
        v = _apply_values(ctx.stencil(ctx.symbol(p)), v)
        m = v.mean()
        logs[step] = math.log(m)
        v = v / m
        if p + 1 <= P and p + 1 > 0:
            H[p + 1] = v
    # backward sweep for reference measures
    depth = nu_depth
    while depth > 1 and tree_depth_budget(ctx, P, depth) > TREE_BUDGET:
        depth -= 1
    NU = np.empty((P + 1, n))
    NU[P] = reference_measure(ctx, P, depth, anchor)
    lam = np.empty(P)
    for p in range(P - 1, -1, -1):
        rho = apply_adjoint(ctx, p, NU[p + 1])
        lam[p] = rho.sum()
        NU[p] = rho / lam[p]
    # normalization int h dnu = 1
    H /= np.einsum("ij,ij->i", H, NU)[:, None]
    resid = 0.0
    for p in range(P):
        lh = _apply_values(ctx.stencil(ctx.symbol(p)), H[p]) / lam[p]
        resid = max(resid, float(np.abs(lh - H[p + 1]).max()))
    # convergence of the density at position 0 with half the past depth
    if past_depth >= 2:
        v2, _ = _pullback_values(ctx, 0, past_depth // 2, None)
        v2 = v2 / np.dot(NU[0], v2)
        h_conv = float(np.abs(v2 - H[0]).max())
    else:
        h_conv = float("nan")
    # the logged mean-normalization factors telescope against log lambda:
    # sum_p log m_p - sum_p log lambda_p = log c_0 - log c_P, so the per-step
    # average of the difference must vanish as the window grows
    gap = float(abs(logs[past_depth:].sum() - np.log(lam).sum()) / P)
    return EquilibriumData(
        lambda_by_pos=lam,
        h_by_pos=H,
        nu_weights_by_pos=NU,
        pressure=float(np.log(lam).mean()),
        residual_h=resid,
        R_bound=params.R_bound,
        h_convergence=h_conv,
        log_factor_gap=gap,
        grid_n=n,
        past_depth=past_depth,
        nu_depth=depth,
        anchor=float(anchor),
    )
