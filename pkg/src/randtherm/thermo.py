"""Pressure, Gibbs bounds, entropy, correlation decay and stability experiments."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import kernels
from .base import BaseOrbit, philox_generator
from .cones import ConeParams, GridFunction
from .fibers import FiberFamily, lift_inverse, preimages
from .hypotheses import exactness_time, hyperbolic_times, log_expansions
from .transfer import (
    TREE_BUDGET,
    EquilibriumData,
    TransferContext,
    compute_equilibrium,
    tree_depth_budget,
)

__all__ = [
    "PressureEstimate",
    "SeparatedResult",
    "BallsResult",
    "GibbsReport",
    "DecayReport",
    "StabilityReport",
    "LeafMeasure",
    "pressure_lambda",
    "pressure_separated",
    "separated_log_sum",
    "dynamical_ball",
    "dynamical_balls",
    "pressure_balls",
    "reference_leaves",
    "gibbs_check",
    "rokhlin_entropy",
    "decay_correlations",
    "stability_sweep",
    "estimate_pressure",
    "tiling_starts",
]


# ---------------------------------------------------------------------------
# pressure


def pressure_lambda(eq: EquilibriumData, n: int | None = None) -> float:
    """Average of ``log lambda`` over the first ``n`` positions."""
    lam = eq.lambda_by_pos
    n = lam.shape[0] if n is None else n
    if n < 1 or n > lam.shape[0]:
        raise ValueError(f"lambda available at {lam.shape[0]} positions, asked for {n}")
    return float(np.log(lam[:n]).mean())


def _next_pow2(v: float) -> int:
    return 1 << max(1, int(math.ceil(math.log2(max(v, 2.0)))))


def _check_eps(ctx: TransferContext, j: int, n: int, eps: float) -> None:
    for i in range(n + 1):
        g = ctx.fiber(j + i).max_derivative
        if eps * (1.0 + g) >= 1.0:
            raise ValueError(f"eps={eps} too large for monotone separation tests (max G'={g})")


def separated_log_sum(ctx: TransferContext, n: int, eps: float, j: int = 0,
                      grid_n: int | None = None, max_grid: int = 2**22) -> tuple[float, int, int]:
    """``log sum exp(S_n phi)`` over a greedy separated set.

    Returns ``(log_sum, n_points, grid_used)``.  The grid is sized so that
    neighbouring nodes stay at least 16 times closer than ``eps`` at every
    step, unless ``grid_n`` is given.
    """
    if n == 0:
        return 0.0, 1, 1
    _check_eps(ctx, j, n, eps)
    expand = float(np.prod([ctx.fiber(j + i).max_derivative for i in range(n - 1)]))
    need = _next_pow2(16.0 * expand / eps)
    if grid_n is None:
        if need > max_grid:
            raise ValueError(f"grid too coarse: need {need} nodes for n={n}, eps={eps}")
        grid_n = need
    if eps < 2.0 / grid_n or grid_n < need // 16:
        raise ValueError(f"grid of {grid_n} nodes too coarse for eps={eps}, n={n}")
    x = np.arange(grid_n) / grid_n
    orbits = np.empty((n, grid_n))
    S = np.zeros(grid_n)
    y = x
    for i in range(n):
        orbits[i] = y
        S += ctx.potential(j + i)(y)
        if i < n - 1:
            y = ctx.fiber(j + i).lift(y)
            y = y - np.floor(y)
    kept = kernels.greedy_separated(orbits, float(eps))
    return float(logsumexp(S[kept])), int(kept.shape[0]), grid_n


@dataclass
class SeparatedResult:
    value: float
    raw: float
    n: int
    n0: int
    eps: float
    counts: list
    grids: list


def pressure_separated(ctx: TransferContext, n: int, eps: float, n0: int = 0,
                       starts: Sequence[int] = (0,), grid_n: int | None = None,
                       detail: bool = False):
    """Separated-set pressure estimate.

    With ``n0 = 0`` this is ``(1/n) log sum_{F_n} exp(S_n phi)``.  With
    ``0 < n0 < n`` it is the growth rate ``(log Z_n - log Z_{n0}) / (n - n0)``,
    which removes the ``log(1/eps)/n`` offset of the raw quotient.  The value
    is averaged over the base positions in ``starts``.
    """
    if not (0 <= n0 < n):
        raise ValueError("need 0 <= n0 < n")
    vals, raws, counts, grids = [], [], [], []
    for j in starts:
        z1, c1, g1 = separated_log_sum(ctx, n, eps, j, grid_n)
        z0, c0, g0 = separated_log_sum(ctx, n0, eps, j, grid_n) if n0 > 0 else (0.0, 1, 1)
        vals.append((z1 - z0) / (n - n0))
        raws.append(z1 / n)
        counts.append([c0, c1])
        grids.append([g0, g1])
    res = SeparatedResult(float(np.mean(vals)), float(np.mean(raws)), n, n0, eps, counts, grids)
    return res if detail else res.value


def dynamical_balls(ctx: TransferContext, x, n: int, eps: float, j: int = 0):
    """Vectorised dynamical balls ``{y : d(f^i y, f^i x) < eps, 0 <= i <= n}``.

    Returns lift endpoints ``(lo, hi)`` with ``lo < x < hi``.  The ε-interval
    around ``f^n x`` is pulled back through the global lift inverses and
    intersected with the ε-interval at every level; this is exact when
    ``eps (1 + max G') < 1``.
    """
    _check_eps(ctx, j, n, eps)
    x = np.asarray(x, dtype=np.float64)
    X = [x]
    for i in range(n):
        X.append(ctx.fiber(j + i).lift(X[-1]))
    lo = X[n] - eps
    hi = X[n] + eps
    for i in range(n - 1, -1, -1):
        f = ctx.fiber(j + i)
        lo = np.maximum(lift_inverse(f, lo), X[i] - eps)
        hi = np.minimum(lift_inverse(f, hi), X[i] + eps)
    return lo, hi


def dynamical_ball(ctx: TransferContext, x: float, n: int, eps: float, j: int = 0) -> tuple[float, float]:
    """Single dynamical ball as a lift interval ``(lo, hi)`` around ``x``."""
    lo, hi = dynamical_balls(ctx, np.array(float(x)), n, eps, j)
    return float(lo), float(hi)


@dataclass
class BallsResult:
    value: float
    crossing: float
    crossing_coarse: float
    N: int
    N1: int
    eps: float
    n_balls: list
    log_cover: list
    grid: list

    def cover_sum(self, beta: float) -> float:
        """Cover sum at level ``N`` for a given ``beta``."""
        return math.exp(self.log_cover[1] - beta * self.N)


def _cover(ctx: TransferContext, N: int, eps: float, j: int, grid_n: int | None, max_grid: int):
    expand = float(np.prod([ctx.fiber(j + i).max_derivative for i in range(N)]))
    need = _next_pow2(8.0 * expand / eps)
    M = need if grid_n is None else grid_n
    if M > max_grid:
        raise ValueError(f"cover needs {M} candidate centres (max {max_grid})")
    x = np.arange(M) / M
    lo, hi = dynamical_balls(ctx, x, N, eps, j)
    S = np.zeros(M)
    y = x
    for i in range(N):
        S += ctx.potential(j + i)(y)
        y = ctx.fiber(j + i).lift(y) % 1.0
    # greedy cover of the circle, candidates replicated one period to the right
    a = np.concatenate([lo, lo + 1.0])
    b = np.concatenate([hi, hi + 1.0])
    order = np.argsort(a, kind="stable")
    a_s = a[order]
    b_s = b[order]
    pmax = np.maximum.accumulate(b_s)
    parg = np.empty(pmax.shape[0], dtype=np.int64)
    # index attaining the running max
    best = 0
    for i in range(b_s.shape[0]):
        if b_s[i] >= b_s[best]:
            best = i
        parg[i] = best
    start = lo[0]
    chosen = [0]
    front = hi[0]
    target = start + 1.0
    while front < target:
        k = int(np.searchsorted(a_s, front, side="left")) - 1
        if k < 0 or pmax[k] <= front:
            raise RuntimeError("cover construction failed: gap between candidate balls")
        idx = int(order[parg[k]]) % M
        chosen.append(idx)
        front = float(pmax[k])
    chosen_arr = np.asarray(chosen)
    return float(logsumexp(S[chosen_arr])), len(chosen), M


def pressure_balls(ctx: TransferContext, eps: float, N: int, beta_grid: Sequence[float] | None = None,
                   j: int = 0, N1: int | None = None, grid_n: int | None = None,
                   max_grid: int = 2**21, detail: bool = False, starts: Sequence[int] | None = None):
    """Critical exponent of greedy dynamical-ball covers.

    For each level the cover sum ``sum exp(-beta N + S_N phi(centre))`` is
    monotone in ``beta``; its crossing of 1 is bracketed on ``beta_grid`` and
    refined by bisection.  The returned value is the growth rate between the
    levels ``N1`` and ``N`` (default ``N1 = N // 2``), which cancels the
    ``eps``-dependent prefactor of the cover size; the single-level crossing
    at ``N`` is kept in the detailed result.  With ``starts`` the log cover
    sums are averaged over those base positions (``j`` is then ignored).
    """
    N1 = N // 2 if N1 is None else N1
    if not (0 < N1 < N):
        raise ValueError("need 0 < N1 < N")
    if beta_grid is None:
        beta_grid = np.linspace(-2.0, 4.0, 61)
    starts = (j,) if starts is None else tuple(starts)
    logs, counts, grids = [], [], []
    for lev in (N1, N):
        per = [_cover(ctx, lev, eps, j0, grid_n, max_grid) for j0 in starts]
        logs.append(float(np.mean([r[0] for r in per])))
        counts.append(int(round(np.mean([r[1] for r in per]))))
        grids.append(max(r[2] for r in per))

    def crossing(lz: float, lev: int) -> float:
        g = np.asarray(sorted(beta_grid), dtype=np.float64)
        vals = lz - g * lev  # log of the cover sum
        above = np.flatnonzero(vals >= 0)
        below = np.flatnonzero(vals < 0)
        if above.size == 0 or below.size == 0:
            raise RuntimeError("beta grid does not bracket the crossing")
        lo, hi = g[above.max()], g[below.min()]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if lz - mid * lev >= 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return 0.5 * (lo + hi)

    b1 = crossing(logs[0], N1)
    bN = crossing(logs[1], N)
    value = (N * bN - N1 * b1) / (N - N1)
    res = BallsResult(float(value), float(bN), float(b1), N, N1, eps, counts, logs, grids)
    return res if detail else res.value


@dataclass
class PressureEstimate:
    lambda_route: float
    separated_route: float
    balls_route: float
    n_used: int
    eps_used: float
    separated_raw: float
    balls_single_level: float
    lambda_matched: float
    starts: list
    refinement: list = field(default_factory=list)

    @property
    def discrepancies(self) -> dict:
        return {
            "separated_minus_lambda": self.separated_route - self.lambda_matched,
            "balls_minus_lambda": self.balls_route - self.lambda_matched,
        }


def tiling_starts(n: int, n0: int, positions: int, max_starts: int | None = None) -> list[int]:
    """Start positions whose increment windows ``[j+n0, j+n)`` tile ``[0, positions)``."""
    step = n - n0
    out = list(range(-n0, positions - n + 1, step))
    if not out:
        raise ValueError(f"window of {positions} positions is shorter than n - n0 = {step}")
    return out[:max_starts] if max_starts else out


def estimate_pressure(ctx: TransferContext, eq: EquilibriumData, n: int, eps: float,
                      n_balls: int | None = None, eps_balls: float | None = None,
                      refine: int = 1, max_starts: int | None = 16) -> PressureEstimate:
    """All three pressure routes, plus an ``eps``-halving refinement table.

    The growth-rate routes use increments between ``n/2`` and ``n``; their
    start positions are chosen so the increment windows tile the first
    positions of the equilibrium window, and ``lambda_matched`` is the mean
    ``log lambda`` over exactly those positions.
    """
    nb = n if n_balls is None else n_balls
    eb = eps if eps_balls is None else eps_balls
    st_sep = tiling_starts(n, n // 2, eq.n_positions, max_starts)
    st_bal = tiling_starts(nb, nb // 2, eq.n_positions, max_starts)
    if st_sep != st_bal and nb == n:
        raise AssertionError("inconsistent start positions")
    covered = sorted({j + i for j in st_sep for i in range(n // 2, n)})
    sep = pressure_separated(ctx, n, eps, n0=n // 2, starts=st_sep, detail=True)
    balls = pressure_balls(ctx, eb, nb, detail=True, starts=st_bal)
    table = [{"eps": eps, "eps_balls": eb, "separated": sep.value, "balls": balls.value}]
    e, e2 = eps, eb
    for _ in range(refine):
        e, e2 = e / 2, e2 / 2
        try:
            s2 = pressure_separated(ctx, n, e, n0=n // 2, starts=st_sep)
            b2 = pressure_balls(ctx, e2, nb, starts=st_bal)
            table.append({"eps": e, "eps_balls": e2, "separated": s2, "balls": b2})
        except (ValueError, RuntimeError) as exc:
            table.append({"eps": e, "eps_balls": e2, "error": str(exc)})
    return PressureEstimate(
        lambda_route=pressure_lambda(eq),
        separated_route=sep.value,
        balls_route=balls.value,
        n_used=n,
        eps_used=eps,
        separated_raw=sep.raw,
        balls_single_level=balls.crossing,
        lambda_matched=float(np.log(eq.lambda_by_pos[covered]).mean()),
        starts=st_sep,
        refinement=table,
    )


# ---------------------------------------------------------------------------
# Gibbs property


@dataclass
class LeafMeasure:
    """Reference measure as weighted preimage-tree leaves.

    Mass is spread uniformly over the cell between the midpoints to the
    neighbouring leaves, which reproduces Lebesgue measure exactly for
    equally spaced leaves with equal weights.
    """

    points: np.ndarray
    weights: np.ndarray
    _bounds: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        order = np.argsort(self.points % 1.0)
        p = self.points[order] % 1.0
        w = self.weights[order] / self.weights.sum()
        nxt = np.append(p[1:], p[0] + 1.0)
        mids = 0.5 * (p + nxt)  # right boundary of each cell
        left = np.append(mids[-1] - 1.0, mids[:-1])
        self.points, self.weights = p, w
        self._bounds = np.append(left, mids[-1])
        self._cum = np.concatenate([[0.0], np.cumsum(w)])

    def cdf(self, t) -> np.ndarray:
        """Mass of ``[b_0, t)`` extended to the real line with period 1."""
        t = np.asarray(t, dtype=np.float64)
        b0 = self._bounds[0]
        k = np.floor(t - b0)
        u = t - k
        i = np.clip(np.searchsorted(self._bounds, u, side="right") - 1, 0, self.weights.shape[0] - 1)
        frac = (u - self._bounds[i]) / (self._bounds[i + 1] - self._bounds[i])
        return k + self._cum[i] + self.weights[i] * np.clip(frac, 0.0, 1.0)

    def mass(self, lo, hi) -> np.ndarray:
        return self.cdf(hi) - self.cdf(lo)

    def expect(self, g) -> float:
        return float(np.dot(self.weights, g(self.points)))


def reference_leaves(ctx: TransferContext, j: int, depth: int | None = None, anchor: float = 0.0,
                     budget: int = 2**20) -> LeafMeasure:
    """Un-binned leaves of the preimage tree at position ``j`` with masses ``exp(S phi)``."""
    if depth is None:
        depth = 1
        while (ctx.orbit.contains(j + depth + 1)
               and tree_depth_budget(ctx, j, depth + 1) <= budget):
            depth += 1
    if tree_depth_budget(ctx, j, depth) > min(budget, TREE_BUDGET):
        raise ValueError("leaf budget exceeded")
    pts = np.array([float(anchor) % 1.0])
    logw = np.zeros(1)
    for level in range(j + depth, j, -1):
        y = preimages(ctx.fiber(level - 1), pts, ctx.preimage_tol)
        logw = (logw[:, None] + ctx.potential(level - 1)(y)).ravel()
        pts = y.ravel()
    w = np.exp(logw - logw.max())
    return LeafMeasure(pts, w)


@dataclass
class GibbsReport:
    x: float
    eps: float
    c: float
    rows: list
    K_eps: float
    gamma_eps: float
    leaf_depth: int
    flags: list

    @property
    def band(self) -> tuple[float, float]:
        return self.gamma_eps / self.K_eps, self.K_eps

    def within(self, slack: float = 0.1) -> bool:
        lo, hi = self.band
        return all(lo * (1 - slack) <= r["ratio"] <= hi * (1 + slack) for r in self.rows)


def gibbs_check(ctx: TransferContext, x: float, eps: float, c: float, eq: EquilibriumData,
                j: int = 0, n_times: int = 10, leaves: LeafMeasure | None = None,
                alpha: float = 1.0) -> GibbsReport:
    """Gibbs ratios ``nu(B) lambda^n exp(-S_n phi(x))`` at hyperbolic times of ``x``.

    ``nu(B)`` is measured with the un-binned preimage-tree leaves at position
    ``j`` (see :class:`LeafMeasure`); ``lambda`` comes from ``eq``.
    """
    P = eq.n_positions
    s = log_expansions(ctx, x, P, j)
    rec = hyperbolic_times(s, c)
    times = [int(t) for t in rec.times if t < P]
    if not times:
        raise RuntimeError("no hyperbolic times found")
    if leaves is None:
        leaves = reference_leaves(ctx, j)
    log_lam = np.concatenate([[0.0], np.cumsum(np.log(eq.lambda_by_pos))])
    # distortion constant from the Hölder seminorms of the potentials
    grid = 4096
    sem = []
    for s_ in range(len(ctx.family)):
        v = ctx.family.potentials[s_].on_grid(grid)
        sem.append(kernels.holder_local(v, alpha, grid // 2))
    decay = math.exp(-c * alpha / 2.0)
    tail = max(sem) * decay**P / (1.0 - decay)
    total = sum(sem[ctx.symbol(j + k)] * decay**k for k in range(P)) + tail
    K = math.exp(eps**alpha * total)

    rows, flags = [], []
    gamma = math.inf
    for n in times:
        if len(rows) >= n_times:
            break
        lo, hi = dynamical_ball(ctx, x, n, eps, j)
        mass = float(leaves.mass(lo, hi))
        y = np.array(float(x))
        S = 0.0
        for i in range(n):
            S += float(ctx.potential(j + i)(y))
            y = ctx.fiber(j + i).lift(y) % 1.0
        try:
            nt = exactness_time(ctx, j + n, float(y), eps)
        except RuntimeError:
            nt = None
        if nt is not None and j + n + nt <= P:
            inf_sum = sum(float(ctx.potential(j + n + i).on_grid(grid).min()) for i in range(nt))
            g = math.exp(inf_sum - (log_lam[j + n + nt] - log_lam[j + n]))
            gamma = min(gamma, g)
        ratio = mass * math.exp(log_lam[j + n] - log_lam[j] - S)
        rows.append({"n": n, "lo": lo, "hi": hi, "nu_mass": mass, "S_n_phi": S,
                     "log_lambda_n": float(log_lam[j + n] - log_lam[j]), "ratio": ratio,
                     "n_tilde": nt})
    if not math.isfinite(gamma):
        gamma = 0.0
    for r in rows:
        if not (gamma / K <= r["ratio"] <= K):
            flags.append(r["n"])
    depth = int(round(math.log(leaves.points.shape[0]) / math.log(max(2, ctx.family.degree))))
    return GibbsReport(float(x), eps, c, rows, K, gamma, depth, flags)


# ---------------------------------------------------------------------------
# entropy


def rokhlin_entropy(ctx: TransferContext, eq: EquilibriumData, samples: int = 10_000,
                    n: int | None = None, seed: int = 0, block: int = 1024) -> dict:
    """Monte-Carlo Rokhlin entropy ``E_mu[log lambda - phi + log h'(f x) - log h(x)]``.

    Positions are visited round-robin over ``0..n-1``; within a position the
    point is drawn from the ``mu`` weights.  Blocks of ``block`` samples use
    generators keyed by ``(seed, 1000 + block index)``.
    """
    P = eq.n_positions if n is None else n
    if P > eq.n_positions:
        raise ValueError("not enough positions in the equilibrium data")
    x = ctx.nodes
    mu = np.stack([eq.mu(p) for p in range(P)])
    cum = np.cumsum(mu, axis=1)
    cum[:, -1] = 1.0
    vals = np.empty(samples)
    pos_all = np.arange(samples) % P
    for b, start in enumerate(range(0, samples, block)):
        stop = min(samples, start + block)
        rng = philox_generator(seed, 1000 + b)
        u = rng.random(stop - start)
        pos = pos_all[start:stop]
        idx = np.array([np.searchsorted(cum[p], ui, side="right") for p, ui in zip(pos, u)])
        idx = np.minimum(idx, x.shape[0] - 1)
        for p in np.unique(pos):
            sel = pos == p
            xi = x[idx[sel]]
            f = ctx.fiber(int(p))
            fx = f.lift(xi) % 1.0
            h0 = eq.h(int(p)).interp(xi)
            h1 = eq.h(int(p) + 1).interp(fx)
            if np.any(h0 <= 0) or np.any(h1 <= 0):
                raise FloatingPointError("density evaluated to a nonpositive value")
            vals[start:stop][sel] = (math.log(eq.lambda_by_pos[p]) - ctx.potential(int(p))(xi)
                                     + np.log(h1) - np.log(h0))
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    phi_int = float(np.mean([np.dot(mu[p], ctx.potential(p)(x)) for p in range(P)]))
    p_lam = pressure_lambda(eq, P)
    return {"entropy": est, "stderr": se, "phi_integral": phi_int, "pressure": p_lam,
            "gap": est + phi_int - p_lam, "samples": samples, "positions": P}


# ---------------------------------------------------------------------------
# decay of correlations


@dataclass
class DecayReport:
    observables: tuple[str, str]
    rows: list
    fitted_rate: float | None
    prefactor: float | None
    tau_hat: float | None
    noise_floor: float
    decayed_to_noise_at: int | None
    rate_within_envelope: bool | None

    def C(self) -> np.ndarray:
        return np.array([r["C_n"] for r in self.rows])


def decay_correlations(ctx: TransferContext, eq: EquilibriumData, psi: GridFunction | Callable,
                       phi_obs: GridFunction | Callable, n_max: int, j: int = 0,
                       names: tuple[str, str] = ("psi", "phi"), tau_hat: float | None = None,
                       slack: float = 0.05, leaves: LeafMeasure | None = None,
                       noise_factor: float = 10.0) -> DecayReport:
    """Correlations ``C_n = mu_j(psi * phi o f^n) - mu_{j+n}(phi) mu_j(psi)``.

    The quadrature nodes are the un-binned preimage-tree leaves at position
    ``j`` weighted by ``h_j``; ``f^n`` is applied pointwise to them.  The noise
    floor is ``noise_factor`` times the largest discrepancy between the
    pushed-forward leaf average of ``phi`` and its grid average under
    ``mu_{j+n}``, times ``|mu_j(psi)|``, plus ``1e-12``.
    """
    if j + n_max > eq.n_positions:
        raise ValueError("n_max exceeds the equilibrium window")
    ev_psi = psi.interp if isinstance(psi, GridFunction) else psi
    ev_phi = phi_obs.interp if isinstance(phi_obs, GridFunction) else phi_obs
    if leaves is None:
        leaves = reference_leaves(ctx, j)
    y = leaves.points
    m = leaves.weights * eq.h(j).interp(y)
    m = m / m.sum()
    psi_y = ev_psi(y)
    mpsi = float(np.dot(m, psi_y))
    x = ctx.nodes
    z = y.copy()
    rows = []
    defect = 0.0
    for n in range(1, n_max + 1):
        z = ctx.fiber(j + n - 1).lift(z) % 1.0
        phz = ev_phi(z)
        grid_mean = float(np.dot(eq.mu(j + n), ev_phi(x)))
        cn = float(np.dot(m * psi_y, phz)) - grid_mean * mpsi
        defect = max(defect, abs(float(np.dot(m, phz)) - grid_mean))
        rows.append({"n": n, "C_n": cn})
    floor = noise_factor * defect * abs(mpsi) + 1e-12
    above = [abs(r["C_n"]) > floor for r in rows]
    k = 0
    while k < len(above) and above[k]:
        k += 1
    noise_at = None if k == len(rows) else rows[k]["n"]
    rate = pref = None
    if k >= 2:
        ns = np.array([r["n"] for r in rows[:k]], dtype=np.float64)
        lc = np.log(np.abs([r["C_n"] for r in rows[:k]]))
        slope, icpt = np.polyfit(ns, lc, 1)
        rate = float(math.exp(slope))
        pref = float(math.exp(icpt))
    within = None if (rate is None or tau_hat is None) else bool(rate <= tau_hat + slack)
    return DecayReport(names, rows, rate, pref, tau_hat, floor, noise_at, within)


# ---------------------------------------------------------------------------
# stability


@dataclass
class StabilityReport:
    s_values: list
    s0: float
    rows: list
    spearman: dict
    strictly_decreasing: dict

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows])


def stability_sweep(family_of_s: Callable[[float], FiberFamily], s_values: Sequence[float], s0: float,
                    orbit: BaseOrbit, params: ConeParams, grid_n: int = 4096, n_positions: int = 4,
                    past_depth: int = 30, nu_depth: int = 18,
                    check: Callable[[FiberFamily], bool] | None = None,
                    threads: int = 1) -> StabilityReport:
    """Equilibrium pipeline for each parameter value and deltas against ``s0``.

    ``family_of_s`` returns the family (maps and potentials) at parameter
    ``s``.  Rows are sorted by decreasing ``|s - s0|``; values failing ``check``
    are kept and marked.
    """
    s_list = sorted(s_values, key=lambda s: -abs(s - s0))

    def run(s):
        fam = family_of_s(s)
        ok = True if check is None else bool(check(fam))
        ctx = TransferContext(fam, orbit, grid_n)
        return ok, compute_equilibrium(ctx, n_positions, params, past_depth, nu_depth)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, [s0] + list(s_list)))
    _, ref = results[0]
    rows = []
    for s, (ok, eq) in zip(s_list, results[1:]):
        rows.append({
            "s": float(s),
            "hypotheses_pass": ok,
            "d_lambda": float(np.abs(eq.lambda_by_pos - ref.lambda_by_pos).max()),
            "d_h": float(np.abs(eq.h_by_pos - ref.h_by_pos).max()),
            "d_pressure": float(abs(eq.pressure - ref.pressure)),
            "pressure": float(eq.pressure),
        })
    spear, dec = {}, {}
    sizes = [abs(r["s"] - s0) for r in rows]
    for key in ("d_lambda", "d_h", "d_pressure"):
        col = [r[key] for r in rows]
        if len(rows) >= 2 and np.ptp(col) > 0 and np.ptp(sizes) > 0:
            spear[key] = float(stats.spearmanr(sizes, col).statistic)
        else:
            spear[key] = float("nan")
        dec[key] = bool(all(b < a for a, b in zip(col, col[1:])))
    return StabilityReport([float(s) for s in s_list], float(s0), rows, spear, dec)
