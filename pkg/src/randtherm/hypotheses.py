"""Executable checks of the standing conditions on maps and potentials.

Conditions checked, per symbol ``w`` of the family:

(I)   ``L_w(x) < 1/sigma_w`` off the bad region and ``L_w(x) <= L_w`` on it.
(II)  the bad region meets fewer than ``deg f_w`` injectivity domains.
(III) topological exactness, sampled: small balls cover the circle after
      finitely many steps along the orbit.
(IV)  small variation: ``sup phi - inf phi + eps_phi < log deg - log q`` and
      ``|exp(phi)|_alpha < eps_phi exp(inf phi)``.
(V)   the cone-invariance constant ``gamma_w`` is below 1.
(VI)  ``Ltilde**rho * sigmatilde**-(1-rho) < exp(-2c)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .base import BaseOrbit
from .cones import DIAM, ConeParams, GridFunction, cone_member, holder_seminorm
from .fibers import ExpansionProfile, FiberFamily, FiberMap, expansion_constant, lift_inverse
from .transfer import TransferContext, apply_transfer, sample_cone_pairs

__all__ = [
    "SymbolRecord",
    "HypothesisReport",
    "HyperbolicTimeRecord",
    "check_conditions",
    "gamma_w",
    "default_c",
    "exactness_time",
    "hyperbolic_times",
    "brute_force_hyperbolic_times",
    "log_expansions",
    "delta_of_c",
    "visit_frequency",
    "verify_cone_invariance",
]

_ULP = np.finfo(np.float64).eps


@dataclass
class SymbolRecord:
    symbol: int
    label: str
    degree: int
    sigma: float
    L: float
    q: int
    p: int
    gamma: float
    bad_region: list
    sup_phi: float
    inf_phi: float
    holder_phi: float
    holder_exp_phi: float
    eps_phi: float
    iv_margin: float
    iv_holder_margin: float
    condition_I: bool
    condition_II: bool


@dataclass
class HypothesisReport:
    symbols: list[SymbolRecord]
    gamma: float
    eps_phi: float
    eps_0: float
    c: float
    rho: float
    L_tilde: float
    sigma_tilde: float
    vi_lhs: float
    vi_rhs: float
    delta_c: float
    q_hat: int
    q_bar: int
    p_hat: int
    alpha: float
    delta: float
    k: float
    m: int
    probe_radius: float
    grid_n: int
    exactness: list = field(default_factory=list)
    cone_invariance: dict | None = None
    passes: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.passes.values())

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.passes.items() if not v]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_pass"] = self.all_pass
        return d


@dataclass(frozen=True)
class HyperbolicTimeRecord:
    c: float
    log_expansions: np.ndarray
    times: np.ndarray


def gamma_w(eps_phi: float, p: int, q: int, sigma: float, L: float, degree: int,
            alpha: float, m: int) -> float:
    """Cone-invariance constant of one fiber."""
    head = (p * sigma ** (-alpha) + q * L**alpha * (1.0 + (L - 1.0) ** alpha)) / degree
    return math.exp(eps_phi) * head + eps_phi * L**alpha * (1.0 + m * DIAM**alpha)


def default_c(sigmas: Sequence[float], Ls: Sequence[float], rho: float) -> float:
    """Half of the largest ``c`` admitted by (VI); falls back to ``min log sigma / 4``."""
    budget = (1.0 - rho) * math.log(min(sigmas)) - rho * math.log(max(Ls))
    if budget > 0:
        return budget / 4.0
    return 0.25 * min(math.log(s) for s in sigmas)


def exactness_time(ctx: TransferContext, j: int, x: float, eps: float, cap: int = 64) -> int:
    """Steps after which the lift image of ``[x-eps, x+eps]`` has length at least 1."""
    if not (0.0 < eps < 0.5):
        raise ValueError("eps must lie in (0, 1/2)")
    lo = np.array(float(x) - eps)
    hi = np.array(float(x) + eps)
    for step in range(1, cap + 1):
        f = ctx.fiber(j + step - 1)
        lo = f.lift(lo)
        hi = f.lift(hi)
        if hi - lo >= 1.0:
            return step
        # keep the endpoints near the unit interval
        shift = np.floor(lo)
        lo = lo - shift
        hi = hi - shift
    raise RuntimeError(f"exactness failure: ball at {x} not spread after {cap} steps")


def hyperbolic_times(s, c: float) -> HyperbolicTimeRecord:
    """``c``-hyperbolic times of a sequence of log expansions."""
    if not c > 0:
        raise ValueError("c must be positive")
    s = np.asarray(s, dtype=np.float64)
    return HyperbolicTimeRecord(float(c), s, kernels.hyperbolic_times(s, float(c)))


def brute_force_hyperbolic_times(s, c: float) -> list[int]:
    """Direct check of every suffix; reference implementation."""
    s = list(map(float, s))
    out = []
    for n in range(1, len(s) + 1):
        if all(sum(s[n - k : n]) >= c * k for k in range(1, n + 1)):
            out.append(n)
    return out


def log_expansions(ctx: TransferContext, x: float | np.ndarray, n: int, j: int = 0,
                   probe_radius: float | None = None) -> np.ndarray:
    """``s_i = -log L_{j+i}(f^i x)`` for ``i < n`` (vectorised over ``x``)."""
    r = 2.0 / ctx.grid_n if probe_radius is None else probe_radius
    y = np.asarray(x, dtype=np.float64) % 1.0
    out = np.empty((n,) + y.shape)
    for i in range(n):
        f = ctx.fiber(j + i)
        out[i] = -np.log(expansion_constant(f, y, r))
        y = f.lift(y) % 1.0
    return out


def _branch_image_lengths(f: FiberMap) -> np.ndarray:
    g0 = float(f.lift(np.array(0.0)))
    ends = lift_inverse(f, g0 + np.arange(f.degree + 1, dtype=np.float64))
    return np.diff(f.lift(ends))


def delta_of_c(family: FiberFamily, c: float, grid_n: int = 4096) -> float:
    """Radius on which every inverse branch is defined: ``min(0.1, min image length / 2)``."""
    if not c > 0:
        raise ValueError("c must be positive")
    shortest = min(float(_branch_image_lengths(f).min()) for f in family.maps)
    if shortest < 1.0 / grid_n:
        raise ValueError("degenerate branch: image shorter than the grid spacing")
    return min(0.1, 0.5 * shortest)


def visit_frequency(ctx: TransferContext, profiles: Sequence[ExpansionProfile], x, n: int,
                    j: int = 0):
    """Fraction of ``i < n`` with ``f^i x`` in the bad region of fiber ``j+i``."""
    y = np.asarray(x, dtype=np.float64) % 1.0
    hits = np.zeros(y.shape)
    for i in range(n):
        s = ctx.symbol(j + i)
        hits += profiles[s].in_bad_region(y)
        y = ctx.family.maps[s].lift(y) % 1.0
    freq = hits / n
    return float(freq) if freq.ndim == 0 else freq


def _holder_global(values: np.ndarray, alpha: float) -> float:
    n = values.shape[0]
    return float(kernels.holder_local(values, alpha, n // 2))


def verify_cone_invariance(ctx: TransferContext, params: ConeParams, gamma: float,
                           n_samples: int = 16, seed: int = 0, positions: Sequence[int] = (0,)) -> dict:
    """Check that operator images of sampled cone members lie in the cone of aperture ``gamma k``."""
    rng = np.random.default_rng(seed)
    target = params.with_k(gamma * params.k)
    worst = 0.0
    ok = True
    for j in positions:
        for a, b in sample_cone_pairs(ctx.grid_n, params, n_samples, rng):
            for g in (a, b):
                img = apply_transfer(ctx, j, g)
                inside, _ = cone_member(img, target)
                ratio = holder_seminorm(img, params.alpha, params.delta) / img.min()
                worst = max(worst, ratio / params.k)
                ok &= inside
    return {"ok": bool(ok), "worst_ratio_over_k": worst, "gamma": gamma,
            "samples": 2 * n_samples * len(positions)}


def check_conditions(
    family: FiberFamily,
    profiles: Sequence[ExpansionProfile],
    cone: ConeParams,
    *,
    c: float | None = None,
    rho: float = 0.9,
    grid_n: int = 4096,
    ctx: TransferContext | None = None,
    exactness_points: Sequence[float] = (0.0, 0.1234, 0.5, 0.77),
    exactness_eps: Sequence[float] = (0.05, 0.01),
    exactness_positions: Sequence[int] = (0, 1, 2),
    exactness_cap: int = 64,
    cone_samples: int = 0,
) -> HypothesisReport:
    """Evaluate conditions (I)-(VI) and the derived constants.

    The (IV) margins are reported after subtracting an error allowance: the
    grid can miss the true extrema of ``phi`` by at most ``|phi|_alpha (h/2)**alpha``,
    plus a few units of rounding in the terms of the inequality.  A margin of
    exactly zero therefore reports as negative, matching the strict inequality.
    """
    if len(profiles) != len(family):
        raise ValueError("one expansion profile per symbol is required")
    alpha = cone.alpha
    h = 1.0 / grid_n
    records = []
    for s, (f, pot, prof) in enumerate(zip(family.maps, family.potentials, profiles)):
        if pot.eps_phi is None:
            raise ValueError(f"symbol {s}: eps_phi missing")
        eps = float(pot.eps_phi)
        v = pot.on_grid(grid_n)
        hol = _holder_global(v, alpha)
        hol_e = _holder_global(np.exp(v), alpha)
        if not (math.isfinite(hol) and math.isfinite(hol_e)):
            raise ValueError(f"symbol {s}: non-finite Hölder seminorm")
        sup, inf = float(v.max()), float(v.min())
        rhs = math.log(f.degree) - math.log(prof.q)
        lhs = sup - inf + eps
        allowance = 2.0 * hol * (h / 2.0) ** alpha + 8 * _ULP * (abs(rhs) + abs(sup) + abs(inf) + eps)
        iv_margin = rhs - lhs - allowance
        hol_allow = 8 * _ULP * abs(eps * math.exp(inf))
        iv_holder_margin = eps * math.exp(inf - hol * (h / 2.0) ** alpha) - hol_e - hol_allow
        g = gamma_w(eps, prof.p, prof.q, prof.sigma, prof.L_bound, f.degree, alpha, cone.m)
        records.append(SymbolRecord(
            symbol=s, label=f.label, degree=f.degree, sigma=prof.sigma, L=prof.L_bound,
            q=prof.q, p=prof.p, gamma=g, bad_region=[list(t) for t in prof.bad_region],
            sup_phi=sup, inf_phi=inf, holder_phi=hol, holder_exp_phi=hol_e, eps_phi=eps,
            iv_margin=iv_margin, iv_holder_margin=iv_holder_margin,
            condition_I=prof.condition_I, condition_II=prof.condition_II,
        ))
    sigmas = [r.sigma for r in records]
    Ls = [r.L for r in records]
    if c is None:
        c = default_c(sigmas, Ls, rho)
    L_t, s_t = max(Ls), min(sigmas)
    vi_lhs = L_t**rho * s_t ** (-(1.0 - rho))
    vi_rhs = math.exp(-2.0 * c)
    eps_phi = max(r.eps_phi for r in records)
    slack = min(math.log(r.degree) - math.log(r.q) - (r.sup_phi - r.inf_phi) for r in records)
    eps_0 = 0.5 * min(eps_phi, slack) if slack > 0 else float("nan")
    gamma = max(r.gamma for r in records)
    try:
        delta_c = delta_of_c(family, c, grid_n)
    except ValueError:
        delta_c = float("nan")

    exact_rows = []
    exact_ok = True
    if ctx is not None:
        for j in exactness_positions:
            for x in exactness_points:
                for e in exactness_eps:
                    try:
                        t = exactness_time(ctx, j, x, e, exactness_cap)
                    except RuntimeError:
                        t = None
                        exact_ok = False
                    exact_rows.append({"position": j, "x": x, "eps": e, "n_tilde": t})
    else:
        for s, f in enumerate(family.maps):
            solo = TransferContext(FiberFamily((f,), (family.potentials[s],)),
                                   BaseOrbit.constant(0, 0, exactness_cap + 1), 2)
            for x in exactness_points:
                for e in exactness_eps:
                    try:
                        t = exactness_time(solo, 0, x, e, exactness_cap)
                    except RuntimeError:
                        t = None
                        exact_ok = False
                    exact_rows.append({"symbol": s, "x": x, "eps": e, "n_tilde": t})

    report = HypothesisReport(
        symbols=records, gamma=gamma, eps_phi=eps_phi, eps_0=eps_0, c=float(c), rho=float(rho),
        L_tilde=L_t, sigma_tilde=s_t, vi_lhs=vi_lhs, vi_rhs=vi_rhs, delta_c=delta_c,
        q_hat=max(r.q for r in records), q_bar=min(r.q for r in records),
        p_hat=max(r.p for r in records), alpha=alpha, delta=cone.delta, k=cone.k, m=cone.m,
        probe_radius=max(p.probe_radius for p in profiles), grid_n=grid_n, exactness=exact_rows,
    )
    report.passes = {
        "I": all(r.condition_I for r in records),
        "II": all(r.condition_II for r in records),
        "III": exact_ok,
        "IV": all(r.iv_margin > 0 for r in records),
        "IV_holder": all(r.iv_holder_margin > 0 for r in records),
        "V": gamma < 1.0,
        "VI": vi_lhs < vi_rhs,
    }
    if ctx is not None and cone_samples > 0:
        inv = verify_cone_invariance(ctx, cone, gamma, cone_samples)
        report.cone_invariance = inv
    return report
