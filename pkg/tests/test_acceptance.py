"""Acceptance criteria 1-12.

Each test records one summary line through the ``criterion`` fixture; the
lines are printed in the "acceptance criteria" section at the end of the
pytest run.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from conftest import (
    SMOOTH_CONE,
    constant_ctx,
    doubling_family,
    sine_cos_family,
    smooth_random_ctx,
)
from randtherm import _pykernels, kernels
from randtherm.base import BaseSystem, sample_orbit, BaseOrbit
from randtherm.cli import main as cli_main
from randtherm.cones import ConeParams, GridFunction, theta_metric
from randtherm.fibers import (
    FiberFamily,
    build_expansion_profile,
    cos_potential,
    linear_map,
    manneville_map,
    potential_from_spec,
)
from randtherm.hypotheses import brute_force_hyperbolic_times, check_conditions
from randtherm.thermo import (
    decay_correlations,
    gibbs_check,
    pressure_lambda,
    pressure_separated,
    rokhlin_entropy,
    stability_sweep,
)
from randtherm.transfer import (
    TransferContext,
    apply_transfer,
    compute_equilibrium,
    contraction_samples,
    density_pullback,
    lambda_at,
    reference_measure,
    sample_cone_pairs,
    ulam_matrix,
)

PARAMS = ConeParams(1.0, 0.05, 100.0)
LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# 1. eigenvalue bounds


def _bound_cases():
    zero = potential_from_spec("zero", 0.01)
    c01 = cos_potential(0.1, 1, 0.04)
    yield "doubling", FiberFamily((linear_map(2),), (zero,)), 0.0, 0.0, None
    yield "random 2/3", FiberFamily((linear_map(2), linear_map(3)), (zero, zero)), 0.0, 0.0, 2
    yield "sine 0.5, 0.1 cos", sine_cos_family(0.5, 0.1), -0.1, 0.1, None
    yield "smooth random", smooth_random_ctx().family, -0.005, 0.005, 2
    yield "manneville 0.5, 0.1 cos", FiberFamily((manneville_map(0.5),), (c01,)), -0.1, 0.1, None


@pytest.mark.parametrize("case", list(_bound_cases()), ids=lambda c: c[0])
def test_criterion_01_eigenvalue_bounds(case, criterion):
    name, fam, inf_phi, sup_phi, nsym = case
    if nsym is None:
        orbit = BaseOrbit.constant(0, 40, 80)
    else:
        orbit = sample_orbit(BaseSystem.uniform(nsym), 5, 40, 80)
    ctx = TransferContext(fam, orbit, 2048)
    eq = compute_equilibrium(ctx, 32, PARAMS)
    deg = np.array([fam.maps[ctx.symbol(j)].degree for j in range(32)], dtype=np.float64)
    lo = deg * math.exp(inf_phi)
    hi = deg * math.exp(sup_phi)
    lam = eq.lambda_by_pos
    rtol = 1e-12
    ok = bool(np.all(lam >= lo * (1 - rtol)) and np.all(lam <= hi * (1 + rtol)))
    worst = float(max(np.max((lo - lam) / lo), np.max((lam - hi) / hi)))
    criterion(1, ok, f"{name}: worst relative excess {worst:.3g}")
    assert ok


# ---------------------------------------------------------------------------
# 2. doubling calibration


@pytest.fixture(scope="module")
def doubling_eq():
    ctx = constant_ctx(doubling_family(), 4096)
    return ctx, compute_equilibrium(ctx, 16, PARAMS)


def test_criterion_02_doubling_calibration(doubling_eq, criterion):
    ctx, eq = doubling_eq
    n = ctx.grid_n
    d_lam = float(np.abs(eq.lambda_by_pos - 2.0).max())
    d_h = float(np.abs(eq.h_by_pos - 1.0).max())
    d_nu = float(np.abs(eq.nu_weights_by_pos * n - 1.0).max())
    d_p = abs(pressure_lambda(eq) - LOG2)
    sep = pressure_separated(ctx, 10, 0.01, n0=5)
    ent = rokhlin_entropy(ctx, eq, 10_000, seed=3)["entropy"]
    ok = (d_lam <= 1e-9 and d_h <= 1e-6 and d_nu <= 1e-3 and d_p <= 1e-9
          and abs(sep - LOG2) <= 0.05 and abs(ent - LOG2) <= 5e-3)
    criterion(2, ok, f"|lam-2|={d_lam:.2g} |h-1|={d_h:.2g} |n nu-1|={d_nu:.2g} "
                     f"|P-log2|={d_p:.2g} sep={sep:.5f} entropy={ent:.6f}")
    assert d_lam <= 1e-9
    assert d_h <= 1e-6
    assert d_nu <= 1e-3
    assert d_p <= 1e-9
    assert abs(sep - LOG2) <= 0.05
    assert abs(ent - LOG2) <= 5e-3


# ---------------------------------------------------------------------------
# 3. random doubling/tripling


def test_criterion_03_random_doubling_tripling(criterion):
    zero = potential_from_spec("zero", 0.01)
    fam = FiberFamily((linear_map(2), linear_map(3)), (zero, zero))
    P = 10_000
    orbit = sample_orbit(BaseSystem((2), (0.5, 0.5)), 2024, 40, P + 40)
    ctx = TransferContext(fam, orbit, 1024)
    eq = compute_equilibrium(ctx, P, PARAMS, nu_depth=12)
    target = 0.5 * (math.log(2) + math.log(3))
    p_lam = pressure_lambda(eq)
    ent = rokhlin_entropy(ctx, eq, 10_000, seed=9)
    gap = abs(ent["gap"])
    ok = abs(p_lam - target) <= 0.02 and gap <= 5e-3 + 2 * ent["stderr"]
    criterion(3, ok, f"P_lambda={p_lam:.5f} target={target:.5f} gap={gap:.3g} "
                     f"SE={ent['stderr']:.3g}")
    assert abs(p_lam - target) <= 0.02
    assert gap <= 5e-3 + 2 * ent["stderr"]


# ---------------------------------------------------------------------------
# 4. Ulam oracle


def _orbit_lambda(n: int) -> tuple[float, float]:
    ctx = constant_ctx(sine_cos_family(0.5, 0.1), n)
    lam = lambda_at(ctx, 0, reference_measure(ctx, 1, 18))
    lu, _ = ulam_matrix(ctx, 0).leading("right")
    return lam, lu


def test_criterion_04_ulam_oracle(criterion):
    lam1, lu1 = _orbit_lambda(4096)
    lam2, lu2 = _orbit_lambda(8192)
    g1, g2 = abs(lam1 - lu1), abs(lam2 - lu2)
    ctx = constant_ctx(sine_cos_family(0.5, 0.1), 4096)
    eq = compute_equilibrium(ctx, 2, PARAMS)
    _, hv = ulam_matrix(ctx, 0).leading("right")
    hv = hv / float(np.dot(eq.nu(0), hv))
    d_h = float(np.abs(hv - eq.h_by_pos[0]).max())
    shrink = g1 / g2 if g2 > 0 else math.inf
    ok = g1 <= 1e-3 and shrink >= 1.5 and d_h <= 1e-3
    criterion(4, ok, f"gap4096={g1:.3g} gap8192={g2:.3g} shrink={shrink:.3g} |h-h_ulam|={d_h:.3g}")
    assert g1 <= 1e-3
    assert shrink >= 1.5
    assert d_h <= 1e-3


# ---------------------------------------------------------------------------
# 5. cone contraction


def test_criterion_05_cone_contraction(criterion):
    ctx = smooth_random_ctx()
    rng = np.random.default_rng(55)
    pairs = sample_cone_pairs(ctx.grid_n, SMOOTH_CONE, 32, rng)
    rows = contraction_samples(ctx, 0, SMOOTH_CONE, pairs)
    worst = max(after - before for before, after, _ in rows)
    all_contract = all(after <= before for before, after, _ in rows)
    a, b = pairs[0]
    thetas = [theta_metric(a, b, SMOOTH_CONE).value]
    for j in range(10):
        a = apply_transfer(ctx, j, a)
        b = apply_transfer(ctx, j, b)
        a = a * (1.0 / a.values.mean())
        b = b * (1.0 / b.values.mean())
        thetas.append(theta_metric(a, b, SMOOTH_CONE).value)
    t = np.array(thetas)
    keep = t > 1e-12
    slope = np.polyfit(np.flatnonzero(keep), np.log(t[keep]), 1)[0]
    rate = math.exp(slope)
    ok = all_contract and 0.0 < rate < 1.0
    criterion(5, ok, f"max(after-before)={worst:.3g} fitted rate={rate:.4f}")
    assert all_contract
    assert 0.0 < rate < 1.0


# ---------------------------------------------------------------------------
# 6. fixed-point residual


def test_criterion_06_fixed_point_residual(criterion):
    ctx = smooth_random_ctx()
    res = [density_pullback(ctx, j, 30).residual for j in range(4)]
    ok = max(res) <= 1e-4
    criterion(6, ok, f"max residual over 4 positions={max(res):.3g}")
    assert ok


# ---------------------------------------------------------------------------
# 7. decay calibration


def test_criterion_07_decay(doubling_eq, criterion):
    ctx, eq = doubling_eq
    A = lambda x: np.cos(2 * np.pi * x) + np.cos(4 * np.pi * x)  # noqa: E731
    rep = decay_correlations(ctx, eq, A, A, 10)
    C = rep.C()
    ok_lin = abs(C[0] - 0.5) <= 1e-3 and bool(np.all(np.abs(C[1:]) <= 1e-3))
    sctx = smooth_random_ctx()
    seq = compute_equilibrium(sctx, 16, SMOOTH_CONE)
    cos1 = lambda x: np.cos(2 * np.pi * x)  # noqa: E731
    nl = decay_correlations(sctx, seq, cos1, cos1, 10)
    ok_nl = nl.fitted_rate is not None and 0.0 < nl.fitted_rate < 1.0
    criterion(7, ok_lin and ok_nl, f"C1={C[0]:.6f} max|C_n|, n>=2: {np.abs(C[1:]).max():.2g}; "
                                   f"nonlinear rate={nl.fitted_rate}")
    assert abs(C[0] - 0.5) <= 1e-3
    assert np.all(np.abs(C[1:]) <= 1e-3)
    assert ok_nl


# ---------------------------------------------------------------------------
# 8. Gibbs band


def test_criterion_08_gibbs(doubling_eq, criterion):
    ctx = smooth_random_ctx()
    eq = compute_equilibrium(ctx, 24, SMOOTH_CONE)
    fam = ctx.family
    profiles = [build_expansion_profile(f, s, 1.0, 4096) for f, s in zip(fam.maps, (1.45, 2.0))]
    rep_h = check_conditions(fam, profiles, SMOOTH_CONE)
    lines, ok = [], True
    for c in (rep_h.c, 0.2):
        rep = gibbs_check(ctx, 0.3141, 0.05, c, eq, n_times=10)
        inside = len(rep.rows) == 10 and rep.within(0.10)
        ok &= inside
        r = [row["ratio"] for row in rep.rows]
        lines.append(f"c={c:.4g}: ratios in [{min(r):.4g}, {max(r):.4g}] band "
                     f"[{rep.band[0]:.4g}, {rep.band[1]:.4g}]")
    dctx, deq = doubling_eq
    drep = gibbs_check(dctx, 0.3141, 0.05, 0.0173, deq, n_times=10)
    r = np.array([row["ratio"] for row in drep.rows])
    spread = float(r.max() / r.min() - 1.0)
    ok_d = spread <= 1e-6
    criterion(8, ok and ok_d, "; ".join(lines) + f"; doubling spread={spread:.3g}")
    assert ok
    assert ok_d


# ---------------------------------------------------------------------------
# 9. hyperbolic-time oracle


def test_criterion_09_hyperbolic_times(criterion):
    rng = np.random.default_rng(99)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        s = rng.normal(0.3, 0.8, size=n)
        c = float(rng.uniform(0.01, 0.5))
        ref = brute_force_hyperbolic_times(s, c)
        for impl in (kernels, _pykernels):
            if impl.hyperbolic_times(s, c).tolist() != ref:
                mismatches += 1
    criterion(9, mismatches == 0, f"{mismatches} mismatches on 1000 sequences, both backends")
    assert mismatches == 0


# ---------------------------------------------------------------------------
# 10. stability


def test_criterion_10_stability(criterion):
    orbit = BaseOrbit.constant(0, 40, 40)
    rep = stability_sweep(lambda a: sine_cos_family(a, 0.1), [0.4, 0.2, 0.1, 0.05], 0.0,
                          orbit, PARAMS, 4096, n_positions=4)
    dl, dh, dp = rep.column("d_lambda"), rep.column("d_h"), rep.column("d_pressure")
    dec = all(rep.strictly_decreasing.values())
    final_ok = dl[-1] <= 1e-3 and dh[-1] <= 5e-3 and dp[-1] <= 1e-3
    criterion(10, dec and final_ok,
              f"decreasing={dec}; final |dlam|={dl[-1]:.3g} (<=1e-3) |dh|={dh[-1]:.3g} (<=5e-3) "
              f"|dP|={dp[-1]:.3g} (<=1e-3)")
    assert dec
    assert dh[-1] <= 5e-3
    assert dl[-1] <= 1e-3
    assert dp[-1] <= 1e-3


# ---------------------------------------------------------------------------
# 11. hypothesis checker


def test_criterion_11_hypothesis_checker(criterion):
    fam = doubling_family(0.01)
    prof = [build_expansion_profile(fam.maps[0], 2.0, 1.0, 4096)]
    rep = check_conditions(fam, prof, PARAMS)
    # independent evaluation: p = q = 1, sigma = 2, L = 1, d = 2, alpha = 1, m = 11
    expected = math.exp(0.01) * (1 / 2 + 1) / 2 + 0.01 * (1 + 11 * 0.5)
    bad = doubling_family(math.log(2.0))
    rep_bad = check_conditions(bad, prof, PARAMS)
    margin = rep_bad.symbols[0].iv_margin
    ok = rep.all_pass and abs(rep.gamma - expected) <= 1e-4 and not rep_bad.passes["IV"] and margin < 0
    criterion(11, ok, f"gamma={rep.gamma:.10f} (formula {expected:.10f}) all pass={rep.all_pass}; "
                      f"broken IV margin={margin:.3g}")
    assert rep.all_pass
    assert abs(rep.gamma - 0.8226) <= 1e-4
    assert abs(rep.gamma - expected) <= 1e-4
    assert not rep_bad.passes["IV"]
    assert margin < 0


# ---------------------------------------------------------------------------
# 12. determinism

_DET_CONFIG = """
seed = 5
[base]
probabilities = [0.5, 0.5]
[family]
maps = ["sine 2 0.5", "linear 2"]
sigma = [1.45, 2.0]
L = [1.0, 1.0]
[potential]
forms = ["cos 0.005", "cos 0.005"]
eps_phi = 0.04
[cone]
delta = 0.25
k = 100.0
[numerics]
grid_n = 1024
positions = 12
pressure_n = 6
pressure_eps = 0.05
balls_n = 6
entropy_samples = 500
decay_n = 6
csv_positions = 2
[stability]
template = "sine 2 {s}"
values = [0.2, 0.1]
s0 = 0.0
positions = 2
"""


def _files(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "manifest.json"}


def test_criterion_12_determinism(tmp_path, criterion):
    cfg = tmp_path / "run.toml"
    cfg.write_text(_DET_CONFIG)
    codes = [cli_main(["all", "--config", str(cfg), "--out", str(tmp_path / name), "--threads", "2"])
             for name in ("a", "b")]
    fa, fb = _files(tmp_path / "a"), _files(tmp_path / "b")
    same = fa == fb
    ok = codes == [0, 0] and same and len(fa) > 5
    criterion(12, ok, f"exit codes {codes}; {len(fa)} files byte-identical={same}")
    assert codes == [0, 0]
    assert len(fa) > 5
    assert same
