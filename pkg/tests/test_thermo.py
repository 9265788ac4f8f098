"""Pressure routes, Gibbs bounds, entropy, correlations and the stability sweep."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import constant_ctx, doubling_family
from randtherm.base import BaseOrbit, BaseSystem, sample_orbit
from randtherm.cones import ConeParams
from randtherm.fibers import FiberFamily, constant_potential, cos_potential, linear_map, sine_map
from randtherm.thermo import (
    dynamical_ball,
    gibbs_check,
    pressure_balls,
    pressure_separated,
    rokhlin_entropy,
    decay_correlations,
    separated_log_sum,
    stability_sweep,
    tiling_starts,
)
from randtherm.transfer import TransferContext, compute_equilibrium

PARAMS = ConeParams(1.0, 0.05, 100.0)


def _const(maps, c):
    return FiberFamily(tuple(maps), (constant_potential(c),) * len(maps))


def test_dynamical_ball_doubling():
    ctx = constant_ctx(doubling_family(), 64)
    lo, hi = dynamical_ball(ctx, 0.0, 2, 0.1)
    assert (lo, hi) == pytest.approx((-0.025, 0.025), abs=1e-15)
    assert dynamical_ball(ctx, 0.3, 0, 0.1) == pytest.approx((0.2, 0.4), abs=1e-15)


def test_dynamical_ball_sine_against_forward_simulation():
    f = sine_map(2, 0.5)
    ctx = constant_ctx(FiberFamily((f,), (cos_potential(0.0),)), 64)
    x, n, eps = 0.3, 4, 0.05
    lo, hi = dynamical_ball(ctx, x, n, eps)
    y = np.linspace(x - eps, x + eps, 100_001)
    fx, fy = np.array(x), y.copy()
    member = np.ones(y.shape, bool)
    for i in range(n + 1):
        member &= np.abs(fy - fx) < eps
        fx, fy = f.lift(fx), f.lift(fy)
    inside = y[member]
    step = y[1] - y[0]
    assert inside.min() == pytest.approx(lo, abs=step)
    assert inside.max() == pytest.approx(hi, abs=step)
    # the ball is an interval
    assert np.all(np.diff(np.flatnonzero(member)) == 1)


def test_separated_constant_potential_shift():
    base = constant_ctx(FiberFamily((sine_map(2, 0.5),), (constant_potential(0.0),)), 64)
    shift = constant_ctx(FiberFamily((sine_map(2, 0.5),), (constant_potential(0.3),)), 64)
    a = pressure_separated(base, 6, 0.05, n0=3)
    b = pressure_separated(shift, 6, 0.05, n0=3)
    assert b - a == pytest.approx(0.3, abs=1e-12)
    raw_a = pressure_separated(base, 6, 0.05)
    raw_b = pressure_separated(shift, 6, 0.05)
    assert raw_b - raw_a == pytest.approx(0.3, abs=1e-12)


def test_separated_single_step_counts_circle_points():
    ctx = constant_ctx(doubling_family(), 64)
    _, count, grid = separated_log_sum(ctx, 1, 0.05)
    # kept nodes sit at the smallest grid spacing exceeding eps, wrap-around included
    step = math.floor(0.05 * grid) + 1
    assert count == grid // step


def test_separated_doubling_growth_rate():
    ctx = constant_ctx(doubling_family(), 64)
    assert pressure_separated(ctx, 8, 0.02, n0=4) == pytest.approx(math.log(2), abs=1e-3)


def test_tiling_starts_cover_window():
    starts = tiling_starts(10, 5, 32)
    assert starts[0] == -5 and starts[-1] + 10 <= 32
    assert all(b - a == 5 for a, b in zip(starts, starts[1:]))


def test_balls_route():
    ctx = constant_ctx(doubling_family(), 64)
    assert pressure_balls(ctx, 0.05, 8) == pytest.approx(math.log(2), abs=0.05)
    trip = constant_ctx(_const([linear_map(3)], 0.0), 64)
    shifted = constant_ctx(_const([linear_map(3)], 0.2), 64)
    a = pressure_balls(trip, 0.05, 6)
    assert a == pytest.approx(math.log(3), abs=0.05)
    assert pressure_balls(shifted, 0.05, 6) - a == pytest.approx(0.2, abs=1e-9)


def test_gibbs_ratios_ignore_constant_shift():
    reps = []
    for c in (0.0, 0.4):
        ctx = constant_ctx(FiberFamily((sine_map(2, 0.5),), (constant_potential(c),)), 1024)
        eq = compute_equilibrium(ctx, 12, PARAMS, nu_depth=14)
        reps.append(gibbs_check(ctx, 0.3141, 0.05, 0.1, eq, n_times=6))
    r0 = np.array([r["ratio"] for r in reps[0].rows])
    r1 = np.array([r["ratio"] for r in reps[1].rows])
    np.testing.assert_allclose(r1, r0, rtol=1e-9)


def test_gibbs_doubling_ratio_is_constant():
    ctx = constant_ctx(doubling_family(), 1024)
    eq = compute_equilibrium(ctx, 12, PARAMS, nu_depth=14)
    rep = gibbs_check(ctx, 0.3141, 0.05, 0.1, eq, n_times=6)
    ratios = np.array([r["ratio"] for r in rep.rows])
    # the ball has Lebesgue measure 2 eps 2**-n and lambda^n = 2**n
    np.testing.assert_allclose(ratios, 0.1, rtol=1e-9)
    assert rep.within(0.0)


def test_rokhlin_entropy_random_linear():
    orbit = sample_orbit(BaseSystem.uniform(2), 9, 30, 60)
    ctx = TransferContext(_const([linear_map(2), linear_map(3)], 0.0), orbit, 1024)
    eq = compute_equilibrium(ctx, 20, PARAMS, nu_depth=12)
    ent = rokhlin_entropy(ctx, eq, samples=4000, n=20)
    # each fiber has constant Jacobian, so the estimate is the mean log degree
    want = np.mean([math.log(ctx.fiber(j).degree) for j in range(20)])
    assert ent["entropy"] == pytest.approx(want, abs=1e-9)
    assert abs(ent["gap"]) <= 1e-9


def test_decay_cos_orthogonality():
    ctx = constant_ctx(doubling_family(), 1024)
    eq = compute_equilibrium(ctx, 8, PARAMS, nu_depth=14)
    cos1 = lambda x: np.cos(2 * np.pi * x)  # noqa: E731
    cos2 = lambda x: np.cos(4 * np.pi * x)  # noqa: E731
    rep = decay_correlations(ctx, eq, cos1, cos1, 6)
    assert np.abs(rep.C()).max() <= 1e-9
    rep2 = decay_correlations(ctx, eq, cos2, cos1, 6)
    assert rep2.C()[0] == pytest.approx(0.5, abs=1e-9)
    assert np.abs(rep2.C()[1:]).max() <= 1e-9
    assert rep2.decayed_to_noise_at == 2


def test_stability_constant_family_and_potential_scale():
    orbit = BaseOrbit.constant(0, 35, 60)
    same = stability_sweep(lambda s: doubling_family(), [0.1, 0.2], 0.0, orbit, PARAMS,
                           grid_n=512, n_positions=3, nu_depth=10)
    for r in same.rows:
        assert r["d_lambda"] == 0 and r["d_h"] == 0 and r["d_pressure"] == 0
    scale = stability_sweep(lambda s: _const([linear_map(2)], s), [0.05, 0.1, 0.2], 0.0, orbit,
                            PARAMS, grid_n=512, n_positions=3, nu_depth=10, threads=2)
    assert scale.s_values == [0.2, 0.1, 0.05]
    for r in scale.rows:
        assert r["d_lambda"] == pytest.approx(2 * (math.exp(r["s"]) - 1), rel=1e-10)
        assert r["d_pressure"] == pytest.approx(r["s"], rel=1e-10)
        assert r["d_h"] <= 1e-12
    assert scale.strictly_decreasing["d_lambda"]
    assert scale.spearman["d_lambda"] == pytest.approx(1.0)
