"""Condition checks, hyperbolic times and exactness times."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_ctx, doubling_family
from randtherm.base import BaseOrbit
from randtherm.cones import ConeParams
from randtherm.fibers import (
    FiberFamily,
    build_expansion_profile,
    cos_potential,
    linear_map,
    manneville_map,
    sine_map,
)
from randtherm.hypotheses import (
    brute_force_hyperbolic_times,
    check_conditions,
    default_c,
    delta_of_c,
    exactness_time,
    gamma_w,
    hyperbolic_times,
    visit_frequency,
)
from randtherm.transfer import TransferContext

PARAMS = ConeParams(1.0, 0.05, 100.0)


def test_gamma_closed_form_for_doubling():
    assert gamma_w(0.01, 2, 0, 2.0, 1.0, 2, 1.0, 11) == pytest.approx(
        math.exp(0.01) * 0.5 + 0.01 * 6.5, rel=1e-15)


def test_sine_report_with_bad_region():
    f = sine_map(2, 1.2)
    prof = build_expansion_profile(f, 1.5, 1.3, 4096)
    # G' = 2 + 1.2 cos(2 pi x) drops below 1.5 where cos < -5/12
    edge = math.acos(-5 / 12) / (2 * math.pi)
    # probing radius of two nodes plus one padding node
    (lo, hi), = prof.bad_region
    assert lo == pytest.approx(edge, abs=4 / 4096)
    assert hi == pytest.approx(1 - edge, abs=4 / 4096)
    assert (prof.q, prof.p) == (1, 1)
    assert prof.L_of_x.max() == pytest.approx(1 / 0.8, rel=1e-6)
    fam = FiberFamily((f,), (cos_potential(0.05, 1, 0.02),))
    rep = check_conditions(fam, [prof], PARAMS)
    expected = math.exp(0.02) * (1 / 1.5 + 1.3 * 1.3) / 2 + 0.02 * 1.3 * (1 + 11 * 0.5)
    assert rep.gamma == pytest.approx(expected, rel=1e-12)
    assert rep.passes["I"] and rep.passes["II"] and rep.passes["IV"]
    assert not rep.passes["V"]
    assert rep.symbols[0].iv_margin == pytest.approx(math.log(2) - 0.1 - 0.02, abs=1e-3)
    assert rep.symbols[0].iv_margin < math.log(2) - 0.1 - 0.02


def test_default_c_and_condition_six():
    assert default_c([2.0], [1.0], 0.9) == pytest.approx(0.1 * math.log(2) / 4)
    fam = doubling_family(0.01)
    prof = [build_expansion_profile(fam.maps[0], 2.0, 1.0, 4096)]
    rep = check_conditions(fam, prof, PARAMS)
    assert rep.vi_lhs == pytest.approx(2 ** -0.1)
    assert rep.vi_rhs == pytest.approx(math.exp(-2 * rep.c))
    assert rep.passes["VI"]
    assert not check_conditions(fam, prof, PARAMS, c=0.1).passes["VI"]


def test_iv_margin_is_log_degree_minus_oscillation():
    fam = FiberFamily((linear_map(3),), (cos_potential(0.2, 1, 0.05),))
    prof = [build_expansion_profile(fam.maps[0], 3.0, 1.0, 4096)]
    rep = check_conditions(fam, prof, PARAMS)
    assert rep.symbols[0].iv_margin == pytest.approx(math.log(3) - 0.4 - 0.05, abs=1e-3)
    assert rep.symbols[0].q == 1


def test_exactness_time_closed_forms():
    assert exactness_time(constant_ctx(doubling_family(), 64), 0, 0.3, 0.1) == 3
    trip = constant_ctx(FiberFamily((linear_map(3),), (cos_potential(0.0),)), 64)
    assert exactness_time(trip, 0, 0.3, 0.1) == 2
    with pytest.raises(ValueError):
        exactness_time(trip, 0, 0.3, 0.5)


def _manneville_steps(x, eps, beta):
    # independent scalar simulation of the ball length under the lift
    c = 2.0**beta

    def lift(t):
        k = math.floor(t)
        r = t - k
        return 2 * k + (r + c * r ** (1 + beta) if r < 0.5 else 2 * r)

    lo, hi, n = x - eps, x + eps, 0
    while hi - lo < 1:
        lo, hi, n = lift(lo), lift(hi), n + 1
        k = math.floor(lo)
        lo, hi = lo - k, hi - k
    return n


def test_exactness_time_manneville_near_neutral_point():
    ctx = constant_ctx(FiberFamily((manneville_map(0.5),), (cos_potential(0.0),)), 64, future=200)
    near = exactness_time(ctx, 0, 0.01, 0.004, cap=150)
    far = exactness_time(ctx, 0, 0.6, 0.004, cap=150)
    assert near == _manneville_steps(0.01, 0.004, 0.5)
    assert far == _manneville_steps(0.6, 0.004, 0.5)
    assert near > far


def test_hyperbolic_time_examples():
    assert hyperbolic_times([0.05, 0.3], 0.1).times.tolist() == [2]
    assert hyperbolic_times([0.1] * 6, 0.1).times.tolist() == [1, 2, 3, 4, 5, 6]
    assert hyperbolic_times([-0.1] * 6, 0.1).times.tolist() == []
    with pytest.raises(ValueError):
        hyperbolic_times([0.1], 0.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=30),
       st.floats(0.01, 0.5))
def test_hyperbolic_times_match_brute_force(s, c):
    assert hyperbolic_times(s, c).times.tolist() == brute_force_hyperbolic_times(s, c)


def test_delta_of_c():
    assert delta_of_c(doubling_family(), 0.1) == pytest.approx(0.1)
    fam = FiberFamily((sine_map(2, 0.5), linear_map(3)), (cos_potential(0.0),) * 2)
    assert delta_of_c(fam, 0.05) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        delta_of_c(fam, 0.0)


def test_visit_frequency():
    ctx = constant_ctx(doubling_family(), 1024)
    prof = [build_expansion_profile(ctx.family.maps[0], 2.0, 1.0, 1024)]
    assert visit_frequency(ctx, prof, 0.3, 50) == 0.0
    mfam = FiberFamily((manneville_map(0.5),), (cos_potential(0.0),))
    mctx = constant_ctx(mfam, 1024)
    mprof = [build_expansion_profile(mfam.maps[0], 1.5, 1.0, 1024)]
    assert visit_frequency(mctx, mprof, 0.0, 50) == 1.0
    freq = visit_frequency(mctx, mprof, np.array([0.0, 0.6]), 50)
    assert freq[0] == 1.0 and freq[1] < 1.0


def test_exactness_rows_use_the_orbit_when_given():
    fam = doubling_family(0.01)
    prof = [build_expansion_profile(fam.maps[0], 2.0, 1.0, 1024)]
    ctx = TransferContext(fam, BaseOrbit.constant(0, 4, 80), 1024)
    rep = check_conditions(fam, prof, PARAMS, grid_n=1024, ctx=ctx, exactness_eps=(0.1,))
    assert rep.passes["III"]
    assert {r["n_tilde"] for r in rep.exactness} == {3}
