"""Shared fixtures and the acceptance-criterion summary lines."""
from __future__ import annotations

import numpy as np
import pytest

from randtherm.base import BaseOrbit, sample_orbit, BaseSystem
from randtherm.cones import ConeParams
from randtherm.fibers import FiberFamily, cos_potential, linear_map, potential_from_spec, sine_map
from randtherm.transfer import TransferContext

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record ``(number, ok, detail)`` for the summary printed at the end of the run."""

    def record(number: int, ok: bool, detail: str) -> bool:
        prev = _CRITERIA.get(number)
        ok_all = ok and (prev[0] if prev else True)
        text = detail if prev is None else f"{prev[1]}; {detail}"
        _CRITERIA[number] = (ok_all, text)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, detail = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def doubling_family(eps_phi: float = 0.01) -> FiberFamily:
    return FiberFamily((linear_map(2),), (potential_from_spec("zero", eps_phi),))


def sine_cos_family(a: float = 0.5, amp: float = 0.1, eps_phi: float = 0.04) -> FiberFamily:
    return FiberFamily((sine_map(2, a),), (cos_potential(amp, 1, eps_phi),))


def smooth_random_family() -> FiberFamily:
    """Random {sine 2 0.5, doubling} with a small smooth potential; passes every check."""
    pot = cos_potential(0.005, 1, 0.04)
    return FiberFamily((sine_map(2, 0.5), linear_map(2)), (pot, pot))


SMOOTH_SIGMA = (1.45, 2.0)
SMOOTH_CONE = ConeParams(1.0, 0.25, 100.0)


def smooth_random_ctx(grid_n: int = 4096, seed: int = 11, future: int = 200) -> TransferContext:
    orbit = sample_orbit(BaseSystem.uniform(2), seed, 40, future)
    return TransferContext(smooth_random_family(), orbit, grid_n)


def constant_ctx(family: FiberFamily, grid_n: int = 4096, past: int = 40, future: int = 80):
    return TransferContext(family, BaseOrbit.constant(0, past, future), grid_n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
