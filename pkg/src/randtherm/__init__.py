"""Quenched thermodynamic formalism for random expanding circle maps.

The package computes conformal reference measures, invariant densities and
fiber eigenvalues of random transfer operators along sampled base orbits, and
uses them to estimate pressure, Gibbs constants, entropy and correlation decay.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .base import BaseOrbit, BaseSystem, OrbitWindowError, birkhoff_average, sample_orbit, symbol_at
from .cones import ConeParams, ConeViolation, GridFunction, ProjectiveDistance, cone_member, holder_seminorm, theta_metric
from .fibers import (
    ExpansionProfile,
    FiberFamily,
    FiberMap,
    PotentialFiber,
    build_expansion_profile,
    eval_map,
    expansion_constant,
    linear_map,
    manneville_map,
    parse_map,
    potential_from_spec,
    preimages,
    sine_map,
)
from .hypotheses import HypothesisReport, check_conditions, gamma_w, hyperbolic_times
from .kernels import BACKEND
from .thermo import (
    decay_correlations,
    dynamical_ball,
    gibbs_check,
    pressure_balls,
    pressure_lambda,
    pressure_separated,
    rokhlin_entropy,
    stability_sweep,
)
from .transfer import (
    EquilibriumData,
    TransferContext,
    apply_transfer,
    compute_equilibrium,
    density_pullback,
    reference_measure,
    ulam_matrix,
)

__all__ = [
    "__version__",
    "BACKEND",
    "BaseOrbit",
    "BaseSystem",
    "OrbitWindowError",
    "birkhoff_average",
    "sample_orbit",
    "symbol_at",
    "ConeParams",
    "ConeViolation",
    "GridFunction",
    "ProjectiveDistance",
    "cone_member",
    "holder_seminorm",
    "theta_metric",
    "ExpansionProfile",
    "FiberFamily",
    "FiberMap",
    "PotentialFiber",
    "build_expansion_profile",
    "eval_map",
    "expansion_constant",
    "linear_map",
    "manneville_map",
    "parse_map",
    "potential_from_spec",
    "preimages",
    "sine_map",
    "HypothesisReport",
    "check_conditions",
    "gamma_w",
    "hyperbolic_times",
    "decay_correlations",
    "dynamical_ball",
    "gibbs_check",
    "pressure_balls",
    "pressure_lambda",
    "pressure_separated",
    "rokhlin_entropy",
    "stability_sweep",
    "EquilibriumData",
    "TransferContext",
    "apply_transfer",
    "compute_equilibrium",
    "density_pullback",
    "reference_measure",
    "ulam_matrix",
]
