"""Experiment configuration: parsing, validation and object construction.

Configurations are TOML files (JSON is accepted too).  Example::

    seed = 7

    [base]
    probabilities = [0.5, 0.5]

    [family]
    maps = ["linear 2", "linear 3"]
    sigma = [1.5, 2.5]
    L = [1.0, 1.0]

    [potential]
    forms = ["zero", "zero"]
    eps_phi = 0.01
    alpha = 1.0

    [cone]
    delta = 0.05
    k = 100.0

    [numerics]
    grid_n = 4096
    positions = 64

    [stability]            # optional
    template = "sine 2 {s}"
    values = [0.4, 0.2, 0.1, 0.05]
    s0 = 0.0
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on older interpreters only
    import tomli as tomllib

from .base import BaseOrbit, BaseSystem, sample_orbit
from .cones import ConeParams
from .fibers import FiberFamily, build_expansion_profile, parse_map, potential_from_spec

__all__ = [
    "ConfigError",
    "BaseConfig",
    "FamilyConfig",
    "PotentialConfig",
    "ConeConfig",
    "NumericsConfig",
    "StabilityConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class BaseConfig:
    probabilities: tuple[float, ...] = (1.0,)


@dataclass(frozen=True)
class FamilyConfig:
    maps: tuple[str, ...] = ("linear 2",)
    sigma: tuple[float, ...] = (1.5,)
    L: tuple[float, ...] = (1.0,)


@dataclass(frozen=True)
class PotentialConfig:
    forms: tuple[str, ...] = ("zero",)
    eps_phi: float = 0.01
    alpha: float = 1.0


@dataclass(frozen=True)
class ConeConfig:
    delta: float = 0.05
    k: float = 100.0


@dataclass(frozen=True)
class NumericsConfig:
    grid_n: int = 4096
    positions: int = 64
    past_depth: int = 30
    nu_depth: int = 18
    preimage_tol: float = 1e-12
    rho: float = 0.9
    c: float | None = None
    pressure_n: int = 10
    pressure_eps: float = 0.01
    balls_n: int = 10
    balls_eps: float = 0.05
    entropy_samples: int = 10_000
    gibbs_x: float = 0.3141
    gibbs_eps: float = 0.05
    gibbs_times: int = 10
    gibbs_c: float | None = None
    decay_n: int = 10
    decay_observable: str = "cos 1"
    csv_positions: int = 8
    cone_samples: int = 0


@dataclass(frozen=True)
class StabilityConfig:
    template: str = "sine 2 {s}"
    values: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    s0: float = 0.0
    positions: int = 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration of one run."""

    base: BaseConfig = field(default_factory=BaseConfig)
    family: FamilyConfig = field(default_factory=FamilyConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    cone: ConeConfig = field(default_factory=ConeConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    stability: StabilityConfig | None = None
    seed: int = 0
    source_dir: str = "."

    # ---- derived objects -------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source_dir")
        return d

    def hash(self) -> str:
        """Short digest of the configuration without the seed."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def with_overrides(self, *, seed: int | None = None, grid_n: int | None = None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if grid_n is not None:
            d["numerics"]["grid_n"] = grid_n
        return parse_config(d, self.source_dir)

    def base_system(self) -> BaseSystem:
        p = self.base.probabilities
        return BaseSystem(len(p), p)

    def family_object(self, maps: tuple[str, ...] | None = None) -> FiberFamily:
        specs = self.family.maps if maps is None else maps
        fmaps = tuple(parse_map(s, self.source_dir) for s in specs)
        pots = tuple(potential_from_spec(s, self.potential.eps_phi, self.potential.alpha)
                     for s in self.potential.forms)
        return FiberFamily(fmaps, pots)

    def cone_params(self) -> ConeParams:
        return ConeParams(self.potential.alpha, self.cone.delta, self.cone.k)

    def profiles(self, family: FiberFamily | None = None):
        fam = self.family_object() if family is None else family
        return [build_expansion_profile(f, s, L, self.numerics.grid_n)
                for f, s, L in zip(fam.maps, self.family.sigma, self.family.L)]

    def orbit(self) -> BaseOrbit:
        nm = self.numerics
        past = nm.past_depth + 2
        future = (max(nm.positions, self.stability.positions if self.stability else 0)
                  + max(nm.nu_depth, 64) + max(nm.pressure_n, nm.balls_n, nm.decay_n) + 2)
        return sample_orbit(self.base_system(), self.seed, past, future)


_SECTIONS = {
    "base": BaseConfig,
    "family": FamilyConfig,
    "potential": PotentialConfig,
    "cone": ConeConfig,
    "numerics": NumericsConfig,
    "stability": StabilityConfig,
}


def _coerce(section: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(f"{section}: expected a table")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, val in raw.items():
        if key not in known:
            raise ConfigError(f"{section}.{key}: unknown field")
        default = getattr(cls(), key)
        path = f"{section}.{key}"
        if isinstance(default, tuple):
            if not isinstance(val, (list, tuple)):
                raise ConfigError(f"{path}: expected a list")
            elem = type(default[0])
            val = tuple(_scalar(elem, v, f"{path}[{i}]") for i, v in enumerate(val))
        elif default is None:
            if val is not None:
                val = _scalar(float, val, path)
        else:
            val = _scalar(type(default), val, path)
        kwargs[key] = val
    return cls(**kwargs)


def _scalar(typ, v, path):
    if typ is bool or isinstance(v, bool):
        raise ConfigError(f"{path}: booleans are not accepted here")
    if typ is int:
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not isinstance(v, int):
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        return v
    if typ is float:
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{path}: must be finite")
        return v
    if typ is str:
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string, got {v!r}")
        return v
    return typ(v)


def _validate(cfg: ExperimentConfig) -> None:
    try:
        cfg.base_system()
    except ValueError as exc:
        raise ConfigError(f"base.probabilities: {exc}") from None
    nsym = len(cfg.base.probabilities)
    for name, seq in (("family.maps", cfg.family.maps), ("family.sigma", cfg.family.sigma),
                      ("family.L", cfg.family.L), ("potential.forms", cfg.potential.forms)):
        if len(seq) != nsym:
            raise ConfigError(f"{name}: {len(seq)} entries for {nsym} symbols")
    for i, s in enumerate(cfg.family.sigma):
        if not s > 1:
            raise ConfigError(f"family.sigma[{i}]: must exceed 1")
    for i, L in enumerate(cfg.family.L):
        if not L >= 1:
            raise ConfigError(f"family.L[{i}]: must be at least 1")
    for i, spec in enumerate(cfg.family.maps):
        try:
            parse_map(spec, cfg.source_dir)
        except (ValueError, OSError) as exc:
            raise ConfigError(f"family.maps[{i}]: {exc}") from None
    for i, spec in enumerate(cfg.potential.forms):
        try:
            potential_from_spec(spec, 1.0)
        except ValueError as exc:
            raise ConfigError(f"potential.forms[{i}]: {exc}") from None
    if not cfg.potential.eps_phi > 0:
        raise ConfigError("potential.eps_phi: must be positive")
    if not 0 < cfg.potential.alpha <= 1:
        raise ConfigError("potential.alpha: must lie in (0, 1]")
    if not cfg.cone.delta > 0 or not cfg.cone.k > 0:
        raise ConfigError("cone: delta and k must be positive")
    nm = cfg.numerics
    if nm.grid_n < 16 or nm.grid_n & (nm.grid_n - 1):
        raise ConfigError("numerics.grid_n: must be a power of two >= 16")
    if cfg.cone.delta < 2.0 / nm.grid_n:
        raise ConfigError("cone.delta: below the grid resolution 2/grid_n")
    for name in ("positions", "nu_depth", "pressure_n", "balls_n", "entropy_samples",
                 "gibbs_times", "decay_n"):
        if getattr(nm, name) < 1:
            raise ConfigError(f"numerics.{name}: must be positive")
    if nm.past_depth < 0 or nm.csv_positions < 0 or nm.cone_samples < 0:
        raise ConfigError("numerics: depths and counts must be nonnegative")
    for name in ("preimage_tol", "pressure_eps", "balls_eps", "gibbs_eps"):
        if not getattr(nm, name) > 0:
            raise ConfigError(f"numerics.{name}: tolerances must be positive")
    if not 0 < nm.rho < 1:
        raise ConfigError("numerics.rho: must lie in (0, 1)")
    for name in ("c", "gibbs_c"):
        v = getattr(nm, name)
        if v is not None and not v > 0:
            raise ConfigError(f"numerics.{name}: must be positive")
    try:
        potential_from_spec(nm.decay_observable, 1.0)
    except ValueError as exc:
        raise ConfigError(f"numerics.decay_observable: {exc}") from None
    if cfg.stability is not None:
        st = cfg.stability
        if "{s}" not in st.template:
            raise ConfigError("stability.template: must contain '{s}'")
        for v in (*st.values, st.s0):
            try:
                parse_map(st.template.format(s=v), cfg.source_dir)
            except (ValueError, OSError) as exc:
                raise ConfigError(f"stability.values: {exc}") from None
        if st.positions < 1:
            raise ConfigError("stability.positions: must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be an unsigned 64-bit integer")


def parse_config(data: dict, source_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a configuration tree and build an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a table")
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    kw: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data and data[name] is not None:
            kw[name] = _coerce(name, cls, data[name])
    if "seed" in data:
        kw["seed"] = _scalar(int, data["seed"], "seed")
    try:
        cfg = ExperimentConfig(**kw, source_dir=str(source_dir))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML (or ``.json``) configuration file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from None
    if p.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    return parse_config(data, p.parent.resolve())
