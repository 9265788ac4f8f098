"""Bernoulli base shift and seeded finite orbit windows.

Random numbers come from numpy's Philox4x64 counter-based generator.  The
key is ``(seed, stream)``: stream 0 produces the symbols at indices
``0, 1, 2, ...`` and stream 1 the symbols at ``-1, -2, ...``.  Because each
stream is consumed in index order, two windows drawn with the same seed agree
on every index they share, whatever their lengths.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BaseSystem",
    "BaseOrbit",
    "OrbitWindowError",
    "philox_generator",
    "sample_orbit",
    "symbol_at",
    "birkhoff_average",
]

_MASK64 = (1 << 64) - 1


class OrbitWindowError(IndexError):
    """Raised when an index falls outside a finite orbit window."""


def philox_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Return a Philox4x64 generator keyed by ``(seed, stream)``."""
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class BaseSystem:
    """Full shift on ``S`` symbols with an i.i.d. symbol law."""

    alphabet_size: int
    symbol_probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.symbol_probabilities)
        object.__setattr__(self, "symbol_probabilities", probs)
        if self.alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        if len(probs) != self.alphabet_size:
            raise ValueError("need one probability per symbol")
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")

    @classmethod
    def uniform(cls, size: int) -> "BaseSystem":
        return cls(size, tuple([1.0 / size] * size))

    def draw(self, uniforms: np.ndarray) -> np.ndarray:
        """Map uniforms in ``[0, 1)`` to symbols by inverse CDF."""
        cdf = np.cumsum(self.symbol_probabilities)
        cdf[-1] = 1.0
        sym = np.searchsorted(cdf, uniforms, side="right")
        return np.minimum(sym, self.alphabet_size - 1).astype(np.int64)


@dataclass(frozen=True)
class BaseOrbit:
    """Finite two-sided window ``symbols[-past..future]`` of a base point.

    ``symbols`` is stored left to right, so the origin sits at array index
    ``past``.
    """

    symbols: np.ndarray = field(repr=False)
    past: int
    future: int
    seed: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.symbols, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "symbols", arr)
        if arr.shape != (self.past + self.future + 1,):
            raise ValueError("window length does not match past + future + 1")

    @classmethod
    def constant(cls, symbol: int, past: int, future: int) -> "BaseOrbit":
        """Orbit of a fixed point of the shift (a deterministic system)."""
        return cls(np.full(past + future + 1, symbol, dtype=np.int64), past, future, 0)

    def __len__(self) -> int:
        return self.symbols.shape[0]

    def contains(self, j: int) -> bool:
        return -self.past <= j <= self.future

    def window(self, start: int, stop: int) -> np.ndarray:
        """Symbols at indices ``start..stop-1``."""
        if stop <= start:
            return self.symbols[:0]
        if not (self.contains(start) and self.contains(stop - 1)):
            raise OrbitWindowError(
                f"indices {start}..{stop - 1} outside window [-{self.past}, {self.future}]"
            )
        return self.symbols[start + self.past : stop + self.past]

    def as_text(self) -> str:
        """Symbol string, digits for alphabets up to ten letters."""
        if self.symbols.size and self.symbols.max() < 10:
            return "".join(map(str, self.symbols.tolist()))
        return ",".join(map(str, self.symbols.tolist()))


def sample_orbit(base: BaseSystem, seed: int, past: int, future: int) -> BaseOrbit:
    """Draw a window of i.i.d. symbols from ``base`` deterministically in ``seed``."""
    if past < 0 or future < 0:
        raise ValueError("window lengths must be nonnegative")
    if past + future < 1:
        raise ValueError("zero-length orbit window")
    fwd = base.draw(philox_generator(seed, 0).random(future + 1))
    bwd = base.draw(philox_generator(seed, 1).random(past))
    symbols = np.concatenate([bwd[::-1], fwd])
    return BaseOrbit(symbols, past, future, int(seed))


def symbol_at(orbit: BaseOrbit, j: int) -> int:
    """Symbol labelling the fiber over the ``j``-th shift of the base point."""
    if not orbit.contains(j):
        raise OrbitWindowError(f"index {j} outside window [-{orbit.past}, {orbit.future}]")
    return int(orbit.symbols[j + orbit.past])


def birkhoff_average(orbit: BaseOrbit, values, n: int) -> float:
    """Average of ``values[symbol]`` over the first ``n`` forward positions."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > orbit.future:
        raise OrbitWindowError(f"n={n} exceeds the forward window {orbit.future}")
    table = np.asarray(values, dtype=np.float64)
    return float(table[orbit.window(0, n)].mean())
