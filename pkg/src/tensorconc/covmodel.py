"""Covariance spectra. Covariances are always diagonal, so a spectrum is the whole model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tensorconc.errors import InvalidParameterError

KINDS = ("identity", "geometric", "polynomial", "custom")


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        ev = tuple(float(x) for x in self.eigenvalues)
        if not ev:
            raise InvalidParameterError("spectrum must be non-empty")
        for x in ev:
            if not (math.isfinite(x) and x > 0):
                raise InvalidParameterError(f"eigenvalues must be positive and finite, got {x}")
        if any(a < b for a, b in zip(ev, ev[1:])):
            raise InvalidParameterError("eigenvalues must be sorted non-increasing")
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def d(self) -> int:
        return len(self.eigenvalues)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float)

    def scaled(self, t: float) -> "Spectrum":
        return Spectrum(tuple(t * x for x in self.eigenvalues))

    def to_json(self) -> list[float]:
        return list(self.eigenvalues)

    @classmethod
    def from_json(cls, obj) -> "Spectrum":
        return make_spectrum("custom", len(obj), values=obj)


def make_spectrum(kind: str, d: int, *, ratio: float | None = None,
                  exponent: float | None = None, values=None) -> Spectrum:
    """Build one of the spectrum families used in the sweeps.

    identity: all ones; geometric: ``ratio**(j-1)``; polynomial: ``j**-exponent``;
    custom: a sorted copy of ``values``.
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidParameterError(f"d must be a positive integer, got {d!r}")
    j = np.arange(1, d + 1, dtype=float)
    if kind == "identity":
        ev = np.ones(d)
    elif kind == "geometric":
        if ratio is None or not (0.0 < ratio < 1.0):
            raise InvalidParameterError(f"geometric ratio must lie in (0, 1), got {ratio!r}")
        ev = ratio ** (j - 1)
    elif kind == "polynomial":
        if exponent is None or not exponent > 0:
            raise InvalidParameterError(f"polynomial exponent must be > 0, got {exponent!r}")
        ev = j ** (-float(exponent))
    elif kind == "custom":
        if values is None or len(values) == 0:
            raise InvalidParameterError("custom spectrum needs a non-empty list")
        if len(values) != d:
            raise InvalidParameterError(f"custom list has length {len(values)}, expected d={d}")
        ev = np.asarray(values, dtype=float)
        if np.any(~np.isfinite(ev)) or np.any(ev <= 0):
            raise InvalidParameterError("custom eigenvalues must be positive and finite")
        ev = np.sort(ev)[::-1]
    else:
        raise InvalidParameterError(f"unknown spectrum kind {kind!r}")
    if np.any(ev <= 0):
        # geometric/polynomial can underflow for huge d
        raise InvalidParameterError("spectrum underflowed to zero; use a smaller d")
    return Spectrum(tuple(float(x) for x in ev))


def operator_norm(s: Spectrum) -> float:
    return s.eigenvalues[0]


def trace(s: Spectrum) -> float:
    return math.fsum(s.eigenvalues)


def effective_rank(s: Spectrum) -> float:
    """Tr(Sigma) / ||Sigma||, always in [1, d]."""
    return trace(s) / operator_norm(s)
