"""Bracketed scalar root solving with geometric bracket expansion."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from tdof.errors import BracketError, DomainError

__all__ = ["Bracket", "find_root"]

_EXPAND_FACTOR = 4.0
_MAX_EXPANSIONS = 60


@dataclass(frozen=True)
class Bracket:
    """A positive interval [lo, hi] expected to bracket a sign change."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError("bracket endpoints must be finite")
        if not (0.0 < self.lo < self.hi):
            raise DomainError(f"need 0 < lo < hi, got [{self.lo}, {self.hi}]")


def _expand(f, lo, hi, flo, fhi):
    # grow the interval geometrically until f changes sign
    for _ in range(_MAX_EXPANSIONS):
        if flo == 0.0 or fhi == 0.0 or (flo < 0.0) != (fhi < 0.0):
            return lo, hi, flo, fhi
        lo = lo / _EXPAND_FACTOR
        hi = hi * _EXPAND_FACTOR
        flo = f(lo)
        fhi = f(hi)
    raise BracketError(
        f"no sign change on [{lo}, {hi}] after {_MAX_EXPANSIONS} expansions "
        f"(f(lo)={flo}, f(hi)={fhi})"
    )


def find_root(f, bracket: Bracket, tol: float = 1e-12) -> float:
    """Root of ``f`` inside (an expansion of) ``bracket``.

    Brent's method once a sign change is secured; the bracket grows
    geometrically (factor 4, both directions, at most 60 times) if the
    initial interval does not straddle the root.
    """
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    lo, hi = bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise BracketError(f"non-finite endpoint values f({lo})={flo}, f({hi})={fhi}")
    lo, hi, flo, fhi = _expand(f, lo, hi, flo, fhi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    return brentq(f, lo, hi, xtol=tol, rtol=max(tol, 4e-16))
