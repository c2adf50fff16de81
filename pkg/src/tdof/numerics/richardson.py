"""Richardson-extrapolated central second differences."""
from __future__ import annotations

import math

from tdof.errors import DomainError, NonFiniteEvalError

__all__ = ["second_derivative"]


def second_derivative(f, x: float, steps: int = 6, h0: float | None = None) -> float:
    """Second derivative of ``f`` at ``x``.

    Central second differences on step sizes h0, h0/2, ..., h0/2^(steps-1)
    are combined in a Richardson tableau, cancelling the even-order error
    terms level by level.  Exact for quadratics at any step size.

    Any non-finite evaluation of ``f`` raises NonFiniteEvalError carrying
    the offending abscissa.
    """
    x = float(x)
    if steps < 1:
        raise DomainError("steps must be a positive integer")
    if h0 is None:
        h0 = max(1e-2, 1e-2 * abs(x))
    if h0 <= 0.0:
        raise DomainError("h0 must be positive")

    def _eval(z):
        v = float(f(z))
        if not math.isfinite(v):
            raise NonFiniteEvalError(z)
        return v

    fx = _eval(x)
    table = []
    h = float(h0)
    for i in range(steps):
        d = (_eval(x + h) - 2.0 * fx + _eval(x - h)) / (h * h)
        row = [d]
        prev = table[-1] if table else None
        for j in range(1, i + 1):
            fac = 4.0 ** j
            row.append((fac * row[j - 1] - prev[j - 1]) / (fac - 1.0))
        table.append(row)
        h *= 0.5
    return table[-1][-1]
