"""Gamma variate generation (squeeze/rejection, all shapes)."""
from __future__ import annotations

import math

import numba

from tdof.errors import DomainError
from tdof.numerics.rng import RandomStream

__all__ = ["sample_gamma"]


@numba.njit(cache=True)
def _gamma_draw_ge1(gen, shape):
    # Marsaglia-Tsang squeeze method, valid for shape >= 1
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = gen.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = 1.0 - gen.random()  # in (0, 1]: log below is safe
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


@numba.njit(cache=True)
def _gamma_draw(gen, shape, rate):
    if shape < 1.0:
        # boost transform: G(a) = G(a+1) * U^(1/a)
        u = 1.0 - gen.random()
        return _gamma_draw_ge1(gen, shape + 1.0) * u ** (1.0 / shape) / rate
    return _gamma_draw_ge1(gen, shape) / rate


def sample_gamma(stream: RandomStream, shape: float, rate: float) -> float:
    """One Gamma(shape, rate) draw from the stream (rate parameterization)."""
    shape = float(shape)
    rate = float(rate)
    if not (math.isfinite(shape) and shape > 0.0):
        raise DomainError(f"shape must be positive, got {shape!r}")
    if not (math.isfinite(rate) and rate > 0.0):
        raise DomainError(f"rate must be positive, got {rate!r}")
    return _gamma_draw(stream.generator, shape, rate)
