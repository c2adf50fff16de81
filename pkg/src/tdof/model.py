"""Core Student-t model: domain types, densities, simulation, contour grids.

The observation model is y ~ t_nu(0, 1) with the scale-mixture
representation y = sqrt(tau) * z, 1/tau ~ Gamma(nu/2, nu/2), z ~ N(0,1).
Two latent parameterizations drive the samplers: tau itself (sufficient
form) and u = F(tau; nu), the prior CDF transform (ancillary form, a
priori standard uniform).  The degrees-of-freedom prior is Exp(lambda).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numba
import numpy as np

from tdof.errors import ConvergenceError, DomainError
from tdof.numerics.rng import RandomStream
from tdof.numerics.sampling import _gamma_draw
from tdof.numerics.special import (
    _gammainc_inv,
    _gammainc_inv_sorted,
    _gammainc_q,
    _lgamma,
)

if TYPE_CHECKING:
    from tdof.kernels import AMTuning

__all__ = [
    "ObservationSet",
    "NuPrior",
    "AugmentedState",
    "ChainSpec",
    "DrawMatrix",
    "simulate_observations",
    "tau_cdf",
    "tau_quantile",
    "log_post_nu_given_tau",
    "log_post_nu_given_u",
    "joint_grid",
    "write_grid_csv",
]

_LN_2PI = 1.8378770664093454835606594728112353


@dataclass(frozen=True)
class ObservationSet:
    """Immutable vector of real observations."""

    y: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.y, dtype=np.float64)
        if arr.ndim != 1:
            raise DomainError("observations must form a one-dimensional vector")
        if not np.all(np.isfinite(arr)):
            raise DomainError("observations must all be finite")
        object.__setattr__(self, "y", arr)

    @property
    def n(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class NuPrior:
    """Exponential prior on the degrees of freedom, rate ``lam``."""

    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0.0):
            raise DomainError(f"prior rate must be positive, got {self.lam!r}")


@dataclass
class AugmentedState:
    """Mutable sampler state: current nu plus the latent vectors in play."""

    nu: float
    tau: np.ndarray | None = None
    u: np.ndarray | None = None
    am: "AMTuning | None" = None

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu > 0.0):
            raise DomainError(f"nu must be positive, got {self.nu!r}")
        if self.tau is not None:
            self.tau = np.asarray(self.tau, dtype=np.float64)
            if self.tau.size and not np.all(self.tau > 0.0):
                raise DomainError("tau entries must be positive")
        if self.u is not None:
            self.u = np.asarray(self.u, dtype=np.float64)
            if self.u.size and not (np.all(self.u > 0.0) and np.all(self.u < 1.0)):
                raise DomainError("u entries must lie strictly inside (0, 1)")


ALGORITHMS = ("sa", "aa", "asis")


@dataclass(frozen=True)
class ChainSpec:
    """Everything that determines one chain."""

    algorithm: str
    iterations: int
    burn_in: int
    init_nu: float
    prior: NuPrior
    stream: RandomStream
    k_aa: int = 20

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DomainError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.burn_in < 0:
            raise DomainError("burn_in must be >= 0")
        if not (math.isfinite(self.init_nu) and self.init_nu > 0.0):
            raise DomainError("init_nu must be positive")
        if self.k_aa < 1:
            raise DomainError("k_aa must be >= 1")


@dataclass
class DrawMatrix:
    """Per-iteration records of one chain's sampled parameters."""

    nu_draws: np.ndarray
    accept_rate: float = math.nan
    stuck: bool = False

    def __post_init__(self):
        self.nu_draws = np.asarray(self.nu_draws, dtype=np.float64)
        if not np.all(np.isfinite(self.nu_draws)):
            raise DomainError("draws must all be finite")

    @property
    def m(self) -> int:
        return self.nu_draws.shape[0]


# --- jitted scalar/vector cores --------------------------------------------


@numba.njit(cache=True)
def _tau_cdf(tau, nu):
    # F(tau; nu) = P(1/G <= tau) = Q(nu/2, nu/(2 tau)) for G ~ Gamma(nu/2, nu/2)
    return _gammainc_q(0.5 * nu, 0.5 * nu / tau)


@numba.njit(cache=True)
def _tau_quantile(u, nu):
    # inverse of _tau_cdf; NaN signals failure
    if not (0.0 < u < 1.0):
        return math.nan
    x = _gammainc_inv(0.5 * nu, 1.0 - u, u, -1.0)
    if not (x > 0.0) or not math.isfinite(x):
        return math.nan
    tau = 0.5 * nu / x
    if not math.isfinite(tau):
        return math.nan
    return tau


@numba.njit(cache=True)
def _simulate_t(gen, nu, n):
    out = np.empty(n)
    for i in range(n):
        w = _gamma_draw(gen, 0.5 * nu, 0.5 * nu)  # precision 1/tau
        out[i] = gen.standard_normal() / math.sqrt(w)
    return out


@numba.njit(cache=True)
def _log_post_tau(nu, eta, n):
    # unnormalized log p(nu | y, tau); depends on tau only through eta
    return n * (0.5 * nu * math.log(0.5 * nu) - _lgamma(0.5 * nu)) - nu * eta


@numba.njit(cache=True)
def _log_post_u_sorted(nu, y_sq_sorted, p_sorted, xbuf, lam):
    """Unnormalized log p(nu | y, u) on pre-sorted inputs.

    ``p_sorted`` holds 1-u in ascending order with ``y_sq_sorted`` the
    matching squared observations; ``xbuf`` is scratch for the batched
    inverse-CDF roots.  Returns -inf whenever any quantile evaluation
    fails (the documented failure mode of the ancillary form).
    """
    n = p_sorted.shape[0]
    if n > 0:
        if not _gammainc_inv_sorted(0.5 * nu, p_sorted, xbuf):
            return -math.inf
    total = -lam * nu
    if n == 0:
        return total
    # tau_i = nu / (2 x_i); log N(y; 0, tau) = -(ln(2 pi tau) + y^2/tau)/2
    log_half_nu = math.log(0.5 * nu)
    acc = 0.0
    for i in range(n):
        x = xbuf[i]
        acc += math.log(x) - 2.0 * y_sq_sorted[i] * x / nu
    total += 0.5 * (acc - n * (_LN_2PI + log_half_nu))
    if not math.isfinite(total):
        return -math.inf
    return total


# --- public operations ------------------------------------------------------


def simulate_observations(stream: RandomStream, nu: float, n: int) -> ObservationSet:
    """n i.i.d. standard Student-t(nu) draws via the scale mixture."""
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    if n < 0:
        raise DomainError("n must be nonnegative")
    return ObservationSet(_simulate_t(stream.generator, nu, int(n)))


def tau_cdf(tau: float, nu: float) -> float:
    """Prior CDF of the latent scale: F(tau; nu) = 1 - P(nu/2, nu/(2 tau))."""
    tau = float(tau)
    nu = float(nu)
    if not (math.isfinite(tau) and tau > 0.0):
        raise DomainError(f"tau must be positive, got {tau!r}")
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    return _tau_cdf(tau, nu)


def tau_quantile(u: float, nu: float) -> float:
    """Inverse prior CDF of the latent scale.

    Fails loudly (never clamps) for u at the numeric boundary or when the
    underlying gamma-quantile iteration does not converge; the ancillary
    sampler's documented failure mode rides on this signal.
    """
    u = float(u)
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie strictly inside (0, 1), got {u!r}")
    tau = _tau_quantile(u, nu)
    if math.isnan(tau):
        raise ConvergenceError(f"tau quantile failed for u={u}, nu={nu}")
    return tau


def log_post_nu_given_tau(nu: float, eta: float, n: int) -> float:
    """Unnormalized log conditional of nu in the sufficient form.

    eta is the sufficient statistic lambda + 0.5*sum(log tau_i + 1/tau_i);
    the kernel is n*((nu/2)ln(nu/2) - lnGamma(nu/2)) - nu*eta.
    """
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    if n < 0:
        raise DomainError("n must be nonnegative")
    return _log_post_tau(nu, float(eta), int(n))


def log_post_nu_given_u(
    nu: float, y: ObservationSet, u: Sequence[float] | np.ndarray, prior: NuPrior
) -> float:
    """Unnormalized log conditional of nu in the ancillary form.

    Any u entry whose quantile evaluation fails makes the value -inf, so
    a Metropolis proposal there is simply rejected.
    """
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    u_arr = np.asarray(u, dtype=np.float64)
    if u_arr.shape[0] != y.n:
        raise DomainError("u and y must have matching lengths")
    p = 1.0 - u_arr
    order = np.argsort(p)
    p_sorted = np.ascontiguousarray(p[order])
    y_sq_sorted = np.ascontiguousarray(y.y[order] ** 2)
    xbuf = np.empty_like(p_sorted)
    return _log_post_u_sorted(nu, y_sq_sorted, p_sorted, xbuf, prior.lam)


# --- contour grids (plot-ready CSV data) ------------------------------------


def _log_joint_nu_tau(nu, tau, y0, lam):
    # log N(y0; 0, tau) + log p(tau | nu) + log Exp(nu; lam), constants kept
    half_nu = 0.5 * nu
    log_norm = -0.5 * (_LN_2PI + math.log(tau)) - y0 * y0 / (2.0 * tau)
    log_tau_prior = (
        half_nu * math.log(half_nu)
        - _lgamma(half_nu)
        - (half_nu + 1.0) * math.log(tau)
        - half_nu / tau
    )
    return log_norm + log_tau_prior + math.log(lam) - lam * nu


def _log_joint_nu_u(nu, u, y0, lam):
    tau = _tau_quantile(u, nu)
    if math.isnan(tau):
        return -math.inf
    log_norm = -0.5 * (_LN_2PI + math.log(tau)) - y0 * y0 / (2.0 * tau)
    return log_norm + math.log(lam) - lam * nu


def joint_grid(
    y0: float,
    which: str,
    nu_range: tuple[float, float] = (1.0, 30.0),
    aux_range: tuple[float, float] | None = None,
    resolution: int = 100,
    prior: NuPrior = NuPrior(0.2),
):
    """Window-normalized bivariate posterior density on a regular grid.

    ``which`` selects the latent axis: "sa-plane" pairs nu with tau,
    "aa-plane" pairs nu with u.  Cell centers are used on both axes and
    the returned density sums to one over the window.

    Returns (nu_axis, aux_axis, density) with density[i, j] at
    (nu_axis[i], aux_axis[j]).
    """
    which = which.lower()
    if which not in ("sa-plane", "aa-plane"):
        raise DomainError(f"which must be 'sa-plane' or 'aa-plane', got {which!r}")
    if aux_range is None:
        aux_range = (0.0, 20.0) if which == "sa-plane" else (0.0, 1.0)
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    y0 = float(y0)
    nu_lo, nu_hi = map(float, nu_range)
    aux_lo, aux_hi = map(float, aux_range)
    if not (nu_lo < nu_hi and aux_lo < aux_hi):
        raise DomainError("ranges must be increasing")

    nu_axis = nu_lo + (np.arange(resolution) + 0.5) * (nu_hi - nu_lo) / resolution
    aux_axis = aux_lo + (np.arange(resolution) + 0.5) * (aux_hi - aux_lo) / resolution
    logd = np.empty((resolution, resolution))
    for i, nu in enumerate(nu_axis):
        for j, aux in enumerate(aux_axis):
            if which == "sa-plane":
                logd[i, j] = _log_joint_nu_tau(nu, aux, y0, prior.lam)
            else:
                logd[i, j] = _log_joint_nu_u(nu, aux, y0, prior.lam)
    logd -= np.max(logd[np.isfinite(logd)])
    dens = np.exp(logd)
    dens /= dens.sum()
    return nu_axis, aux_axis, dens


def write_grid_csv(path, nu_axis, aux_axis, density) -> None:
    """Emit a grid as ``nu,aux,density`` rows (row-major, 8 significant digits)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu", "aux", "density"])
        for i, nu in enumerate(nu_axis):
            for j, aux in enumerate(aux_axis):
                w.writerow([f"{nu:.8g}", f"{aux:.8g}", f"{density[i, j]:.8g}"])
