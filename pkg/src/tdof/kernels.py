"""MCMC update kernels for the degrees-of-freedom parameter.

Three sweep types over the augmented state:

* ``sa``  -- conjugate refresh of the latent scales tau, then an exact
  draw of nu from its conditional via rejection sampling with an
  exponential envelope anchored at the conditional's mode.
* ``aa``  -- tau refreshed and mapped to u = F(tau; nu), then nu updated
  by ``k_aa`` adaptive-Metropolis steps on log(nu) against the ancillary
  conditional (which prices each proposal at n inverse-CDF evaluations).
* ``asis`` -- the sufficient update followed by a deterministic map to u
  and the ancillary Metropolis updates: one interweaved sweep, not a
  sequence of the two samplers.

The jitted ``_run_chain`` driver executes whole chains without leaving
compiled code; the public functions wrap it and the single-step pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numba
import numpy as np

from tdof.errors import BracketError, DomainError, RejectionCapError
from tdof.model import (
    AugmentedState,
    ChainSpec,
    DrawMatrix,
    NuPrior,
    ObservationSet,
    _log_post_tau,
    _log_post_u_sorted,
    _simulate_t,
)
from tdof.numerics.rng import RandomStream
from tdof.numerics.sampling import _gamma_draw
from tdof.numerics.special import _digamma, _gammainc_q, _trigamma

__all__ = [
    "AMTuning",
    "XiSolveResult",
    "draw_tau_given_nu",
    "eta_stat",
    "solve_xi_star",
    "rs_log_accept_prob",
    "rs_draw_nu",
    "am_step",
    "sa_sweep",
    "aa_sweep",
    "asis_sweep",
    "run_chain",
]

RS_PROPOSAL_CAP = 1_000_000

# indices into the packed adaptive-Metropolis state vector
_AM_LOGSD = 0
_AM_BATCH_SIZE = 1
_AM_STEPS = 2
_AM_ACCEPTS = 3
_AM_BATCH_INDEX = 4
_AM_TARGET = 5
_AM_ADAPTING = 6
_AM_SLOTS = 7


@dataclass(frozen=True)
class AMTuning:
    """Batch-adaptive random-walk tuning state (log-scale step size)."""

    log_step_sd: float = math.log(0.5)
    batch_size: int = 200
    steps_in_batch: int = 0
    batch_accept_count: int = 0
    batch_index: int = 1
    target_accept: float = 0.44
    adapting: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not (0 <= self.batch_accept_count <= self.batch_size):
            raise DomainError("batch_accept_count must lie in [0, batch_size]")
        if not (0 <= self.steps_in_batch <= self.batch_size):
            raise DomainError("steps_in_batch must lie in [0, batch_size]")
        if self.batch_index < 1:
            raise DomainError("batch_index must be >= 1")

    def to_vec(self) -> np.ndarray:
        v = np.zeros(_AM_SLOTS)
        v[_AM_LOGSD] = self.log_step_sd
        v[_AM_BATCH_SIZE] = float(self.batch_size)
        v[_AM_STEPS] = float(self.steps_in_batch)
        v[_AM_ACCEPTS] = float(self.batch_accept_count)
        v[_AM_BATCH_INDEX] = float(self.batch_index)
        v[_AM_TARGET] = self.target_accept
        v[_AM_ADAPTING] = 1.0 if self.adapting else 0.0
        return v

    @staticmethod
    def from_vec(v: np.ndarray) -> "AMTuning":
        return AMTuning(
            log_step_sd=float(v[_AM_LOGSD]),
            batch_size=int(v[_AM_BATCH_SIZE]),
            steps_in_batch=int(v[_AM_STEPS]),
            batch_accept_count=int(v[_AM_ACCEPTS]),
            batch_index=int(v[_AM_BATCH_INDEX]),
            target_accept=float(v[_AM_TARGET]),
            adapting=bool(v[_AM_ADAPTING] > 0.5),
        )


@dataclass(frozen=True)
class XiSolveResult:
    """Root of the envelope anchor equation plus its residual."""

    xi_star: float
    residual: float


# --- jitted cores -----------------------------------------------------------


@numba.njit(cache=True)
def _xi_equation(xi, eta, n):
    return (math.log(0.5 * xi) + 1.0 - _digamma(0.5 * xi)) * 0.5 * n + 1.0 / xi - eta


@numba.njit(cache=True)
def _solve_xi(eta, n):
    """Unique root of the anchor equation; NaN if bracketing fails.

    The left-hand side decreases strictly from +inf to n/2 - eta < 0
    (eta > n/2 is guaranteed by the form of the sufficient statistic),
    so a sign change always exists.
    """
    if n == 0:
        return 1.0 / eta
    guess = (0.5 * n + 1.0) / (eta - 0.5 * n)
    if not (guess > 0.0) or not math.isfinite(guess):
        guess = 1.0
    lo = 0.25 * guess
    hi = 4.0 * guess
    flo = _xi_equation(lo, eta, n)
    fhi = _xi_equation(hi, eta, n)
    ok = False
    for _ in range(60):
        if flo > 0.0 and fhi < 0.0:
            ok = True
            break
        if flo <= 0.0:
            lo = lo * 0.25
            flo = _xi_equation(lo, eta, n)
        if fhi >= 0.0:
            hi = hi * 4.0
            fhi = _xi_equation(hi, eta, n)
    if not ok and not (flo > 0.0 and fhi < 0.0):
        return math.nan
    ftol = 1e-12 * max(1.0, 0.01 * n)
    x = math.sqrt(lo * hi)
    for _ in range(200):
        f = _xi_equation(x, eta, n)
        if f > 0.0:
            lo = x
        else:
            hi = x
        if abs(f) <= ftol or hi - lo <= 1e-14 * x:
            return x
        # Newton step with bisection fallback
        df = (1.0 / x - 0.5 * _trigamma(0.5 * x)) * 0.5 * n - 1.0 / (x * x)
        nxt = x - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi) or not math.isfinite(nxt):
            nxt = 0.5 * (lo + hi)
        x = nxt
    return x


@numba.njit(cache=True)
def _rs_draw(gen, eta, n):
    """Exact draw from the sufficient-form conditional of nu.

    Proposes from Exp(mean xi*) and accepts with the envelope ratio,
    which equals one exactly at the anchor point.  Returns (nu, count);
    nu is NaN when the anchor solve fails or the proposal cap is hit.
    """
    xi = _solve_xi(eta, n)
    if math.isnan(xi):
        return math.nan, 0
    h_star = _log_post_tau(xi, eta, n) + 1.0
    inv_xi = 1.0 / xi
    for k in range(RS_PROPOSAL_CAP):
        nu_p = -xi * math.log(1.0 - gen.random())
        if nu_p <= 0.0:
            continue
        ln_a = _log_post_tau(nu_p, eta, n) + nu_p * inv_xi - h_star
        if ln_a >= 0.0:
            return nu_p, k + 1
        if math.log(1.0 - gen.random()) < ln_a:
            return nu_p, k + 1
    return math.nan, RS_PROPOSAL_CAP


@numba.njit(cache=True)
def _am_record(amvec, accepted):
    # batch bookkeeping; adjustment size shrinks as the batches accumulate
    if amvec[_AM_ADAPTING] < 0.5:
        return
    amvec[_AM_STEPS] += 1.0
    if accepted:
        amvec[_AM_ACCEPTS] += 1.0
    if amvec[_AM_STEPS] >= amvec[_AM_BATCH_SIZE]:
        rate = amvec[_AM_ACCEPTS] / amvec[_AM_STEPS]
        delta = min(0.05, amvec[_AM_BATCH_INDEX] ** -0.5)
        if rate > amvec[_AM_TARGET]:
            amvec[_AM_LOGSD] += delta
        else:
            amvec[_AM_LOGSD] -= delta
        if amvec[_AM_LOGSD] > 15.0:
            amvec[_AM_LOGSD] = 15.0
        elif amvec[_AM_LOGSD] < -15.0:
            amvec[_AM_LOGSD] = -15.0
        amvec[_AM_BATCH_INDEX] += 1.0
        amvec[_AM_STEPS] = 0.0
        amvec[_AM_ACCEPTS] = 0.0


@numba.njit(cache=True)
def _am_update_u(gen, amvec, nu, lt_cur, y_sq_s, p_s, xbuf, lam, include_jacobian):
    """One random-walk Metropolis step on log(nu) against the ancillary target."""
    sd = math.exp(amvec[_AM_LOGSD])
    nu_p = nu * math.exp(sd * gen.standard_normal())
    lt_p = _log_post_u_sorted(nu_p, y_sq_s, p_s, xbuf, lam)
    accepted = False
    if lt_p > -math.inf:
        ln_a = lt_p - lt_cur
        if include_jacobian:
            ln_a += math.log(nu_p) - math.log(nu)
        if lt_cur == -math.inf:
            accepted = True
        elif ln_a >= 0.0 or math.log(1.0 - gen.random()) < ln_a:
            accepted = True
    _am_record(amvec, accepted)
    if accepted:
        return nu_p, lt_p, True
    return nu, lt_cur, False


@numba.njit(cache=True)
def _refresh_tau(gen, y, nu, tau_out):
    """Conjugate refresh of all latent scales; returns the eta statistic part.

    1/tau_i ~ Gamma((nu+1)/2, (nu+y_i^2)/2); accumulates
    0.5*sum(log tau_i + 1/tau_i) on the fly.
    """
    n = y.shape[0]
    acc = 0.0
    half_nu1 = 0.5 * (nu + 1.0)
    for i in range(n):
        w = _gamma_draw(gen, half_nu1, 0.5 * (nu + y[i] * y[i]))
        tau_out[i] = 1.0 / w
        acc += w - math.log(w)
    return 0.5 * acc


@numba.njit(cache=True)
def _tau_to_u(nu, tau, u_out):
    # u_i = F(tau_i; nu); boundary-rounded values are kept (flagged upstream)
    half_nu = 0.5 * nu
    for i in range(tau.shape[0]):
        u_out[i] = _gammainc_q(half_nu, half_nu / tau[i])


@numba.njit(cache=True)
def _lt_from_tau(nu, y, tau, lam):
    # ancillary target value at the current nu, priced from tau directly
    acc = 0.0
    for i in range(y.shape[0]):
        acc += math.log(tau[i]) + y[i] * y[i] / tau[i]
    return -0.5 * (acc + y.shape[0] * 1.8378770664093454836) - lam * nu


@numba.njit(cache=True)
def _sort_for_target(y, u, p_s, y_sq_s):
    # ascending p = 1-u with the squared observations aligned
    n = u.shape[0]
    p = np.empty(n)
    for i in range(n):
        p[i] = 1.0 - u[i]
    order = np.argsort(p)
    for i in range(n):
        j = order[i]
        p_s[i] = p[j]
        y_sq_s[i] = y[j] * y[j]


@numba.njit(cache=True)
def _am_block(gen, amvec, nu, lt_cur, k, y_sq_s, p_s, xbuf, lam, include_jacobian):
    accepts = 0
    for _ in range(k):
        nu, lt_cur, acc = _am_update_u(
            gen, amvec, nu, lt_cur, y_sq_s, p_s, xbuf, lam, include_jacobian
        )
        if acc:
            accepts += 1
    return nu, lt_cur, accepts


@numba.njit(cache=True)
def _sweep_sa(gen, y, nu, lam, tau):
    eta = lam + _refresh_tau(gen, y, nu, tau)
    nu_new, _ = _rs_draw(gen, eta, y.shape[0])
    return nu_new


@numba.njit(cache=True)
def _sweep_aa(gen, y, nu, lam, k_aa, amvec, tau, u, p_s, y_sq_s, xbuf, include_jacobian):
    _refresh_tau(gen, y, nu, tau)
    _tau_to_u(nu, tau, u)
    _sort_for_target(y, u, p_s, y_sq_s)
    lt_cur = _lt_from_tau(nu, y, tau, lam)
    nu, _, acc = _am_block(gen, amvec, nu, lt_cur, k_aa, y_sq_s, p_s, xbuf, lam, include_jacobian)
    return nu, acc


@numba.njit(cache=True)
def _sweep_asis(gen, y, nu, lam, k_aa, amvec, tau, u, p_s, y_sq_s, xbuf, include_jacobian, skip_am):
    eta = lam + _refresh_tau(gen, y, nu, tau)
    nu_new, _ = _rs_draw(gen, eta, y.shape[0])
    if math.isnan(nu_new):
        return math.nan, 0
    nu = nu_new
    if skip_am:
        return nu, 0
    _tau_to_u(nu, tau, u)
    _sort_for_target(y, u, p_s, y_sq_s)
    lt_cur = _lt_from_tau(nu, y, tau, lam)
    nu, _, acc = _am_block(gen, amvec, nu, lt_cur, k_aa, y_sq_s, p_s, xbuf, lam, include_jacobian)
    return nu, acc


@numba.njit(cache=True)
def _run_chain(gen, alg_id, y, lam, init_nu, k_aa, m, burn_in, amvec):
    """Whole-chain driver.  alg_id: 0=sa, 1=aa, 2=asis.

    Returns (draws, status, post_accepts, post_steps); status 1 means the
    rejection sampler hit its proposal cap (draws are then truncated).
    """
    n = y.shape[0]
    tau = np.empty(n)
    u = np.empty(n)
    p_s = np.empty(n)
    y_sq_s = np.empty(n)
    xbuf = np.empty(n)
    draws = np.empty(m)
    nu = init_nu
    post_accepts = 0
    post_steps = 0
    for t in range(burn_in + m):
        if t == burn_in:
            amvec[_AM_ADAPTING] = 0.0
        if alg_id == 0:
            nu = _sweep_sa(gen, y, nu, lam, tau)
            acc = 0
        elif alg_id == 1:
            nu, acc = _sweep_aa(
                gen, y, nu, lam, k_aa, amvec, tau, u, p_s, y_sq_s, xbuf, True
            )
        else:
            nu, acc = _sweep_asis(
                gen, y, nu, lam, k_aa, amvec, tau, u, p_s, y_sq_s, xbuf, True, False
            )
        if math.isnan(nu):
            return draws[: max(t - burn_in, 0)], 1, post_accepts, post_steps
        if t >= burn_in:
            draws[t - burn_in] = nu
            if alg_id != 0:
                post_accepts += acc
                post_steps += k_aa
    return draws, 0, post_accepts, post_steps


# --- public operations ------------------------------------------------------


def draw_tau_given_nu(stream: RandomStream, y_i: float, nu: float) -> float:
    """One latent scale from its conjugate conditional given (y_i, nu)."""
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    y_i = float(y_i)
    return 1.0 / _gamma_draw(stream.generator, 0.5 * (nu + 1.0), 0.5 * (nu + y_i * y_i))


def eta_stat(tau, prior: NuPrior) -> float:
    """Sufficient statistic lambda + 0.5*sum(log tau_i + 1/tau_i).

    The prior rate enters with a plus sign: the exponential prior
    contributes -lambda*nu to the log kernel, and the kernel is written
    as -nu*eta.  (The joint-distribution test in tdof.validation is the
    arbiter of this sign convention.)
    """
    tau = np.asarray(tau, dtype=np.float64)
    if tau.size and not np.all(tau > 0.0):
        raise DomainError("tau entries must be positive")
    return prior.lam + 0.5 * float(np.sum(np.log(tau) + 1.0 / tau))


def solve_xi_star(eta: float, n: int) -> XiSolveResult:
    """Anchor point of the rejection sampler's exponential envelope."""
    eta = float(eta)
    n = int(n)
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n > 0 and eta <= 0.5 * n:
        raise DomainError(f"eta must exceed n/2, got eta={eta}, n={n}")
    if n == 0 and eta <= 0.0:
        raise DomainError("eta must be positive when n=0")
    xi = _solve_xi(eta, n)
    if math.isnan(xi):
        raise BracketError(f"anchor solve failed for eta={eta}, n={n}")
    return XiSolveResult(xi_star=xi, residual=_xi_equation(xi, eta, n) if n else 1.0 / xi - eta)


def rs_log_accept_prob(nu_p: float, eta: float, n: int, xi_star: float) -> float:
    """Log acceptance probability of the rejection sampler at a proposal."""
    return (
        _log_post_tau(float(nu_p), float(eta), int(n))
        + float(nu_p) / float(xi_star)
        - (_log_post_tau(float(xi_star), float(eta), int(n)) + 1.0)
    )


def rs_draw_nu(stream: RandomStream, eta: float, n: int) -> float:
    """Exact draw from the sufficient-form conditional of nu."""
    eta = float(eta)
    n = int(n)
    if n < 0:
        raise DomainError("n must be nonnegative")
    nu, count = _rs_draw(stream.generator, eta, n)
    if math.isnan(nu):
        xi = _solve_xi(eta, n)
        raise RejectionCapError(count, {"eta": eta, "n": n, "xi_star": xi})
    return nu


def am_step(
    stream: RandomStream,
    am: AMTuning,
    nu: float,
    log_target: Callable[[float], float],
    include_jacobian: bool = True,
):
    """One adaptive-Metropolis step on log(nu) against an arbitrary target.

    Returns (new_nu, new_tuning, accepted).  The acceptance ratio carries
    the nu_p/nu change-of-variables factor for the log-scale walk;
    ``include_jacobian=False`` is the deliberately broken variant used to
    demonstrate that the joint-distribution test has power.
    """
    nu = float(nu)
    if not (math.isfinite(nu) and nu > 0.0):
        raise DomainError(f"nu must be positive, got {nu!r}")
    gen = stream.generator
    lt_cur = float(log_target(nu))
    sd = math.exp(am.log_step_sd)
    nu_p = nu * math.exp(sd * gen.standard_normal())
    lt_p = float(log_target(nu_p))
    accepted = False
    if lt_p > -math.inf:
        ln_a = lt_p - lt_cur
        if include_jacobian:
            ln_a += math.log(nu_p) - math.log(nu)
        if lt_cur == -math.inf:
            accepted = True
        elif ln_a >= 0.0 or math.log(1.0 - gen.random()) < ln_a:
            accepted = True

    new_am = am
    if am.adapting:
        steps = am.steps_in_batch + 1
        accepts = am.batch_accept_count + (1 if accepted else 0)
        if steps >= am.batch_size:
            rate = accepts / steps
            delta = min(0.05, am.batch_index**-0.5)
            log_sd = am.log_step_sd + (delta if rate > am.target_accept else -delta)
            log_sd = min(15.0, max(-15.0, log_sd))
            new_am = replace(
                am,
                log_step_sd=log_sd,
                steps_in_batch=0,
                batch_accept_count=0,
                batch_index=am.batch_index + 1,
            )
        else:
            new_am = replace(am, steps_in_batch=steps, batch_accept_count=accepts)
    return (nu_p if accepted else nu), new_am, accepted


def _require_state(state: AugmentedState, data: ObservationSet, need_am: bool) -> None:
    if need_am and state.am is None:
        state.am = AMTuning()
    n = data.n
    if state.tau is None or state.tau.shape[0] != n:
        state.tau = np.empty(n)
    if state.u is None or state.u.shape[0] != n:
        state.u = np.empty(n)


def sa_sweep(
    state: AugmentedState, data: ObservationSet, prior: NuPrior, stream: RandomStream
) -> AugmentedState:
    """One sufficient-form pass: refresh all tau, then draw nu exactly."""
    _require_state(state, data, need_am=False)
    nu = _sweep_sa(stream.generator, data.y, state.nu, prior.lam, state.tau)
    if math.isnan(nu):
        raise RejectionCapError(RS_PROPOSAL_CAP, {"nu": state.nu, "n": data.n})
    state.nu = nu
    return state


def aa_sweep(
    state: AugmentedState,
    data: ObservationSet,
    prior: NuPrior,
    stream: RandomStream,
    k_aa: int = 20,
) -> AugmentedState:
    """One ancillary-form pass: refresh u, then k_aa Metropolis steps on nu."""
    _require_state(state, data, need_am=True)
    amvec = state.am.to_vec()
    n = data.n
    p_s = np.empty(n)
    y_sq_s = np.empty(n)
    xbuf = np.empty(n)
    nu, _ = _sweep_aa(
        stream.generator,
        data.y,
        state.nu,
        prior.lam,
        int(k_aa),
        amvec,
        state.tau,
        state.u,
        p_s,
        y_sq_s,
        xbuf,
        True,
    )
    state.nu = nu
    state.am = AMTuning.from_vec(amvec)
    return state


def asis_sweep(
    state: AugmentedState,
    data: ObservationSet,
    prior: NuPrior,
    stream: RandomStream,
    k_aa: int = 20,
    _force_reject_am: bool = False,
) -> AugmentedState:
    """One interweaved pass: sufficient update, map to u, ancillary update.

    ``_force_reject_am`` is a test hook that skips the Metropolis block
    entirely (consuming no randomness), under which the sweep coincides
    with the sufficient sampler draw for draw.
    """
    _require_state(state, data, need_am=True)
    amvec = state.am.to_vec()
    n = data.n
    p_s = np.empty(n)
    y_sq_s = np.empty(n)
    xbuf = np.empty(n)
    nu, _ = _sweep_asis(
        stream.generator,
        data.y,
        state.nu,
        prior.lam,
        int(k_aa),
        amvec,
        state.tau,
        state.u,
        p_s,
        y_sq_s,
        xbuf,
        True,
        _force_reject_am,
    )
    if math.isnan(nu):
        raise RejectionCapError(RS_PROPOSAL_CAP, {"nu": state.nu, "n": data.n})
    state.nu = nu
    state.am = AMTuning.from_vec(amvec)
    return state


_ALG_IDS = {"sa": 0, "aa": 1, "asis": 2}


def run_chain(spec: ChainSpec, data: ObservationSet) -> DrawMatrix:
    """Run one chain to completion and return its post-burn-in draws.

    Adaptation runs during burn-in and is frozen afterwards, so the
    recorded draws come from a fixed Markov kernel.
    """
    amvec = AMTuning().to_vec()
    draws, status, acc, steps = _run_chain(
        spec.stream.generator,
        _ALG_IDS[spec.algorithm],
        data.y,
        spec.prior.lam,
        float(spec.init_nu),
        int(spec.k_aa),
        int(spec.iterations),
        int(spec.burn_in),
        amvec,
    )
    if status != 0:
        raise RejectionCapError(
            RS_PROPOSAL_CAP,
            {"algorithm": spec.algorithm, "n": data.n, "completed": len(draws)},
        )
    rate = acc / steps if steps else math.nan
    stuck = bool(len(draws) > 1 and np.all(draws == draws[0]))
    return DrawMatrix(nu_draws=draws, accept_rate=rate, stuck=stuck)
