"""Annealing schedules for the inverse temperature and the quantum strength.

``beta_i = beta0 * r_beta**i`` and ``gamma_i = gamma0 * exp(-r_gamma**i)``.
The replica coupling is ``f = n * log(1 + k / (exp(k*beta*gamma/m) - 1))``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

__all__ = [
    "ScheduleError",
    "ScheduleParams",
    "ScheduleState",
    "coupling_f",
    "coupling_f_naive",
    "schedule_at",
    "path_class",
    "crossing_iteration",
    "default_params",
    "residual_proxy",
]

# above this exponent the coupling is evaluated through exp(-x)
ASYMPTOTIC_EXPONENT = 30.0
_LOG_MAX = math.log(sys.float_info.max)


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    beta0: float
    r_beta: float
    gamma0: float
    r_gamma: float
    m: int
    n: int
    k: int

    def __post_init__(self):
        bad = []
        for name in ("beta0", "gamma0"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                bad.append(f"{name}={v!r} must be positive and finite")
        for name in ("r_beta", "r_gamma"):
            v = getattr(self, name)
            if not (v > 1 and math.isfinite(v)):
                bad.append(f"{name}={v!r} must be > 1")
        for name in ("m", "n", "k"):
            if int(getattr(self, name)) < 1:
                bad.append(f"{name} must be >= 1")
        if bad:
            raise ScheduleError("; ".join(bad))


@dataclass(frozen=True)
class ScheduleState:
    iteration: int
    beta: float
    gamma: float
    f_value: float
    beta_over_m: float


def coupling_f(beta, gamma, n, k, m):
    """Replica coupling strength, evaluated without overflow.

    Returns ``inf`` when ``gamma`` is 0 (or the exponent underflows) and 0
    when ``gamma`` is infinite.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if not gamma >= 0:
        raise ValueError(f"gamma must be non-negative, got {gamma!r}")
    x = k * beta * gamma / m
    if x == 0.0:
        return math.inf
    if x > ASYMPTOTIC_EXPONENT:
        # k / expm1(x) rewritten so exp(x) is never formed
        return n * math.log1p(k * math.exp(-x) / -math.expm1(-x))
    return n * math.log1p(k / math.expm1(x))


def coupling_f_naive(beta, gamma, n, k, m):
    """Literal formula; overflows for large exponents.  Reference only."""
    return n * math.log(1 + k / (math.exp(k * beta * gamma / m) - 1))


def schedule_at(p, i):
    if i < 0:
        raise ValueError("iteration must be >= 0")
    beta = p.beta0 * p.r_beta**i
    try:
        gamma = p.gamma0 * math.exp(-(p.r_gamma**i))
    except OverflowError:
        gamma = 0.0
    f = coupling_f(beta, gamma, p.n, p.k, p.m)
    return ScheduleState(i, beta, gamma, f, beta / p.m)


def path_class(p, horizon):
    """Classify the coupling path against ``beta/m`` over ``0..horizon``.

    ``"f_1"``: the coupling already matches ``beta/m`` at iteration 0.
    ``"f_star"``: it starts below and ends above.  ``"f_2"``: it never
    rises above.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    gaps = []
    for i in range(horizon + 1):
        s = schedule_at(p, i)
        gaps.append(s.f_value - s.beta_over_m)
    if gaps[0] >= 0:
        return "f_1"
    if any(g > 0 for g in gaps):
        return "f_star"
    return "f_2"


def crossing_iteration(beta0, r_beta, target):
    """First iteration with ``beta0 * r_beta**i >= target``."""
    if target <= beta0:
        return 0
    i = max(0, math.ceil(math.log(target / beta0) / math.log(r_beta)))
    while beta0 * r_beta**i < target:
        i += 1
    while i > 0 and beta0 * r_beta ** (i - 1) >= target:
        i -= 1
    return i


def _gamma_for_coupling(f_target, beta, n, k, m):
    # inverse of coupling_f in gamma (closed form, monotone)
    x = math.log1p(k / math.expm1(f_target / n))
    return x * m / (k * beta)


def default_params(
    n, k, m, r_beta, *, mode="qast", beta_hold_target=None, f_hold=1e-3, r_gamma=None, replica_beta0=None
):
    """Schedule with ``r_gamma = 1.05 r_beta`` and ``gamma0`` large enough
    that the coupling stays below ``f_hold`` until beta reaches
    ``beta_hold_target`` (default ``m``).

    ``beta0`` is ``replica_beta0`` (default ``0.2 m``) for ``mode="qast"`` and
    ``0.2`` for ``mode="sa"``.  The hold point always refers to the replica
    schedule ``replica_beta0 * r_beta**i``, so both modes share ``gamma0``.
    """
    if mode not in ("qast", "sa"):
        raise ValueError(f"unknown mode {mode!r}")
    if not r_beta > 1:
        raise ScheduleError("r_beta must be > 1")
    target = float(m if beta_hold_target is None else beta_hold_target)
    qa_beta0 = 0.2 * m if replica_beta0 is None else float(replica_beta0)
    r_gamma = 1.05 * r_beta if r_gamma is None else float(r_gamma)
    if not r_gamma > 1:
        raise ScheduleError("r_gamma must be > 1")
    i_hold = crossing_iteration(qa_beta0, r_beta, target)
    beta_hold = qa_beta0 * r_beta**i_hold
    gamma_hold = _gamma_for_coupling(f_hold, beta_hold, n, k, m)
    log_gamma0 = math.log(gamma_hold) + r_gamma**i_hold
    if log_gamma0 >= _LOG_MAX:
        raise ScheduleError(
            f"gamma0 = exp({log_gamma0:.1f}) overflows: the hold iteration {i_hold} is too "
            f"late for r_gamma={r_gamma}; raise r_beta or lower beta_hold_target"
        )
    gamma0 = math.exp(log_gamma0)
    qa = ScheduleParams(qa_beta0, r_beta, gamma0, r_gamma, m, n, k)
    # exp/log round trip may leave f a hair above f_hold
    while schedule_at(qa, i_hold).f_value > f_hold:
        gamma0 = math.nextafter(gamma0, math.inf) * (1 + 1e-12)
        qa = ScheduleParams(qa_beta0, r_beta, gamma0, r_gamma, m, n, k)
    if mode == "qast":
        return qa
    return ScheduleParams(0.2, r_beta, gamma0, r_gamma, m, n, k)


def residual_proxy(state):
    """``beta**2 * gamma``, the leading size of the Trotter residual."""
    return state.beta**2 * state.gamma
