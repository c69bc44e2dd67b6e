"""Closed-form lower-tail asymptotics of log Q(s, T) and their derivatives.

Every formula goes through q(y) = sqrt(1 + pi^2 y) - 1, evaluated as
pi^2 y / (sqrt(1 + pi^2 y) + 1) so small y loses nothing to cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import DominanceNotEstablished, DomainError
from .kernels import Params

PI = math.pi

# zeta'(-1), from mpmath.zeta(-1, derivative=1) at 40 digits:
# -0.1654211437004509292139196602427806427...
ZETA_PRIME_MINUS_ONE = -0.16542114370045092921


@dataclass(frozen=True)
class AsymptoticBreakdown:
    terms: dict = field(default_factory=dict)
    total: float = 0.0

    @classmethod
    def from_terms(cls, **terms: float) -> "AsymptoticBreakdown":
        return cls(dict(terms), math.fsum(terms.values()))


@dataclass(frozen=True)
class TailBracket:
    lower_A: float
    upper_B: float
    s_tilde: float
    epsilon: float


def _positive(name: str, value: float) -> float:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive, got {value}")
    return float(value)


def q_of(y: float) -> float:
    """sqrt(1 + pi^2 y) - 1 without cancellation at small y."""
    z = PI * PI * y
    return z / (math.sqrt(1.0 + z) + 1.0)


def rate_phi(y: float) -> float:
    """Rate function phi(y), crossing over from y^3/12 to (4/(15 pi)) y^{5/2}.

    The defining expression subtracts the quadratic Taylor polynomial of
    (4/(15 pi^6)) (1 + pi^2 y)^{5/2}. With 1 + pi^2 y = (1 + q)^2 the
    cancellation is done by hand: pi^6 phi = q^3 (20 + 25 q + 8 q^2) / 30.
    """
    if not (math.isfinite(y) and y >= 0):
        raise DomainError(f"phi needs y >= 0, got {y}")
    q = q_of(y)
    return q**3 * (20.0 + 25.0 * q + 8.0 * q * q) / (30.0 * PI**6)


def rate_phi_direct(y: float) -> float:
    """phi(y) term by term, as written; loses digits for small y."""
    if not (math.isfinite(y) and y >= 0):
        raise DomainError(f"phi needs y >= 0, got {y}")
    return (
        4.0 / (15.0 * PI**6) * (1.0 + PI**2 * y) ** 2.5
        - 4.0 / (15.0 * PI**6)
        - 2.0 / (3.0 * PI**4) * y
        - y * y / (2.0 * PI**2)
    )


def log_q_asymptotic(p: Params) -> AsymptoticBreakdown:
    """-T^2 phi(s T^{-2/3}) - (1/6) sqrt(1 + pi^2 s T^{-2/3})."""
    s = _positive("s", p.s)
    y = s / p.T ** (2.0 / 3.0)
    return AsymptoticBreakdown.from_terms(
        T2_phi=-p.T**2 * rate_phi(y),
        sqrt_correction=-(1.0 + q_of(y)) / 6.0,
    )


def log_q_expansion_fixed_T(p: Params) -> AsymptoticBreakdown:
    """Six-term large-s expansion at fixed T, half-integer powers of s down to s^{1/2}."""
    s = _positive("s", p.s)
    T = p.T
    t3 = T ** (1.0 / 3.0)
    return AsymptoticBreakdown.from_terms(
        s52=naive_estimate(p),
        s2=T ** (2.0 / 3.0) / (2.0 * PI**2) * s**2,
        s32=-2.0 * T / (3.0 * PI**3) * s**1.5,
        s1=2.0 * T ** (4.0 / 3.0) / (3.0 * PI**4) * s,
        s12_pi=-PI / (6.0 * t3) * math.sqrt(s),
        s12_pi5=-T ** (5.0 / 3.0) / (2.0 * PI**5) * math.sqrt(s),
    )


def tw_tail_expansion(s: float) -> AsymptoticBreakdown:
    """-s^3/12 - (1/8) log s + (1/24) log 2 + zeta'(-1)."""
    s = _positive("s", s)
    return AsymptoticBreakdown.from_terms(
        tw_cubic=-s**3 / 12.0,
        tw_log=-math.log(s) / 8.0,
        tw_const=math.log(2.0) / 24.0 + ZETA_PRIME_MINUS_ONE,
    )


def naive_estimate(p: Params) -> float:
    """-(4/(15 pi)) T^{1/3} s^{5/2}."""
    s = _positive("s", p.s)
    return -4.0 / (15.0 * PI) * p.T ** (1.0 / 3.0) * s**2.5


def kpz_tail_bracket(
    p: Params,
    epsilon: float,
    q_eval: Callable[[float, float], float],
) -> TailBracket:
    """Bracket log P(Upsilon_T < -s) between lower_A and upper_B.

    upper_B = q_eval(s, T) + 1 and lower_A = log 2 + q_eval(s_tilde, T) with
    s_tilde = s + (3 + epsilon) T^{-1/3} log s. The lower bound needs the
    remainder e^{-s^{3+epsilon}} to be at most half of Q(s_tilde, T); when
    it is not, no bracket is returned.

    Raises:
        DomainError: for s <= 1 or epsilon <= 0.
        DominanceNotEstablished: when the remainder is not dominated.
    """
    if not p.s > 1:
        raise DomainError(f"tail bracket needs s > 1, got {p.s}")
    eps = _positive("epsilon", epsilon)
    s_tilde = p.s + (3.0 + eps) * p.T ** (-1.0 / 3.0) * math.log(p.s)
    upper = q_eval(p.s, p.T) + 1.0
    q_tilde = q_eval(s_tilde, p.T)
    log_remainder = -(p.s ** (3.0 + eps))
    if not log_remainder <= q_tilde - math.log(2.0):
        raise DominanceNotEstablished(
            f"remainder exp(-s^(3+eps)) = exp({log_remainder:.6g}) is not below "
            f"Q(s_tilde, T)/2 = exp({q_tilde - math.log(2.0):.6g}) at s={p.s}, T={p.T}"
        )
    lower = math.log(2.0) + q_tilde
    if lower > upper:
        raise DominanceNotEstablished(
            f"lower bound {lower:.6g} exceeds upper bound {upper:.6g} at s={p.s}, T={p.T}"
        )
    return TailBracket(lower, upper, s_tilde, eps)


def dlogq_dT_asymptotic(p: Params) -> AsymptoticBreakdown:
    """Large-s form of d/dT log Q; the first two terms equal -d/dT (T^2 phi)."""
    s = _positive("s", p.s)
    T = _positive("T", p.T)
    q = q_of(s / T ** (2.0 / 3.0))
    return AsymptoticBreakdown.from_terms(
        q5=-4.0 * T / (45.0 * PI**6) * q**5,
        q4=-T / (9.0 * PI**6) * q**4,
        sqrt_term=(1.0 + q) / (18.0 * T),
    )


def dlogq_ds_asymptotic(p: Params) -> AsymptoticBreakdown:
    """Large-s form of d/ds log Q; the first two terms equal -d/ds (T^2 phi)."""
    s = _positive("s", p.s)
    T = _positive("T", p.T)
    q = q_of(s / T ** (2.0 / 3.0))
    t43 = T ** (4.0 / 3.0)
    return AsymptoticBreakdown.from_terms(
        q3=-2.0 * t43 / (3.0 * PI**4) * q**3,
        q2=-t43 / PI**4 * q**2,
        inv_sqrt=-PI / (12.0 * math.sqrt(s) * T ** (1.0 / 3.0)),
    )
