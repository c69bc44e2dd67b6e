"""Nystrom evaluation of log Q(s, T), log F^TW, and finite-difference slopes.

Both representations reduce to log det(I - M) with the symmetric matrix
M_ij = sqrt(w_i) K(x_i, x_j) sqrt(w_j); they differ only in the kernel and
the quadrature rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .kernels import (
    KernelRep,
    Params,
    finite_temperature_matrix,
    indicator_matrix,
    sigma_weighted_matrix,
)
from .numerics import (
    AlgebraicHalfLine,
    FieldLike,
    NumericField,
    Precision,
    QuadratureRule,
    SymmetricMatrix,
    Truncation,
    as_field,
    density_rule,
    gauss_legendre,
    log_det_one_minus,
    map_rule,
)

MIN_ORDER = 8

# Sigma-weighted window [-s - C_LEFT / T^{1/3}, X_RIGHT]: sigma <= e^{-40}
# to the left, K^Ai(x, x) < 1e-18 to the right.
C_LEFT = 40.0
X_RIGHT = 12.0

# node density for the sigma-weighted rule (see _sigma_density)
_DEEP_CENTER = 10.0
_DEEP_WIDTH = 4.0
_DEEP_FLOOR = 0.05
_STEP_DENSITY = 0.3

# finite-temperature rule: nodes past this decay length carry nothing
FT_DECAY_LENGTH = 50.0
FT_AIRY_CUTOFF = 25.0

TW_WINDOW = 14.0


@dataclass(frozen=True)
class FredholmResult:
    log_det: float
    order: int
    rep: KernelRep | str
    error_estimate: float
    precision_mode: Precision


def _check_order(order) -> int:
    if int(order) != order or order < MIN_ORDER:
        raise DomainError(f"order must be an integer >= {MIN_ORDER}, got {order}")
    return int(order)


def _softplus(y, fld: NumericField):
    return np.maximum(y, 0) + fld.log1p(fld.exp(-np.abs(y)))


def _sigma_density(p: Params, fld: NumericField):
    """Node density tracking Airy oscillation and the Fermi step.

    Where sigma is tiny (deep left of -s) the density drops to a floor, so
    nodes go where the weighted kernel actually lives.
    """
    tau = p.tau
    s = fld.scalar(p.s)

    def rho(x):
        freq = fld.sqrt(1 + _softplus(-x, fld))
        z = -tau * (x + s)
        live = 1 / (1 + fld.exp((z - _DEEP_CENTER) / _DEEP_WIDTH))
        return freq * (live + _DEEP_FLOOR) + _STEP_DENSITY * tau

    return rho


def sigma_weighted_rule(p: Params, order: int, precision: FieldLike = None) -> QuadratureRule:
    """Trapezoid rule on the truncated line, equispaced in a phase variable."""
    fld = as_field(precision)
    a = -p.s - C_LEFT / p.tau
    b = X_RIGHT
    if not a < b:
        # sigma is below e^{-40} on all of (-inf, 12]: nothing to resolve
        a = b - 1.0
    return density_rule(_sigma_density(p, fld), a, b, order, fld, label="sigma-weighted")


def finite_temperature_x_rule(p: Params, order: int, precision: FieldLike = None) -> QuadratureRule:
    """Algebraic half-line rule on (-s, inf), trimmed where K_T is negligible."""
    fld = as_field(precision)
    base = map_rule(gauss_legendre(order, fld), AlgebraicHalfLine(-p.s, max(5.0, p.s)))
    cutoff = min(FT_DECAY_LENGTH / p.tau, FT_AIRY_CUTOFF)
    keep = np.asarray(base.nodes, dtype=float) <= max(cutoff, -p.s)
    return QuadratureRule(base.nodes[keep], base.weights[keep], base.domain)


def tracy_widom_rule(x: float, order: int, precision: FieldLike = None) -> QuadratureRule:
    fld = as_field(precision)
    return map_rule(gauss_legendre(order, fld), Truncation(x, max(x, 0.0) + TW_WINDOW - x))


def _matrix(p: Params, rep: KernelRep, order: int, fld: NumericField):
    if rep is KernelRep.SIGMA_WEIGHTED:
        return sigma_weighted_matrix(sigma_weighted_rule(p, order, fld), p, fld)
    rule = finite_temperature_x_rule(p, order, fld)
    if len(rule) == 0:
        return None
    return finite_temperature_matrix(rule, p, precision=fld)


def _log_det(p: Params, rep: KernelRep, order: int, fld: NumericField) -> float:
    m = _matrix(p, rep, order, fld)
    if m is None:
        return 0.0
    return log_det_one_minus(SymmetricMatrix(m), fld)


def log_q(
    p: Params,
    rep: KernelRep | str = KernelRep.SIGMA_WEIGHTED,
    order: int = 80,
    precision: FieldLike = None,
) -> FredholmResult:
    """log Q(s, T) by Nystrom discretization of either representation.

    The error estimate is |value(order) - value(order // 2)|.

    Raises:
        SpectrumOutOfRange: when an eigenvalue reaches the guard band; the
            caller should retry in extended precision.
        TruncationTooTight: when the finite-temperature r-integral cannot be
            closed within the Airy range.
    """
    order = _check_order(order)
    rep = KernelRep(rep)
    fld = as_field(precision)
    value = _log_det(p, rep, order, fld)
    coarse = _log_det(p, rep, max(MIN_ORDER // 2, order // 2), fld)
    return FredholmResult(value, order, rep, abs(value - coarse), fld.precision_mode)


def tracy_widom_log_cdf(x: float, order: int = 80, precision: FieldLike = None) -> float:
    """log F^TW(x) = log det(I - K^Ai) on (x, inf)."""
    order = _check_order(order)
    fld = as_field(precision)
    m = indicator_matrix(tracy_widom_rule(float(x), order, fld), fld)
    return log_det_one_minus(SymmetricMatrix(m), fld)


def default_step(s: float) -> float:
    """Finite-difference step max(1e-3, 1e-2 sqrt|s|)."""
    return max(1e-3, 1e-2 * math.sqrt(abs(s)))


def _check_step(h) -> float:
    if h is None:
        return None
    if not (math.isfinite(h) and h > 0):
        raise DomainError(f"step h must be positive, got {h}")
    return float(h)


def dlog_q_ds(
    p: Params,
    h: float | None = None,
    rep: KernelRep | str = KernelRep.SIGMA_WEIGHTED,
    order: int = 80,
    precision: FieldLike = None,
) -> float:
    """Central difference of log Q in s."""
    h = _check_step(h) or default_step(p.s)
    hi = log_q(Params(p.s + h, p.T), rep, order, precision).log_det
    lo = log_q(Params(p.s - h, p.T), rep, order, precision).log_det
    return (hi - lo) / (2 * h)


def dlog_q_dT(
    p: Params,
    h: float | None = None,
    rep: KernelRep | str = KernelRep.SIGMA_WEIGHTED,
    order: int = 80,
    precision: FieldLike = None,
) -> float:
    """Central difference of log Q in T. The step must stay below T."""
    h = _check_step(h) or default_step(p.s)
    if h >= p.T:
        raise DomainError(f"step h={h} would push T={p.T} to a non-positive value")
    hi = log_q(Params(p.s, p.T + h), rep, order, precision).log_det
    lo = log_q(Params(p.s, p.T - h), rep, order, precision).log_det
    return (hi - lo) / (2 * h)


@dataclass(frozen=True)
class ScanRow:
    order: int
    log_det: float
    error_estimate: float


def convergence_scan(
    p: Params,
    rep: KernelRep | str = KernelRep.SIGMA_WEIGHTED,
    orders: Sequence[int] = (20, 40, 80),
    precision: FieldLike = None,
) -> list[ScanRow]:
    """log Q at each order; orders must be strictly ascending."""
    orders = [_check_order(n) for n in orders]
    if not orders:
        raise DomainError("convergence scan needs at least one order")
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise DomainError(f"orders must be strictly ascending without duplicates: {orders}")
    rows = []
    for n in orders:
        r = log_q(p, rep, n, precision)
        rows.append(ScanRow(n, r.log_det, r.error_estimate))
    return rows
