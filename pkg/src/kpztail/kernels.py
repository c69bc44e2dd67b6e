"""Fermi factor and the deformed Airy kernels whose determinants give Q(s, T).

Two determinant-equivalent kernels are provided:

* sigma-weighted: sqrt(sigma) K^Ai sqrt(sigma) on the whole line, with
  sigma evaluated at T^{1/3}(x + s);
* finite-temperature: K_T(u, v) = int sigma(T^{1/3} r) Ai(u + r) Ai(v + r) dr
  on (-s, inf).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .airy import X_MAX, airy_eval, airy_kernel, kernel_from_values
from .errors import DomainError, TruncationTooTight
from .numerics import (
    FieldLike,
    NumericField,
    QuadratureRule,
    as_field,
    composite_rule,
)

# sigma(-T^{1/3} R) <= e^{-37} ~ 1e-16 closes the r-integral
FT_DECAY_EXPONENT = 37.0
FT_PANEL_NODES = 16


@dataclass(frozen=True)
class Params:
    """Evaluation point (s, T) with T > 0."""

    s: float
    T: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise DomainError(f"s must be finite, got {self.s}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise DomainError(f"T must be positive and finite, got {self.T}")

    @property
    def tau(self) -> float:
        """T^{1/3}, the inverse width of the Fermi step."""
        return self.T ** (1.0 / 3.0)


class KernelRep(str, enum.Enum):
    SIGMA_WEIGHTED = "sigma"
    FINITE_TEMPERATURE = "finite-t"


def fermi(r, precision: FieldLike = None):
    """sigma(r) = 1 / (1 + e^{-r}), branching on sign(r) so nothing overflows."""
    fld = as_field(precision)
    if not fld.extended:
        r = np.asarray(r, dtype=float)
        e = np.exp(-np.abs(r))
        out = np.where(r >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return float(out) if out.ndim == 0 else out
    r = fld.asarray(r)
    e = fld.exp(-np.abs(r))
    pos = np.asarray(r, dtype=float) >= 0
    out = np.where(pos, 1 / (1 + e), e / (1 + e))
    return out if np.ndim(r) else out.item()


def log_fermi(r, precision: FieldLike = None):
    """log sigma(r) = -log(1 + e^{-r}), stable for either sign."""
    fld = as_field(precision)
    r = fld.asarray(r)
    neg = np.minimum(r, 0) if isinstance(r, np.ndarray) else min(r, 0)
    return neg - fld.log1p(fld.exp(-np.abs(r)))


def _sqrt_fermi(r, fld: NumericField):
    return fld.exp(log_fermi(r, fld) / 2)


def sigma_weighted_kernel(x, y, p: Params, precision: FieldLike = None):
    """sqrt(sigma(tau(x+s))) K^Ai(x, y) sqrt(sigma(tau(y+s))), tau = T^{1/3}."""
    fld = as_field(precision)
    k = airy_kernel(x, y, fld)
    tau = fld.scalar(p.tau)
    s = fld.scalar(p.s)
    # multiply the two weights first so swapping x and y is bitwise neutral
    weight = _sqrt_fermi(tau * (fld.asarray(x) + s), fld) * _sqrt_fermi(tau * (fld.asarray(y) + s), fld)
    return k * weight


def indicator_kernel(x, y, s: float, precision: FieldLike = None):
    """K^Ai(x, y), the kernel of F^TW(-s) on (-s, inf)."""
    return airy_kernel(x, y, precision)


def sigma_weighted_matrix(rule: QuadratureRule, p: Params, precision: FieldLike = None):
    """Nystrom matrix sqrt(w_i sigma_i) K^Ai(x_i, x_j) sqrt(w_j sigma_j)."""
    fld = as_field(precision)
    x = rule.nodes
    ai = airy_eval(x, fld)
    k = kernel_from_values(
        x[:, None], x[None, :], ai.ai[:, None], ai.ai_prime[:, None],
        ai.ai[None, :], ai.ai_prime[None, :], fld,
    )
    tau = fld.scalar(p.tau)
    d = fld.sqrt(rule.weights) * _sqrt_fermi(tau * (x + fld.scalar(p.s)), fld)
    return k * (d[:, None] * d[None, :])


def indicator_matrix(rule: QuadratureRule, precision: FieldLike = None):
    """Nystrom matrix sqrt(w_i) K^Ai(x_i, x_j) sqrt(w_j)."""
    fld = as_field(precision)
    x = rule.nodes
    ai = airy_eval(x, fld)
    k = kernel_from_values(
        x[:, None], x[None, :], ai.ai[:, None], ai.ai_prime[:, None],
        ai.ai[None, :], ai.ai_prime[None, :], fld,
    )
    d = fld.sqrt(rule.weights)
    return k * (d[:, None] * d[None, :])


# ---------------------------------------------------------------------------
# finite-temperature kernel
# ---------------------------------------------------------------------------


def ft_truncation(p: Params, tol: float = 1e-16) -> float:
    """Cutoff R with sigma(-T^{1/3} R) <= tol."""
    if not 0 < tol < 1:
        raise DomainError(f"truncation tolerance must lie in (0, 1), got {tol}")
    return max(FT_DECAY_EXPONENT, math.log(1 / tol)) / p.tau


def finite_temperature_rule(
    p: Params, u_min: float, precision: FieldLike = None, *, tol: float = 1e-16
) -> QuadratureRule:
    """Composite Gauss-Legendre rule on [0, R] for the r-integral of K_T.

    The panel width resolves both the Fermi factor (width T^{-1/3}) and the
    fastest Airy oscillation, Ai(u - R) at the most negative argument.
    """
    R = ft_truncation(p, tol)
    reach = max(0.0, -u_min) + R
    if reach > X_MAX:
        raise TruncationTooTight(
            f"r-integral needs Ai at {-reach:.4g}, beyond the supported Airy range"
        )
    width = min(1.0, 1.5 / p.tau, 8.0 / (2.0 * math.sqrt(reach) + 1.0))
    npanel = max(1, math.ceil(R / width))
    breaks = np.linspace(0.0, R, npanel + 1)
    return composite_rule(breaks, FT_PANEL_NODES, precision)


def _check_ft_rule(rule: QuadratureRule, p: Params, tol: float) -> None:
    extent = float(np.max(np.asarray(rule.nodes, dtype=float)))
    needed = math.log(1 / tol) / p.tau
    # a Gauss rule never reaches its right end; allow one panel of slack
    if extent < 0.9 * needed:
        raise TruncationTooTight(
            f"r-rule reaches {extent:.4g}, tolerance {tol:g} needs about {needed:.4g}"
        )


def finite_temperature_matrix(
    rule: QuadratureRule,
    p: Params,
    r_rule: QuadratureRule | None = None,
    precision: FieldLike = None,
    *,
    tol: float = 1e-16,
):
    """Nystrom matrix sqrt(w_i) K_T(x_i, x_j) sqrt(w_j).

    Uses K_T = K^Ai + int_0^R sigma(-tau t) [Ai(u-t)Ai(v-t) - Ai(u+t)Ai(v+t)] dt,
    obtained by splitting the r-integral at 0 and writing sigma = 1 - sigma(-.)
    on the positive half. The correction is a pair of Gram products.
    """
    fld = as_field(precision)
    x = rule.nodes
    if r_rule is None:
        r_rule = finite_temperature_rule(p, float(np.min(np.asarray(x, dtype=float))), fld, tol=tol)
    _check_ft_rule(r_rule, p, tol)
    t = r_rule.nodes
    wt = r_rule.weights * fermi(-fld.scalar(p.tau) * t, fld)
    base = indicator_matrix(rule, fld)
    sw = fld.sqrt(rule.weights)
    plus_arg = x[:, None] + t[None, :]
    # Ai beyond the supported range is far below underflow
    over = np.asarray(plus_arg, dtype=float) > X_MAX
    a_plus = airy_eval(np.where(over, fld.scalar(X_MAX), plus_arg), fld).ai
    a_plus[over] = 0
    a_plus = a_plus * sw[:, None]
    a_minus = airy_eval(x[:, None] - t[None, :], fld).ai * sw[:, None]
    corr = (a_minus * wt[None, :]) @ a_minus.T - (a_plus * wt[None, :]) @ a_plus.T
    # blocked Gram products are symmetric only to roundoff
    return base + (corr + corr.T) / 2


def finite_temperature_kernel(
    u, v, p: Params, rule: QuadratureRule | None = None, precision: FieldLike = None,
    *, tol: float = 1e-16,
):
    """K_T(u, v) = int sigma(T^{1/3} r) Ai(u + r) Ai(v + r) dr.

    Args:
        u, v: kernel arguments (scalars).
        p: evaluation point; only T enters.
        rule: quadrature on [0, R] for the correction integral; built from
            ``tol`` when omitted.

    Raises:
        TruncationTooTight: if ``rule`` stops short of the cutoff required by
            ``tol`` or the cutoff leaves the Airy range.
    """
    fld = as_field(precision)
    if rule is None:
        rule = finite_temperature_rule(p, min(float(u), float(v)), fld, tol=tol)
    _check_ft_rule(rule, p, tol)
    t = rule.nodes
    wt = rule.weights * fermi(-fld.scalar(p.tau) * t, fld)
    uu, vv = fld.scalar(u), fld.scalar(v)
    # canonical order keeps the value bitwise symmetric
    if float(uu) > float(vv):
        uu, vv = vv, uu
    am_u = airy_eval(uu - t, fld).ai
    am_v = airy_eval(vv - t, fld).ai
    ap_u = airy_eval(np.minimum(uu + t, X_MAX), fld).ai
    ap_v = airy_eval(np.minimum(vv + t, X_MAX), fld).ai
    corr = np.sum(wt * (am_u * am_v - ap_u * ap_v))
    return airy_kernel(uu, vv, fld) + corr
