"""Equilibrium quantities for the deformed Airy problem.

Notation used throughout, for a point (s, T) with s > 0:

    a = s T^{1/3}           (the Fermi factor enters as sigma(a * lambda))
    c = s^{-1/2} T^{1/3}    (strength of the deformation)

The effective potential is V(lambda) = s^{-3/2} log(1 - sigma(a lambda)), the
endpoint lambda0 solves

    lambda0 - 1 + (2c/pi) int_0^inf sigma(a (lambda0 - v^2)) dv = 0,

and the density psi = 2 sqrt(lambda0 - lambda) w(lambda) is built from the
weight w. All dsigma integrals are taken in u = a xi and truncated to
|u| <= 45, where sigma' < e^{-45}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, NoConvergence, QuadratureFailure
from .kernels import Params
from .numerics import composite_rule, gauss_legendre, graded_breaks

U_CUT = 45.0
_PANEL = 20


def _sigma(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _sigma_hat(u):
    """sigma(u) - 1_{u>0}: odd, exponentially small away from 0."""
    e = np.exp(-np.abs(u))
    return np.sign(u) * (-e / (1.0 + e)) + np.where(u == 0, 0.5, 0.0)


def _dsigma(u):
    """sigma'(u) = 1 / (4 cosh^2(u/2))."""
    e = np.exp(-np.abs(u))
    return e / (1.0 + e) ** 2


def _log_cosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2 * z)) - math.log(2.0)


def _sigma_slope(x, y):
    """Divided difference (sigma(y) - sigma(x)) / (y - x), always positive.

    Uses sigma(y) - sigma(x) = sinh(h) / (2 cosh(x/2) cosh(y/2)), h = (y-x)/2,
    evaluated in log form so it neither cancels nor overflows.
    """
    h = np.abs(y - x) / 2
    small = h < 1
    hs = np.where(small, h, 1.0)
    hb = np.where(small, 1.0, h)
    log_sinhc = np.where(
        small,
        np.log(np.where(hs > 0, np.sinh(hs) / np.where(hs > 0, hs, 1.0), 1.0)),
        hb + np.log(-np.expm1(-2 * hb)) - np.log(2 * hb),
    )
    return np.exp(log_sinhc - math.log(4.0) - _log_cosh(x / 2) - _log_cosh(y / 2))


def _rule_on(breaks, n=_PANEL):
    rule = composite_rule(breaks, n)
    return rule.nodes, rule.weights


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------


def _check_params(p: Params) -> None:
    if not p.s > 0:
        raise DomainError(f"equilibrium quantities need s > 0, got s={p.s}")


def _scales(p: Params):
    tau = p.tau
    return p.s * tau, tau / math.sqrt(p.s)


def potential_v(lam, p: Params):
    """V(lambda) = s^{-3/2} log(1 - sigma(a lambda)) = -s^{-3/2} log(1 + e^{a lambda})."""
    _check_params(p)
    a, _ = _scales(p)
    r = a * np.asarray(lam, dtype=float)
    softplus = np.maximum(r, 0) + np.log1p(np.exp(-np.abs(r)))
    out = -softplus / p.s**1.5
    return float(out) if out.ndim == 0 else out


def potential_v_prime(lam, p: Params):
    """V'(lambda) = -s^{-1/2} T^{1/3} sigma(a lambda)."""
    _check_params(p)
    a, c = _scales(p)
    out = -c * _sigma(a * np.asarray(lam, dtype=float))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# endpoint
# ---------------------------------------------------------------------------


def _t_breaks_from_u(m: float, u_breaks):
    """Map breakpoints in u to t = sqrt(m - u) (u <= m), ascending in t."""
    t = np.sqrt(np.maximum(m - np.asarray(u_breaks, dtype=float), 0.0))
    return np.unique(t)


def _sqrt_kernel_integral(m: float) -> float:
    """J(m) = int_{-inf}^{m} sigma_hat(u) / sqrt(m - u) du.

    With u = m - t^2 this is 2 int sigma_hat(m - t^2) dt, smooth on each
    side of the jump of sigma_hat at u = 0.
    """
    lo = min(-U_CUT, m - U_CUT)
    hi = min(m, U_CUT)
    if hi <= lo:
        return 0.0
    ub = np.unique(np.concatenate([np.arange(math.ceil(lo), math.floor(hi) + 1), [lo, hi]]))
    ub = ub[(ub >= lo) & (ub <= hi)]
    tb = _t_breaks_from_u(m, ub)
    t, w = _rule_on(tb)
    return 2.0 * float(np.sum(w * _sigma_hat(m - t * t)))


def endpoint_defect(lam0: float, p: Params) -> float:
    """Left side of the endpoint equation at a trial lambda0."""
    _check_params(p)
    a, c = _scales(p)
    # int_0^inf sigma(a(lam0 - v^2)) dv = sqrt(lam0_+) + J(a lam0) / (2 sqrt a)
    integral = math.sqrt(max(lam0, 0.0)) + _sqrt_kernel_integral(a * lam0) / (2 * math.sqrt(a))
    return lam0 - 1.0 + 2.0 * c / math.pi * integral


@dataclass(frozen=True)
class EquilibriumData:
    p: Params
    lambda0: float
    residual: float
    w_at_endpoint: float

    @property
    def a(self) -> float:
        return _scales(self.p)[0]

    @property
    def c(self) -> float:
        return _scales(self.p)[1]


def solve_lambda0(
    p: Params,
    tol: float = 1e-12,
    *,
    bracket: tuple[float, float] | None = None,
    max_iter: int = 200,
) -> EquilibriumData:
    """Solve the endpoint equation by bracketed root finding.

    The defect is increasing in lambda0 and positive at 1, so the default
    bracket [-2, 1] is widened to the left until it changes sign.

    Raises:
        DomainError: for s <= 0 or tol <= 0.
        NoConvergence: if the solver exhausts ``max_iter`` or cannot meet
            ``tol`` on the defect.
    """
    _check_params(p)
    if not tol > 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    lo, hi = bracket if bracket is not None else (-2.0, 1.0)
    if not lo < hi:
        raise DomainError(f"invalid bracket ({lo}, {hi})")
    f_lo, f_hi = endpoint_defect(lo, p), endpoint_defect(hi, p)
    widen = 0
    while f_lo > 0 or f_hi < 0:
        widen += 1
        if widen > 60:
            raise NoConvergence(f"no sign change found around ({lo}, {hi})")
        if f_lo > 0:
            lo = hi - 2 * (hi - lo)
            f_lo = endpoint_defect(lo, p)
        if f_hi < 0:
            hi = lo + 2 * (hi - lo)
            f_hi = endpoint_defect(hi, p)
    try:
        root = optimize.brentq(
            endpoint_defect, lo, hi, args=(p,), xtol=1e-16, rtol=4 * np.finfo(float).eps,
            maxiter=max_iter,
        )
    except RuntimeError as exc:
        raise NoConvergence(f"endpoint solve did not converge: {exc}") from exc
    residual = abs(endpoint_defect(root, p))
    if residual > tol:
        raise NoConvergence(f"endpoint residual {residual:.3e} exceeds tolerance {tol:.1e}")
    base = EquilibriumData(p, float(root), residual, float("nan"))
    return EquilibriumData(p, float(root), residual, w_at(root, base))


def lambda0_asymptotic(p: Params) -> float:
    """Closed-form endpoint (T^{2/3}/(pi^2 s)) (sqrt(1 + pi^2 s T^{-2/3}) - 1)^2."""
    _check_params(p)
    y = p.s / p.T ** (2.0 / 3.0)
    z = math.pi**2 * y
    q = z / (math.sqrt(1.0 + z) + 1.0)
    return q * q / z


# ---------------------------------------------------------------------------
# weight w and density psi
# ---------------------------------------------------------------------------


def _geometric(center: float, lo: float, hi: float, near: float = 10.0, ratio: float = 1.5):
    pts = [center + k for k in np.arange(-near, near + 1)]
    d = near
    while center - d > lo or center + d < hi:
        d *= ratio
        pts.extend([center - d, center + d])
    return pts


def w_at(lam: float, eq: EquilibriumData) -> float:
    """w(lambda) = 1 + (c / 2 pi) int_{-inf}^{lambda0} [sigma(a xi) - sigma(a lambda)]
    / (sqrt(lambda0 - xi) (xi - lambda)) dxi.

    With xi = lambda0 - B^2 the integrand becomes a divided difference of
    sigma, which is positive and regular for every real lambda, so no
    principal value is needed and w >= 1 holds term by term. Beyond the
    point where sigma(a xi) < e^{-45} sigma(a lambda) the remaining tail is
    integrated in closed form.
    """
    lam = float(lam)
    if not math.isfinite(lam):
        raise DomainError(f"lambda must be finite, got {lam}")
    a, c = _scales(eq.p)
    lam0 = eq.lambda0
    m = a * lam0
    x = a * lam
    y1 = min(-U_CUT, x - U_CUT)
    if y1 >= m:
        y1 = m - U_CUT
    # breakpoints in y = a xi, mapped to t = sqrt(m - y) (t = sqrt(a) B)
    yb = [y1, m]
    yb += [v for v in np.arange(-U_CUT, U_CUT + 1, 1.0)]
    yb += _geometric(x, y1, m)
    yb += list(U_CUT * 1.5 ** np.arange(0, 60))
    yb = np.asarray(yb, dtype=float)
    yb = yb[(yb >= y1) & (yb <= m)]
    tb = _t_breaks_from_u(m, yb)
    t, wt = _rule_on(tb)
    main = float(np.sum(wt * _sigma_slope(x, m - t * t))) / math.sqrt(a)
    # tail B > B1: sigma(y) ~ 0, integrand sigma(x) / (a (B^2 - A^2))
    b1 = math.sqrt((m - y1) / a)
    a2 = lam0 - lam
    sx = float(_sigma(np.asarray(x)))
    if a2 > 0:
        A = math.sqrt(a2)
        tail = math.atanh(A / b1) / A
    elif a2 < 0:
        kappa = math.sqrt(-a2)
        tail = math.atan(kappa / b1) / kappa
    else:
        tail = 1.0 / b1
    return 1.0 + c * a / math.pi * main + c / math.pi * sx * tail


def psi(lam: float, eq: EquilibriumData) -> float:
    """Density psi(lambda) for lambda < lambda0, from the log-kernel form

        2 sqrt(lambda0 - lambda) + (c/pi) int log[(A + B) / |A - B|] sigma'(u) du

    with A = sqrt(lambda0 - lambda), B = sqrt(lambda0 - u/a). The kernel is
    nonnegative, so psi >= 2A holds for the discretized value as well. The
    logarithmic point u = a lambda and the square-root endpoint u = a lambda0
    get geometrically graded panels.

    Raises:
        DomainError: if lambda >= lambda0.
    """
    lam = float(lam)
    lam0 = eq.lambda0
    if not lam < lam0:
        raise DomainError(f"psi needs lambda < lambda0 = {lam0!r}, got {lam!r}")
    a, c = _scales(eq.p)
    A = math.sqrt(lam0 - lam)
    m = a * lam0
    x = a * lam
    lo, hi = -U_CUT, min(U_CUT, m)
    if not hi > lo:
        return 2.0 * A
    points = [p for p in (x, m) if lo <= p <= hi]
    u, wu = _rule_on(graded_breaks(lo, hi, points, max_width=1.0))
    B = np.sqrt(np.maximum(m - u, 0.0) / a)
    # log((A+B)/|A-B|) with |A - B| = |u - a lambda| / (a (A + B))
    kern = 2.0 * np.log(A + B) - np.log(np.abs(u - x)) + math.log(a)
    return 2.0 * A + c / math.pi * float(np.sum(wu * kern * _dsigma(u)))


def g_combination(lam: float, eq: EquilibriumData, n: int = 24) -> float:
    """2 g(lambda) - V(lambda) + V(lambda0) = 2 int_{lambda0}^{lambda} sqrt(eta - lambda0) w(eta) deta.

    With eta = lambda0 + t^2 the integrand 4 t^2 w(lambda0 + t^2) is smooth;
    panels in t are cut so that a eta moves by at most a few units across
    the Fermi step.

    Raises:
        DomainError: if lambda <= lambda0.
    """
    lam = float(lam)
    lam0 = eq.lambda0
    if not lam > lam0:
        raise DomainError(f"g combination needs lambda > lambda0 = {lam0!r}, got {lam!r}")
    a, _ = _scales(eq.p)
    tmax = math.sqrt(lam - lam0)
    # breakpoints where a*eta crosses the Fermi step region
    etas = [k / a for k in np.arange(-U_CUT, U_CUT + 1, 4.0)]
    tb = [0.0, tmax] + [math.sqrt(e - lam0) for e in etas if lam0 < e < lam]
    tb = np.unique(np.asarray(tb))
    t, wt = _rule_on(tb, n)
    vals = np.array([w_at(lam0 + ti * ti, eq) for ti in t])
    return 4.0 * float(np.sum(wt * t * t * vals))


# ---------------------------------------------------------------------------
# step approximation error
# ---------------------------------------------------------------------------


def step_lemma_error(
    F: Callable[[float], float],
    r: float,
    half_line_integral: float,
    *,
    epsrel: float = 1e-13,
) -> float:
    """|int F(xi) sigma(r xi) dxi - int_0^inf F(xi) dxi| by adaptive quadrature.

    The whole-line integral is split at +-40/r, where sigma(r xi) switches
    between e^{-40} and 1 - e^{-40}, so the adaptive rule sees the step.

    Raises:
        DomainError: if r < 1.
        QuadratureFailure: if the adaptive rule reports a stalled subdivision.
    """
    if not (math.isfinite(r) and r >= 1):
        raise DomainError(f"step sharpness r must be >= 1, got {r}")

    def f(xi):
        return F(xi) * float(_sigma(np.asarray(r * xi)))

    edge = 40.0 / r
    pieces = [(-np.inf, -edge), (-edge, 0.0), (0.0, edge), (edge, np.inf)]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in pieces:
            try:
                val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=epsrel, limit=500)
            except integrate.IntegrationWarning as exc:
                raise QuadratureFailure(f"adaptive quadrature stalled on ({lo}, {hi}): {exc}") from exc
            total += val
    return abs(total - half_line_integral)
