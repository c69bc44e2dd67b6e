"""Airy function Ai, its derivative, and the Airy kernel on the real line.

Evaluation regions:

* ``|x| <= X_SWITCH``: local Taylor expansion about the nearest anchor
  ``x_k = k/2``. Anchor values come from the Maclaurin series summed in
  80-digit arithmetic and the Taylor coefficients follow from Ai'' = x Ai.
* ``x > X_SWITCH``: exponentially decaying asymptotic series, assembled in
  log form so nothing underflows before the true value does.
* ``x < -X_SWITCH``: modulus/phase asymptotic series.

The switch sits at 9.25 in standard precision and at 16.25 in extended
precision, where the truncated asymptotic series is below roundoff.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import RangeExceeded
from .numerics import FieldLike, NumericField, as_field

X_MAX = 200.0
ANCHOR_STEP = 0.5
ANCHOR_LIMIT = 33  # anchors k/2 for |k| <= 33, i.e. [-16.5, 16.5]

_SWITCH = {False: 9.25, True: 16.25}
_TAYLOR_TERMS = {False: 30, True: 48}
_ASYMPTOTIC_TERMS = {False: 26, True: 64}


@dataclass(frozen=True)
class AiryPair:
    ai: object
    ai_prime: object


@functools.lru_cache(maxsize=None)
def _anchor_tables(extended: bool):
    """Taylor coefficient tables b[k, m] of Ai about x_k = k/2."""
    ctx = mpmath.MPContext()
    ctx.dps = 80
    ai0 = 1 / (ctx.cbrt(9) * ctx.gamma(ctx.mpf(2) / 3))
    aip0 = -1 / (ctx.cbrt(3) * ctx.gamma(ctx.mpf(1) / 3))
    nterm = _TAYLOR_TERMS[extended]
    rows = []
    for k in range(-ANCHOR_LIMIT, ANCHOR_LIMIT + 1):
        xk = ctx.mpf(k) * ANCHOR_STEP
        ai, aip = _maclaurin(ctx, xk, ai0, aip0)
        b = [ai, aip]
        for m in range(0, nterm - 2):
            prev = b[m - 1] if m >= 1 else 0
            b.append((xk * b[m] + prev) / ((m + 2) * (m + 1)))
        rows.append(b)
    if extended:
        fld = as_field("extended")
        table = np.array([[fld.ctx.mpf(v) for v in row] for row in rows], dtype=object)
    else:
        table = np.array([[float(v) for v in row] for row in rows], dtype=float)
    table.setflags(write=False)
    return table


def _maclaurin(ctx, x, ai0, aip0):
    """Ai(x), Ai'(x) from a_{n+3} = a_n / ((n+3)(n+2)), summed at high precision."""
    a = [ai0, aip0, ctx.mpf(0)]
    val = ctx.mpf(0)
    der = ctx.mpf(0)
    xp = ctx.mpf(1)  # x**n
    xpm = ctx.mpf(0)  # x**(n-1)
    n = 0
    biggest = ctx.mpf(0)
    while True:
        if n >= 3:
            a.append(a[n - 3] / (n * (n - 1)))
        term = a[n] * xp
        dterm = n * a[n] * xpm
        val += term
        der += dterm
        biggest = max(biggest, abs(term), abs(dterm))
        if n > 10 and abs(term) + abs(dterm) < biggest * ctx.mpf(10) ** -75 and a[n] != 0:
            break
        xpm = xp
        xp = xp * x
        n += 1
    return val, der


@functools.lru_cache(maxsize=None)
def _asymptotic_coefficients(extended: bool):
    """u_k and v_k of the standard Airy asymptotic expansions."""
    ctx = mpmath.MPContext()
    ctx.dps = 50
    n = _ASYMPTOTIC_TERMS[extended] + 2
    u = [ctx.mpf(1)]
    v = [ctx.mpf(1)]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
        v.append(-u[-1] * (6 * k + 1) / (6 * k - 1))
    if extended:
        c = as_field("extended").ctx
        return [c.mpf(x) for x in u], [c.mpf(x) for x in v]
    return [float(x) for x in u], [float(x) for x in v]


def _check_range(x: np.ndarray) -> None:
    xf = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xf)):
        raise RangeExceeded("Airy argument is not finite")
    if xf.size and np.max(np.abs(xf)) > X_MAX:
        raise RangeExceeded(
            f"Airy argument {xf.flat[np.argmax(np.abs(xf))]:.6g} outside [-{X_MAX:g}, {X_MAX:g}]"
        )


def _taylor(x, fld: NumericField):
    table = _anchor_tables(fld.extended)
    xf = np.asarray(x, dtype=float)
    k = np.rint(xf / ANCHOR_STEP).astype(int)
    xk = fld.asarray(k) * fld.scalar(ANCHOR_STEP) if fld.extended else k * ANCHOR_STEP
    h = x - xk
    b = table[k + ANCHOR_LIMIT]
    m = b.shape[1]
    ai = b[:, m - 1]
    aip = (m - 1) * b[:, m - 1]
    for j in range(m - 2, -1, -1):
        ai = ai * h + b[:, j]
        if j >= 1:
            aip = aip * h + j * b[:, j]
    return ai, aip


def _series(coef, inv_zeta, alternate: bool, start: int, step: int, nterm: int):
    """sum_k (+-1)^k coef[start + step k] inv_zeta^(start + step k)."""
    total = 0
    sign = 1
    power = inv_zeta**start if start else 1
    inc = inv_zeta**step
    for k in range(nterm):
        idx = start + step * k
        if idx >= len(coef):
            break
        total = total + sign * coef[idx] * power
        power = power * inc
        if alternate:
            sign = -sign
    return total


def _sqrt_pi(fld: NumericField):
    return fld.ctx.sqrt(fld.ctx.pi) if fld.extended else float(np.sqrt(np.pi))


def _positive(x, fld: NumericField):
    u, v = _asymptotic_coefficients(fld.extended)
    nterm = _ASYMPTOTIC_TERMS[fld.extended]
    root = fld.sqrt(x)
    zeta = 2 * x * root / 3
    inv = 1 / zeta
    su = _series(u, inv, True, 0, 1, nterm)
    sv = _series(v, inv, True, 0, 1, nterm)
    quarter = fld.sqrt(root)
    # log form: exp(-zeta) alone would underflow before the product does
    log_pref = -zeta - fld.log(2 * _sqrt_pi(fld) * quarter)
    ai = fld.exp(log_pref + fld.log(su))
    aip = -fld.exp(log_pref + fld.log(sv)) * root
    return ai, aip


def _negative(x, fld: NumericField):
    u, v = _asymptotic_coefficients(fld.extended)
    nterm = _ASYMPTOTIC_TERMS[fld.extended] // 2
    z = -x
    root = fld.sqrt(z)
    zeta = 2 * z * root / 3
    inv = 1 / zeta
    pi = fld.constant("pi")
    theta = zeta - pi / 4
    c, s = fld.cos(theta), fld.sin(theta)
    p = _series(u, inv, True, 0, 2, nterm)
    q = _series(u, inv, True, 1, 2, nterm)
    r = _series(v, inv, True, 0, 2, nterm)
    t = _series(v, inv, True, 1, 2, nterm)
    quarter = fld.sqrt(root)
    norm = _sqrt_pi(fld)
    ai = (c * p + s * q) / (norm * quarter)
    aip = quarter * (s * r - c * t) / norm
    return ai, aip


def airy_eval(x, precision: FieldLike = None) -> AiryPair:
    """Ai(x) and Ai'(x) for real ``x`` (scalar or array) in [-200, 200].

    Relative accuracy is a few ulp away from the zeros of Ai on the
    negative axis; near a zero the error is relative to the local envelope.

    Raises:
        RangeExceeded: for arguments outside [-200, 200] or non-finite.
    """
    fld = as_field(precision)
    scalar = np.ndim(x) == 0
    xs = fld.asarray(np.atleast_1d(x))
    _check_range(xs)
    xf = np.asarray(xs, dtype=float)
    switch = _SWITCH[fld.extended]
    ai = np.empty(xs.shape, dtype=xs.dtype)
    aip = np.empty(xs.shape, dtype=xs.dtype)
    regions = (
        (np.abs(xf) <= switch, _taylor),
        (xf > switch, _positive),
        (xf < -switch, _negative),
    )
    for mask, fn in regions:
        if np.any(mask):
            a, d = fn(xs[mask], fld)
            ai[mask] = a
            aip[mask] = d
    if scalar:
        return AiryPair(ai[0], aip[0])
    return AiryPair(ai, aip)


def _diagonal_threshold(fld: NumericField) -> float:
    return 1e-10 if fld.extended else 1e-6


def kernel_from_values(u, v, ai_u, aip_u, ai_v, aip_v, precision: FieldLike = None):
    """Airy kernel from precomputed Ai, Ai' values (broadcasting).

    Arguments are put in canonical order u <= v first, so the result is
    bitwise symmetric. Close to the diagonal the divided difference is
    replaced by its Taylor expansion about v = u.
    """
    fld = as_field(precision)
    u, v = np.broadcast_arrays(u, v)
    ai_u, aip_u, ai_v, aip_v = np.broadcast_arrays(ai_u, aip_u, ai_v, aip_v)
    swap = np.asarray(u, dtype=float) > np.asarray(v, dtype=float)
    lo = np.where(swap, v, u)
    hi = np.where(swap, u, v)
    a_lo = np.where(swap, ai_v, ai_u)
    d_lo = np.where(swap, aip_v, aip_u)
    a_hi = np.where(swap, ai_u, ai_v)
    d_hi = np.where(swap, aip_u, aip_v)
    diff = hi - lo
    near = np.asarray(diff, dtype=float) <= _diagonal_threshold(fld) * (
        1 + np.abs(np.asarray(lo, dtype=float))
    )
    out = np.empty(np.shape(diff), dtype=np.result_type(diff, a_lo))
    far = ~near
    if np.any(far):
        out[far] = (a_lo[far] * d_hi[far] - d_lo[far] * a_hi[far]) / (lo[far] - hi[far])
    if np.any(near):
        x, a, d, h = lo[near], a_lo[near], d_lo[near], diff[near]
        diag = d * d - x * a * a
        slope = -a * a / 2
        curv = -(a * d + x * x * a * a - x * d * d) / 6
        out[near] = diag + h * (slope + h * curv)
    return out


def airy_kernel(u, v, precision: FieldLike = None):
    """K^Ai(u, v) = (Ai(u)Ai'(v) - Ai'(u)Ai(v)) / (u - v), with the diagonal limit."""
    fld = as_field(precision)
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    pu = airy_eval(np.atleast_1d(u), fld)
    pv = airy_eval(np.atleast_1d(v), fld)
    uu = fld.asarray(np.atleast_1d(u))
    vv = fld.asarray(np.atleast_1d(v))
    out = kernel_from_values(uu, vv, pu.ai, pu.ai_prime, pv.ai, pv.ai_prime, fld)
    return out.reshape(()).item() if scalar else out


def airy_kernel_diagonal(u, precision: FieldLike = None):
    """K^Ai(u, u) = Ai'(u)^2 - u Ai(u)^2."""
    fld = as_field(precision)
    p = airy_eval(u, fld)
    uu = fld.asarray(u) if np.ndim(u) else (fld.scalar(u))
    return p.ai_prime * p.ai_prime - uu * p.ai * p.ai
