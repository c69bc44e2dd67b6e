"""Precision-aware scalar plumbing, quadrature rules and log det(I - M).

Two arithmetic backends sit behind :class:`NumericField`:

* ``standard``: IEEE double, numpy float64 arrays.
* ``extended``: 106-bit binary floats (double-double width) carried as
  numpy object arrays of ``mpmath.mpf``.

Everything in this module accepts either kind of array, so the kernel
assembly code above it is written once.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import mpmath
import numpy as np

from .errors import SpectrumOutOfRange

EXTENDED_BITS = 106


class Precision(str, enum.Enum):
    STANDARD = "standard"
    EXTENDED = "extended"


@functools.lru_cache(maxsize=None)
def _extended_context() -> mpmath.MPContext:
    # A private context: the global mpmath.mp precision is never touched.
    ctx = mpmath.MPContext()
    ctx.prec = EXTENDED_BITS
    return ctx


@dataclass(frozen=True)
class NumericField:
    """Arithmetic backend selected by a precision mode."""

    precision_mode: Precision = Precision.STANDARD

    @property
    def extended(self) -> bool:
        return self.precision_mode is Precision.EXTENDED

    @property
    def unit_roundoff(self) -> float:
        return 2.0**-53 if not self.extended else 2.0**-EXTENDED_BITS

    @property
    def ctx(self) -> mpmath.MPContext | None:
        return _extended_context() if self.extended else None

    def guard(self, order: int) -> float:
        """Spectrum guard tolerance: 8 x unit roundoff x matrix order."""
        return 8.0 * self.unit_roundoff * order

    # -- element-wise helpers -------------------------------------------
    def asarray(self, values) -> np.ndarray:
        if not self.extended:
            return np.asarray(values, dtype=float)
        arr = np.asarray(values, dtype=object)
        mpf = self.ctx.mpf
        return np.frompyfunc(lambda v: mpf(v), 1, 1)(arr) if arr.ndim else mpf(arr.item())

    def scalar(self, value):
        return float(value) if not self.extended else self.ctx.mpf(value)

    def constant(self, name: str):
        if not self.extended:
            return {"pi": math.pi, "e": math.e}[name]
        return getattr(self.ctx, name)

    def _apply(self, name: str, x):
        if not self.extended:
            return getattr(np, name)(x)
        fn = getattr(self.ctx, name)
        if isinstance(x, np.ndarray):
            return np.frompyfunc(fn, 1, 1)(x)
        return fn(x)

    def exp(self, x):
        return self._apply("exp", x)

    def expm1(self, x):
        return self._apply("expm1", x)

    def log(self, x):
        return self._apply("log", x)

    def log1p(self, x):
        if not self.extended:
            return np.log1p(x)
        return self._apply("log1p", x)

    def sqrt(self, x):
        return self._apply("sqrt", x)

    def cos(self, x):
        return self._apply("cos", x)

    def sin(self, x):
        return self._apply("sin", x)

    def tofloat(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)


STANDARD = NumericField(Precision.STANDARD)
EXTENDED = NumericField(Precision.EXTENDED)

FieldLike = Union[NumericField, Precision, str, None]


def as_field(precision: FieldLike = None) -> NumericField:
    """Normalise a precision argument (mode name, enum or field) to a field."""
    if precision is None:
        return STANDARD
    if isinstance(precision, NumericField):
        return precision
    return EXTENDED if Precision(precision) is Precision.EXTENDED else STANDARD


# ---------------------------------------------------------------------------
# Domain descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Affine:
    """Affine image of [-1, 1] on the finite interval [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"degenerate interval [{self.a}, {self.b}]")


@dataclass(frozen=True)
class AlgebraicHalfLine:
    """Half line [a, inf) via t -> a + L (1 + t) / (1 - t)."""

    a: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"half-line scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class Truncation:
    """Window [a, a + W] standing in for a half line."""

    a: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"truncation width must be positive, got {self.width}")


@dataclass(frozen=True)
class Piecewise:
    """Composite rule over consecutive panels."""

    breaks: tuple


@dataclass(frozen=True)
class DensityMap:
    """Trapezoid rule in the variable u = integral of a node density."""

    a: float
    b: float
    label: str = ""


DomainMap = Union[Affine, AlgebraicHalfLine, Truncation]


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    domain: object = field(default_factory=lambda: Affine(-1.0, 1.0))

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("nodes and weights differ in length")
        if len(self.nodes) and not np.all(np.asarray(self.weights, dtype=float) > 0):
            raise ValueError("quadrature weights must be positive")

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]):
        return np.sum(self.weights * f(self.nodes))


# ---------------------------------------------------------------------------
# Gauss-Legendre
# ---------------------------------------------------------------------------


def _legendre_with_derivative(n: int, x):
    p_prev, p = 1, x
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    dp = n * (x * p - p_prev) / (x * x - 1)
    return p, dp


@functools.lru_cache(maxsize=64)
def _gauss_legendre_cached(n: int, mode: Precision):
    fld = as_field(mode)
    if n == 1:
        return fld.asarray([0.0]), fld.asarray([2.0])
    m = (n + 1) // 2
    i = np.arange(1, m + 1)
    # Tricomi's asymptotic initial guess for the positive roots, descending.
    theta = np.pi * (4 * i - 1) / (4 * n + 2)
    x = np.cos(theta) * (1 - (n - 1) / (8.0 * n**3))
    for _ in range(100):
        p, dp = _legendre_with_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    if fld.extended:
        x = fld.asarray(x)
        tol = fld.scalar(2) ** -(EXTENDED_BITS + 2)
        for _ in range(8):
            p, dp = _legendre_with_derivative(n, x)
            dx = p / dp
            x = x - dx
            if max(abs(v) for v in dx) < tol:
                break
    _, dp = _legendre_with_derivative(n, x)
    w = 2 / ((1 - x * x) * dp * dp)
    half = x[::-1]  # ascending positive half (includes 0 when n is odd)
    whalf = w[::-1]
    if n % 2:
        half[0] = fld.scalar(0)
        nodes = np.concatenate([-half[:0:-1], half])
        weights = np.concatenate([whalf[:0:-1], whalf])
    else:
        nodes = np.concatenate([-half[::-1], half])
        weights = np.concatenate([whalf[::-1], whalf])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n: int, precision: FieldLike = None) -> QuadratureRule:
    """Gauss-Legendre rule with ``n`` nodes on [-1, 1].

    Nodes come from Newton iteration on the three-term recurrence and are
    symmetric about zero by construction.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"Gauss-Legendre order must be a positive integer, got {n}")
    fld = as_field(precision)
    nodes, weights = _gauss_legendre_cached(int(n), fld.precision_mode)
    return QuadratureRule(nodes, weights, Affine(-1.0, 1.0))


def map_rule(rule: QuadratureRule, domain: DomainMap) -> QuadratureRule:
    """Push a rule on [-1, 1] onto another domain; weights carry the Jacobian."""
    t, w = rule.nodes, rule.weights
    if isinstance(domain, Truncation):
        affine = Affine(domain.a, domain.a + domain.width)
        mapped = map_rule(rule, affine)
        return QuadratureRule(mapped.nodes, mapped.weights, domain)
    if isinstance(domain, Affine):
        half = (domain.b - domain.a) / 2
        return QuadratureRule(domain.a + half * (t + 1), w * half, domain)
    if isinstance(domain, AlgebraicHalfLine):
        L = domain.scale
        x = domain.a + L * (1 + t) / (1 - t)
        return QuadratureRule(x, w * 2 * L / ((1 - t) * (1 - t)), domain)
    raise TypeError(f"unsupported domain map {domain!r}")


def composite_rule(
    breaks: Sequence[float], n: int, precision: FieldLike = None
) -> QuadratureRule:
    """Gauss-Legendre with ``n`` nodes on every panel between ``breaks``."""
    fld = as_field(precision)
    ref = gauss_legendre(n, fld)
    bs = [fld.scalar(b) for b in breaks]
    nodes, weights = [], []
    for a, b in zip(bs[:-1], bs[1:]):
        if not b > a:
            continue
        panel = map_rule(ref, Affine(a, b))
        nodes.append(panel.nodes)
        weights.append(panel.weights)
    return QuadratureRule(
        np.concatenate(nodes), np.concatenate(weights), Piecewise(tuple(map(float, breaks)))
    )


def graded_breaks(
    a: float,
    b: float,
    points: Sequence[float] = (),
    *,
    max_width: float = 1.0,
    ratio: float = 0.15,
    levels: int = 14,
) -> list:
    """Panel breakpoints on [a, b], geometrically refined toward ``points``.

    Refinement toward an endpoint singularity of algebraic or logarithmic
    type gives exponential convergence of composite Gauss-Legendre.
    """
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    inner = sorted({float(p) for p in points if a < p < b})
    graded = {float(p) for p in points if a <= p <= b}
    coarse = [a] + inner + [b]
    out = [a]
    for lo, hi in zip(coarse[:-1], coarse[1:]):
        width = hi - lo
        left = lo in graded
        right = hi in graded
        segs = [lo, hi]
        if left and right:
            mid = lo + width / 2
            segs = _grade(lo, mid, ratio, levels, True) + _grade(mid, hi, ratio, levels, False)[1:]
        elif left:
            segs = _grade(lo, hi, ratio, levels, True)
        elif right:
            segs = _grade(lo, hi, ratio, levels, False)
        for x0, x1 in zip(segs[:-1], segs[1:]):
            k = max(1, int(math.ceil((x1 - x0) / max_width)))
            out.extend(x0 + (x1 - x0) * (j + 1) / k for j in range(k))
        out[-1] = hi
    return out


def _grade(lo, hi, ratio, levels, toward_left):
    width = hi - lo
    # panels narrower than a few thousand ulps would put nodes on the singular point
    tiny = 2.0**-40 * max(1.0, abs(lo), abs(hi))
    offs = [d for d in (width * ratio**k for k in range(levels, 0, -1)) if d > tiny]
    if toward_left:
        return [lo] + [lo + d for d in offs] + [hi]
    return [lo] + [hi - d for d in reversed(offs)] + [hi]


def density_rule(
    rho: Callable,
    a: float,
    b: float,
    n: int,
    precision: FieldLike = None,
    *,
    label: str = "",
) -> QuadratureRule:
    """Trapezoid rule with ``n`` nodes equispaced in u = integral_a^x rho.

    ``rho`` is a positive, smooth node density (nodes per unit length). The
    map x(u) is inverted by Newton iteration with the cumulative integral
    taken by panel Gauss-Legendre, so nodes and weights are consistent to
    working precision. The integrand must vanish smoothly at both ends.
    """
    if n < 3:
        raise ValueError("density rule needs at least three nodes")
    fld = as_field(precision)
    ref = gauss_legendre(20, fld)
    t, wt = ref.nodes, ref.weights

    def integral(lo, hi):
        half = (hi - lo) / 2
        pts = lo[:, None] + half[:, None] * (t[None, :] + 1)
        return half * np.sum(wt[None, :] * rho(pts), axis=1)

    npanel = max(1, int(math.ceil((b - a) / 0.5)))
    xb = fld.asarray(np.linspace(a, b, npanel + 1))
    xb[0], xb[-1] = fld.scalar(a), fld.scalar(b)
    cum = np.concatenate([fld.asarray([0.0]), np.cumsum(integral(xb[:-1], xb[1:]))])
    total = cum[-1]
    h = total / (n - 1)
    targets = fld.asarray(np.arange(1, n - 1)) * h
    cumf = np.asarray(cum, dtype=float)
    j = np.clip(np.searchsorted(cumf, np.asarray(targets, dtype=float)) - 1, 0, npanel - 1)
    lo, hi, base = xb[j], xb[j + 1], cum[j]
    x = lo + (targets - base) / rho(lo)
    x = np.minimum(np.maximum(x, lo), hi)
    tol = 16 * fld.unit_roundoff
    for _ in range(60):
        dx = (base + integral(lo, x) - targets) / rho(x)
        x = np.minimum(np.maximum(x - dx, lo), hi)
        if float(np.max(np.abs(np.asarray(dx, dtype=float)))) <= tol * (1 + abs(a) + abs(b)):
            break
    nodes = np.concatenate([fld.asarray([a]), x, fld.asarray([b])])
    weights = h / rho(nodes)
    weights[0] = weights[0] / 2
    weights[-1] = weights[-1] / 2
    return QuadratureRule(nodes, weights, DensityMap(float(a), float(b), label))


# ---------------------------------------------------------------------------
# Symmetric matrices and log det(I - M)
# ---------------------------------------------------------------------------


class SymmetricMatrix:
    """Dense symmetric matrix; only the lower triangle of the input is read."""

    __slots__ = ("_entries",)

    def __init__(self, entries):
        a = np.array(entries, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        lower = np.tril(a)
        full = lower + np.tril(a, -1).T
        full.setflags(write=False)
        self._entries = full

    @property
    def order(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    def __getitem__(self, idx):
        return self._entries[idx]

    def __repr__(self) -> str:
        return f"SymmetricMatrix(order={self.order}, dtype={self._entries.dtype})"


def eigenvalues(m: SymmetricMatrix, precision: FieldLike = None) -> np.ndarray:
    """Ascending eigenvalues (float array in standard mode, mpf in extended)."""
    fld = as_field(precision)
    if not fld.extended:
        return np.linalg.eigvalsh(np.asarray(m.entries, dtype=float))
    ctx = fld.ctx
    mat = ctx.matrix([[ctx.mpf(v) for v in row] for row in m.entries])
    ev = ctx.eigsy(mat, eigvals_only=True)
    return np.array(sorted(ev[i] for i in range(m.order)), dtype=object)


def log_det_one_minus(m: SymmetricMatrix, precision: FieldLike = None) -> float:
    """Return log det(I - m) = sum log(1 - mu_i) over the eigenvalues of ``m``.

    Raises:
        SpectrumOutOfRange: if an eigenvalue is >= 1 - guard or < -guard,
            with guard = 8 x unit roundoff x order.
    """
    fld = as_field(precision)
    mu = eigenvalues(m, fld)
    guard = fld.guard(m.order)
    top, bottom = mu[-1], mu[0]
    if top >= 1 - guard or bottom < -guard:
        raise SpectrumOutOfRange(
            f"eigenvalues span [{float(bottom):.3e}, {float(top):.17g}] "
            f"(guard {guard:.1e}, {fld.precision_mode.value} precision, order {m.order})"
        )
    if not fld.extended:
        return float(np.sum(np.log1p(-mu)))
    ctx = fld.ctx
    return float(ctx.fsum(ctx.log1p(-v) for v in mu))
