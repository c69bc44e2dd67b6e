"""Command-line front end: every computation as a CSV or JSON table.

Exit status: 0 on success, 2 for invalid input (one-line reason on stderr),
3 for a numerical failure (failure class name on stderr). Output is
buffered, so a failed run never leaves a partial row behind.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np

from . import asymptotics as asy
from .equilibrium import lambda0_asymptotic, psi, solve_lambda0, w_at
from .errors import DomainError, KpzTailError, SpectrumOutOfRange
from .fredholm import convergence_scan, dlog_q_dT, dlog_q_ds, log_q, tracy_widom_log_cdf
from .kernels import KernelRep, Params
from .numerics import Precision

COMMANDS = ("q", "tw", "endpoint", "density", "asym", "compare", "scan", "tail")
REPS = {"sigma": (KernelRep.SIGMA_WEIGHTED,), "finite-t": (KernelRep.FINITE_TEMPERATURE,),
        "both": (KernelRep.SIGMA_WEIGHTED, KernelRep.FINITE_TEMPERATURE)}
THREADS_ENV = "KPZTAIL_THREADS"


class ValidationError(Exception):
    """Malformed or inconsistent command-line input."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    s: float | None = None
    T: float | None = None
    order: int = 80
    rep: str = "sigma"
    precision: str = "standard"
    grid: tuple[float, float, int] | None = None
    epsilon: float = 0.1
    output_format: str = "csv"
    h: float | None = None


@dataclass
class Table:
    columns: list[str]
    rows: list[list]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _grid(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"grid must be min,max,count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be min,max,count, got {text!r}") from None
    return lo, hi, count


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kpztail", description="Lower-tail determinant and asymptotics toolkit.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--s", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--order", type=int, default=80)
    p.add_argument("--rep", choices=tuple(REPS), default="sigma")
    p.add_argument("--precision", choices=[m.value for m in Precision], default="standard")
    p.add_argument("--grid", type=_grid)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--format", dest="output_format", choices=("csv", "json"), default="csv")
    p.add_argument("--h", type=float)
    return p


# command -> (needs s, needs T, needs grid)
_REQUIRED = {
    "q": (True, True, False),
    "tw": (True, False, False),
    "endpoint": (True, True, False),
    "density": (True, True, True),
    "asym": (True, True, False),
    "compare": (False, True, True),
    "scan": (True, True, True),
    "tail": (True, True, False),
}


# commands where a grid of s values may stand in for --s
_GRID_REPLACES_S = {"tw", "endpoint"}


def validate(cfg: RunConfig) -> RunConfig:
    need_s, need_T, need_grid = _REQUIRED[cfg.command]
    if cfg.command in _GRID_REPLACES_S and cfg.grid is not None:
        need_s = False
    if need_s and cfg.s is None:
        raise ValidationError(f"{cfg.command} requires --s")
    if need_T and cfg.T is None:
        raise ValidationError(f"{cfg.command} requires --T")
    if need_grid and cfg.grid is None:
        raise ValidationError(f"{cfg.command} requires --grid min,max,count")
    for name in ("s", "T", "epsilon", "h"):
        v = getattr(cfg, name)
        if v is not None and not math.isfinite(v):
            raise ValidationError(f"--{name} must be finite")
    if cfg.T is not None and cfg.T <= 0:
        raise ValidationError("--T must be positive")
    if cfg.order < 8:
        raise ValidationError("--order must be at least 8")
    if cfg.epsilon <= 0:
        raise ValidationError("--epsilon must be positive")
    if cfg.h is not None and cfg.h <= 0:
        raise ValidationError("--h must be positive")
    if cfg.grid is not None:
        lo, hi, count = cfg.grid
        if count < 2:
            raise ValidationError("grid count must be at least 2")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError("grid needs finite min < max")
    if cfg.command in ("endpoint", "density", "asym") and cfg.s is not None and cfg.s <= 0:
        raise ValidationError(f"{cfg.command} requires --s > 0")
    if cfg.command == "tail" and cfg.s <= 1:
        raise ValidationError("tail requires --s > 1")
    if cfg.command == "compare" and cfg.grid[0] <= 0:
        raise ValidationError("compare grid must have min > 0")
    if cfg.command == "scan":
        orders = _orders(cfg.grid)
        if len(set(orders)) != len(orders):
            raise ValidationError(f"scan orders {orders} contain duplicates")
        if orders[0] < 8:
            raise ValidationError("scan orders must be at least 8")
    return cfg


def parse_args(argv: Sequence[str]) -> RunConfig:
    ns = build_parser().parse_args(list(argv))
    return validate(RunConfig(**vars(ns)))


def _points(grid) -> list[float]:
    lo, hi, count = grid
    return [float(v) for v in np.linspace(lo, hi, count)]


def _orders(grid) -> list[int]:
    return [int(round(v)) for v in _points(grid)]


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _map(fn: Callable, items: list) -> list:
    """Evaluate points, possibly concurrently; results stay in input order."""
    n = min(_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _with_retry(fn: Callable, precision: str):
    """Run ``fn(precision)``; on a spectrum failure retry once in extended precision."""
    try:
        return fn(precision)
    except SpectrumOutOfRange:
        if precision == Precision.EXTENDED.value:
            raise
        return fn(Precision.EXTENDED.value)


def _cmd_q(cfg: RunConfig) -> Table:
    p = Params(cfg.s, cfg.T)
    cols = ["rep", "log_q", "order", "error_estimate"]
    if cfg.h is not None:
        cols += ["dlog_q_ds", "dlog_q_dT"]
    rows = []
    for rep in REPS[cfg.rep]:
        r = _with_retry(lambda prec: log_q(p, rep, cfg.order, prec), cfg.precision)
        row = [rep.value, r.log_det, r.order, r.error_estimate]
        if cfg.h is not None:
            row.append(_with_retry(lambda prec: dlog_q_ds(p, cfg.h, rep, cfg.order, prec), cfg.precision))
            row.append(_with_retry(lambda prec: dlog_q_dT(p, cfg.h, rep, cfg.order, prec), cfg.precision))
        rows.append(row)
    return Table(cols, rows)


def _cmd_tw(cfg: RunConfig) -> Table:
    def one(s):
        val = _with_retry(lambda prec: tracy_widom_log_cdf(-s, cfg.order, prec), cfg.precision)
        if s > 0:
            tail = asy.tw_tail_expansion(s).total
            return [s, val, tail, val - tail]
        return [s, val, float("nan"), float("nan")]

    pts = _points(cfg.grid) if cfg.grid else [cfg.s]
    return Table(["s", "log_f_tw", "tail_expansion", "delta"], _map(one, pts))


def _cmd_endpoint(cfg: RunConfig) -> Table:
    def one(s):
        p = Params(s, cfg.T)
        eq = solve_lambda0(p)
        asym = lambda0_asymptotic(p)
        scaled = (eq.lambda0 - asym) * s**2.5 * p.tau
        return [eq.lambda0, eq.residual, asym, scaled]

    cols = ["lambda0", "residual", "asymptotic", "scaled_error"]
    if cfg.grid:
        pts = _points(cfg.grid)
        if pts[0] <= 0:
            raise ValidationError("endpoint grid must have min > 0")
        return Table(["s"] + cols, [[s] + row for s, row in zip(pts, _map(one, pts))])
    return Table(cols, [one(cfg.s)])


def _cmd_density(cfg: RunConfig) -> Table:
    eq = solve_lambda0(Params(cfg.s, cfg.T))
    pts = _points(cfg.grid)
    if pts[-1] >= eq.lambda0:
        raise ValidationError(f"density grid must stay below lambda0 = {eq.lambda0:.17g}")

    def one(lam):
        return [lam, psi(lam, eq), w_at(lam, eq), 2.0 * math.sqrt(eq.lambda0 - lam)]

    return Table(["lambda", "psi", "w", "sqrt_bound"], _map(one, pts))


def _cmd_asym(cfg: RunConfig) -> Table:
    p = Params(cfg.s, cfg.T)
    rows = []
    for name, b in (
        ("log_q_asymptotic", asy.log_q_asymptotic(p)),
        ("expansion_fixed_T", asy.log_q_expansion_fixed_T(p)),
        ("dlogq_ds_asymptotic", asy.dlogq_ds_asymptotic(p)),
        ("dlogq_dT_asymptotic", asy.dlogq_dT_asymptotic(p)),
    ):
        rows.extend([name, k, v] for k, v in b.terms.items())
        rows.append([name, "total", b.total])
    rows.append(["naive_estimate", "total", asy.naive_estimate(p)])
    rows.append(["rate_phi", "y", cfg.s / cfg.T ** (2.0 / 3.0)])
    rows.append(["rate_phi", "total", asy.rate_phi(cfg.s / cfg.T ** (2.0 / 3.0))])
    return Table(["formula", "term", "value"], rows)


def _cmd_compare(cfg: RunConfig) -> Table:
    def one(s):
        p = Params(s, cfg.T)
        num = _with_retry(lambda prec: log_q(p, REPS[cfg.rep][0], cfg.order, prec).log_det, cfg.precision)
        exp = asy.log_q_expansion_fixed_T(p).total
        delta = abs(num - exp)
        return [s, num, exp, delta, delta / math.log(s) ** 2 if s != 1 else float("inf")]

    pts = _points(cfg.grid)
    return Table(["s", "log_q_numeric", "expansion_total", "delta", "delta_over_log2s"], _map(one, pts))


def _cmd_scan(cfg: RunConfig) -> Table:
    p = Params(cfg.s, cfg.T)
    orders = _orders(cfg.grid)
    rows = _with_retry(
        lambda prec: convergence_scan(p, REPS[cfg.rep][0], orders, prec), cfg.precision
    )
    return Table(["order", "log_det", "error_estimate"], [[r.order, r.log_det, r.error_estimate] for r in rows])


def _cmd_tail(cfg: RunConfig) -> Table:
    p = Params(cfg.s, cfg.T)
    rep = REPS[cfg.rep][0]

    def numeric(s, T):
        return _with_retry(lambda prec: log_q(Params(s, T), rep, cfg.order, prec).log_det, cfg.precision)

    def closed(s, T):
        return asy.log_q_asymptotic(Params(s, T)).total

    rows = []
    for name, fn in (("asymptotic", closed), ("numeric", numeric)):
        b = asy.kpz_tail_bracket(p, cfg.epsilon, fn)
        rows.append([name, b.lower_A, b.upper_B, b.s_tilde, b.epsilon])
    return Table(["q_eval", "lower_A", "upper_B", "s_tilde", "epsilon"], rows)


_HANDLERS = {
    "q": _cmd_q,
    "tw": _cmd_tw,
    "endpoint": _cmd_endpoint,
    "density": _cmd_density,
    "asym": _cmd_asym,
    "compare": _cmd_compare,
    "scan": _cmd_scan,
    "tail": _cmd_tail,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(table.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in table.rows]
        return "\n".join(lines) + "\n"
    records = []
    for row in table.rows:
        fields = []
        for k, v in zip(table.columns, row):
            if isinstance(v, str):
                val = '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
            else:
                txt = _fmt(v)
                val = "null" if txt in ("nan", "inf", "-inf") else txt
            fields.append(f'"{k}": {val}')
        records.append("  {" + ", ".join(fields) + "}")
    return "[\n" + ",\n".join(records) + "\n]\n" if records else "[]\n"


def run(config: RunConfig, out: TextIO, err: TextIO | None = None) -> int:
    """Execute a validated configuration, writing the table to ``out``."""
    err = err if err is not None else sys.stderr
    try:
        table = _HANDLERS[config.command](config)
        text = render(table, config.output_format)
    except (ValidationError, DomainError) as exc:
        err.write(f"error: {_one_line(exc)}\n")
        return 2
    except KpzTailError as exc:
        err.write(f"{type(exc).__name__}: {_one_line(exc)}\n")
        return 3
    out.write(text)
    return 0


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except ValidationError as exc:
        sys.stderr.write(f"error: {_one_line(exc)}\n")
        return 2
    return run(cfg, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
