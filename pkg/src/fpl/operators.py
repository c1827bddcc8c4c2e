"""Scalar self-maps on closed intervals, grid certification of contraction
constants, and a bisection oracle for fixed points.

Certificates are numerical evidence gathered on a uniform grid, not proofs.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .expr import CompiledExpression

SELF_MAP_SLACK = 1e-12
CERTIFY_TOL = 1e-12
DEFAULT_GRID_POINTS = 100001

# rows of the pair matrix evaluated at once by the O(N^2) route
_PAIR_BLOCK_ELEMENTS = 4_000_000


def default_grid_points() -> int:
    """Certification grid density, overridable through ``FPL_GRID_POINTS``."""
    raw = os.environ.get("FPL_GRID_POINTS")
    if raw is None:
        return DEFAULT_GRID_POINTS
    n = int(raw)
    if n < 2:
        raise ValueError(f"FPL_GRID_POINTS must be >= 2, got {n}")
    return n


class OperatorError(ValueError):
    pass


class NotSelfMapError(OperatorError):
    pass


class FixedPointError(OperatorError):
    pass


@dataclass(frozen=True)
class ScalarOperator:
    """A map ``R: [domain_lo, domain_hi] -> [domain_lo, domain_hi]``.

    ``map`` must accept floats and numpy arrays.
    """

    name: str
    domain_lo: float
    domain_hi: float
    map: Callable
    self_map_points: int = 1001

    def __post_init__(self):
        if not (math.isfinite(self.domain_lo) and math.isfinite(self.domain_hi)):
            raise OperatorError(f"{self.name}: domain bounds must be finite")
        if self.domain_lo > self.domain_hi:
            raise OperatorError(
                f"{self.name}: domain_lo {self.domain_lo} > domain_hi {self.domain_hi}"
            )
        if self.self_map_points:
            self.check_self_map(self.self_map_points)

    def __call__(self, t):
        return self.map(t)

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.domain_lo, self.domain_hi, n)

    def contains(self, t: float, slack: float = SELF_MAP_SLACK) -> bool:
        return self.domain_lo - slack <= t <= self.domain_hi + slack

    def evaluate_grid(self, t: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            values = np.asarray(self.map(t), dtype=float)
        values = np.broadcast_to(values, t.shape)
        bad = ~np.isfinite(values)
        if bad.any():
            point = float(t[np.argmax(bad)])
            raise OperatorError(f"{self.name}: non-finite value at t = {point!r}")
        return values

    def check_self_map(self, n: int = 1001) -> None:
        t = self.grid(max(n, 2))
        values = self.evaluate_grid(t)
        outside = (values < self.domain_lo - SELF_MAP_SLACK) | (
            values > self.domain_hi + SELF_MAP_SLACK
        )
        if outside.any():
            i = int(np.argmax(outside))
            raise NotSelfMapError(
                f"{self.name}: R({t[i]!r}) = {values[i]!r} leaves "
                f"[{self.domain_lo}, {self.domain_hi}]"
            )

    def with_domain(self, lo: float, hi: float, name: Optional[str] = None) -> "ScalarOperator":
        return ScalarOperator(name or self.name, lo, hi, self.map, self.self_map_points)


def from_expression(src: str, lo: float, hi: float, name: Optional[str] = None) -> ScalarOperator:
    return ScalarOperator(name or src, float(lo), float(hi), CompiledExpression(src, ("x",)))


def _cos_half(t):
    return np.cos(t / 2)


def _halving_jump(t):
    # p/2 on [0, 1), 1/4 at p = 1
    if np.ndim(t) == 0:
        return 0.25 if t == 1 else t / 2
    t = np.asarray(t, dtype=float)
    return np.where(t == 1, 0.25, t / 2)


def _poly_approx(t):
    return 1 - 0.25 * t**2 + 0.0026 * t**4


CATALOG: dict[str, Callable[[], ScalarOperator]] = {
    "cos_half": lambda: ScalarOperator("cos_half", 0.0, math.pi, _cos_half),
    "halving_jump": lambda: ScalarOperator("halving_jump", 0.0, 1.0, _halving_jump),
    "poly_approx": lambda: ScalarOperator("poly_approx", 0.0, 1.0, _poly_approx),
}


def get_operator(name: str) -> ScalarOperator:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"unknown catalog operator {name!r}; have {sorted(CATALOG)}") from None


class CertificateKind(str, enum.Enum):
    ZETA_CONTRACTION = "zeta_contraction"
    WEAK_10 = "weak_10"
    WEAK_11 = "weak_11"


@dataclass(frozen=True)
class ContractionCertificate:
    kind: CertificateKind
    zeta: float
    L: float
    grid_points: int
    max_defect: float
    worst_pair: tuple[float, float]
    tolerance: float = CERTIFY_TOL

    @property
    def certified(self) -> bool:
        return self.max_defect <= self.tolerance


def _max_defect_sweep(t, r, zeta, L):
    """Max over ordered pairs of |Rp-Rq| - zeta|p-q| - L|p-Rp| in O(N).

    On an ascending grid, for q < p the slack splits into a p-term minus a
    q-term, so prefix minima give the best q; q > p uses suffix extrema.
    Returns (defect, index of p).
    """
    n = len(t)
    best = np.zeros(n)  # q = p
    inf = np.full(1, np.inf)

    lo_a = np.concatenate([inf, np.minimum.accumulate(r - zeta * t)[:-1]])
    lo_b = np.concatenate([inf, np.minimum.accumulate(-r - zeta * t)[:-1]])
    below = np.maximum((r - zeta * t) - lo_a, (-r - zeta * t) - lo_b)

    hi_a = np.concatenate([np.minimum.accumulate((r + zeta * t)[::-1])[::-1][1:], inf])
    hi_b = np.concatenate([np.maximum.accumulate((r - zeta * t)[::-1])[::-1][1:], -inf])
    above = np.maximum((r + zeta * t) - hi_a, hi_b - (r - zeta * t))

    best = np.maximum(best, np.maximum(below, above))
    defect = best - L * np.abs(t - r)
    i = int(np.argmax(defect))
    return float(defect[i]), i


def _pair_defect_block(kind, p, rp, q, rq, zeta, L):
    lhs = np.abs(rp[:, None] - rq[None, :])
    rhs = zeta * np.abs(p[:, None] - q[None, :])
    if kind is CertificateKind.WEAK_10:
        rhs = rhs + L * np.abs(q[None, :] - rp[:, None])
    elif kind is CertificateKind.WEAK_11:
        rhs = rhs + L * np.abs(p - rp)[:, None]
    return lhs - rhs


def _max_defect_pairs(kind, t, r, zeta, L):
    """Direct evaluation over all ordered pairs, blocked by rows."""
    n = len(t)
    rows = max(1, _PAIR_BLOCK_ELEMENTS // n)
    best, best_pair = -np.inf, (0, 0)
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        block = _pair_defect_block(kind, t[start:stop], r[start:stop], t, r, zeta, L)
        k = int(np.argmax(block))
        i, j = divmod(k, n)
        if block[i, j] > best:
            best, best_pair = float(block[i, j]), (start + i, j)
    return best, best_pair


def certify(
    op: ScalarOperator,
    kind: CertificateKind | str,
    zeta: float,
    L: float = 0.0,
    grid_points: Optional[int] = None,
) -> ContractionCertificate:
    """Check the contraction inequality of ``kind`` on every ordered grid pair.

    ``zeta_contraction``: |Rp - Rq| <= zeta |p - q|
    ``weak_10``:          |Rp - Rq| <= zeta |p - q| + L |q - Rp|
    ``weak_11``:          |Rp - Rq| <= zeta |p - q| + L |p - Rp|
    """
    kind = CertificateKind(kind)
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    if L < 0:
        raise ValueError(f"L must be >= 0, got {L}")
    if grid_points is None:
        grid_points = default_grid_points()
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    if op.domain_lo == op.domain_hi:
        raise OperatorError(f"{op.name}: degenerate domain, nothing to certify")
    if kind is CertificateKind.ZETA_CONTRACTION:
        L = 0.0

    t = op.grid(grid_points)
    r = op.evaluate_grid(t)

    if kind is CertificateKind.WEAK_10:
        defect, (i, j) = _max_defect_pairs(kind, t, r, zeta, L)
    else:
        _, i = _max_defect_sweep(t, r, zeta, L)
        # re-evaluate the worst row directly so the reported slack is exact
        row = _pair_defect_block(kind, t[i : i + 1], r[i : i + 1], t, r, zeta, L)[0]
        j = int(np.argmax(row))
        defect = float(row[j])
    return ContractionCertificate(
        kind, float(zeta), float(L), grid_points, defect, (float(t[i]), float(t[j]))
    )


def sup_distance(op_r: ScalarOperator, op_f: ScalarOperator, grid_points: int = 10**6 + 1) -> float:
    """Grid maximum of |R(t) - F(t)|; a lower bound on the true sup."""
    if (op_r.domain_lo, op_r.domain_hi) != (op_f.domain_lo, op_f.domain_hi):
        raise OperatorError(
            f"domains differ: [{op_r.domain_lo}, {op_r.domain_hi}] vs "
            f"[{op_f.domain_lo}, {op_f.domain_hi}]"
        )
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    t = op_r.grid(grid_points)
    return float(np.max(np.abs(op_r.evaluate_grid(t) - op_f.evaluate_grid(t))))


class OracleMethod(str, enum.Enum):
    BISECTION = "bisection"
    FIXED_TOLERANCE_ITERATION = "fixed_tolerance_iteration"


@dataclass(frozen=True)
class FixedPointEstimate:
    value: float
    residual: float
    method: OracleMethod
    tol: float


def _residual(op: ScalarOperator, t: float) -> float:
    return abs(float(op(t)) - t)


def oracle_fixed_point(op: ScalarOperator, tol: float = 1e-12, scan_points: int = 1001) -> FixedPointEstimate:
    """Bisection on g(t) = R(t) - t.

    The domain is scanned for the first bracket (an endpoint root counts),
    which is then halved until its width is at most ``tol`` or no float lies
    strictly inside.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo_end, hi_end = op.domain_lo, op.domain_hi
    for end in (lo_end, hi_end):
        if float(op(end)) == end:
            return FixedPointEstimate(end, 0.0, OracleMethod.BISECTION, tol)

    t = op.grid(max(scan_points, 2))
    g = op.evaluate_grid(t) - t
    exact = np.flatnonzero(g == 0)
    if exact.size:
        v = float(t[exact[0]])
        return FixedPointEstimate(v, _residual(op, v), OracleMethod.BISECTION, tol)
    change = np.flatnonzero(np.sign(g[:-1]) != np.sign(g[1:]))
    if change.size == 0:
        raise FixedPointError(f"{op.name}: no bracketed fixed point on [{lo_end}, {hi_end}]")

    k = int(change[0])
    lo, hi = float(t[k]), float(t[k + 1])
    g_lo = float(g[k])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = float(op(mid)) - mid
        if g_mid == 0:
            lo = hi = mid
            break
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    value = min((lo, 0.5 * (lo + hi), hi), key=lambda v: _residual(op, v))
    residual = _residual(op, value)
    if residual > tol:
        raise FixedPointError(
            f"{op.name}: residual {residual:.3e} at {value!r} exceeds tol {tol:.3e}"
        )
    return FixedPointEstimate(value, residual, OracleMethod.BISECTION, tol)


def iterate_fixed_point(
    op: ScalarOperator, start: float, tol: float = 1e-12, max_iters: int = 10_000
) -> FixedPointEstimate:
    """Plain successive substitution until the residual drops below ``tol``."""
    x = float(start)
    for _ in range(max_iters):
        residual = _residual(op, x)
        if residual <= tol:
            return FixedPointEstimate(x, residual, OracleMethod.FIXED_TOLERANCE_ITERATION, tol)
        x = float(op(x))
    raise FixedPointError(f"{op.name}: no residual below {tol} after {max_iters} substitutions")
