"""The eight fixed-point schemes and a trace-producing runner.

``scheme_update`` is written with plain arithmetic so it works for floats
and for numpy arrays (nodewise convex combinations); the IVP solver reuses
it in function space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .operators import SELF_MAP_SLACK, ScalarOperator


class SchemeId(str, enum.Enum):
    PICARD = "picard"
    MANN = "mann"
    ISHIKAWA = "ishikawa"
    S = "s"
    NORMAL_S = "normal_s"
    VARAT = "varat"
    FSTAR = "fstar"
    AT = "at"


ALL_SCHEMES = tuple(SchemeId)

REQUIRED_SEQUENCES = {
    SchemeId.PICARD: (),
    SchemeId.MANN: ("a",),
    SchemeId.ISHIKAWA: ("a", "d"),
    SchemeId.S: ("a", "d"),
    SchemeId.NORMAL_S: ("a",),
    SchemeId.VARAT: ("a", "c", "d"),
    SchemeId.FSTAR: ("a",),
    SchemeId.AT: ("a",),
}


class SchemeError(ValueError):
    pass


class DomainEscapeError(SchemeError):
    pass


class ControlExhaustedError(SchemeError, IndexError):
    pass


@dataclass(frozen=True)
class ControlSequence:
    """One of a_m, c_m, d_m; indexed from m = 0.

    kind is ``constant`` (value), ``reciprocal`` (m -> 1/(m + k)) or
    ``explicit`` (values).
    """

    kind: str
    value: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not 0 < self.value < 1:
                raise SchemeError(f"constant control value must lie in (0, 1), got {self.value}")
        elif self.kind == "reciprocal":
            if not self.value > 1:
                raise SchemeError(f"reciprocal offset k must exceed 1, got {self.value}")
        elif self.kind == "explicit":
            if not self.values:
                raise SchemeError("explicit control list is empty")
            bad = [v for v in self.values if not 0 < v < 1]
            if bad:
                raise SchemeError(f"explicit control values outside (0, 1): {bad[:3]}")
        else:
            raise SchemeError(f"unknown control kind {self.kind!r}")

    def __call__(self, m: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "reciprocal":
            return 1.0 / (m + self.value)
        if m >= len(self.values):
            raise ControlExhaustedError(
                f"explicit control list has {len(self.values)} entries, index {m} requested"
            )
        return self.values[m]


def constant(v: float) -> ControlSequence:
    return ControlSequence("constant", value=float(v))


def reciprocal(k: float) -> ControlSequence:
    return ControlSequence("reciprocal", value=float(k))


def explicit(values: Sequence[float]) -> ControlSequence:
    return ControlSequence("explicit", values=tuple(float(v) for v in values))


@dataclass(frozen=True)
class ControlSequences:
    a: Optional[ControlSequence] = None
    c: Optional[ControlSequence] = None
    d: Optional[ControlSequence] = None

    @classmethod
    def constant(cls, v: float) -> "ControlSequences":
        seq = constant(v)
        return cls(a=seq, c=seq, d=seq)

    def require(self, scheme: SchemeId) -> None:
        missing = [name for name in REQUIRED_SEQUENCES[scheme] if getattr(self, name) is None]
        if missing:
            raise SchemeError(f"{scheme.value} needs control sequences {missing}")

    def at(self, m: int, scheme: SchemeId) -> dict[str, float]:
        return {name: getattr(self, name)(m) for name in REQUIRED_SEQUENCES[scheme]}


@dataclass(frozen=True)
class StepAux:
    b: Optional[float] = None
    t: Optional[float] = None


def _noop_check(point, label):
    pass


def scheme_update(
    scheme: SchemeId,
    R: Callable,
    s,
    a: float = 0.0,
    c: float = 0.0,
    d: float = 0.0,
    check: Callable = _noop_check,
):
    """One step of ``scheme`` from ``s``; returns (next, StepAux).

    ``check(point, label)`` is called on every point R is applied to and on
    the result.
    """

    def apply(x, label):
        check(x, label)
        return R(x)

    b = t = None
    if scheme is SchemeId.PICARD:
        nxt = apply(s, "s_m")
    elif scheme is SchemeId.MANN:
        nxt = (1 - a) * s + a * apply(s, "s_m")
    elif scheme is SchemeId.ISHIKAWA:
        b = (1 - d) * s + d * apply(s, "s_m")
        nxt = (1 - a) * s + a * apply(b, "b_m")
    elif scheme is SchemeId.S:
        rs = apply(s, "s_m")
        b = (1 - d) * s + d * rs
        nxt = (1 - a) * rs + a * apply(b, "b_m")
    elif scheme is SchemeId.NORMAL_S:
        nxt = apply((1 - a) * s + a * apply(s, "s_m"), "(1-a)s+aRs")
    elif scheme is SchemeId.VARAT:
        b = (1 - d) * s + d * apply(s, "s_m")
        t = (1 - c) * s + c * b
        nxt = (1 - a) * apply(t, "t_m") + a * apply(b, "b_m")
    elif scheme is SchemeId.FSTAR:
        b = apply(apply((1 - a) * s + a * apply(s, "s_m"), "(1-a)s+aRs"), "R((1-a)s+aRs)")
        nxt = apply(b, "b_m")
    elif scheme is SchemeId.AT:
        rs = apply(s, "s_m")
        u = (1 - a) * s + a * rs
        b = 0.5 * apply(rs, "Rs_m") + 0.5 * apply(apply(u, "(1-a)s+aRs"), "R((1-a)s+aRs)")
        nxt = apply((1 - a) * b + a * apply(b, "b_m"), "(1-a)b+aRb")
    else:
        raise SchemeError(f"unknown scheme {scheme!r}")
    check(nxt, "s_m+1")
    return nxt, StepAux(b, t)


def _domain_check(op: ScalarOperator, scheme: SchemeId, m: int):
    def check(point, label):
        if not op.contains(point, SELF_MAP_SLACK):
            raise DomainEscapeError(
                f"{scheme.value} step {m}: {label} = {point!r} escapes "
                f"[{op.domain_lo}, {op.domain_hi}] of {op.name}"
            )

    return check


def _scalar(R: ScalarOperator):
    return lambda x: float(R(x))


def step(
    scheme: SchemeId | str,
    op: ScalarOperator,
    s_m: float,
    m: int,
    ctrl: Optional[ControlSequences] = None,
) -> tuple[float, StepAux]:
    scheme = SchemeId(scheme)
    ctrl = ctrl or ControlSequences()
    ctrl.require(scheme)
    params = ctrl.at(m, scheme)
    return scheme_update(scheme, _scalar(op), float(s_m), check=_domain_check(op, scheme, m), **params)


def step_classic(scheme, op, s_m, m, ctrl=None):
    scheme = SchemeId(scheme)
    if scheme is SchemeId.AT:
        raise SchemeError("step_classic covers the seven comparison schemes; use at_step")
    return step(scheme, op, s_m, m, ctrl)


def at_step(op: ScalarOperator, s_m: float, m: int, ctrl: ControlSequences) -> tuple[float, float]:
    nxt, aux = step(SchemeId.AT, op, s_m, m, ctrl)
    return nxt, aux.b


class StopReason(str, enum.Enum):
    MAX_ITERS = "max_iters"
    STEP_TOL = "step_tol"
    TARGET_TOL = "target_tol"


@dataclass(frozen=True)
class StopRule:
    max_iters: int = 1000
    step_tol: float = 1e-12
    target: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise SchemeError("max_iters must be >= 1")
        if self.step_tol < 0:
            raise SchemeError("step_tol must be >= 0")


@dataclass(frozen=True)
class IterationTrace:
    scheme: SchemeId
    operator: str
    s0: float
    iterates: tuple[float, ...]
    auxiliaries: Optional[tuple[StepAux, ...]]
    stop_reason: StopReason

    def __len__(self):
        return len(self.iterates)

    @property
    def final(self) -> float:
        return self.iterates[-1]


_HAS_AUX = {SchemeId.ISHIKAWA, SchemeId.S, SchemeId.VARAT, SchemeId.FSTAR, SchemeId.AT}


def run(
    scheme: SchemeId | str,
    op: ScalarOperator,
    s0: float,
    ctrl: Optional[ControlSequences] = None,
    stop: StopRule = StopRule(),
) -> IterationTrace:
    scheme = SchemeId(scheme)
    ctrl = ctrl or ControlSequences()
    ctrl.require(scheme)
    s = float(s0)
    if not op.contains(s):
        raise DomainEscapeError(f"s0 = {s!r} outside [{op.domain_lo}, {op.domain_hi}] of {op.name}")
    R = _scalar(op)
    iterates = [s]
    aux = []
    reason = StopReason.MAX_ITERS
    for m in range(stop.max_iters):
        nxt, a = scheme_update(scheme, R, s, check=_domain_check(op, scheme, m), **ctrl.at(m, scheme))
        iterates.append(nxt)
        aux.append(a)
        if stop.target is not None and abs(nxt - stop.target[0]) < stop.target[1]:
            reason = StopReason.TARGET_TOL
            break
        if abs(nxt - s) < stop.step_tol:
            reason = StopReason.STEP_TOL
            break
        s = nxt
    return IterationTrace(
        scheme,
        op.name,
        float(s0),
        tuple(iterates),
        tuple(aux) if scheme in _HAS_AUX else None,
        reason,
    )
