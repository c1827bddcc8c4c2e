"""Error sequences, theoretical error envelopes and rate comparison."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .schemes import IterationTrace, SchemeId

RATIO_FLOOR = 1e-15
FASTER_CUTOFF = 0.01
SAME_RATE_BAND = (0.1, 10.0)
TREND_WINDOW = 3
ENVELOPE_SLACK = 1e-12

# error after m+1 steps is bounded by zeta**(k*(m+1)) * |s_0 - s|
ENVELOPE_EXPONENT = {
    SchemeId.PICARD: 1,
    SchemeId.NORMAL_S: 1,
    SchemeId.VARAT: 1,
    SchemeId.FSTAR: 2,
    SchemeId.AT: 3,
}


class EnvelopeUnavailable(ValueError):
    pass


def error_sequence(trace: IterationTrace, s_star: float) -> list[float]:
    return [abs(s - s_star) for s in trace.iterates]


@dataclass(frozen=True)
class ErrorEnvelope:
    scheme: SchemeId
    zeta: float
    exponent: int
    initial_gap: float
    values: tuple[float, ...]


def envelope(scheme: SchemeId | str, zeta: float, initial_gap: float, m_max: int) -> ErrorEnvelope:
    scheme = SchemeId(scheme)
    if scheme not in ENVELOPE_EXPONENT:
        raise EnvelopeUnavailable(f"no error envelope is derived for {scheme.value}")
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    if initial_gap < 0:
        raise ValueError("initial_gap must be >= 0")
    k = ENVELOPE_EXPONENT[scheme]
    values = tuple(zeta ** (k * (m + 1)) * initial_gap for m in range(m_max + 1))
    return ErrorEnvelope(scheme, zeta, k, initial_gap, values)


@dataclass(frozen=True)
class EnvelopeReport:
    max_excess: float
    margins: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.max_excess <= ENVELOPE_SLACK


def envelope_check(trace: IterationTrace, env: ErrorEnvelope, s_star: float) -> EnvelopeReport:
    """Compare |s_m - s*| against the bound on step m, for m >= 1."""
    if len(trace) < 2:
        raise ValueError("trace needs at least two iterates")
    if env.scheme is not trace.scheme:
        raise ValueError(f"envelope is for {env.scheme.value}, trace is {trace.scheme.value}")
    errors = error_sequence(trace, s_star)
    n = min(len(errors) - 1, len(env.values))
    margins = tuple(env.values[m - 1] - errors[m] for m in range(1, n + 1))
    return EnvelopeReport(max(-x for x in margins), margins)


class Verdict(str, enum.Enum):
    A_FASTER = "a_faster"
    SAME_RATE = "same_rate"
    B_FASTER = "b_faster"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RateComparison:
    trace_a: IterationTrace
    trace_b: IterationTrace
    s_star: float
    ratios: tuple[float, ...]
    verdict: Verdict


def _trends_to_zero(ratios: Sequence[float]) -> bool:
    tail = ratios[-TREND_WINDOW:]
    return tail[-1] < FASTER_CUTOFF and all(x > y for x, y in zip(tail, tail[1:]))


def error_ratios(errors_a: Sequence[float], errors_b: Sequence[float]) -> list[float]:
    """|a_m - s*| / |b_m - s*| up to the first index where either error hits
    the rounding floor; past that point the quotient compares noise."""
    ratios = []
    for ea, eb in zip(errors_a, errors_b):
        if ea <= RATIO_FLOOR or eb <= RATIO_FLOOR:
            break
        ratios.append(ea / eb)
    return ratios


def classify_ratios(ratios: Sequence[float]) -> Verdict:
    if len(ratios) < TREND_WINDOW:
        return Verdict.INCONCLUSIVE
    if _trends_to_zero(ratios):
        return Verdict.A_FASTER
    if _trends_to_zero([1 / r for r in ratios]):
        return Verdict.B_FASTER
    lo, hi = SAME_RATE_BAND
    if all(lo <= r <= hi for r in ratios):
        return Verdict.SAME_RATE
    return Verdict.INCONCLUSIVE


def compare_rates(trace_a: IterationTrace, trace_b: IterationTrace, s_star: float) -> RateComparison:
    if len(trace_a) < 3 or len(trace_b) < 3:
        raise ValueError("rate comparison needs at least three iterates per trace")
    if trace_a.operator != trace_b.operator:
        raise ValueError(f"traces target different operators: {trace_a.operator}, {trace_b.operator}")
    ratios = error_ratios(error_sequence(trace_a, s_star), error_sequence(trace_b, s_star))
    return RateComparison(trace_a, trace_b, s_star, tuple(ratios), classify_ratios(ratios))


def envelope_ratios(env_a: ErrorEnvelope, env_b: ErrorEnvelope) -> list[float]:
    """Quotient of two bound sequences, e.g. zeta**(2(m+1)) for AT over Picard."""
    return [x / y for x, y in zip(env_a.values, env_b.values) if y > 0]


def check_lemma_recursion(u: Sequence[float], v: Sequence[float], s: float, slack: float = 0.0) -> bool:
    """True iff u[m+1] <= s*u[m] + v[m] (+ slack) for every m.

    ``v`` needs at least len(u) - 1 entries; extra entries are ignored.
    """
    if not 0 <= s < 1:
        raise ValueError(f"s must lie in [0, 1), got {s}")
    if len(u) < 2:
        raise ValueError("u needs at least two entries")
    if len(v) < len(u) - 1:
        raise ValueError(f"v has {len(v)} entries, need {len(u) - 1}")
    if any(x < 0 for x in u) or any(x < 0 for x in v):
        raise ValueError("sequences must be nonnegative")
    return all(u[m + 1] <= s * u[m] + v[m] + slack for m in range(len(u) - 1))
