"""Perturbed-iterate experiments for (almost) stability of a scheme.

A perturbed run feeds r_{m+1} = g(R, r_m) + sign_m * gamma_m back into the
scheme, clamped to the operator domain. The realized perturbation
|r_{m+1} - g(R, r_m)| is what gets recorded, so the reported gamma is exact
even when clamping shortens the injected error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .operators import ScalarOperator, oracle_fixed_point
from .schemes import ControlSequences, SchemeId, step

CONVERGENCE_TOL = 1e-4
FLOOR_GAP = 1e-3
FLOOR_WINDOW = 50
CAUCHY_TAIL = 1e-12


@dataclass(frozen=True)
class PerturbationModel:
    """Injected error magnitudes gamma_m.

    ``zero``; ``summable_power``: c/(m+1)**p with p > 1;
    ``nonsummable_constant``: c; ``explicit``: values.
    """

    kind: str
    c: float = 0.0
    p: float = 2.0
    values: tuple[float, ...] = ()
    sign_rule: str = "alternating"

    def __post_init__(self):
        if self.kind not in ("zero", "summable_power", "nonsummable_constant", "explicit"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.sign_rule not in ("alternating", "always_positive"):
            raise ValueError(f"unknown sign rule {self.sign_rule!r}")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if self.kind == "summable_power" and not self.p > 1:
            raise ValueError(f"summable_power needs p > 1, got {self.p}")
        if self.kind == "explicit" and any(v < 0 for v in self.values):
            raise ValueError("explicit gamma values must be >= 0")

    def gamma(self, m: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "summable_power":
            return self.c / (m + 1) ** self.p
        if self.kind == "nonsummable_constant":
            return self.c
        return self.values[m] if m < len(self.values) else 0.0

    def sign(self, m: int) -> float:
        if self.sign_rule == "always_positive":
            return 1.0
        return 1.0 if m % 2 == 0 else -1.0

    @property
    def label(self) -> str:
        if self.kind == "summable_power":
            return f"summable_power(c={self.c!r},p={self.p!r})"
        if self.kind == "nonsummable_constant":
            return f"nonsummable_constant(c={self.c!r})"
        return self.kind


def zero() -> PerturbationModel:
    return PerturbationModel("zero")


def summable_power(c: float, p: float, sign_rule: str = "alternating") -> PerturbationModel:
    return PerturbationModel("summable_power", c=c, p=p, sign_rule=sign_rule)


def nonsummable_constant(c: float, sign_rule: str = "always_positive") -> PerturbationModel:
    return PerturbationModel("nonsummable_constant", c=c, sign_rule=sign_rule)


@dataclass(frozen=True)
class StabilityReport:
    scheme: SchemeId
    model: PerturbationModel
    s_star: float
    gamma: tuple[float, ...]
    gamma_partial_sums: tuple[float, ...]
    r: tuple[float, ...]
    final_gap: float
    converged: bool
    classified_summable: bool
    tail_min_gap: float

    @property
    def gaps(self) -> list[float]:
        return [abs(x - self.s_star) for x in self.r]

    @property
    def persistent_floor(self) -> bool:
        """Gap stayed above FLOOR_GAP over the final FLOOR_WINDOW steps."""
        return self.tail_min_gap > FLOOR_GAP


def _is_summable(model: PerturbationModel, partial_sums: Sequence[float]) -> bool:
    if model.kind in ("zero", "summable_power"):
        return True
    if model.kind == "nonsummable_constant":
        return model.c == 0
    tail = partial_sums[-FLOOR_WINDOW:]
    return all(y - x < CAUCHY_TAIL for x, y in zip(tail, tail[1:]))


def perturbed_run(
    scheme: SchemeId | str,
    op: ScalarOperator,
    r0: float,
    ctrl: Optional[ControlSequences],
    pert: PerturbationModel,
    m_max: int,
    s_star: Optional[float] = None,
) -> StabilityReport:
    scheme = SchemeId(scheme)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if not op.contains(r0):
        raise ValueError(f"r0 = {r0!r} outside [{op.domain_lo}, {op.domain_hi}]")
    if s_star is None:
        s_star = oracle_fixed_point(op, tol=1e-15).value

    r = [float(r0)]
    gamma = []
    for m in range(m_max):
        exact, _ = step(scheme, op, r[-1], m, ctrl)
        injected = pert.gamma(m)
        nxt = exact + pert.sign(m) * injected if injected else exact
        clamped = min(max(nxt, op.domain_lo), op.domain_hi)
        gamma.append(abs(clamped - exact) if clamped != nxt else injected)
        r.append(clamped)

    sums = []
    total = 0.0
    for g in gamma:
        total += g
        sums.append(total)
    final_gap = abs(r[-1] - s_star)
    window = r[-FLOOR_WINDOW:]
    return StabilityReport(
        scheme=scheme,
        model=pert,
        s_star=s_star,
        gamma=tuple(gamma),
        gamma_partial_sums=tuple(sums),
        r=tuple(r),
        final_gap=final_gap,
        converged=final_gap < CONVERGENCE_TOL,
        classified_summable=_is_summable(pert, sums),
        tail_min_gap=min(abs(x - s_star) for x in window),
    )


def stability_sweep(
    scheme: SchemeId | str,
    op: ScalarOperator,
    perturbations: Sequence[PerturbationModel],
    r0: float,
    ctrl: Optional[ControlSequences],
    m_max: int,
) -> list[StabilityReport]:
    if not perturbations:
        raise ValueError("no perturbation models given")
    s_star = oracle_fixed_point(op, tol=1e-15).value
    return [perturbed_run(scheme, op, r0, ctrl, p, m_max, s_star=s_star) for p in perturbations]
