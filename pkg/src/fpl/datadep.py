"""Data dependence of fixed points under an approximate operator.

For an operator F within sup-distance epsilon of a weak contraction R, the
fixed points satisfy

    |s - t| <= (5 eps + 2 zeta eps + zeta**2 eps) / (1 - zeta).

The check takes both fixed points from the bisection oracle, never from the
iteration, so it is not circular.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .operators import (
    CertificateKind,
    ContractionCertificate,
    OperatorError,
    ScalarOperator,
    certify,
    oracle_fixed_point,
    sup_distance,
)
from .schemes import ControlSequences, IterationTrace, SchemeError, SchemeId, StopRule, run

EPSILON_GRID_POINTS = 10**6 + 1


@dataclass(frozen=True)
class ApproximatePair:
    R: ScalarOperator
    F: ScalarOperator
    epsilon: float
    zeta: float
    L: float
    certificate: Optional[ContractionCertificate] = None


def make_pair(
    R: ScalarOperator,
    F: ScalarOperator,
    zeta: float,
    L: float = 0.0,
    epsilon: Optional[float] = None,
    epsilon_grid_points: int = EPSILON_GRID_POINTS,
    certify_grid_points: Optional[int] = None,
) -> ApproximatePair:
    """Build a pair, measuring epsilon on a grid unless one is supplied and
    certifying (zeta, L) for R under the symmetric weak-contraction condition."""
    measured = sup_distance(R, F, epsilon_grid_points)
    if epsilon is None:
        epsilon = measured
    elif epsilon < measured - 1e-12:
        raise OperatorError(f"epsilon {epsilon} is below the measured sup distance {measured}")
    cert = certify(R, CertificateKind.WEAK_11, zeta, L, certify_grid_points)
    if not cert.certified:
        raise OperatorError(
            f"{R.name}: (zeta={zeta}, L={L}) not certified, defect {cert.max_defect:.3e} "
            f"at {cert.worst_pair}"
        )
    return ApproximatePair(R, F, float(epsilon), float(zeta), float(L), cert)


def datadep_bound(epsilon: float, zeta: float) -> float:
    if not 0 < zeta < 1:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return (5 * epsilon + 2 * zeta * epsilon + zeta**2 * epsilon) / (1 - zeta)


def classical_bound(epsilon: float, zeta: float) -> float:
    """The sharper eps/(1 - zeta) estimate for a zeta-contraction."""
    return epsilon / (1 - zeta)


def run_approximate_at(
    pair: ApproximatePair,
    v0: float,
    ctrl: ControlSequences,
    stop: StopRule = StopRule(),
) -> IterationTrace:
    """AT iteration driven by F, requiring a_m >= 1/2.

    A start outside F's domain is first mapped by one application of F (the
    map must be defined there) and the trace begins at F(v0).
    """
    F = pair.F
    start = float(v0)
    if not F.contains(start):
        start = float(F(start))
        if not F.contains(start):
            raise SchemeError(f"v0 = {v0!r} and F(v0) = {start!r} both lie outside {F.name}'s domain")
    ctrl.require(SchemeId.AT)
    trace = run(SchemeId.AT, F, start, ctrl, stop)
    for m in range(len(trace) - 1):
        if ctrl.a(m) < 0.5:
            raise SchemeError(f"a_{m} = {ctrl.a(m)} < 1/2")
    return trace


run_eq14 = run_approximate_at  # public alias kept for the published operation name


@dataclass(frozen=True)
class DataDependenceReport:
    epsilon: float
    zeta: float
    L: float
    s_star: float
    t_star: float
    distance: float
    bound: float
    classical: float
    trace: Optional[IterationTrace] = None

    @property
    def holds(self) -> bool:
        return self.distance <= self.bound + 1e-12


def verify_bound(
    pair: ApproximatePair,
    ctrl: Optional[ControlSequences] = None,
    stop: StopRule = StopRule(),
    v0: Optional[float] = None,
    oracle_tol: float = 1e-15,
) -> DataDependenceReport:
    s_star = oracle_fixed_point(pair.R, oracle_tol).value
    t_star = oracle_fixed_point(pair.F, oracle_tol).value
    trace = None
    if ctrl is not None and v0 is not None:
        trace = run_approximate_at(pair, v0, ctrl, stop)
    return DataDependenceReport(
        epsilon=pair.epsilon,
        zeta=pair.zeta,
        L=pair.L,
        s_star=s_star,
        t_star=t_star,
        distance=abs(s_star - t_star),
        bound=datadep_bound(pair.epsilon, pair.zeta),
        classical=classical_bound(pair.epsilon, pair.zeta),
        trace=trace,
    )
