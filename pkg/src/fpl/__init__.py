"""Fixed-point iteration laboratory: the AT two-step scheme, seven comparison
schemes, and harnesses for convergence envelopes, stability under
perturbation, data dependence and integral-operator IVPs."""

from .operators import (
    CATALOG,
    CertificateKind,
    ContractionCertificate,
    FixedPointEstimate,
    ScalarOperator,
    certify,
    from_expression,
    get_operator,
    oracle_fixed_point,
    sup_distance,
)
from .schemes import ControlSequences, IterationTrace, SchemeId, StopRule, at_step, run, step, step_classic

__all__ = [
    "CATALOG",
    "CertificateKind",
    "ContractionCertificate",
    "ControlSequences",
    "FixedPointEstimate",
    "IterationTrace",
    "ScalarOperator",
    "SchemeId",
    "StopRule",
    "at_step",
    "certify",
    "from_expression",
    "get_operator",
    "oracle_fixed_point",
    "run",
    "step",
    "step_classic",
    "sup_distance",
]
