import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import PICARD_COLUMN, S0
from fpl.operators import ScalarOperator, certify, get_operator, oracle_fixed_point
from fpl.schemes import (
    ALL_SCHEMES,
    ControlExhaustedError,
    ControlSequences,
    DomainEscapeError,
    SchemeError,
    SchemeId,
    StopReason,
    StopRule,
    at_step,
    constant,
    explicit,
    reciprocal,
    run,
    scheme_update,
    step,
    step_classic,
)

HALF = ControlSequences.constant(0.5)
CATALOG = ["cos_half", "halving_jump", "poly_approx"]


def halving():
    return ScalarOperator("halving", 0.0, 1.0, lambda t: t / 2)


def test_picard_first_step(cos_half):
    nxt, _ = step_classic("picard", cos_half, S0, 0)
    assert round(nxt, 6) == 0.675263


def test_ishikawa_hand_evaluation():
    ctrl = ControlSequences(a=constant(0.5), d=constant(0.5))
    nxt, aux = step_classic("ishikawa", halving(), 1.0, 0, ctrl)
    # b = 0.5*1 + 0.5*0.5, s1 = 0.5*1 + 0.5*(0.75/2)
    assert aux.b == 0.75
    assert nxt == 0.6875


def test_at_hand_evaluation():
    nxt, b = at_step(halving(), 1.0, 0, HALF)
    # b = R^2(1)/2 + R^2(0.75)/2 = 0.125 + 0.09375; s1 = R(b/2 + b/4)
    assert b == 0.21875
    assert nxt == 0.08203125


def test_at_with_fitted_control(cos_half):
    nxt, _ = at_step(cos_half, S0, 0, ControlSequences.constant(0.1441))
    assert nxt == pytest.approx(0.893290, abs=2e-5)


def test_step_classic_refuses_at(cos_half):
    with pytest.raises(SchemeError):
        step_classic("at", cos_half, S0, 0, HALF)


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
@pytest.mark.parametrize("name", CATALOG)
def test_fixed_point_is_stationary(scheme, name):
    op = get_operator(name)
    s = oracle_fixed_point(op, 1e-15).value
    nxt, _ = step(scheme, op, s, 0, HALF)
    assert abs(nxt - s) <= 1e-12


def test_picard_run_reproduces_table(cos_half):
    trace = run("picard", cos_half, S0, stop=StopRule(max_iters=9, step_tol=0))
    assert len(trace) == 10
    for got, expected in zip(trace.iterates, PICARD_COLUMN):
        assert got == pytest.approx(expected, abs=1e-6)


def test_run_from_rounded_fixed_point_stops_quickly(cos_half):
    trace = run("at", cos_half, 0.900367, HALF, StopRule(step_tol=1e-9))
    assert trace.stop_reason is StopReason.STEP_TOL
    assert len(trace) <= 4
    assert trace.iterates[1] == pytest.approx(trace.iterates[0], abs=1e-6)


def test_fstar_limit(cos_half, s_star):
    trace = run("fstar", cos_half, S0, HALF, StopRule(max_iters=20))
    assert trace.final == pytest.approx(s_star, abs=1e-12)
    assert trace.final == pytest.approx(0.9003665, abs=1e-6)


def test_target_stop(cos_half, s_star):
    trace = run("picard", cos_half, S0, stop=StopRule(step_tol=0, target=(s_star, 1e-8)))
    assert trace.stop_reason is StopReason.TARGET_TOL
    assert abs(trace.final - s_star) < 1e-8
    assert abs(trace.iterates[-2] - s_star) >= 1e-8


def test_max_iters_stop(cos_half):
    trace = run("mann", cos_half, S0, HALF, StopRule(max_iters=3, step_tol=0))
    assert trace.stop_reason is StopReason.MAX_ITERS
    assert len(trace) == 4


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_trace_shape(scheme, cos_half):
    trace = run(scheme, cos_half, S0, HALF, StopRule(max_iters=15, step_tol=0))
    assert trace.iterates[0] == trace.s0 == S0
    if trace.auxiliaries is not None:
        assert len(trace.auxiliaries) == len(trace) - 1
    assert scheme in (SchemeId.PICARD, SchemeId.MANN, SchemeId.NORMAL_S) or trace.auxiliaries


@settings(max_examples=80, deadline=None)
@given(
    st.sampled_from(ALL_SCHEMES),
    st.sampled_from(CATALOG),
    st.floats(0, 1),
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.99),
)
def test_domain_closure(scheme, name, u, a, c, d):
    op = get_operator(name)
    s0 = op.domain_lo + u * (op.domain_hi - op.domain_lo)
    ctrl = ControlSequences(a=constant(a), c=constant(c), d=constant(d))
    trace = run(scheme, op, s0, ctrl, StopRule(max_iters=30, step_tol=0))
    points = list(trace.iterates)
    for aux in trace.auxiliaries or ():
        points += [p for p in (aux.b, aux.t) if p is not None]
    assert all(op.contains(p, 1e-12) for p in points)


def test_collapse_identities():
    R = lambda t: t / 2  # noqa: E731
    for s in (0.0, 0.3, 1.0):
        assert scheme_update(SchemeId.NORMAL_S, R, s, a=1)[0] == R(R(s))
        assert scheme_update(SchemeId.NORMAL_S, R, s, a=0)[0] == R(s)
        assert scheme_update(SchemeId.MANN, R, s, a=1)[0] == R(s)
        assert scheme_update(SchemeId.ISHIKAWA, R, s, a=0.3, d=0)[0] == scheme_update(SchemeId.MANN, R, s, a=0.3)[0]
        assert scheme_update(SchemeId.S, R, s, a=0, d=0.4)[0] == R(s)
        assert (
            scheme_update(SchemeId.VARAT, R, s, a=0.3, c=0, d=0.6)[0]
            == scheme_update(SchemeId.S, R, s, a=0.3, d=0.6)[0]
        )
        assert scheme_update(SchemeId.FSTAR, R, s, a=0)[0] == R(R(R(s)))
        assert scheme_update(SchemeId.AT, R, s, a=0)[0] == R(R(R(s)))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CATALOG), st.floats(0, 1), st.floats(0.01, 0.99))
def test_at_contracts_by_zeta_cubed(name, u, a):
    op = get_operator(name)
    L = 0.5 if name == "halving_jump" else 0.0
    assert certify(op, "weak_11", 0.5, L, 2001).certified
    s_star = oracle_fixed_point(op, 1e-15).value
    s0 = op.domain_lo + u * (op.domain_hi - op.domain_lo)
    trace = run("at", op, s0, ControlSequences(a=constant(a)), StopRule(max_iters=8, step_tol=0))
    errors = [abs(s - s_star) for s in trace.iterates]
    for e0, e1 in zip(errors, errors[1:]):
        assert e1 <= 0.125 * e0 + 1e-15


# --- control sequences ----------------------------------------------------


def test_control_sequence_kinds():
    assert constant(0.3)(7) == 0.3
    assert reciprocal(2)(0) == 0.5
    assert reciprocal(2)(3) == 0.2
    assert explicit([0.1, 0.2])(1) == 0.2
    with pytest.raises(ControlExhaustedError):
        explicit([0.1, 0.2])(2)


@pytest.mark.parametrize("bad", [lambda: constant(0), lambda: constant(1), lambda: reciprocal(1), lambda: explicit([]), lambda: explicit([0.5, 1.2])])
def test_control_sequence_validation(bad):
    with pytest.raises(SchemeError):
        bad()


def test_exhausted_control_aborts_run(cos_half):
    ctrl = ControlSequences(a=explicit([0.5, 0.5, 0.5]))
    with pytest.raises(ControlExhaustedError):
        run("mann", cos_half, S0, ctrl, StopRule(max_iters=10, step_tol=0))


def test_missing_sequences_rejected(cos_half):
    with pytest.raises(SchemeError, match="varat"):
        run("varat", cos_half, S0, ControlSequences(a=constant(0.5), d=constant(0.5)))
    with pytest.raises(SchemeError):
        run("ishikawa", cos_half, S0, ControlSequences(a=constant(0.5)))
    run("picard", cos_half, S0)


def test_domain_escape_names_scheme_and_step():
    op = ScalarOperator("shift", 0.0, 1.0, lambda t: t + 0.3, self_map_points=0)
    with pytest.raises(DomainEscapeError, match=r"picard step 2"):
        run("picard", op, 0.2, stop=StopRule(max_iters=5, step_tol=0))
    with pytest.raises(DomainEscapeError):
        run("picard", op, 1.5)


def test_reciprocal_control_run_converges_slowly(cos_half, s_star):
    # vanishing a_m slows Ishikawa to a sublinear rate
    ctrl = ControlSequences(a=reciprocal(2), d=reciprocal(3))
    trace = run("ishikawa", cos_half, S0, ctrl, StopRule(max_iters=2000, step_tol=0))
    errors = [abs(s - s_star) for s in trace.iterates[10:]]
    assert math.isfinite(trace.final)
    assert errors[-1] < 1e-3
    assert all(e1 <= e0 for e0, e1 in zip(errors, errors[1:]))
