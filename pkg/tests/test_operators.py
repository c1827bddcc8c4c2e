import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brent_fixed_point
from fpl.operators import (
    CertificateKind,
    FixedPointError,
    NotSelfMapError,
    OperatorError,
    ScalarOperator,
    _max_defect_sweep,
    certify,
    from_expression,
    get_operator,
    iterate_fixed_point,
    oracle_fixed_point,
    sup_distance,
)


def brute_force_defect(kind, t, r, zeta, L):
    """Independent all-pairs evaluation with full meshgrids."""
    p, q = np.meshgrid(t, t, indexing="ij")
    rp, rq = np.meshgrid(r, r, indexing="ij")
    rhs = zeta * np.abs(p - q)
    if kind == "weak_10":
        rhs = rhs + L * np.abs(q - rp)
    elif kind == "weak_11":
        rhs = rhs + L * np.abs(p - rp)
    return float(np.max(np.abs(rp - rq) - rhs))


# --- certification --------------------------------------------------------


def test_cos_half_weak_11_certified(cos_half):
    cert = certify(cos_half, "weak_11", 0.5, 0.0, 2001)
    assert cert.certified
    assert cert.max_defect <= 0


def test_identity_is_not_a_contraction():
    ident = ScalarOperator("identity", 0.0, 1.0, lambda t: t)
    cert = certify(ident, "zeta_contraction", 0.5, 0.0, 101)
    assert not cert.certified
    # worst pair is (0, 1): |p - q| - 0.5 |p - q| = 0.5
    assert cert.max_defect == pytest.approx(0.5, abs=1e-15)


def test_halving_jump_weak_10_needs_L_one_half():
    op = get_operator("halving_jump")
    failed = certify(op, "weak_10", 0.5, 1 / 3, 1001)
    assert not failed.certified
    # p = 0.999, q = 1: 0.2495 - 0.5*0.001 - (1/3)*(1 - 0.4995)
    assert failed.worst_pair == (0.999, 1.0)
    assert failed.max_defect == pytest.approx(0.2495 - 0.0005 - 0.5005 / 3, abs=1e-12)
    assert certify(op, "weak_10", 0.5, 0.5, 1001).certified


def test_halving_jump_never_a_zeta_contraction():
    op = get_operator("halving_jump")
    for zeta in (0.5, 0.9, 0.999):
        assert not certify(op, "zeta_contraction", zeta, 0.0, 1001).certified


@pytest.mark.parametrize("kind", ["zeta_contraction", "weak_10", "weak_11"])
@pytest.mark.parametrize("name", ["cos_half", "halving_jump", "poly_approx"])
@pytest.mark.parametrize("zeta, L", [(0.5, 0.0), (0.3, 0.2), (0.9, 0.5)])
def test_certify_matches_brute_force(kind, name, zeta, L):
    op = get_operator(name)
    n = 301
    t = op.grid(n)
    expected = brute_force_defect(kind, t, op.evaluate_grid(t), zeta, 0.0 if kind == "zeta_contraction" else L)
    assert certify(op, kind, zeta, L, n).max_defect == pytest.approx(expected, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=2, max_size=40),
    st.floats(0.01, 0.99),
    st.floats(0, 2),
)
def test_sweep_equals_all_pairs(values, zeta, L):
    r = np.array(values)
    t = np.linspace(0.0, 1.0, len(r))
    expected = brute_force_defect("weak_11", t, r, zeta, L)
    got, _ = _max_defect_sweep(t, r, zeta, L)
    assert got == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["cos_half", "halving_jump", "poly_approx"]),
    st.sampled_from(list(CertificateKind)),
    st.floats(0.05, 0.9),
    st.floats(0, 1),
    st.floats(0, 0.09),
    st.floats(0, 1),
)
def test_certification_monotone_in_constants(name, kind, zeta, L, dz, dL):
    op = get_operator(name)
    if certify(op, kind, zeta, L, 201).certified:
        assert certify(op, kind, zeta + dz, L + dL, 201).certified


@pytest.mark.parametrize("name", ["cos_half", "poly_approx"])
def test_zeta_contraction_implies_weak_conditions(name):
    op = get_operator(name)
    assert certify(op, "zeta_contraction", 0.5, 0.0, 1001).certified
    assert certify(op, "weak_10", 0.5, 0.0, 1001).certified
    assert certify(op, "weak_11", 0.5, 0.0, 1001).certified


def test_certify_rejects_bad_input(cos_half):
    with pytest.raises(ValueError):
        certify(cos_half, "weak_11", 1.0, 0.0, 11)
    with pytest.raises(ValueError):
        certify(cos_half, "weak_11", 0.5, -1.0, 11)
    with pytest.raises(ValueError):
        certify(cos_half, "weak_11", 0.5, 0.0, 1)
    point = ScalarOperator("point", 0.5, 0.5, lambda t: t * 0 + 0.5)
    with pytest.raises(OperatorError, match="degenerate"):
        certify(point, "weak_11", 0.5, 0.0, 11)


def test_non_finite_map_names_point():
    op = ScalarOperator("recip", 0.0, 1.0, lambda t: np.divide(1.0, t), self_map_points=0)
    with pytest.raises(OperatorError, match="t = 0.0"):
        certify(op, "weak_11", 0.5, 0.0, 11)


def test_grid_density_env_override(monkeypatch, cos_half):
    monkeypatch.setenv("FPL_GRID_POINTS", "257")
    assert certify(cos_half, "weak_11", 0.5).grid_points == 257


# --- operators ------------------------------------------------------------


def test_self_map_enforced():
    with pytest.raises(NotSelfMapError):
        from_expression("x + 0.5", 0, 1)
    with pytest.raises(OperatorError):
        ScalarOperator("bad", 1.0, 0.0, lambda t: t)


def test_catalog_entries():
    assert (get_operator("cos_half").domain_lo, get_operator("cos_half").domain_hi) == (0.0, math.pi)
    assert get_operator("halving_jump")(1.0) == 0.25
    assert get_operator("halving_jump")(0.5) == 0.25
    assert get_operator("poly_approx")(1.0) == pytest.approx(0.7526, abs=1e-15)
    with pytest.raises(KeyError):
        get_operator("nope")


# --- sup distance ---------------------------------------------------------


def test_sup_distance_fine_grid():
    R = get_operator("cos_half").with_domain(0.0, 1.0)
    F = get_operator("poly_approx")
    assert sup_distance(R, F, 10**6 + 1) == pytest.approx(0.124978, abs=1e-4)


def test_sup_distance_endpoints_only():
    R = get_operator("cos_half").with_domain(0.0, 1.0)
    F = get_operator("poly_approx")
    assert sup_distance(R, F, 2) == pytest.approx(abs(math.cos(0.5) - 0.7526), abs=1e-15)
    assert sup_distance(R, F, 2) == pytest.approx(0.124983, abs=1e-6)


def test_sup_distance_identical_is_zero(cos_half):
    assert sup_distance(cos_half, cos_half, 101) == 0.0


def test_sup_distance_symmetric_and_monotone_under_nested_refinement():
    R = get_operator("cos_half").with_domain(0.0, 1.0)
    F = from_expression("1 - 0.3*x + 0.1*x^2", 0, 1)
    values = [sup_distance(R, F, n) for n in (3, 5, 9, 17, 33, 65)]
    assert values == sorted(values)
    assert sup_distance(R, F, 33) == sup_distance(F, R, 33)


def test_sup_distance_domain_mismatch(cos_half):
    with pytest.raises(OperatorError):
        sup_distance(cos_half, get_operator("poly_approx"), 11)


# --- fixed-point oracle ---------------------------------------------------


def test_oracle_cos_half(cos_half, s_star):
    est = oracle_fixed_point(cos_half, 1e-12)
    assert est.value == pytest.approx(s_star, abs=1e-12)
    assert round(est.value, 6) == 0.900367
    assert est.residual <= est.tol
    assert abs(math.cos(est.value / 2) - est.value) == pytest.approx(est.residual, abs=1e-15)


def test_oracle_halving_jump_endpoint():
    assert oracle_fixed_point(get_operator("halving_jump"), 1e-12).value == 0.0


def test_oracle_poly_approx():
    est = oracle_fixed_point(get_operator("poly_approx"), 1e-12)
    assert 0.828 < est.value < 0.830
    expected = brent_fixed_point(lambda t: 1 - 0.25 * t**2 + 0.0026 * t**4, 0, 1)
    assert est.value == pytest.approx(expected, abs=1e-12)


def test_oracle_machine_precision(cos_half, s_star):
    est = oracle_fixed_point(cos_half, 1e-15)
    assert abs(est.value - s_star) <= 4e-16


def test_oracle_no_bracket():
    op = ScalarOperator("shift", 0.0, 1.0, lambda t: t + 1, self_map_points=0)
    with pytest.raises(FixedPointError, match="no bracketed"):
        oracle_fixed_point(op)


def test_oracle_jump_without_root_is_reported():
    op = ScalarOperator("step", 0.0, 1.0, lambda t: np.where(np.asarray(t) < 0.5, 0.75, 0.25) + 0.0)
    with pytest.raises(FixedPointError, match="residual"):
        oracle_fixed_point(op)


def test_iteration_oracle_agrees(cos_half, s_star):
    est = iterate_fixed_point(cos_half, 1.0, 1e-14)
    assert est.value == pytest.approx(s_star, abs=1e-13)
    assert est.method.value == "fixed_tolerance_iteration"
