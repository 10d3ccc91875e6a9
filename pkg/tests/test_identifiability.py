import json

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from algest.identifiability import (
    CoefficientForm, MMatrix, NotIdentifiableError, build_M, build_estimator_system,
    is_projectively_identifiable, rank, recover_coefficients, to_coefficient_form,
)
from algest.models import (
    MinimalEquation, TimeOde, amplitude_model, frequency_model, homogenize, minimal_equation,
    phase_model, to_operational,
)
from algest.opcalc import AnnihilatorModule, DiffOp, LinearExpr, ParamField, RatFunc, SPoly

from helpers import QQF, S, to_sympy

XHAT = RatFunc.from_coeffs([2, 3], [5, 1, 1], QQF)


def _rational_setup(mult=None):
    me = minimal_equation(XHAT)
    if mult is not None:
        me = MinimalEquation((me.qs[0] * mult,), me.p * mult)
    cf = to_coefficient_form(me)
    return cf, build_M(cf, AnnihilatorModule.from_rational(XHAT))


# -- coefficient form ------------------------------------------------------------

def test_coefficient_form_order_zero():
    F = ParamField(["w"])
    w = F.gen("w")
    cf = to_coefficient_form(MinimalEquation((SPoly([w * w, 0, 1], F),), SPoly([w], F)))
    assert {(m, n) for _, m, n in cf.signal} == {(2, 0), (0, 0)}
    assert [(b, k) for b, k in cf.forcing] == [(w, 0)]
    assert (cf.N + 1, cf.M) == (2, 1)


def test_coefficient_form_frequency_kernel():
    model = frequency_model()
    h = homogenize(model.relation())
    cf = to_coefficient_form(MinimalEquation.from_relation(h))
    assert (cf.N + 1, cf.M) == (4, 0)


def test_coefficient_form_rational():
    cf, _ = _rational_setup()
    assert (cf.N + 1, cf.M) == (3, 2)
    assert cf.column_labels()[:3] == ["s^2 x^(0)", "s^1 x^(0)", "s^0 x^(0)"]


def test_coefficient_form_rejects_duplicates():
    with pytest.raises(ValueError):
        CoefficientForm(((1, 0, 0), (2, 0, 0)), (), QQF)


# -- the matrix M ------------------------------------------------------------------

def test_row_zero_is_column_functions():
    cf, M = _rational_setup()
    expect = [XHAT * RatFunc.s_power(m, field=QQF) for _, m, _ in cf.signal]
    expect += [RatFunc.s_power(k, field=QQF) for _, k in cf.forcing]
    assert [e.coords[0] for e in M.rows[0]] == expect


def test_entry_row_one_column_s_x():
    cf, M = _rational_setup()
    col = cf.column_labels().index("s^1 x^(0)")
    s = RatFunc.s_power(1, field=QQF)
    assert M.rows[1][col].coords[0] == XHAT + s * XHAT.diff()


def test_det_M_vanishes_symbolically():
    _, M = _rational_setup()
    q = S**2 + S + 5
    # row xi has denominators dividing q^(xi+1); clear them for a polynomial determinant
    mat = sympy.Matrix([[sympy.cancel(to_sympy(e.coords[0]) * q ** (xi + 1)) for e in row]
                        for xi, row in enumerate(M.rows)])
    assert all(x.is_polynomial(S) for x in mat)
    assert sympy.expand(mat.det(method="bareiss")) == 0


def test_det_M_vanishes_for_parametric_relation():
    model = amplitude_model(2)
    rel = model.relation()
    cf = to_coefficient_form(MinimalEquation.from_relation(rel))
    M = build_M(cf, AnnihilatorModule.from_operator(rel.lhs, rel.rhs))
    assert rank(M).rank < M.order


def test_build_M_field_mismatch():
    cf, _ = _rational_setup()
    F = ParamField(["w"])
    with pytest.raises(ValueError):
        build_M(cf, AnnihilatorModule([SPoly([1, 1], F)], SPoly([1], F)))


# -- rank --------------------------------------------------------------------------

def test_rank_of_minimal_equation():
    cf, M = _rational_setup()
    rep = rank(M)
    assert rep.rank == cf.N + cf.M == 4
    assert rep.probabilistic and len(rep.seeds) >= 3


def test_rank_drops_for_non_minimal_relation():
    cf, M = _rational_setup(SPoly([1, 1], QQF))
    assert rank(M).rank < cf.N + cf.M


def test_multiplying_by_s_only_shifts_monomials():
    # s*q0 and s*p have the same monomial counts, so the coefficient form
    # still has a one-dimensional kernel: the rank stays at N + M.
    cf, M = _rational_setup(SPoly([0, 1], QQF))
    assert rank(M).rank == cf.N + cf.M


def test_rank_of_zero_matrix():
    cf, M = _rational_setup()
    z = M.module.zero()
    Z = MMatrix(tuple(tuple(z for _ in row) for row in M.rows), M.module, cf)
    assert rank(Z).rank == 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_rank_independent_of_seed(seed):
    _, M = _rational_setup()
    assert rank(M, seed=seed).rank == 4


# -- projective identifiability ----------------------------------------------------

def test_corollary_instance_identifiable():
    cf, _ = _rational_setup()
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_rational(XHAT))
    assert rep.identifiable and rep.rank == 4
    assert cf.coefficients()[rep.normalization_index] != 0


def test_amplitude_theta_linearly_identifiable():
    rel = amplitude_model(2).relation()
    cf = to_coefficient_form(MinimalEquation.from_relation(rel))
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_operator(rel.lhs, rel.rhs))
    assert rep.identifiable
    assert "theta" in rep.linear_params


def test_degenerate_form_rejected():
    with pytest.raises(ValueError):
        is_projectively_identifiable(CoefficientForm(((0, 0, 0),), (), QQF))


def test_two_solves_are_proportional():
    cf, M = _rational_setup()
    v1 = recover_coefficients(M, 1, {}, 0)
    v2 = recover_coefficients(M, 2, {}, 0)
    assert v1 == v2
    truth = cf.coefficients()
    assert v1 == [c / truth[0] for c in truth]


def test_recovery_with_parameters():
    rel = amplitude_model(2).relation()
    cf = to_coefficient_form(MinimalEquation.from_relation(rel))
    M = build_M(cf, AnnihilatorModule.from_operator(rel.lhs, rel.rhs))
    v = recover_coefficients(M, 5, {"theta": 3}, 0)
    # (s^2 + 4) x - 2 theta = 0 with theta = 3
    assert v == [1, 4, -6]


def test_report_json():
    cf, _ = _rational_setup()
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_rational(XHAT))
    d = json.loads(json.dumps(rep.to_json()))
    assert d["verdict"] == "identifiable"
    assert d["expected_rank"] == d["rank"] == 4
    assert d["specialization_seeds"]


# -- estimator systems -------------------------------------------------------------

def test_amplitude_system():
    model = amplitude_model(2)
    sys = build_estimator_system(model.relation(), model.theta)
    assert sys.size == 1 and sys.multipliers == (3,)
    F = sys.field
    s3 = RatFunc.s_power(-3, field=F)
    x_part = LinearExpr(DiffOp({0: RatFunc(SPoly([4, 0, 1], F)) * s3}, F), RatFunc.const(0, F), F)
    unit = LinearExpr(DiffOp.zero(F), s3 * 2, F)
    assert sys.A[0][0] == unit and sys.B[0] == x_part
    assert sys.certificate["nonzero"]


def test_phase_system_two_by_two():
    model = phase_model(2)
    sys = build_estimator_system(model.relation(), model.theta)
    assert sys.size == 2 and sys.multipliers == (3, 4)
    assert sys.certificate["nonzero"]
    # rows from one relation are s-proportional; only the time-domain divisor is nonzero
    assert sys.certificate["operational_det_zero"]


def test_frequency_system_eliminates_initial_values():
    model = frequency_model()
    sys = build_estimator_system(model.relation(), model.theta)
    names = set()
    for row, b in sys.rows():
        for e in list(row) + [b]:
            names |= e.free_names()
    assert not names & {"x0", "x1"}
    assert sys.size == 1 and sys.certificate["nonzero"]


def test_empty_parameter_set():
    with pytest.raises(ValueError):
        build_estimator_system(amplitude_model(2).relation(), ())


def test_non_affine_parameter_rejected():
    F = ParamField(["th"])
    th = F.gen("th")
    rel = to_operational(TimeOde(F, ((0, 2, 1), (0, 0, th * th)), (0, 1)))
    with pytest.raises(NotIdentifiableError):
        build_estimator_system(rel, ("th",))


def test_absent_parameter_rejected():
    F = ParamField(["th", "u"])
    rel = to_operational(TimeOde(F, ((0, 2, 1), (0, 0, 4)), (0, F.gen("th"))))
    with pytest.raises(NotIdentifiableError):
        build_estimator_system(rel, ("u",))


def test_zero_perturbation_gives_zero_template():
    model = phase_model(2)
    sys = build_estimator_system(model.relation(), model.theta)
    zero = RatFunc.const(0, sys.field)
    for b_op, a_ops in sys.perturbation_template():
        assert b_op.apply(zero).is_zero()
        assert all(a.apply(zero).is_zero() for a in a_ops)


def test_system_satisfied_by_true_transform():
    # the exact operational identity A theta = B holds for x_hat = 2*theta/(s^2+4)
    model = amplitude_model(2)
    sys = build_estimator_system(model.relation(), model.theta)
    F = sys.field
    theta = F.gen("theta")
    xhat = RatFunc(SPoly([2 * theta], F), SPoly([4, 0, 1], F))

    def value(e):
        return e.op.apply(xhat) + e.unit

    assert value(sys.A[0][0]) * RatFunc.const(theta, F) == value(sys.B[0])
