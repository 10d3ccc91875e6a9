import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algest.compiler import compile_expr, properness_shift
from algest.models import (
    CarrierSpec, MinimalEquation, OperationalRelation, TimeOde, carrier_ode, carrier_sample,
    homogenize, minimal_equation, raised_cosine_ode, sinc_ode, to_operational,
)
from algest.opcalc import DiffOp, LinearExpr, ParamField, RatFunc, SPoly
from algest.runtime import quadrature
from algest.sampled import Grid

from helpers import QQF, rand_poly


def _op(field, coeffs):
    """DiffOp from {order: [poly coeffs]}."""
    return DiffOp({j: RatFunc(SPoly(c, field)) for j, c in coeffs.items()}, field)


# -- to_operational ----------------------------------------------------------------

def test_harmonic_oscillator_transform():
    F = ParamField(["w", "x0", "x1"])
    w, x0, x1 = F.gen("w"), F.gen("x0"), F.gen("x1")
    ode = TimeOde(F, ((0, 2, 1), (0, 0, w * w)), (x0, x1))
    rel = to_operational(ode)
    assert rel.lhs == _op(F, {0: [w * w, 0, 1]})
    assert rel.rhs == SPoly([x1, x0], F)
    assert set(rel.initial_names) == {"x0", "x1"}


def test_sinc_transform_and_closed_form():
    F = ParamField(["w"])
    w = F.gen("w")
    rel = to_operational(sinc_ode(w, F))
    assert rel.lhs == _op(F, {1: [w * w, 0, 1]})
    assert rel.rhs == SPoly([-w], F)
    # d/ds arctan(w/s) = -w/(s^2+w^2), so the relation holds for the closed form
    wv = 1.7
    for s in (0.5, 2.0, 9.0):
        deriv = -wv / (s * s + wv * wv)
        assert math.isclose((s * s + wv * wv) * deriv, -wv)


def test_raised_cosine_is_second_order():
    rel = to_operational(raised_cosine_ode(2, QQF))
    assert rel.lhs.order == 2
    assert rel.lhs == _op(QQF, {2: [4, 0, 1], 0: [4, 0, 1]})
    assert rel.rhs == SPoly([0, 1], QQF)


def test_initial_value_count_enforced():
    with pytest.raises(ValueError):
        TimeOde(QQF, ((0, 2, 1),), (1,))
    with pytest.raises(ValueError):
        TimeOde(QQF, ())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(-4, 4), st.integers(-4, 4))
def test_transform_is_linear(seed, alpha, beta):
    rng = random.Random(seed)

    def terms():
        return [(rng.randint(0, 2), rng.randint(0, 2), rng.randint(-5, 5)) for _ in range(3)]

    t1, t2 = terms(), terms()
    init = (rng.randint(-3, 3), rng.randint(-3, 3))
    combo = [(m, n, alpha * c) for m, n, c in t1] + [(m, n, beta * c) for m, n, c in t2]
    r1 = to_operational(TimeOde(QQF, tuple(t1), init), normalize=False)
    r2 = to_operational(TimeOde(QQF, tuple(t2), init), normalize=False)
    rc = to_operational(TimeOde(QQF, tuple(combo), init), normalize=False)
    assert rc.lhs == r1.lhs.scale(alpha) + r2.lhs.scale(beta)
    assert rc.rhs == r1.rhs * alpha + r2.rhs * beta


def test_transform_of_rational_signal_matches_its_laplace_image():
    # z = exp(-2t): z' + 2z = 0, z(0) = 1 -> (s+2) x = 1
    ode = TimeOde(QQF, ((0, 1, 1), (0, 0, 2)), (1,))
    rel = to_operational(ode)
    xhat = RatFunc(SPoly([1], QQF), SPoly([2, 1], QQF))
    assert rel.residual(xhat).is_zero()


# -- homogenize --------------------------------------------------------------------

def test_homogenize_zero_rhs_is_identity():
    lhs = _op(QQF, {1: [1, 0, 1], 0: [0, 3]})
    rel = OperationalRelation(lhs, SPoly((), QQF))
    assert homogenize(rel) == lhs


def test_homogenize_oscillator():
    F = ParamField(["w", "x0", "x1"])
    w = F.gen("w")
    rel = to_operational(TimeOde(F, ((0, 2, 1), (0, 0, w * w)), (F.gen("x0"), F.gen("x1"))))
    h = homogenize(rel)
    assert h == _op(F, {2: [w * w, 0, 1], 1: [0, 4], 0: [2]})
    assert not (h.free_names() & {"x0", "x1"})


def test_homogenize_sinc():
    F = ParamField(["w"])
    w = F.gen("w")
    h = homogenize(to_operational(sinc_ode(w, F)))
    assert h == _op(F, {2: [w * w, 0, 1], 1: [0, 2]})


def test_homogenized_operator_annihilates_rational_transform():
    xhat = RatFunc.from_coeffs([2, 3], [5, 1, 1], QQF)
    rel = OperationalRelation(DiffOp({0: RatFunc(xhat.den)}, QQF), xhat.num)
    assert homogenize(rel).apply(xhat).is_zero()


# -- minimal_equation --------------------------------------------------------------

def test_minimal_equation_reciprocal():
    me = minimal_equation(RatFunc.s_power(-1, field=QQF))
    assert me.order == 0
    assert me.qs == (SPoly([0, 1], QQF),) and me.p == SPoly([1], QQF)


def test_minimal_equation_already_reduced():
    me = minimal_equation(RatFunc.from_coeffs([2, 3], [5, 1, 1], QQF))
    assert me.qs[0] == SPoly([5, 1, 1], QQF) and me.p == SPoly([2, 3], QQF)


def test_minimal_equation_cancels_common_factor():
    num = SPoly([-1, 0, 1], QQF)
    den = SPoly([-1, 1], QQF) * SPoly([4, 0, 1], QQF)
    me = minimal_equation(RatFunc(num, den))
    assert me.qs[0] == SPoly([4, 0, 1], QQF) and me.p == SPoly([1, 1], QQF)


def test_minimal_equation_rejects_zero():
    with pytest.raises(ValueError):
        minimal_equation(RatFunc.const(0, QQF))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_minimality_normal_form(seed):
    rng = random.Random(seed)
    p = rand_poly(rng, 3)
    q = rand_poly(rng, 3)
    g = rand_poly(rng, 2)
    if p.is_zero() or q.is_zero() or g.is_zero():
        return
    me = minimal_equation(RatFunc(p, q))
    assert me.p.gcd(me.qs[0]).degree == 0
    # multiplying through by g and re-normalizing gives back the same equation
    padded = MinimalEquation((q * g,), p * g).normalized()
    assert padded.qs == me.qs and padded.p == me.p


# -- carriers ----------------------------------------------------------------------

def test_sample_sine():
    sig = carrier_sample(CarrierSpec.sine(1.0, 2.0, 0.0), Grid(math.pi / 4, 3))
    np.testing.assert_allclose(sig.values, [0.0, 1.0, 0.0], atol=1e-15)


def test_sample_sinc_limit():
    sig = carrier_sample(CarrierSpec("sinc", omega=3.0), Grid(0.1, 3))
    assert sig.values[0] == 3.0
    assert math.isclose(sig.values[1], math.sin(0.3) / 0.1)


def test_sample_raised_cosine():
    sig = carrier_sample(CarrierSpec("raised-cosine", omega=2.0), Grid(0.5, 3))
    assert sig.values[0] == 1.0
    assert math.isclose(sig.values[2], math.cos(2.0) / 2)


def test_carrier_validation():
    with pytest.raises(ValueError):
        CarrierSpec("trig-sum")
    with pytest.raises(ValueError):
        CarrierSpec("sinc", omega=-1.0)
    F = ParamField(["w"])
    with pytest.raises(ValueError):
        carrier_sample(CarrierSpec("sinc", omega=F.gen("w")), Grid(0.1, 3))


def test_rational_carrier_samples_impulse_response():
    spec = CarrierSpec("rational", spectrum=RatFunc(SPoly([1], QQF), SPoly([2, 1], QQF)))
    sig = carrier_sample(spec, Grid(0.25, 5))
    np.testing.assert_allclose(sig.values, np.exp(-2 * sig.grid.times), rtol=1e-6)


def _annihilation_residual(carrier: CarrierSpec, segments: int) -> tuple[float, float]:
    """Time-domain value of the homogenized relation on samples, and its scale."""
    rel = to_operational(carrier_ode(carrier))
    h = homogenize(rel)
    expr = LinearExpr(h, RatFunc.const(0, h.field), h.field)
    k = properness_shift([expr])
    f = compile_expr(expr.scale(RatFunc.s_power(-k, field=h.field)))
    x = carrier_sample(carrier, Grid.over(1.0, segments))
    vals = [quadrature(a, x, 1.0) for a in f.atoms]
    return abs(sum(vals)), max(abs(v) for v in vals)


@pytest.mark.parametrize("seed", range(3))
def test_homogenized_relation_annihilates_samples(seed):
    rng = random.Random(seed)
    carriers = [
        CarrierSpec("trig-sum", (round(rng.uniform(0.5, 2), 3), round(rng.uniform(0.5, 2), 3)),
                    (round(rng.uniform(1, 4), 3), round(rng.uniform(5, 8), 3)),
                    (round(rng.uniform(0, 3), 3), round(rng.uniform(0, 3), 3))),
        CarrierSpec("sinc", omega=round(rng.uniform(1, 5), 3)),
        CarrierSpec("raised-cosine", omega=round(rng.uniform(1, 5), 3)),
    ]
    for c in carriers:
        res, scale = _annihilation_residual(c, 2000)
        assert res <= 1e-9 * max(scale, 1.0), (c.kind, res, scale)
