"""Random generators and small utilities shared by the test modules."""
from __future__ import annotations

import random

import numpy as np
import sympy
from hypothesis import strategies as st

from algest.compiler import compile_estimator
from algest.identifiability import build_estimator_system
from algest.models import builtin_model
from algest.opcalc import DiffOp, ParamField, RatFunc, SPoly

QQF = ParamField()
S = sympy.Symbol("s")


def rand_poly(rng: random.Random, max_deg: int, field: ParamField = QQF, lo: int = -5, hi: int = 5) -> SPoly:
    return SPoly([rng.randint(lo, hi) for _ in range(rng.randint(0, max_deg) + 1)], field)


def rand_ratfunc(rng: random.Random, num_deg: int = 3, den_deg: int = 3, field: ParamField = QQF) -> RatFunc:
    while True:
        den = rand_poly(rng, den_deg, field)
        if not den.is_zero():
            return RatFunc(rand_poly(rng, num_deg, field), den)


def rand_diffop(rng: random.Random, order: int = 2, num_deg: int = 3, den_deg: int = 3,
                field: ParamField = QQF) -> DiffOp:
    top = rng.randint(0, order)
    return DiffOp({j: rand_ratfunc(rng, num_deg, den_deg, field) for j in range(top + 1)}, field)


# hypothesis strategies ------------------------------------------------------

small_ints = st.integers(min_value=-6, max_value=6)


@st.composite
def spolys(draw, max_deg: int = 4):
    return SPoly(draw(st.lists(small_ints, min_size=0, max_size=max_deg + 1)), QQF)


@st.composite
def ratfuncs(draw, num_deg: int = 3, den_deg: int = 2):
    num = draw(spolys(num_deg))
    den = draw(spolys(den_deg).filter(lambda p: not p.is_zero()))
    return RatFunc(num, den)


@st.composite
def diffops(draw, order: int = 2):
    k = draw(st.integers(min_value=0, max_value=order))
    return DiffOp({j: draw(ratfuncs()) for j in range(k + 1)}, QQF)


# sympy oracle ------------------------------------------------------------------

def to_sympy(r: RatFunc):
    num = sum(sympy.Rational(str(c)) * S ** i for i, c in enumerate(r.num.coeffs))
    den = sum(sympy.Rational(str(c)) * S ** i for i, c in enumerate(r.den.coeffs))
    return num / den


def sympy_apply(op: DiffOp, f: RatFunc):
    e = to_sympy(f)
    return sum(to_sympy(r) * sympy.diff(e, S, j) for j, r in op.terms)


def same_function(a, b) -> bool:
    # compare through the numerator as a Poly; sympy's cancel can return an
    # unevaluated sum of rationals such as -1/2 + 1/2
    num, _ = sympy.fraction(sympy.together(a - b))
    return sympy.Poly(sympy.expand(num), S).is_zero


# plans -------------------------------------------------------------------------

def plan_for(name: str, **known):
    model = builtin_model(name, **known)
    sys = build_estimator_system(model.relation(), model.theta)
    return model, sys, compile_estimator(sys, {})


def rel_err(est: float, truth: float) -> float:
    return abs(est - truth) / abs(truth)


def log_ratio(a: float, b: float) -> float:
    return float(np.log2(a / b))
