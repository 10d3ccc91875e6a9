"""Compile strictly proper operational systems into iterated-integral plans.

Correspondences used (unilateral Laplace, t >= 0):

    (d/ds)^j x_hat   <->  (-t)^j x(t)
    s^-k Y(s)        <->  int_0^t (t-tau)^(k-1)/(k-1)! y(tau) dtau
    s^-m * 1         <->  t^(m-1)/(m-1)!

so ``c s^-k (d/ds)^j x_hat`` becomes the atom
``c int_0^t (t-tau)^(k-1)/(k-1)! (-tau)^j x(tau) dtau``.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Mapping, Sequence

from sympy import QQ

from . import qlinalg
from .opcalc import DiffOp, LinearExpr, RatFunc, SPoly
from .opcalc.field import random_rational
from .system import LinearSystemSpec

__all__ = [
    "IntegralAtom", "TimeFunctional", "EstimatorPlan", "CompileError",
    "normalize_strictly_proper", "compile_estimator", "perturbation_image",
    "properness_shift", "taylor_coefficients", "divisor_series", "certify_divisor",
]

MEASURED, UNIT, PERTURBATION = "measured", "unit", "perturbation"
SOURCES = (MEASURED, UNIT, PERTURBATION)


class CompileError(ValueError):
    pass


def _frac(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    return Fraction(int(q.numerator), int(q.denominator))


@dataclass(frozen=True, order=True)
class IntegralAtom:
    """``c * int_0^t (t-tau)^(k-1)/(k-1)! (-tau)^j y(tau) dtau`` (or ``c t^(k-1)/(k-1)!``
    for a unit atom)."""

    k: int
    j: int
    source: str
    c: Fraction = field(compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("atoms must be strictly proper (k >= 1)")
        if self.j < 0:
            raise ValueError("tau power must be >= 0")
        if self.source not in SOURCES:
            raise ValueError(f"unknown atom source {self.source!r}")
        if self.source == UNIT and self.j != 0:
            raise ValueError("unit atoms carry no tau power")
        object.__setattr__(self, "c", _frac(self.c))

    def key(self):
        return (self.k, self.j, self.source)

    def to_json(self) -> dict:
        return {"c": str(self.c), "k": self.k, "j": self.j, "source": self.source}

    @classmethod
    def from_json(cls, d: Mapping) -> IntegralAtom:
        return cls(int(d["k"]), int(d["j"]), d["source"], Fraction(d["c"]))

    def describe(self) -> str:
        if self.source == UNIT:
            return f"{self.c} * t^{self.k - 1}/{self.k - 1}!"
        y = "x" if self.source == MEASURED else "w"
        tau = "" if self.j == 0 else f"(-tau)^{self.j} "
        return f"{self.c} * int (t-tau)^{self.k - 1}/{self.k - 1}! {tau}{y}(tau) dtau"


class TimeFunctional:
    """A sum of atoms; atoms with equal (k, j, source) are merged."""

    __slots__ = ("atoms",)

    def __init__(self, atoms: Sequence[IntegralAtom] = ()):
        acc: dict = {}
        for a in atoms:
            acc[a.key()] = acc.get(a.key(), Fraction(0)) + a.c
        self.atoms = tuple(IntegralAtom(k, j, src, c) for (k, j, src), c in sorted(acc.items()) if c)

    def __eq__(self, other):
        if isinstance(other, TimeFunctional):
            return [(a.key(), a.c) for a in self.atoms] == [(a.key(), a.c) for a in other.atoms]
        return NotImplemented

    def __repr__(self):
        return f"TimeFunctional({' + '.join(a.describe() for a in self.atoms) or '0'})"

    def __add__(self, other: TimeFunctional) -> TimeFunctional:
        return TimeFunctional(self.atoms + other.atoms)

    def scaled(self, c) -> TimeFunctional:
        c = _frac(c)
        return TimeFunctional([IntegralAtom(a.k, a.j, a.source, a.c * c) for a in self.atoms])

    def with_source(self, src: str, only: str | None = MEASURED) -> TimeFunctional:
        """Atoms of source ``only`` relabelled as ``src``."""
        return TimeFunctional([IntegralAtom(a.k, a.j, src, a.c) for a in self.atoms
                               if only is None or a.source == only])

    def is_zero(self) -> bool:
        return not self.atoms

    def has_measured(self) -> bool:
        return any(a.source == MEASURED for a in self.atoms)

    def to_json(self) -> list:
        return [a.to_json() for a in self.atoms]

    @classmethod
    def from_json(cls, data) -> TimeFunctional:
        return cls([IntegralAtom.from_json(d) for d in data])


@dataclass(frozen=True)
class EstimatorPlan:
    """Time-domain estimator ``A(t) theta = B(t)``; divisor ``delta(t) = det A(t)``."""

    params: tuple
    A: tuple
    B: tuple

    def __post_init__(self):
        rho = len(self.params)
        if len(self.A) != rho or any(len(r) != rho for r in self.A) or len(self.B) != rho:
            raise ValueError("plan shape does not match parameter count")

    @property
    def size(self) -> int:
        return len(self.params)

    def functionals(self):
        for row in self.A:
            yield from row
        yield from self.B

    def measured_atom_count(self) -> int:
        return sum(1 for f in self.functionals() for a in f.atoms if a.source == MEASURED)

    def divisor_depends_on_signal(self) -> bool:
        return any(f.has_measured() for row in self.A for f in row)

    def to_json(self) -> dict:
        return {
            "params": list(self.params),
            "A": [[f.to_json() for f in row] for row in self.A],
            "B": [f.to_json() for f in self.B],
            "divisor": "det(A(t))",
        }

    @classmethod
    def from_json(cls, d: Mapping) -> EstimatorPlan:
        return cls(tuple(d["params"]),
                   tuple(tuple(TimeFunctional.from_json(f) for f in row) for row in d["A"]),
                   tuple(TimeFunctional.from_json(f) for f in d["B"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def table(self) -> str:
        lines = []
        for r, row in enumerate(self.A):
            for p, f in zip(self.params, row):
                for a in f.atoms:
                    lines.append(f"A[{r}][{p}]  {a.describe()}")
            for a in self.B[r].atoms:
                lines.append(f"B[{r}]      {a.describe()}")
        return "\n".join(lines)


# -- normalization ------------------------------------------------------------

def properness_shift(exprs: Sequence[LinearExpr]) -> int:
    """K = (largest nonnegative s power among the expressions) + 1, else 0."""
    powers = [e.max_s_power() for e in exprs]
    powers = [p for p in powers if p is not None]
    top = max(powers) if powers else -1
    return top + 1 if top >= 0 else 0


def normalize_strictly_proper(sys: LinearSystemSpec) -> LinearSystemSpec:
    """Multiply each row by s^-K_row so only negative powers of s remain."""
    factors = []
    for row, b in sys.rows():
        try:
            k = properness_shift(list(row) + [b])
        except ValueError as exc:
            raise CompileError(str(exc)) from exc
        factors.append(RatFunc.s_power(-k, field=sys.field))
    return sys.scale_rows(factors)


# -- compilation --------------------------------------------------------------

def _laurent_numeric(r: RatFunc, values: Mapping) -> dict[int, Fraction]:
    try:
        terms = r.laurent()
    except ValueError as exc:
        raise CompileError(str(exc)) from exc
    out = {}
    for e, c in terms.items():
        try:
            out[e] = _frac(r.field.evaluate(c, values))
        except ValueError as exc:
            raise CompileError(f"coefficient {r.field.to_str(c)} is not numeric: {exc}") from exc
    return out


def compile_expr(e: LinearExpr, values: Mapping | None = None) -> TimeFunctional:
    values = values or {}
    atoms = []
    for j, r in e.op.terms:
        for p, c in _laurent_numeric(r, values).items():
            if p >= 0:
                raise CompileError(f"s^{p} remains on x^({j}); normalize first")
            atoms.append(IntegralAtom(-p, j, MEASURED, c))
    for p, c in _laurent_numeric(e.unit, values).items():
        if p >= 0:
            raise CompileError(f"s^{p} remains on a known term; normalize first")
        atoms.append(IntegralAtom(-p, 0, UNIT, c))
    return TimeFunctional(atoms)


def compile_estimator(sys: LinearSystemSpec, values: Mapping | None = None) -> EstimatorPlan:
    """Translate a strictly proper system into an :class:`EstimatorPlan`.

    ``values`` supplies numbers for any remaining non-estimated parameters.
    """
    A = tuple(tuple(compile_expr(e, values) for e in row) for row in sys.A)
    B = tuple(compile_expr(b, values) for b in sys.B)
    return EstimatorPlan(tuple(sys.params), A, B)


def perturbation_image(plan: EstimatorPlan, theta: Sequence | None = None) -> list[TimeFunctional]:
    """Per row, the functional of w in ``A(x+w) theta = B(x+w) - [B_w - A_w theta]``.

    Evaluating the returned functionals on w gives the right-hand side of
    ``A(y) (theta_est - theta) = C(w)`` where ``y = x + w``.
    """
    needs_theta = plan.divisor_depends_on_signal()
    if needs_theta and theta is None:
        raise ValueError("A depends on the measured signal; pass the true parameters")
    out = []
    for r, row in enumerate(plan.A):
        f = plan.B[r].with_source(PERTURBATION)
        if needs_theta:
            for th, a in zip(theta, row):
                f = f + a.with_source(PERTURBATION).scaled(-_frac_any(th))
        out.append(f)
    return out


def _frac_any(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x)
    return _frac(x)


# -- exact divisor certification ---------------------------------------------

def taylor_coefficients(lhs: DiffOp, rhs: SPoly, values: Mapping, nterms: int,
                        rng: random.Random) -> list:
    """First ``nterms`` Taylor coefficients c_n of x(t) = sum c_n t^n/n! solving
    ``lhs(x_hat) = rhs`` with x_hat = sum c_n s^(-n-1).

    Free coefficients (unspecified initial values) are drawn from ``rng``.
    """
    fld = lhs.field
    terms = []  # (a, mu, j)
    for j, r in lhs.terms:
        for mu, c in _laurent_numeric(r, values).items():
            terms.append((QQ(c.numerator, c.denominator), mu, j))
    rhs_c = [fld.evaluate(c, values) for c in rhs.coeffs]
    d = max(mu - j for _, mu, j in terms)
    for e in range(d, len(rhs_c)):
        if rhs_c[e]:
            raise ValueError("relation has no solution decaying at s = infinity")
    rows, b = [], []
    for e in range(d - 1, d - 1 - nterms, -1):
        row = [QQ(0)] * nterms
        for a, mu, j in terms:
            n = mu - 1 - j - e
            if 0 <= n < nterms:
                rising = 1
                for i in range(1, j + 1):
                    rising *= n + i
                row[n] += a * (-1) ** j * rising
        rows.append(row)
        b.append(rhs_c[e] if 0 <= e < len(rhs_c) else QQ(0))
    return qlinalg.solve_any(rows, b, lambda: random_rational(rng, 1000))


def _functional_series(f: TimeFunctional, taylor: Sequence, order: int) -> list:
    out = [QQ(0)] * (order + 1)
    for a in f.atoms:
        c = QQ(a.c.numerator, a.c.denominator)
        if a.source == UNIT:
            if a.k - 1 <= order:
                out[a.k - 1] += c / factorial(a.k - 1)
            continue
        sign = -1 if a.j % 2 else 1
        for n, cn in enumerate(taylor):
            deg = a.k + a.j + n
            if deg > order:
                break
            if cn:
                out[deg] += sign * c * cn * QQ(factorial(a.j + n), factorial(n) * factorial(deg))
    return out


def _series_mul(a: list, b: list, order: int) -> list:
    out = [QQ(0)] * (order + 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j in range(0, order + 1 - i):
            if b[j]:
                out[i + j] += x * b[j]
    return out


def divisor_series(plan: EstimatorPlan, taylor: Sequence, order: int) -> list:
    """Exact power series of det A(t) up to ``t**order`` for x(t) = sum c_n t^n/n!."""
    rho = plan.size
    ent = [[_functional_series(f, taylor, order) for f in row] for row in plan.A]
    total = [QQ(0)] * (order + 1)
    for perm in itertools.permutations(range(rho)):
        inv = sum(1 for i in range(rho) for j in range(i + 1, rho) if perm[i] > perm[j])
        prod = [QQ(1)] + [QQ(0)] * order
        for r, c in enumerate(perm):
            prod = _series_mul(prod, ent[r][c], order)
        sign = -1 if inv % 2 else 1
        total = [t + sign * p for t, p in zip(total, prod)]
    return total


def certify_divisor(sys: LinearSystemSpec, seed: int = 0, nterms: int = 24) -> dict:
    """Probabilistic certificate that det A(t) is not identically zero.

    All parameters (estimated, known-symbolic and initial values) are
    specialized to random rationals, the signal's Taylor series is solved
    exactly from ``sys.relation``, and the divisor series is checked.
    """
    if sys.relation is None:
        raise ValueError("system carries no source relation")
    rng = random.Random(seed)
    fld = sys.field
    values = {n: random_rational(rng, 1000) for n in fld.names}
    rel = sys.relation
    lhs, rhs = rel.lhs, rel.rhs
    taylor = taylor_coefficients(lhs, rhs, values, nterms, rng)
    plan = compile_estimator(sys, values)
    ser = divisor_series(plan, taylor, nterms)
    lowest = next((i for i, c in enumerate(ser) if c), None)
    return {"nonzero": lowest is not None, "lowest_order": lowest, "seed": seed,
            "terms_checked": nterms}
