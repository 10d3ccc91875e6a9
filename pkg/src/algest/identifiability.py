"""Linear and projective-linear identifiability of relation coefficients.

For ``sum a_{mu nu} s^mu x_hat^(nu) - sum b_kappa s^kappa = 0`` the matrix M
has row xi = the xi-th s-derivatives of the column functions
``s^mu x_hat^(nu)`` and ``s^kappa``.  The constant vector (a, -b) is in its
kernel; minimality of the relation makes the kernel one-dimensional.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from . import qlinalg
from .compiler import certify_divisor, properness_shift
from .models import MinimalEquation, OperationalRelation, homogenize
from .opcalc import AnnihilatorModule, DiffOp, LinearExpr, ModuleElement, ParamField, RatFunc, SPoly
from .opcalc.field import random_rational
from .system import LinearSystemSpec

__all__ = [
    "CoefficientForm", "MMatrix", "RankReport", "IdentifiabilityReport", "RankError",
    "NotIdentifiableError", "to_coefficient_form", "build_M", "rank", "recover_coefficients",
    "is_projectively_identifiable", "build_estimator_system", "split_affine",
]

SPECIALIZATION_BOUND = 10 ** 6
MAX_POLE_RETRIES = 20


class RankError(RuntimeError):
    pass


class NotIdentifiableError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientForm:
    """Signal terms ``(a, mu, nu)`` and forcing terms ``(b, kappa)``."""

    signal: tuple
    forcing: tuple
    field: ParamField

    def __post_init__(self):
        if len({(m, n) for _, m, n in self.signal}) != len(self.signal):
            raise ValueError("duplicate signal monomials")
        if len({k for _, k in self.forcing}) != len(self.forcing):
            raise ValueError("duplicate forcing monomials")

    @property
    def N(self) -> int:
        return len(self.signal) - 1

    @property
    def M(self) -> int:
        return len(self.forcing)

    @property
    def size(self) -> int:
        return self.N + self.M + 1

    def coefficients(self) -> list:
        """Column coefficient vector (a..., -b...) annihilating M."""
        return [a for a, _, _ in self.signal] + [-b for b, _ in self.forcing]

    def column_labels(self) -> list[str]:
        return ([f"s^{m} x^({n})" for _, m, n in self.signal]
                + [f"s^{k}" for _, k in self.forcing])

    def to_json(self) -> dict:
        f = self.field
        return {
            "signal": [{"coeff": f.to_str(a), "s_power": m, "d_order": n} for a, m, n in self.signal],
            "forcing": [{"coeff": f.to_str(b), "s_power": k} for b, k in self.forcing],
            "N": self.N, "M": self.M,
        }


def to_coefficient_form(me: MinimalEquation) -> CoefficientForm:
    signal = []
    for nu, q in enumerate(me.qs):
        for mu, a in enumerate(q.coeffs):
            if a:
                signal.append((a, mu, nu))
    forcing = [(b, k) for k, b in enumerate(me.p.coeffs) if b]
    # highest derivative order first, then highest s power
    signal.sort(key=lambda t: (-t[2], -t[1]))
    forcing.sort(key=lambda t: -t[1])
    return CoefficientForm(tuple(signal), tuple(forcing), me.field)


@dataclass(frozen=True)
class MMatrix:
    rows: tuple  # rows of ModuleElement
    module: AnnihilatorModule
    form: CoefficientForm

    @property
    def order(self) -> int:
        return len(self.rows)


def build_M(cf: CoefficientForm, m: AnnihilatorModule) -> MMatrix:
    if cf.field != m.field:
        raise ValueError("coefficient form and module live over different fields")
    size = cf.size
    columns = []
    for _, mu, nu in cf.signal:
        base = m.derivative_of_signal(nu).scale(RatFunc.s_power(mu, field=cf.field))
        columns.append(base)
    for _, kappa in cf.forcing:
        columns.append(m.one().scale(RatFunc.s_power(kappa, field=cf.field)))
    # column-wise successive derivatives
    table = [columns]
    for _ in range(1, size):
        table.append([c.diff() for c in table[-1]])
    return MMatrix(tuple(tuple(r) for r in table), m, cf)


@dataclass
class RankReport:
    rank: int
    probabilistic: bool
    seeds: list
    samples: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"rank": self.rank, "probabilistic": self.probabilistic,
                "seeds": self.seeds, "samples": self.samples}


def _specialize(M: MMatrix, rng: random.Random, params: dict | None = None) -> list[list]:
    """Numeric matrix at random (params, s, basis values); retries on poles."""
    fld = M.module.field
    n = M.module.order
    for _ in range(MAX_POLE_RETRIES):
        pt = params if params is not None else fld.random_point(rng, SPECIALIZATION_BOUND)
        s = random_rational(rng, SPECIALIZATION_BOUND)
        basis = [random_rational(rng, SPECIALIZATION_BOUND) for _ in range(n)]
        try:
            return [[e.specialize(s, pt, basis) for e in row] for row in M.rows]
        except ZeroDivisionError:
            continue
    raise RankError(f"every one of {MAX_POLE_RETRIES} specializations hit a pole")


def rank(M: MMatrix, seed: int = 0, repeats: int = 3) -> RankReport:
    """Rank over the function field by exact elimination at random rational points.

    The basis elements x_hat^(k), k < n, are treated as independent
    indeterminates.  Three specializations are taken; disagreement triggers
    three more and the majority wins (ties go to the larger rank, since
    specialization can only lower rank).
    """
    if not M.rows or all(e.is_zero() for row in M.rows for e in row):
        return RankReport(0, False, [])
    seeds, samples = [], []
    for batch in range(2):
        for i in range(repeats):
            sd = seed * 1000 + batch * repeats + i
            rng = random.Random(sd)
            samples.append(qlinalg.rank(_specialize(M, rng)))
            seeds.append(sd)
        if len(set(samples)) == 1:
            break
    counts = Counter(samples)
    best = max(counts.items(), key=lambda kv: (kv[1], kv[0]))[0]
    return RankReport(best, True, seeds, samples)


def recover_coefficients(M: MMatrix, seed: int, params: dict, normalize_at: int) -> list:
    """Kernel vector of M specialized at ``params`` (fresh s / basis draws),
    scaled so entry ``normalize_at`` equals 1."""
    rng = random.Random(seed)
    mat = _specialize(M, rng, params)
    ker = qlinalg.nullspace(mat)
    if len(ker) != 1:
        raise RankError(f"kernel has dimension {len(ker)}, expected 1")
    v = ker[0]
    if not v[normalize_at]:
        raise RankError("normalization entry vanishes in the kernel vector")
    inv = 1 / v[normalize_at]
    return [x * inv for x in v]


@dataclass
class IdentifiabilityReport:
    identifiable: bool
    rank: int
    N: int
    M: int
    normalization_index: int | None
    normalization_label: str | None
    seeds: list
    probabilistic: bool = True
    linear_params: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "verdict": "identifiable" if self.identifiable else "not-identifiable",
            "rank": self.rank, "N": self.N, "M": self.M, "expected_rank": self.N + self.M,
            "normalization_index": self.normalization_index,
            "normalization_column": self.normalization_label,
            "linearly_identifiable_params": self.linear_params,
            "probabilistic": self.probabilistic, "specialization_seeds": self.seeds,
        }


def is_projectively_identifiable(cf: CoefficientForm, module: AnnihilatorModule | None = None,
                                 seed: int = 0) -> IdentifiabilityReport:
    """Rank test: identifiable up to one scalar iff rank M = N + M.

    The normalization column prefers a coefficient that is a known nonzero
    constant; the ratios to it are then the coefficients themselves, so every
    parameter entering them affinely is linearly identifiable.
    """
    if not cf.signal or all(not a for a, _, _ in cf.signal):
        raise ValueError("coefficient form has no signal terms")
    if module is None:
        qs = [SPoly((), cf.field)] * (max(n for _, _, n in cf.signal) + 1)
        qs = list(qs)
        for a, mu, nu in cf.signal:
            qs[nu] = qs[nu] + SPoly.monomial(mu, a, cf.field)
        p = SPoly((), cf.field)
        for b, k in cf.forcing:
            p = p + SPoly.monomial(k, b, cf.field)
        module = AnnihilatorModule(qs, p)
    M = build_M(cf, module)
    rep = rank(M, seed)
    ok = rep.rank == cf.N + cf.M
    coeffs = cf.coefficients()
    labels = cf.column_labels()
    norm = next((i for i, c in enumerate(coeffs) if c and cf.field.is_constant(c)), None)
    if norm is None:
        norm = next((i for i, c in enumerate(coeffs) if c), None)
    linear = []
    if ok and norm is not None and cf.field.is_constant(coeffs[norm]):
        linear = sorted(set().union(*(cf.field.free_names(c) for c in coeffs)))
    return IdentifiabilityReport(ok, rep.rank, cf.N, cf.M, norm if ok else None,
                                 labels[norm] if ok and norm is not None else None,
                                 rep.seeds, True, linear)


# -- estimator systems --------------------------------------------------------

def split_affine(e: LinearExpr, theta: Sequence[str]) -> tuple[LinearExpr, list[LinearExpr]]:
    """Write ``e = e0 + sum theta_i e_i`` exactly; raises if e is not affine in theta."""
    zero = {t: 0 for t in theta}
    e0 = e.substitute(zero)
    parts = []
    for t in theta:
        vals = dict(zero)
        vals[t] = 1
        parts.append(e.substitute(vals) - e0)
    fld = e.field
    recon = e0
    for t, p in zip(theta, parts):
        recon = recon + p.scale(fld.gen(t))
    if recon != e:
        raise NotIdentifiableError(f"relation is not affine in {list(theta)}")
    for p in [e0] + parts:
        if p.free_names() & set(theta):
            raise NotIdentifiableError(f"relation is not affine in {list(theta)}")
    return e0, parts


def build_estimator_system(rel: OperationalRelation, theta: Sequence[str],
                           nuisance: Sequence[str] | None = None, multiplier_offset: int = 0,
                           certify: bool = True, seed: int = 0) -> LinearSystemSpec:
    """Eq.-(3)-style system for ``theta`` from one relation.

    Nuisance symbols (by default the relation's initial-value symbols not in
    ``theta``) are removed by homogenization.  The single relation
    ``sum theta_i P_i = P_0`` is replicated into rho rows by the multipliers
    ``s^-m``, ``m = K + offset, ..., K + offset + rho - 1``.
    """
    theta = tuple(theta)
    if not theta:
        raise ValueError("empty parameter set")
    fld = rel.field
    for t in theta:
        fld.gen(t)
    nuisance = set(rel.initial_names if nuisance is None else nuisance) - set(theta)
    rhs_names = set().union(*(fld.free_names(c) for c in rel.rhs.coeffs)) if rel.rhs.coeffs else set()
    if nuisance & rhs_names:
        lhs, rhs = homogenize(rel), SPoly((), fld)
        source = OperationalRelation(lhs, rhs, rel.params, rel.initial_names)
    else:
        lhs, rhs, source = rel.lhs, rel.rhs, rel
    if lhs.free_names() & nuisance:
        raise NotIdentifiableError(f"nuisance symbols {sorted(nuisance)} survive homogenization")
    # relation as expression: lhs(x) - rhs*1 = 0
    expr = LinearExpr(lhs, RatFunc(-rhs), fld)
    e0, parts = split_affine(expr, theta)
    if all(p.is_zero() for p in parts):
        raise NotIdentifiableError(f"{list(theta)} do not appear in the relation")
    # sum theta_i parts_i = -e0
    a_row = list(parts)
    b = -e0
    lead = next((p for p in a_row if not p.is_zero()), None)
    if lead is not None and _sign(lead) < 0:
        a_row = [-p for p in a_row]
        b = -b
    K = properness_shift(a_row + [b]) + multiplier_offset
    rho = len(theta)
    mults = tuple(K + i for i in range(rho))
    A, B = [], []
    for m in mults:
        f = RatFunc.s_power(-m, field=fld)
        A.append(tuple(p.scale(f) for p in a_row))
        B.append(b.scale(f))
    sys = LinearSystemSpec(theta, tuple(A), tuple(B), fld, source, mults)
    if certify:
        cert = certify_divisor(sys, seed)
        cert["operational_det_zero"] = _operational_det_zero(sys, lhs, rhs, seed)
        if not cert["nonzero"]:
            raise NotIdentifiableError("divisor vanishes identically: not identifiable with "
                                       "this multiplier family")
        sys = LinearSystemSpec(sys.params, sys.A, sys.B, fld, source, mults, cert)
    return sys


def _sign(e: LinearExpr) -> int:
    fld = e.field
    if not e.op.is_zero():
        _, r = e.op.terms[-1]
    else:
        r = e.unit
    return fld.sign_hint(r.num.lc)


def _operational_det_zero(sys: LinearSystemSpec, lhs: DiffOp, rhs: SPoly, seed: int) -> bool:
    """Whether det A vanishes as an element of k(s)<x_hat> (generic specialization).

    Rows produced from a single relation by s^-m multipliers are
    k(s)-proportional, so this is True whenever rho > 1; the time-domain
    divisor is what the estimator actually divides by.
    """
    try:
        module = AnnihilatorModule.from_operator(lhs, rhs)
    except ValueError:
        return False
    from .opcalc import module_reduce
    rng = random.Random(seed + 7)
    fld = sys.field
    for _ in range(MAX_POLE_RETRIES):
        pt = fld.random_point(rng, SPECIALIZATION_BOUND)
        s = random_rational(rng, SPECIALIZATION_BOUND)
        basis = [random_rational(rng, SPECIALIZATION_BOUND) for _ in range(module.order)]
        try:
            mat = [[module_reduce(e, module).specialize(s, pt, basis) for e in row] for row in sys.A]
        except ZeroDivisionError:
            continue
        return not qlinalg.det(mat)
    return False
