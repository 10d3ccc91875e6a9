"""Carrier signal classes and their operational-domain relations.

A time-domain ODE ``sum c * t**m * z^(nu)(t) = 0`` is mapped, through the
unilateral Laplace transform, to ``lhs(x_hat) = I(s)`` using

    z^(nu)      ->  s**nu x_hat - sum_{i<nu} s**(nu-1-i) z^(i)(0)
    t**m * (.)  ->  (-d/ds)**m (.)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.signal

from .opcalc import DiffOp, ParamField, RatFunc, SPoly
from .opcalc.field import to_mpq
from .sampled import Grid, SampledSignal

__all__ = [
    "TimeOde", "OperationalRelation", "MinimalEquation", "CarrierSpec", "EstimatorModel",
    "to_operational", "homogenize", "minimal_equation", "carrier_sample",
    "trig_sum_ode", "sinc_ode", "raised_cosine_ode", "carrier_ode",
    "amplitude_model", "frequency_model", "phase_model", "builtin_model", "BUILTIN_MODELS",
]


@dataclass(frozen=True)
class TimeOde:
    """``sum c * t**m * z^(nu)(t) = 0`` with initial values ``z^(i)(0)``.

    ``terms`` holds ``(m, nu, c)`` triples with ``c`` in ``field`` (or anything
    the field can convert); ``initial`` lists ``z(0), z'(0), ...``.
    """

    field: ParamField
    terms: tuple
    initial: tuple = ()

    def __post_init__(self):
        if not self.terms:
            raise ValueError("ODE needs at least one term")
        conv = []
        for m, nu, c in self.terms:
            if m < 0 or nu < 0:
                raise ValueError("powers of t and derivative orders must be >= 0")
            conv.append((int(m), int(nu), self.field.convert(c)))
        object.__setattr__(self, "terms", tuple(conv))
        order = max(nu for _, nu, _ in conv)
        init = tuple(self.field.convert(z) for z in self.initial)
        if len(init) < order:
            raise ValueError(f"need {order} initial values, got {len(init)}")
        object.__setattr__(self, "initial", init)

    @property
    def order(self) -> int:
        return max(nu for _, nu, _ in self.terms)


@dataclass(frozen=True)
class OperationalRelation:
    """``lhs(x_hat) = rhs(s)``."""

    lhs: DiffOp
    rhs: SPoly
    params: tuple = ()
    initial_names: tuple = ()

    @property
    def field(self) -> ParamField:
        return self.rhs.field

    def to_str(self) -> str:
        return f"[{self.lhs.to_str()}] x = {self.rhs.to_str()}"

    def residual(self, xhat: RatFunc) -> RatFunc:
        return self.lhs.apply(xhat) - RatFunc(self.rhs)


@dataclass(frozen=True)
class MinimalEquation:
    """``sum_i q_i x_hat^(i) = p`` with polynomial coefficients."""

    qs: tuple
    p: SPoly

    @property
    def order(self) -> int:
        return len(self.qs) - 1

    @property
    def field(self) -> ParamField:
        return self.p.field

    @classmethod
    def from_relation(cls, rel: OperationalRelation | DiffOp, rhs: SPoly | None = None,
                      normalize: bool = False) -> MinimalEquation:
        """Coefficient form of a relation whose operator has polynomial coefficients.

        No coprimality reduction is done unless ``normalize``; use this to
        inspect relations that are deliberately not minimal.
        """
        if isinstance(rel, OperationalRelation):
            lhs, rhs = rel.lhs, rel.rhs
        else:
            lhs = rel
        fld = lhs.field
        rhs = rhs if rhs is not None else SPoly((), fld)
        qs = []
        for j in range(lhs.order + 1):
            r = lhs.coeff(j)
            if not r.is_polynomial():
                raise ValueError("operator coefficients must be polynomial in s")
            qs.append(r.num * (1 / r.den.lc))
        me = cls(tuple(qs), rhs)
        return me.normalized() if normalize else me

    def normalized(self) -> MinimalEquation:
        """Divide out the common content in s and make q_n's leading coefficient 1."""
        g = self.p
        for q in self.qs:
            g = g.gcd(q) if not g.is_zero() else q.monic()
        qs = [q // g for q in self.qs] if g.degree > 0 else list(self.qs)
        p = self.p // g if g.degree > 0 else self.p
        inv = 1 / qs[-1].lc
        return MinimalEquation(tuple(q * inv for q in qs), p * inv)

    def operator(self) -> DiffOp:
        return DiffOp({i: RatFunc(q) for i, q in enumerate(self.qs)}, self.field)

    def residual(self, xhat: RatFunc) -> RatFunc:
        return self.operator().apply(xhat) - RatFunc(self.p)


# -- transform ----------------------------------------------------------------

def to_operational(ode: TimeOde, params: Sequence[str] = (),
                   initial_names: Sequence[str] | None = None,
                   normalize: bool = True) -> OperationalRelation:
    """Unilateral Laplace image of ``ode``; initial-value terms are collected in I(s).

    With ``normalize`` the relation is scaled so the leading s-coefficient of
    the highest-order operator coefficient is 1.
    """
    fld = ode.field
    s_op = DiffOp.mult(RatFunc.s_power(1, field=fld))
    minus_d = DiffOp.d(1, fld).scale(-1)
    lhs = DiffOp.zero(fld)
    rhs = RatFunc.const(0, fld)
    for m, nu, c in ode.terms:
        if not c:
            continue
        tm = minus_d ** m
        lhs = lhs + (tm * (s_op ** nu)).scale(c)
        ic_poly = SPoly([ode.initial[i] for i in range(nu - 1, -1, -1)], fld)
        # sum_{i<nu} s**(nu-1-i) z_i: coefficient of s**k is z_{nu-1-k}
        if not ic_poly.is_zero():
            rhs = rhs + tm.apply(RatFunc(ic_poly)) * c
    if not rhs.is_polynomial():
        raise AssertionError("initial-value image must be polynomial")
    rhs_poly = rhs.num * (1 / rhs.den.lc)
    if normalize and not lhs.is_zero():
        lead = lhs.coeff(lhs.order)
        lc = lead.num.lc / lead.den.lc
        if fld.is_constant(lc):
            inv = 1 / lc
            lhs = lhs.scale(inv)
            rhs_poly = rhs_poly * inv
    if initial_names is None:
        initial_names = tuple(sorted(set().union(*(fld.free_names(z) for z in ode.initial)) - set(params))) \
            if ode.initial else ()
    return OperationalRelation(lhs, rhs_poly, tuple(params), tuple(initial_names))


def homogenize(rel: OperationalRelation) -> DiffOp:
    """``(d/ds)**(deg I + 1) o lhs``; annihilates x_hat with no forcing term."""
    k = rel.rhs.degree + 1  # zero rhs: degree -1, no derivative
    if k == 0:
        return rel.lhs
    return DiffOp.d(k, rel.field) * rel.lhs


def minimal_equation(xhat: RatFunc) -> MinimalEquation:
    """Order-0 minimal equation ``q_0 x_hat = p`` of a rational transform."""
    if xhat.is_zero():
        raise ValueError("the zero signal has no minimal equation")
    # RatFunc is already in lowest terms with monic denominator
    return MinimalEquation((xhat.den,), xhat.num)


# -- carriers -----------------------------------------------------------------

@dataclass(frozen=True)
class CarrierSpec:
    """One of: ``trig-sum`` (amplitudes, freqs, phases), ``sinc`` (omega),
    ``raised-cosine`` (omega) or ``rational`` (a rational Laplace transform)."""

    kind: str
    amplitudes: tuple = ()
    freqs: tuple = ()
    phases: tuple = ()
    omega: float | None = None
    spectrum: RatFunc | None = None

    def __post_init__(self):
        if self.kind == "trig-sum":
            if not self.freqs:
                raise ValueError("trig-sum carrier needs at least one component")
            if not (len(self.amplitudes) == len(self.freqs) == len(self.phases)):
                raise ValueError("amplitudes, freqs and phases must have equal length")
            if any(not _positive(w) for w in self.freqs):
                raise ValueError("carrier frequencies must be > 0")
        elif self.kind in ("sinc", "raised-cosine"):
            if self.omega is None or not _positive(self.omega):
                raise ValueError(f"{self.kind} carrier needs omega > 0")
        elif self.kind == "rational":
            if self.spectrum is None:
                raise ValueError("rational carrier needs a spectrum")
        else:
            raise ValueError(f"unknown carrier kind {self.kind!r}")

    @classmethod
    def sine(cls, amplitude=1.0, omega=1.0, phase=0.0) -> CarrierSpec:
        return cls("trig-sum", (amplitude,), (omega,), (phase,))

    def is_numeric(self) -> bool:
        vals = list(self.amplitudes) + list(self.freqs) + list(self.phases)
        if self.omega is not None:
            vals.append(self.omega)
        if self.spectrum is not None and self.spectrum.free_names():
            return False
        return all(isinstance(v, (int, float, np.floating, np.integer)) for v in vals)

    def __call__(self, t) -> np.ndarray:
        return _carrier_eval(self, np.asarray(t, dtype=float))


def _positive(v) -> bool:
    try:
        return float(v) > 0
    except TypeError:
        return True  # symbolic: positivity cannot be checked


def _carrier_eval(c: CarrierSpec, t: np.ndarray) -> np.ndarray:
    if c.kind == "trig-sum":
        out = np.zeros_like(t)
        for a, w, p in zip(c.amplitudes, c.freqs, c.phases):
            out = out + a * np.sin(w * t + p)
        return out
    if c.kind == "sinc":
        w = c.omega
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.sin(w * t) / np.where(t == 0, 1.0, t)
        return np.where(t == 0, w, out)  # limit value at the origin
    if c.kind == "raised-cosine":
        return np.cos(c.omega * t) / (1.0 + t * t)
    # rational spectrum: impulse response of num/den
    num = [float(x) for x in reversed(c.spectrum.num.coeffs)]
    den = [float(x) for x in reversed(c.spectrum.den.coeffs)]
    if len(num) >= len(den):
        raise ValueError("rational carrier spectrum must be strictly proper")
    _, y = scipy.signal.impulse((num, den), T=t)
    return np.asarray(y, dtype=float)


def carrier_sample(c: CarrierSpec, grid: Grid) -> SampledSignal:
    if not c.is_numeric():
        raise ValueError("carrier parameters must be numeric to sample")
    return SampledSignal(grid, c(grid.times))


def trig_sum_ode(freqs: Sequence, field: ParamField, initial: Sequence | None = None) -> TimeOde:
    """prod_i (d^2/dt^2 + w_i^2) z = 0."""
    poly = SPoly([1], field)
    for w in freqs:
        w = field.convert(w)
        poly = poly * SPoly([w * w, 0, 1], field)
    terms = [(0, nu, c) for nu, c in enumerate(poly.coeffs) if c]
    order = poly.degree
    if initial is None:
        initial = [0] * order
    return TimeOde(field, tuple(terms), tuple(initial))


def sinc_ode(omega, field: ParamField) -> TimeOde:
    """t z'' + 2 z' + w^2 t z = 0 for z = sin(w t)/t; z(0) = w, z'(0) = 0."""
    w = field.convert(omega)
    return TimeOde(field, ((1, 2, 1), (0, 1, 2), (1, 0, w * w)), (w, 0))


def raised_cosine_ode(omega, field: ParamField) -> TimeOde:
    """ODE of z = cos(w t)/(1+t^2), from (d^2/dt^2 + w^2)((1+t^2) z) = 0."""
    w2 = field.convert(omega) ** 2
    terms = ((0, 2, 1), (2, 2, 1), (1, 1, 4), (0, 0, 2 + w2), (2, 0, w2))
    return TimeOde(field, terms, (1, 0))


def carrier_ode(c: CarrierSpec, field: ParamField | None = None) -> TimeOde:
    """Exact-rational ODE satisfied by a numeric carrier (floats read as decimals)."""
    field = field or ParamField()
    if c.kind == "trig-sum":
        ws = [to_mpq(w) for w in c.freqs]
        order = 2 * len(ws)
        init = []
        for i in range(order):
            val = sum(a * w ** i * np.sin(p + i * np.pi / 2)
                      for a, w, p in zip(c.amplitudes, c.freqs, c.phases))
            init.append(float(val))
        return trig_sum_ode(ws, field, init)
    if c.kind == "sinc":
        return sinc_ode(to_mpq(c.omega), field)
    if c.kind == "raised-cosine":
        return raised_cosine_ode(to_mpq(c.omega), field)
    raise ValueError("rational carriers are specified by their transform, not an ODE")


# -- built-in estimation models ----------------------------------------------

@dataclass(frozen=True)
class EstimatorModel:
    """A carrier family with unknown parameters entering its relation affinely.

    ``carrier(truth)`` builds the numeric carrier for given parameter values;
    ``truth_params`` maps user-facing truth values to the parameter symbols.
    """

    name: str
    ode: TimeOde
    theta: tuple
    known: dict = field(default_factory=dict)

    @property
    def field(self) -> ParamField:
        return self.ode.field

    def relation(self) -> OperationalRelation:
        return to_operational(self.ode, self.theta)

    def carrier(self, truth: dict) -> CarrierSpec:
        w = self.known.get("omega")
        if self.name == "amplitude":
            return CarrierSpec.sine(truth["theta"], w, 0.0)
        if self.name == "phase":
            a, b = truth["a"], truth["b"]
            return CarrierSpec.sine(float(np.hypot(a, b)), w, float(np.arctan2(b, a)))
        if self.name == "frequency":
            return CarrierSpec.sine(truth.get("amplitude", 1.0), float(np.sqrt(truth["theta"])),
                                    truth.get("phase", 0.0))
        raise ValueError(self.name)


def amplitude_model(omega) -> EstimatorModel:
    """x(t) = theta sin(omega t), omega known: (s^2+omega^2) x_hat = theta omega."""
    fld = ParamField(["theta"])
    w = fld.convert(omega)
    ode = TimeOde(fld, ((0, 2, 1), (0, 0, w * w)), (0, fld.gen("theta") * w))
    return EstimatorModel("amplitude", ode, ("theta",), {"omega": float(omega)})


def frequency_model() -> EstimatorModel:
    """z'' + theta z = 0 with unknown initial values; theta = omega^2."""
    fld = ParamField(["theta", "x0", "x1"])
    ode = TimeOde(fld, ((0, 2, 1), (0, 0, fld.gen("theta"))), (fld.gen("x0"), fld.gen("x1")))
    return EstimatorModel("frequency", ode, ("theta",))


def phase_model(omega) -> EstimatorModel:
    """x(t) = a sin(omega t) + b cos(omega t): (s^2+omega^2) x_hat = a omega + b s."""
    fld = ParamField(["a", "b"])
    w = fld.convert(omega)
    ode = TimeOde(fld, ((0, 2, 1), (0, 0, w * w)), (fld.gen("b"), fld.gen("a") * w))
    return EstimatorModel("phase", ode, ("a", "b"), {"omega": float(omega)})


BUILTIN_MODELS = {"amplitude": amplitude_model, "frequency": frequency_model, "phase": phase_model}


def builtin_model(name: str, **known) -> EstimatorModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    return factory(**known) if name != "frequency" else factory()
