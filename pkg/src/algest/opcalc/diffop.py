"""Linear differential operators sum(r_j(s) (d/ds)^j) in normal form.

Derivatives are kept on the right.  Composition uses the Leibniz rule
``(d/ds)^i r = sum_l C(i, l) r^(l) (d/ds)^(i-l)``.
"""
from __future__ import annotations

from math import comb
from typing import Iterable, Mapping

from .field import ParamField, QQ_FIELD
from .poly import RatFunc, SPoly

__all__ = ["DiffOp", "LinearExpr"]


class DiffOp:
    __slots__ = ("field", "terms")

    def __init__(self, terms: Mapping[int, RatFunc] | Iterable[tuple[int, RatFunc]] = (),
                 field: ParamField | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, RatFunc] = {}
        fld = field
        for j, r in items:
            if j < 0:
                raise ValueError("negative derivative order")
            if not isinstance(r, RatFunc):
                r = RatFunc.const(r, fld or QQ_FIELD)
            fld = fld or r.field
            acc[j] = acc[j] + r if j in acc else r
        self.field = fld or QQ_FIELD
        self.terms = tuple(sorted((j, r) for j, r in acc.items() if not r.is_zero()))

    # -- constructors ---------------------------------------------------------
    @classmethod
    def d(cls, order: int = 1, field: ParamField = QQ_FIELD) -> DiffOp:
        return cls({order: RatFunc.const(1, field)}, field)

    @classmethod
    def mult(cls, r, field: ParamField = QQ_FIELD) -> DiffOp:
        """Multiplication operator by a RatFunc / SPoly / scalar."""
        if isinstance(r, SPoly):
            r = RatFunc(r)
        elif not isinstance(r, RatFunc):
            r = RatFunc.const(r, field)
        return cls({0: r}, r.field)

    @classmethod
    def identity(cls, field: ParamField = QQ_FIELD) -> DiffOp:
        return cls.mult(1, field)

    @classmethod
    def zero(cls, field: ParamField = QQ_FIELD) -> DiffOp:
        return cls((), field)

    # -- inspection -----------------------------------------------------------
    @property
    def order(self) -> int:
        return self.terms[-1][0] if self.terms else -1

    def coeff(self, j: int) -> RatFunc:
        for jj, r in self.terms:
            if jj == j:
                return r
        return RatFunc.const(0, self.field)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, DiffOp):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        return f"DiffOp({self.to_str()})"

    def to_str(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for j, r in reversed(self.terms):
            rs = r.to_str()
            if j == 0:
                parts.append(rs)
                continue
            dj = "D" if j == 1 else f"D^{j}"
            parts.append(dj if rs == "1" else f"({rs})*{dj}")
        return " + ".join(parts)

    # -- algebra --------------------------------------------------------------
    def _coerce(self, other) -> DiffOp:
        if isinstance(other, DiffOp):
            if other.field != self.field and other.terms and self.terms:
                raise ValueError("operators over different parameter fields")
            return other
        return DiffOp.mult(other, self.field)

    def __add__(self, other):
        other = self._coerce(other)
        fld = self.field if self.terms else other.field
        return DiffOp(list(self.terms) + list(other.terms), fld)

    __radd__ = __add__

    def __neg__(self):
        return DiffOp([(j, -r) for j, r in self.terms], self.field)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, r) -> DiffOp:
        """Left multiplication by a rational function or scalar."""
        if not isinstance(r, RatFunc):
            r = RatFunc(r) if isinstance(r, SPoly) else RatFunc.const(r, self.field)
        return DiffOp([(j, r * c) for j, c in self.terms], self.field)

    def __mul__(self, other):
        """Composition ``self o other``."""
        other = self._coerce(other)
        fld = self.field if self.terms else other.field
        if not self.terms or not other.terms:
            return DiffOp.zero(fld)
        top = self.terms[-1][0]
        derivs = {}
        for j, b in other.terms:
            ds = [b]
            while len(ds) <= top and not ds[-1].is_zero():
                ds.append(ds[-1].diff())
            if ds[-1].is_zero():
                ds.pop()
            derivs[j] = ds
        out: dict[int, list] = {}
        for i, a in self.terms:
            for j, ds in derivs.items():
                # a D^i b D^j = a sum_l C(i,l) b^(l) D^(i-l+j)
                for l, bl in enumerate(ds[:i + 1]):
                    out.setdefault(i - l + j, []).append((comb(i, l), a, bl))
        return DiffOp({k: RatFunc.sum_of_products(v, fld) for k, v in out.items()}, fld)

    def __rmul__(self, other):
        return self._coerce(other) * self

    def __pow__(self, n: int) -> DiffOp:
        result = DiffOp.identity(self.field)
        for _ in range(n):
            result = result * self
        return result

    def apply(self, f: RatFunc) -> RatFunc:
        """sum_j r_j * f^(j)."""
        if not self.terms:
            return RatFunc.const(0, f.field)
        derivs = [f]
        while len(derivs) <= self.terms[-1][0]:
            derivs.append(derivs[-1].diff())
        return RatFunc.sum_of_products([(1, r, derivs[j]) for j, r in self.terms], f.field)

    __call__ = apply

    def substitute(self, values: Mapping) -> DiffOp:
        return DiffOp([(j, r.substitute(values)) for j, r in self.terms], self.field)

    def free_names(self) -> set[str]:
        out = set()
        for _, r in self.terms:
            out |= r.free_names()
        return out


class LinearExpr:
    """The formal element ``op(x_hat) + unit * 1`` of span_{k(s)[d/ds]}(1, x_hat).

    This is the entry type of estimator systems: ``op`` acts on the unknown
    signal transform, ``unit`` is a known rational function.
    """

    __slots__ = ("op", "unit")

    def __init__(self, op: DiffOp | None = None, unit: RatFunc | None = None,
                 field: ParamField | None = None):
        fld = field or (op.field if op is not None else unit.field if unit is not None else QQ_FIELD)
        self.op = op if op is not None else DiffOp.zero(fld)
        if unit is None:
            unit = RatFunc.const(0, fld)
        elif isinstance(unit, SPoly):
            unit = RatFunc(unit)
        self.unit = unit

    @property
    def field(self) -> ParamField:
        return self.unit.field

    @classmethod
    def signal(cls, order: int = 0, coeff: RatFunc | None = None, field: ParamField = QQ_FIELD):
        """coeff * x_hat^(order)."""
        if coeff is None:
            coeff = RatFunc.const(1, field)
        elif not isinstance(coeff, RatFunc):
            coeff = RatFunc(coeff) if isinstance(coeff, SPoly) else RatFunc.const(coeff, field)
        return cls(DiffOp({order: coeff}, coeff.field), None, coeff.field)

    @classmethod
    def constant(cls, unit: RatFunc) -> LinearExpr:
        return cls(None, unit, unit.field)

    def is_zero(self) -> bool:
        return self.op.is_zero() and self.unit.is_zero()

    def __eq__(self, other):
        if isinstance(other, LinearExpr):
            return self.op == other.op and self.unit == other.unit
        return NotImplemented

    def __hash__(self):
        return hash((self.op, self.unit))

    def __repr__(self):
        return f"LinearExpr({self.to_str()})"

    def to_str(self) -> str:
        parts = []
        if not self.op.is_zero():
            parts.append(f"[{self.op.to_str()}]x")
        if not self.unit.is_zero():
            parts.append(self.unit.to_str())
        return " + ".join(parts) or "0"

    def __add__(self, other: LinearExpr) -> LinearExpr:
        return LinearExpr(self.op + other.op, self.unit + other.unit, self.field)

    def __neg__(self) -> LinearExpr:
        return LinearExpr(-self.op, -self.unit, self.field)

    def __sub__(self, other: LinearExpr) -> LinearExpr:
        return self + (-other)

    def scale(self, r) -> LinearExpr:
        """Left multiplication by a rational function / scalar."""
        if not isinstance(r, RatFunc):
            r = RatFunc(r) if isinstance(r, SPoly) else RatFunc.const(r, self.field)
        return LinearExpr(self.op.scale(r), self.unit * r, self.field)

    def apply_op(self, op: DiffOp) -> LinearExpr:
        """Apply a differential operator to this expression."""
        return LinearExpr(op * self.op, op.apply(self.unit), self.field)

    def diff(self) -> LinearExpr:
        return self.apply_op(DiffOp.d(1, self.field))

    def substitute(self, values: Mapping) -> LinearExpr:
        return LinearExpr(self.op.substitute(values), self.unit.substitute(values), self.field)

    def coefficients(self) -> list[RatFunc]:
        return [r for _, r in self.op.terms] + ([self.unit] if not self.unit.is_zero() else [])

    def max_s_power(self) -> int | None:
        powers = [r.max_s_power() for r in self.coefficients()]
        powers = [p for p in powers if p is not None]
        return max(powers) if powers else None

    def free_names(self) -> set[str]:
        return self.op.free_names() | self.unit.free_names()
