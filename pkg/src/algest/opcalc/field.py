"""Coefficient field k0(Theta): rational functions in named parameters over QQ.

Elements are sympy ``FracElement`` objects (or gmpy ``mpq`` when the field has
no parameters).  All construction goes through :meth:`ParamField.convert` so
that elements of one field never silently mix with foreign types.
"""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterable, Mapping

import sympy
from sympy import QQ
from sympy.polys.fields import FracElement

__all__ = ["ParamField", "QQ_FIELD", "to_mpq"]


def to_mpq(value):
    """Exact conversion of int / Fraction / float / str / mpq to a QQ element."""
    if isinstance(value, bool):
        raise TypeError("bool is not a number")
    if isinstance(value, int):
        return QQ(value)
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, float):
        # decimal reading, so 0.7 means 7/10 rather than its binary expansion
        f = Fraction(repr(value))
        return QQ(f.numerator, f.denominator)
    if isinstance(value, str):
        f = Fraction(value)
        return QQ(f.numerator, f.denominator)
    if type(value) is type(QQ(1)):
        return value
    if isinstance(value, sympy.Rational):
        return QQ(int(value.p), int(value.q))
    raise TypeError(f"cannot convert {value!r} to an exact rational")


class ParamField:
    """The field QQ(theta_1, ..., theta_r) of parameter scalars."""

    def __init__(self, names: Iterable[str] = ()):
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate parameter names: {self.names}")
        if self.names:
            self.K = QQ.frac_field(*sympy.symbols(self.names))
            self._frac = self.K.field
            self._gens = dict(zip(self.names, self.K.gens))
        else:
            self.K = QQ
            self._frac = None
            self._gens = {}
        self.zero = self.K.zero
        self.one = self.K.one

    def __repr__(self):
        return f"ParamField({list(self.names)!r})"

    def __eq__(self, other):
        return isinstance(other, ParamField) and other.names == self.names

    def __hash__(self):
        return hash(("ParamField", self.names))

    # -- construction ---------------------------------------------------------
    def gen(self, name: str):
        try:
            return self._gens[name]
        except KeyError:
            raise KeyError(f"{name!r} is not a parameter of {self!r}") from None

    def convert(self, value):
        if self._frac is not None and isinstance(value, FracElement):
            if value.field is self._frac:
                return value
            return self.K.from_sympy(value.as_expr())
        if isinstance(value, str):
            return self.parse(value)
        if isinstance(value, sympy.Basic):
            return self.K.from_sympy(value)
        return self.K.convert(to_mpq(value))

    def parse(self, text: str):
        """Parse an expression such as ``"theta*omega/2"`` into the field."""
        local = {n: sympy.Symbol(n) for n in self.names}
        expr = sympy.sympify(text, locals=local, rational=True)
        unknown = {str(sym) for sym in expr.free_symbols} - set(self.names)
        if unknown:
            raise ValueError(f"unknown symbols {sorted(unknown)} in {text!r}")
        return self.K.from_sympy(expr)

    def to_str(self, elem) -> str:
        return str(self.K.to_sympy(elem))

    # -- predicates -----------------------------------------------------------
    def is_zero(self, elem) -> bool:
        return not elem

    def free_names(self, elem) -> set[str]:
        if self._frac is None:
            return set()
        used = set()
        for poly in (elem.numer, elem.denom):
            for monom in poly.monoms():
                used.update(n for n, e in zip(self.names, monom) if e)
        return used

    def is_constant(self, elem) -> bool:
        return not self.free_names(elem)

    def sign_hint(self, elem) -> int:
        """Sign of the leading numeric coefficient (a convention, not an order)."""
        if not elem:
            return 0
        if self._frac is None:
            return 1 if elem > 0 else -1
        lead = elem.numer.LC * elem.denom.LC
        return 1 if lead > 0 else -1

    # -- specialization -------------------------------------------------------
    def substitute(self, elem, values: Mapping[str, object]):
        """Replace some parameters by exact rationals; result stays in this field."""
        if self._frac is None or not values:
            return elem
        pairs = [(self._gens[k], to_mpq(v)) for k, v in values.items() if k in self._gens]
        if not pairs:
            return elem
        return self.convert(elem.subs(pairs))

    def evaluate(self, elem, values: Mapping[str, object] | None = None):
        """Exact rational value of ``elem``; every free parameter must be given.

        Raises ``ZeroDivisionError`` at a pole.
        """
        if self._frac is None:
            return elem
        values = values or {}
        used = self.free_names(elem)
        missing = used - set(values)
        if missing:
            raise ValueError(f"no value for parameters {sorted(missing)}")
        ring = elem.numer.ring
        point = [(g, to_mpq(values[n]) if n in used else QQ(0))
                 for g, n in zip(ring.gens, self.names)]
        num = elem.numer.evaluate(point)
        den = elem.denom.evaluate(point)
        if not den:
            raise ZeroDivisionError("parameter specialization hits a pole")
        return QQ(num) / QQ(den)

    def random_point(self, rng: random.Random, bound: int = 10**6) -> dict:
        return {n: random_rational(rng, bound) for n in self.names}


def random_rational(rng: random.Random, bound: int = 10**6):
    num = rng.randint(-bound, bound)
    den = rng.randint(1, bound)
    return QQ(num, den)


QQ_FIELD = ParamField()
