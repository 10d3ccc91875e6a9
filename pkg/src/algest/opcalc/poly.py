"""Dense univariate polynomials in s and reduced rational functions over k0(Theta)."""
from __future__ import annotations

import math
from functools import cached_property
from typing import Mapping, Sequence

from sympy import QQ, ZZ
from sympy.polys.euclidtools import dup_gcd, dup_zz_heu_gcd
from sympy.polys.polyerrors import HeuristicGCDFailed

from .field import ParamField, QQ_FIELD

__all__ = ["SPoly", "RatFunc", "poly_lcm"]


_P = (1 << 61) - 1  # prime modulus for the coprimality shortcut


def _mod_p(coeffs) -> list[int]:
    """Coefficients scaled to integers (common denominator cleared), mod p."""
    dens = [int(c.denominator) for c in coeffs]
    L = math.lcm(*dens)
    return [int(c.numerator) * (L // d) % _P for c, d in zip(coeffs, dens)]


def _primitive_ints(coeffs) -> list:
    """Integer multiple of a QQ coefficient list, highest degree first."""
    L = math.lcm(*(int(c.denominator) for c in coeffs))
    return [ZZ(int(c.numerator) * (L // int(c.denominator))) for c in reversed(coeffs)]


def _qq_gcd(a, b) -> list:
    """Monic gcd of two QQ coefficient lists (lowest degree first)."""
    x, y = _primitive_ints(a), _primitive_ints(b)
    try:
        g = dup_zz_heu_gcd(x, y, ZZ)[0]
    except HeuristicGCDFailed:
        g = dup_gcd(x, y, ZZ)
    lc = g[0]
    return [QQ(int(c), int(lc)) for c in reversed(g)]


def _coprime_mod_p(a, b) -> bool:
    """True when gcd(a, b) = 1 is certified by a gcd computation mod a prime.

    Reduction mod p cannot lower the degree of a common factor as long as
    both leading coefficients survive, so a constant gcd mod p proves the
    rational gcd is constant.  False means "not certified", never "not coprime".
    """
    if len(a) < 2 or len(b) < 2:
        return len(a) == 1 or len(b) == 1
    x, y = _mod_p(a), _mod_p(b)
    if not x[-1] or not y[-1]:
        return False
    if len(x) < len(y):
        x, y = y, x
    while len(y) > 1:
        inv = pow(y[-1], -1, _P)
        dy = len(y) - 1
        while len(x) >= len(y):
            q = x[-1] * inv % _P
            shift = len(x) - len(y)
            for i in range(dy):
                x[shift + i] = (x[shift + i] - q * y[i]) % _P
            x.pop()
            while x and x[-1] == 0:
                x.pop()
        if not x:
            return False
        x, y = y, x
    return True


class SPoly:
    """Polynomial ``sum(c[i] * s**i)`` with coefficients in a :class:`ParamField`.

    The coefficient tuple is trimmed so that the last entry is nonzero; the
    zero polynomial has an empty tuple and degree -1.
    """

    __slots__ = ("field", "coeffs")

    def __init__(self, coeffs: Sequence = (), field: ParamField = QQ_FIELD):
        cs = [field.convert(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.field = field
        self.coeffs = tuple(cs)

    @classmethod
    def _raw(cls, coeffs, field):
        # coeffs already converted; trims only
        p = object.__new__(cls)
        cs = list(coeffs)
        while cs and not cs[-1]:
            cs.pop()
        p.field = field
        p.coeffs = tuple(cs)
        return p

    @classmethod
    def monomial(cls, power: int, coeff=1, field: ParamField = QQ_FIELD):
        return cls([0] * power + [coeff], field)

    @classmethod
    def constant(cls, c, field: ParamField = QQ_FIELD):
        return cls([c], field)

    # -- basic properties -----------------------------------------------------
    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lc(self):
        return self.coeffs[-1] if self.coeffs else self.field.zero

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_monomial(self) -> bool:
        return bool(self.coeffs) and all(not c for c in self.coeffs[:-1])

    def __getitem__(self, i):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else self.field.zero

    def __eq__(self, other):
        if isinstance(other, SPoly):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"SPoly({self.to_str()})"

    def to_str(self, var: str = "s") -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if not c:
                continue
            cs = self.field.to_str(c)
            if any(ch in cs for ch in "+- ") and i > 0:
                cs = f"({cs})"
            if i == 0:
                parts.append(cs)
            else:
                mon = var if i == 1 else f"{var}**{i}"
                parts.append(mon if cs == "1" else f"-{mon}" if cs == "-1" else f"{cs}*{mon}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- ring operations ------------------------------------------------------
    def _coerce(self, other) -> SPoly:
        if isinstance(other, SPoly):
            if other.field != self.field:
                raise ValueError("polynomials over different parameter fields")
            return other
        return SPoly([other], self.field)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] = out[i] + c
        return SPoly._raw(out, self.field)

    __radd__ = __add__

    def __neg__(self):
        return SPoly._raw([-c for c in self.coeffs], self.field)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, SPoly):
            c = self.field.convert(other)
            return SPoly._raw([c * a for a in self.coeffs], self.field)
        other = self._coerce(other)
        if not self.coeffs or not other.coeffs:
            return SPoly._raw((), self.field)
        out = [self.field.zero] * (len(self.coeffs) + len(other.coeffs) - 1)
        right = [(j, b) for j, b in enumerate(other.coeffs) if b]
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in right:
                    out[i + j] += a * b
        return SPoly._raw(out, self.field)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = SPoly.constant(1, self.field)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def shift(self, k: int) -> SPoly:
        """Multiply by s**k (k >= 0)."""
        if not self.coeffs:
            return self
        return SPoly._raw([self.field.zero] * k + list(self.coeffs), self.field)

    def divmod(self, other: SPoly) -> tuple[SPoly, SPoly]:
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        inv = 1 / other.lc
        quo = [self.field.zero] * max(len(rem) - dq, 0)
        for i in range(len(rem) - 1, dq - 1, -1):
            c = rem[i]
            if not c:
                continue
            q = c * inv
            quo[i - dq] = q
            for j, b in enumerate(other.coeffs):
                rem[i - dq + j] = rem[i - dq + j] - q * b
        return SPoly._raw(quo, self.field), SPoly._raw(rem[:dq], self.field)

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def monic(self) -> SPoly:
        if not self.coeffs:
            return self
        inv = 1 / self.lc
        return SPoly._raw([c * inv for c in self.coeffs], self.field)

    def gcd(self, other: SPoly) -> SPoly:
        """Monic GCD over the coefficient field.

        Delegates to sympy's dense univariate gcd, which avoids the
        coefficient growth of a plain Euclidean remainder sequence over QQ.
        """
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return (other if self.is_zero() else self).monic()
        if not self.field.names:
            if _coprime_mod_p(self.coeffs, other.coeffs):
                return SPoly._raw((self.field.one,), self.field)
            return SPoly._raw(_qq_gcd(self.coeffs, other.coeffs), self.field)
        g = dup_gcd(list(reversed(self.coeffs)), list(reversed(other.coeffs)), self.field.K)
        return SPoly._raw([self.field.convert(c) for c in reversed(g)], self.field).monic()

    def diff(self) -> SPoly:
        return SPoly._raw([i * c for i, c in enumerate(self.coeffs)][1:], self.field)

    # -- evaluation -----------------------------------------------------------
    def __call__(self, s):
        acc = self.field.zero
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def specialize(self, s, params: Mapping | None = None):
        """Exact rational value at s with parameters specialized."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * s + self.field.evaluate(c, params)
        return acc

    def substitute(self, values: Mapping) -> SPoly:
        return SPoly._raw([self.field.substitute(c, values) for c in self.coeffs], self.field)


def poly_lcm(polys) -> SPoly:
    """A least common multiple of nonzero polynomials (not normalized)."""
    polys = sorted(set(polys), key=lambda p: p.degree, reverse=True)
    L = polys[0]
    for d in polys[1:]:
        if d.degree <= 0 or (L % d).is_zero():
            continue
        g = L.gcd(d)
        L = L * (d // g) if g.degree > 0 else L * d
    return L


class RatFunc:
    """Element of k0(Theta)(s) kept in lowest terms with a monic denominator."""

    def __init__(self, num, den=None, *, field: ParamField | None = None, reduce: bool = True):
        if not isinstance(num, SPoly):
            num = SPoly([num], field or QQ_FIELD)
        fld = num.field
        if den is None:
            den = SPoly.constant(1, fld)
        elif not isinstance(den, SPoly):
            den = SPoly([den], fld)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            num, den = num, SPoly.constant(1, fld)
        elif reduce:
            if den.degree > 0:
                g = num.gcd(den)
                if g.degree > 0:
                    num, den = num // g, den // g
            lc = den.lc
            if lc != fld.one:
                inv = 1 / lc
                num, den = num * inv, den * inv
        self.num = num
        self.den = den

    # -- constructors ---------------------------------------------------------
    @classmethod
    def const(cls, c, field: ParamField = QQ_FIELD) -> RatFunc:
        return cls(SPoly([c], field))

    @classmethod
    def s_power(cls, k: int, coeff=1, field: ParamField = QQ_FIELD) -> RatFunc:
        """coeff * s**k for any integer k."""
        if k >= 0:
            return cls(SPoly.monomial(k, coeff, field))
        return cls(SPoly([coeff], field), SPoly.monomial(-k, 1, field))

    @classmethod
    def sum_of_products(cls, terms, field: ParamField = QQ_FIELD) -> RatFunc:
        """Reduced ``sum(c * a * b)`` over ``(c, a, b)`` triples.

        Products are left unreduced and summed over the common multiple
        ``lcm(a.den) * lcm(b.den)``, so one cancellation at the end replaces
        one per product and per partial sum.
        """
        parts = [(c, a, b) for c, a, b in terms if c and not a.is_zero() and not b.is_zero()]
        if not parts:
            return cls(SPoly((), field))
        if len(parts) == 1:
            c, a, b = parts[0]
            return a * b * c
        La = poly_lcm(a.den for _, a, _ in parts)
        Lb = poly_lcm(b.den for _, _, b in parts)
        num = SPoly((), field)
        for c, a, b in parts:
            num = num + (a.num * b.num * c) * ((La // a.den) * (Lb // b.den))
        return cls(num, La * Lb)

    @classmethod
    def from_coeffs(cls, num: Sequence, den: Sequence = (1,), field: ParamField = QQ_FIELD):
        return cls(SPoly(num, field), SPoly(den, field))

    @property
    def field(self) -> ParamField:
        return self.num.field

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __bool__(self):
        return not self.num.is_zero()

    def __eq__(self, other):
        if isinstance(other, RatFunc):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int,)):
            return self == RatFunc.const(other, self.field)
        return NotImplemented

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"RatFunc({self.to_str()})"

    def to_str(self, var: str = "s") -> str:
        if self.den.degree == 0:
            return self.num.to_str(var)
        return f"({self.num.to_str(var)})/({self.den.to_str(var)})"

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> RatFunc:
        if isinstance(other, RatFunc):
            if other.field != self.field:
                raise ValueError("rational functions over different parameter fields")
            return other
        if isinstance(other, SPoly):
            return RatFunc(other)
        return RatFunc.const(other, self.field)

    @classmethod
    def _make(cls, num: SPoly, den: SPoly) -> RatFunc:
        """Wrap a pair already in lowest terms; only the denominator is made monic."""
        r = object.__new__(cls)
        if num.is_zero():
            r.num, r.den = num, SPoly.constant(1, num.field)
            return r
        lc = den.lc
        if lc != num.field.one:
            inv = 1 / lc
            num, den = num * inv, den * inv
        r.num, r.den = num, den
        return r

    def __add__(self, other):
        other = self._coerce(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            return RatFunc(self.num + other.num, self.den)
        # Henrici: only the shared denominator factor can cancel
        g = self.den.gcd(other.den)
        if g.degree <= 0:
            num = self.num * other.den + other.num * self.den
            return RatFunc._make(num, self.den * other.den)
        d1, d2 = self.den // g, other.den // g
        num = self.num * d2 + other.num * d1
        den = d1 * other.den
        h = num.gcd(g)
        if h.degree > 0:
            num, den = num // h, den // h
        return RatFunc._make(num, den)

    __radd__ = __add__

    def __neg__(self):
        return RatFunc(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return RatFunc(SPoly((), self.field))
        if other.den.degree == 0 and other.num.degree == 0:
            return RatFunc._make(self.num * other.num[0], self.den * other.den[0])
        # Henrici: cancel crosswise between reduced operands
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        g1 = n1.gcd(d2) if d2.degree > 0 and n1.degree > 0 else None
        if g1 is not None and g1.degree > 0:
            n1, d2 = n1 // g1, d2 // g1
        g2 = n2.gcd(d1) if d1.degree > 0 and n2.degree > 0 else None
        if g2 is not None and g2.degree > 0:
            n2, d1 = n2 // g2, d1 // g2
        return RatFunc._make(n1 * n2, d1 * d2)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return self * RatFunc(other.den, other.num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return RatFunc(self.den, self.num) ** (-n)
        return RatFunc(self.num ** n, self.den ** n, reduce=False)

    def diff(self) -> RatFunc:
        """d/ds by the quotient rule."""
        if self.den.degree == 0:
            return RatFunc(self.num.diff() * (1 / self.den.lc), reduce=False)
        # with g = gcd(q, q'), u = q/g, v = q'/g: (p/q)' = (p'u - pv) / (qu), and
        # only factors of g can cancel
        p, q = self.num, self.den
        dq = q.diff()
        g = q.gcd(dq)
        if g.degree > 0:
            u, v = q // g, dq // g
        else:
            u, v = q, dq
        num = p.diff() * u - p * v
        den = q * u
        if g.degree > 0 and not num.is_zero():
            h = num.gcd(g)
            if h.degree > 0:
                num, den = num // h, den // h
        return RatFunc._make(num, den)

    @cached_property
    def _derivs(self) -> list:
        return [self]

    def nth_diff(self, n: int) -> RatFunc:
        cache = self._derivs
        while len(cache) <= n:
            cache.append(cache[-1].diff())
        return cache[n]

    # -- evaluation / inspection ---------------------------------------------
    def specialize(self, s, params: Mapping | None = None):
        den = self.den.specialize(s, params)
        if not den:
            raise ZeroDivisionError("pole at specialization point")
        return self.num.specialize(s, params) / den

    def substitute(self, values: Mapping) -> RatFunc:
        return RatFunc(self.num.substitute(values), self.den.substitute(values))

    def laurent(self) -> dict[int, object]:
        """Exponent -> coefficient map, for denominators that are powers of s.

        Raises ``ValueError`` for any other denominator.
        """
        if not self.den.is_monomial():
            raise ValueError(f"denominator {self.den.to_str()} is not a power of s")
        shift = self.den.degree
        return {i - shift: c for i, c in enumerate(self.num.coeffs) if c}

    def max_s_power(self) -> int | None:
        """Largest exponent of s in the Laurent expansion (None for zero)."""
        if self.is_zero():
            return None
        return max(self.laurent())

    def free_names(self) -> set[str]:
        out = set()
        for c in self.num.coeffs + self.den.coeffs:
            out |= self.field.free_names(c)
        return out
