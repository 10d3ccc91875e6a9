"""Finite-dimensional k(s)-module spanned by 1, x_hat, ..., x_hat^(n-1).

A minimal equation ``sum_{i<=n} q_i x_hat^(i) = p`` gives the reduction rule

    x_hat^(n) = p/q_n * 1 - sum_{i<n} q_i/q_n * x_hat^(i)

so every operator image of the signal has unique coordinates on the basis
``(1, x_hat, ..., x_hat^(n-1))``.
"""
from __future__ import annotations

import threading
from typing import Mapping, Sequence

from .diffop import LinearExpr
from .field import ParamField
from .poly import RatFunc, SPoly

__all__ = ["AnnihilatorModule", "ModuleElement", "module_reduce"]


class ModuleElement:
    """Coordinates ``(c_one, c_0, ..., c_{n-1})`` on ``(1, x_hat, ..., x_hat^(n-1))``."""

    __slots__ = ("module", "coords")

    def __init__(self, module: AnnihilatorModule, coords: Sequence[RatFunc]):
        if len(coords) != module.order + 1:
            raise ValueError(f"expected {module.order + 1} coordinates, got {len(coords)}")
        self.module = module
        self.coords = tuple(coords)

    def __eq__(self, other):
        if isinstance(other, ModuleElement):
            return self.coords == other.coords
        return NotImplemented

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return f"ModuleElement({[c.to_str() for c in self.coords]})"

    def __add__(self, other: ModuleElement) -> ModuleElement:
        return ModuleElement(self.module, [a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other: ModuleElement) -> ModuleElement:
        return ModuleElement(self.module, [a - b for a, b in zip(self.coords, other.coords)])

    def __neg__(self) -> ModuleElement:
        return ModuleElement(self.module, [-a for a in self.coords])

    def scale(self, r) -> ModuleElement:
        if not isinstance(r, RatFunc):
            r = RatFunc.const(r, self.module.field)
        return ModuleElement(self.module, [r * a for a in self.coords])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coords)

    def diff(self) -> ModuleElement:
        """d/ds, reducing x_hat^(n) through the module rule."""
        m = self.module
        n = m.order
        out = [c.diff() for c in self.coords]
        if n == 0:
            return ModuleElement(m, out)
        top = self.coords[n]  # coefficient of x_hat^(n-1) -> produces x_hat^(n)
        for k in range(1, n):
            out[k + 1] = out[k + 1] + self.coords[k]
        if not top.is_zero():
            for i, r in enumerate(m.rule):
                out[i] = out[i] + top * r
        return ModuleElement(m, out)

    def specialize(self, s, params: Mapping, basis_values: Sequence) -> object:
        """Exact value with x_hat^(k) replaced by ``basis_values[k]``."""
        acc = self.coords[0].specialize(s, params)
        for c, v in zip(self.coords[1:], basis_values):
            if not c.is_zero():
                acc = acc + c.specialize(s, params) * v
        return acc


class AnnihilatorModule:
    """Module defined by a minimal (or homogenized) equation of order n.

    Parameters
    ----------
    qs : sequence of SPoly
        ``q_0 .. q_n``; ``q_n`` must be nonzero.
    p : SPoly
        Right-hand side polynomial.
    """

    def __init__(self, qs: Sequence[SPoly], p: SPoly):
        qs = list(qs)
        while len(qs) > 1 and qs[-1].is_zero():
            qs.pop()
        if not qs or qs[-1].is_zero():
            raise ValueError("leading coefficient q_n must be nonzero")
        self.field: ParamField = qs[-1].field
        self.order = len(qs) - 1
        qn = RatFunc(qs[-1])
        rule = [RatFunc(p) / qn]
        rule += [-(RatFunc(q) / qn) for q in qs[:-1]]
        # x_hat^(n) = rule[0]*1 + sum rule[k+1]*x_hat^(k)
        self.rule = tuple(rule)
        self._basis_cache: list[ModuleElement] = []
        self._lock = threading.Lock()

    @classmethod
    def from_rational(cls, xhat: RatFunc) -> AnnihilatorModule:
        """Order-0 module of a rational transform: q_0 x_hat = p."""
        return cls([xhat.den], xhat.num)

    @classmethod
    def from_operator(cls, lhs, rhs: SPoly | None = None) -> AnnihilatorModule:
        """Module of ``lhs(x_hat) = rhs`` with polynomial coefficients in s."""
        fld = lhs.field
        denoms = SPoly.constant(1, fld)
        for _, r in lhs.terms:
            denoms = _lcm(denoms, r.den)
        qs = [(lhs.coeff(j) * RatFunc(denoms)).num for j in range(lhs.order + 1)]
        p = rhs if rhs is not None else SPoly((), fld)
        return cls(qs, p * denoms)

    def element(self, coords: Sequence[RatFunc]) -> ModuleElement:
        return ModuleElement(self, coords)

    def zero(self) -> ModuleElement:
        z = RatFunc.const(0, self.field)
        return ModuleElement(self, [z] * (self.order + 1))

    def one(self) -> ModuleElement:
        z = RatFunc.const(0, self.field)
        return ModuleElement(self, [RatFunc.const(1, self.field)] + [z] * self.order)

    def derivative_of_signal(self, k: int) -> ModuleElement:
        """Coordinates of x_hat^(k) for any k >= 0."""
        with self._lock:
            cache = self._basis_cache
            if not cache:
                n = self.order
                z = RatFunc.const(0, self.field)
                one = RatFunc.const(1, self.field)
                for i in range(n):
                    coords = [z] * (n + 1)
                    coords[i + 1] = one
                    cache.append(ModuleElement(self, coords))
                cache.append(ModuleElement(self, self.rule))
            while len(cache) <= k:
                cache.append(cache[-1].diff())
            return cache[k]


def module_reduce(expr, m: AnnihilatorModule) -> ModuleElement:
    """Reduce a formal sum of ``r(s) x_hat^(k)`` and ``r(s) * 1`` to coordinates.

    ``expr`` is a :class:`LinearExpr` or a mapping ``{k or None: RatFunc}``
    where the key ``None`` denotes the constant 1.
    """
    if isinstance(expr, LinearExpr):
        items = [(j, r) for j, r in expr.op.terms]
        if not expr.unit.is_zero():
            items.append((None, expr.unit))
    else:
        items = list(expr.items())
    acc = m.zero()
    for k, r in items:
        if r.is_zero():
            continue
        base = m.one() if k is None else m.derivative_of_signal(k)
        acc = acc + base.scale(r)
    return acc


def _lcm(a: SPoly, b: SPoly) -> SPoly:
    g = a.gcd(b)
    return (a * b // g).monic()
