"""Exact operational calculus: k0(Theta), polynomials in s, d/ds operators."""
from .diffop import DiffOp, LinearExpr
from .field import QQ_FIELD, ParamField, to_mpq
from .module import AnnihilatorModule, ModuleElement, module_reduce
from .poly import RatFunc, SPoly


def diffop_apply(op: DiffOp, f: RatFunc) -> RatFunc:
    return op.apply(f)


def diffop_mul(a: DiffOp, b: DiffOp) -> DiffOp:
    return a * b


__all__ = [
    "AnnihilatorModule", "DiffOp", "LinearExpr", "ModuleElement", "ParamField",
    "QQ_FIELD", "RatFunc", "SPoly", "diffop_apply", "diffop_mul", "module_reduce",
    "to_mpq",
]
