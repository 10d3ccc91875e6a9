"""Operational-domain linear systems ``A theta = B`` with LinearExpr entries."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .opcalc import DiffOp, LinearExpr, ParamField

__all__ = ["LinearSystemSpec"]


@dataclass(frozen=True)
class LinearSystemSpec:
    """``sum_i A[r][i] * theta_i = B[r]`` for each row r.

    Entries act on the measured transform ``x_hat`` (plus known multiples of
    1).  With a perturbation w the same operators act on ``w``; see
    :meth:`perturbation_template`.
    """

    params: tuple
    A: tuple
    B: tuple
    field: ParamField
    relation: object = None
    multipliers: tuple = ()
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        rho = len(self.params)
        if len(self.A) != rho or any(len(row) != rho for row in self.A) or len(self.B) != rho:
            raise ValueError(f"system shape does not match {rho} parameters")

    @property
    def size(self) -> int:
        return len(self.params)

    def rows(self):
        for a_row, b in zip(self.A, self.B):
            yield a_row, b

    def scale_rows(self, factors: Sequence) -> LinearSystemSpec:
        A = tuple(tuple(e.scale(f) for e in row) for row, f in zip(self.A, factors))
        B = tuple(b.scale(f) for b, f in zip(self.B, factors))
        return replace(self, A=A, B=B)

    def perturbation_template(self) -> list[tuple[DiffOp, list[DiffOp]]]:
        """Per row: the operator applied to w on the B side and on each A entry.

        The row's perturbation term is ``B_op(w) - sum_i theta_i A_op_i(w)``.
        """
        return [(b.op, [a.op for a in row]) for row, b in self.rows()]

    def is_strictly_proper(self) -> bool:
        for row, b in self.rows():
            for e in list(row) + [b]:
                p = e.max_s_power()
                if p is not None and p >= 0:
                    return False
        return True

    def to_str(self) -> str:
        lines = []
        for r, (row, b) in enumerate(self.rows()):
            lhs = " + ".join(f"{p}*({e.to_str()})" for p, e in zip(self.params, row) if not e.is_zero())
            lines.append(f"row {r}: {lhs or '0'} = {b.to_str()}")
        return "\n".join(lines)


def expr_zero(field: ParamField) -> LinearExpr:
    return LinearExpr(None, None, field)
