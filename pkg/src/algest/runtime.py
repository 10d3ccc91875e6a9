"""Numeric evaluation of estimator plans on sampled signals.

Each measured atom is one quadrature pass of the kernel
``c (t-tau)^(k-1)/(k-1)! (-tau)^j`` against the samples, so a functional
reduces to a weight vector ``g`` and a known constant ``u``:
``F(x) = sum_i g_i x_i + u``.  Sums use numpy's pairwise ``sum`` (never BLAS)
so results do not depend on thread scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np
import scipy.signal

from .compiler import MEASURED, PERTURBATION, UNIT, EstimatorPlan, IntegralAtom, TimeFunctional, perturbation_image
from .sampled import Grid, SampledSignal

__all__ = [
    "EPS_DIV", "DivisorGuardError", "NumericalSingularityError", "EstimateResult", "DemodResult",
    "quadrature_weights", "quadrature", "kernel", "FunctionalWeights", "PlanWeights",
    "evaluate_plan", "solve_small", "sliding_demodulate", "predict_error_std",
]

EPS_DIV = 1e-8
DEFAULT_PROBES = 16
RULES = ("simpson", "trapezoid")


class DivisorGuardError(RuntimeError):
    """The divisor is too small at this window; widen the window."""


class NumericalSingularityError(RuntimeError):
    pass


def quadrature_weights(segments: int, dt: float, rule: str = "simpson") -> np.ndarray:
    """Composite weights on ``segments + 1`` nodes.

    Simpson needs an even segment count; odd counts fall back to the
    trapezoid rule.
    """
    if segments < 1:
        raise ValueError("empty window")
    if rule not in RULES:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    w = np.empty(segments + 1)
    if rule == "simpson" and segments % 2 == 0:
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w[0] = w[-1] = 1.0
        return w * (dt / 3.0)
    w[:] = 1.0
    w[0] = w[-1] = 0.5
    return w * dt


def kernel(k: int, j: int, t: float, tau: np.ndarray) -> np.ndarray:
    """``(t-tau)^(k-1)/(k-1)! * (-tau)^j`` at the nodes."""
    out = (t - tau) ** (k - 1) / factorial(k - 1)
    if j:
        out = out * (-tau) ** j
    return out


def _window(x: SampledSignal, t: float) -> int:
    i = x.grid.index_of(t)
    if i == 0:
        raise ValueError("empty window (t = 0)")
    return i


def quadrature(atom: IntegralAtom, x: SampledSignal | None, t: float, rule: str = "simpson") -> float:
    """Value of one atom at window width ``t``; unit atoms are exact."""
    if atom.source == UNIT:
        return float(atom.c) * t ** (atom.k - 1) / factorial(atom.k - 1)
    if x is None:
        raise ValueError("measured atoms need samples")
    i = _window(x, t)
    tau = x.grid.times[: i + 1]
    w = quadrature_weights(i, x.grid.dt, rule) * kernel(atom.k, atom.j, t, tau)
    return float(atom.c) * float((w * x.values[: i + 1]).sum())


@dataclass(frozen=True)
class FunctionalWeights:
    """``F(y) = (g * y).sum() + unit`` on a fixed window; ``g`` is None when F
    has no sampled atoms."""

    g: np.ndarray | None
    unit: float

    def __call__(self, y: np.ndarray) -> float:
        v = self.unit
        if self.g is not None:
            v += float((self.g * y).sum())
        return v

    def batch(self, ys: np.ndarray) -> np.ndarray:
        """Row-wise values for a stack of windows (shape ``(n, len(g))``)."""
        out = np.full(ys.shape[0], self.unit)
        if self.g is not None:
            out = out + (ys * self.g).sum(axis=1)
        return out


def functional_weights(f: TimeFunctional, dt: float, segments: int, rule: str = "simpson",
                       sources: Sequence[str] = (MEASURED, PERTURBATION)) -> FunctionalWeights:
    t = segments * dt
    tau = np.arange(segments + 1) * dt
    q = None
    g = None
    unit = 0.0
    for a in f.atoms:
        if a.source == UNIT:
            unit += float(a.c) * t ** (a.k - 1) / factorial(a.k - 1)
        elif a.source in sources:
            if q is None:
                q = quadrature_weights(segments, dt, rule)
                g = np.zeros(segments + 1)
            g = g + float(a.c) * kernel(a.k, a.j, t, tau) * q
    return FunctionalWeights(g, unit)


@dataclass(frozen=True)
class PlanWeights:
    """All weight vectors of a plan on one window."""

    plan: EstimatorPlan
    dt: float
    segments: int
    rule: str
    A: tuple
    B: tuple

    @classmethod
    def build(cls, plan: EstimatorPlan, dt: float, segments: int, rule: str = "simpson") -> PlanWeights:
        A = tuple(tuple(functional_weights(f, dt, segments, rule) for f in row) for row in plan.A)
        B = tuple(functional_weights(f, dt, segments, rule) for f in plan.B)
        return cls(plan, dt, segments, rule, A, B)

    @property
    def t(self) -> float:
        return self.segments * self.dt

    def matrices(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        A = np.array([[f(y) for f in row] for row in self.A])
        B = np.array([f(y) for f in self.B])
        return A, B

    def batch_matrices(self, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Shapes ``(n, rho, rho)`` and ``(n, rho)`` for n stacked windows."""
        A = np.stack([np.stack([f.batch(ys) for f in row], axis=-1) for row in self.A], axis=1)
        B = np.stack([f.batch(ys) for f in self.B], axis=-1)
        return A, B


def solve_small(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Gaussian elimination with partial pivoting; returns (solution, det)."""
    n = len(b)
    M = np.array(A, dtype=float)
    v = np.array(b, dtype=float)
    det = 1.0
    for c in range(n):
        p = c + int(np.argmax(np.abs(M[c:, c])))
        if M[p, c] == 0.0:
            raise NumericalSingularityError("matrix is singular")
        if p != c:
            M[[c, p]] = M[[p, c]]
            v[[c, p]] = v[[p, c]]
            det = -det
        det *= M[c, c]
        for r in range(c + 1, n):
            f = M[r, c] / M[c, c]
            M[r, c:] -= f * M[c, c:]
            v[r] -= f * v[c]
    out = np.zeros(n)
    for r in range(n - 1, -1, -1):
        out[r] = (v[r] - M[r, r + 1:] @ out[r + 1:]) / M[r, r]
    return out, det


def _det(A: np.ndarray) -> float:
    if A.shape == (1, 1):
        return float(A[0, 0])
    try:
        return solve_small(A, np.zeros(len(A)))[1]
    except NumericalSingularityError:
        return 0.0


@dataclass
class EstimateResult:
    params: tuple
    estimates: dict | None
    divisor: float
    divisor_ref: float
    guard_ok: bool
    window: float
    segments: int
    rule: str
    note: str = ""

    def value(self, name: str) -> float:
        if not self.guard_ok or self.estimates is None:
            raise DivisorGuardError(self.note or "divisor too small at this window")
        return self.estimates[name]

    def to_json(self) -> dict:
        return {
            "params": list(self.params), "estimates": self.estimates, "divisor": self.divisor,
            "divisor_reference": self.divisor_ref, "guard_ok": self.guard_ok,
            "window": self.window, "segments": self.segments, "quadrature": self.rule,
            "note": self.note,
        }


def _probe_indices(count: int, probes: int) -> list[int]:
    idx = np.unique(np.linspace(0, count - 1, probes + 1).round().astype(int))
    return [int(i) for i in idx if i > 0]


def divisor_reference(plan: EstimatorPlan, x: SampledSignal | None, t_end: float, dt: float,
                      rule: str = "simpson", probes: int = DEFAULT_PROBES) -> float:
    """``max |delta(tau)|`` over probe widths in ``(0, t_end]``."""
    segs = int(round(t_end / dt))
    best = 0.0
    for i in _probe_indices(segs + 1, probes):
        pw = PlanWeights.build(plan, dt, i, rule)
        y = x.values[: i + 1] if x is not None else None
        if y is None and plan.divisor_depends_on_signal():
            raise ValueError("divisor depends on the signal; samples required")
        A, _ = pw.matrices(y if y is not None else np.zeros(i + 1))
        best = max(best, abs(_det(A)))
    return best


def evaluate_plan(plan: EstimatorPlan, x: SampledSignal, t: float | None = None,
                  rule: str = "simpson", eps_div: float = EPS_DIV,
                  probes: int = DEFAULT_PROBES) -> EstimateResult:
    """Solve ``A(t) theta = B(t)`` at window width ``t`` (default: whole grid).

    The guard fails when ``|delta(t)| < eps_div * max |delta(tau)|`` with the
    maximum taken over probe widths up to the end of the grid.
    """
    if t is None:
        t = x.grid.t_end
    i = x.grid.index_of(t)
    if i == 0:
        # every atom vanishes on an empty window, so delta(0) = 0
        ref = divisor_reference(plan, x, x.grid.t_end, x.grid.dt, rule, probes)
        return EstimateResult(plan.params, None, 0.0, ref, False, t, 0, rule,
                              "divisor vanishes at the window origin")
    pw = PlanWeights.build(plan, x.grid.dt, i, rule)
    A, B = pw.matrices(x.values[: i + 1])
    delta = _det(A)
    ref = divisor_reference(plan, x, x.grid.t_end, x.grid.dt, rule, probes)
    ref = max(ref, abs(delta))
    if not abs(delta) > eps_div * ref or ref == 0.0:
        return EstimateResult(plan.params, None, delta, ref, False, t, i, rule,
                              "divisor too small at this window")
    est, _ = solve_small(A, B)
    if not np.all(np.isfinite(est)):
        raise NumericalSingularityError("non-finite estimate despite a passing guard")
    return EstimateResult(plan.params, dict(zip(plan.params, map(float, est))), delta, ref, True,
                          t, i, rule)


# -- demodulation -------------------------------------------------------------

@dataclass
class DemodResult:
    decisions: list  # constellation index, or None for an erasure
    estimates: np.ndarray  # complex or real, nan for erasures
    low_confidence: np.ndarray
    erasures: int

    @property
    def count(self) -> int:
        return len(self.decisions)

    def symbol_errors(self, truth_idx: Sequence[int]) -> int:
        return sum(1 for d, s in zip(self.decisions, truth_idx) if d is not None and d != s)


def _to_point(est: np.ndarray, constellation: np.ndarray) -> np.ndarray:
    """Map per-window estimate vectors onto the constellation's plane."""
    if est.shape[1] == 1:
        return est[:, 0].astype(complex) if np.iscomplexobj(constellation) else est[:, 0]
    if est.shape[1] == 2:
        return est[:, 0] + 1j * est[:, 1]
    raise ValueError("demodulation supports plans with one or two parameters")


def sliding_demodulate(plan: EstimatorPlan, stream: SampledSignal, samples_per_symbol: int,
                       constellation: Sequence, rule: str = "simpson", eps_div: float = EPS_DIV,
                       tie_tol: float = 1e-9) -> DemodResult:
    """Decide one constellation point per symbol window.

    The stream is cut into consecutive windows of ``samples_per_symbol``
    samples, each re-based to local time 0 (the carrier restarts every
    symbol), and the plan is solved at the window end.  Decisions go to the
    nearest point; exact ties go to the smaller index and near-ties are
    flagged low-confidence.  Windows failing the divisor guard are erasures.
    """
    const = np.asarray(constellation)
    if const.size == 0:
        raise ValueError("empty constellation")
    sps = int(samples_per_symbol)
    if sps < 2 or stream.grid.count % sps:
        raise ValueError("stream length must be a multiple of samples_per_symbol (>= 2)")
    nsym = stream.grid.count // sps
    seg = sps - 1
    pw = PlanWeights.build(plan, stream.grid.dt, seg, rule)
    ys = stream.values.reshape(nsym, sps)
    A, B = pw.batch_matrices(ys)
    rho = plan.size
    if plan.divisor_depends_on_signal():
        local = Grid(stream.grid.dt, sps)
        refs = np.array([divisor_reference(plan, SampledSignal(local, y), local.t_end, local.dt, rule)
                         for y in ys])
    else:
        refs = np.full(nsym, divisor_reference(plan, None, seg * stream.grid.dt, stream.grid.dt, rule))
    if rho == 1:
        det = A[:, 0, 0]
    else:
        det = np.array([_det(a) for a in A])
    ok = (np.abs(det) > eps_div * np.maximum(refs, np.abs(det))) & (refs > 0)
    est = np.full((nsym, rho), np.nan)
    if rho == 1:
        est[ok, 0] = B[ok, 0] / det[ok]
    else:
        for n in np.flatnonzero(ok):
            est[n] = solve_small(A[n], B[n])[0]
    pts = _to_point(est, const)
    decisions, low = [], np.zeros(nsym, dtype=bool)
    for n in range(nsym):
        if not ok[n]:
            decisions.append(None)
            continue
        d = np.abs(pts[n] - const)
        best = int(np.argmin(d))  # argmin returns the first (smallest) index on ties
        order = np.sort(d)
        if const.size > 1 and order[1] - order[0] <= tie_tol * max(1.0, order[1]):
            low[n] = True
        decisions.append(best)
    return DemodResult(decisions, pts, low, int((~ok).sum()))


# -- analytic noise prediction -----------------------------------------------

def _toeplitz_ar_product(g: np.ndarray, rho: float) -> np.ndarray:
    """``S g`` with ``S_ij = rho^|i-j|`` via a forward and a backward AR filter."""
    if rho == 0.0:
        return g
    f = scipy.signal.lfilter([1.0], [1.0, -rho], g)
    b = scipy.signal.lfilter([1.0], [1.0, -rho], g[::-1])[::-1]
    return f + b - g


def predict_error_std(plan: EstimatorPlan, x: SampledSignal, t: float, amplitude: float,
                      theta: Sequence[float], rule: str = "simpson", ar: float = 0.0) -> np.ndarray:
    """First-order standard deviation of each estimate under sample noise
    ``w_i = amplitude * n_i`` (unit variance, lag correlation ``ar**|l|``).

    The error solves ``A(x) e = C(w)`` with C the perturbation image; each
    row of C is a weight vector, so ``Cov e = amplitude^2 A^-1 G S G^T A^-T``.
    """
    i = _window(x, t)
    pw = PlanWeights.build(plan, x.grid.dt, i, rule)
    A, _ = pw.matrices(x.values[: i + 1])
    rows = perturbation_image(plan, list(theta))
    G = []
    for f in rows:
        fw = functional_weights(f, x.grid.dt, i, rule, sources=(PERTURBATION,))
        G.append(fw.g if fw.g is not None else np.zeros(i + 1))
    G = np.array(G)
    SG = np.array([_toeplitz_ar_product(g, ar) for g in G])
    cov_c = amplitude ** 2 * (G @ SG.T)
    Ainv = np.linalg.inv(A)
    cov = Ainv @ cov_c @ Ainv.T
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))
