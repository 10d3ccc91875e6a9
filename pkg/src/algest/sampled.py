"""Uniform sample grids and sampled signals, with CSV round-tripping."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io_util import atomic_write_text

__all__ = ["Grid", "SampledSignal", "read_csv", "write_csv"]


@dataclass(frozen=True)
class Grid:
    """Nodes ``0, dt, ..., (count-1)*dt``."""

    dt: float
    count: int

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"grid step must be positive, got {self.dt}")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.count}")

    @classmethod
    def over(cls, width: float, segments: int) -> Grid:
        """Grid of ``segments`` equal steps covering [0, width]."""
        return cls(width / segments, segments + 1)

    @property
    def t_end(self) -> float:
        return (self.count - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.count) * self.dt

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Grid index of width ``t``; raises if t is off-grid or outside."""
        i = int(round(t / self.dt))
        if abs(i * self.dt - t) > rtol * max(self.dt, abs(t)) or i < 0 or i >= self.count:
            raise ValueError(f"t={t!r} is not a node of {self}")
        return i


@dataclass(frozen=True)
class SampledSignal:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal contains non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: SampledSignal) -> SampledSignal:
        if other.grid != self.grid:
            raise ValueError("signals live on different grids")
        return SampledSignal(self.grid, self.values + other.values)

    def scaled(self, factor: float) -> SampledSignal:
        return SampledSignal(self.grid, self.values * factor)

    def window(self, start: int, count: int) -> SampledSignal:
        """Samples ``start .. start+count-1`` re-based to local time 0."""
        return SampledSignal(Grid(self.grid.dt, count), self.values[start:start + count])


def write_csv(sig: SampledSignal, path, meta: dict | None = None) -> None:
    """Write ``t,value`` rows with 17 significant digits; ``meta`` goes in a
    leading ``#`` comment line as JSON."""
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "value"])
    for t, v in zip(sig.grid.times, sig.values):
        w.writerow([f"{t:.17g}", f"{v:.17g}"])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> tuple[SampledSignal, dict | None]:
    meta = None
    rows = []
    text = Path(path).read_text()
    for line in text.splitlines():
        if line.startswith("#"):
            if meta is None:
                try:
                    meta = json.loads(line[1:].strip())
                except json.JSONDecodeError:
                    pass
            continue
        if line.strip():
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if [h.strip() for h in header[:2]] != ["t", "value"]:
        raise ValueError(f"{path}: expected header 't,value', got {header}")
    data = np.array([[float(a), float(b)] for a, b in reader])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = data[:, 0]
    dt = t[1] - t[0]
    if abs(t[0]) > 1e-12 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError(f"{path}: samples must sit on a uniform grid starting at t=0")
    return SampledSignal(Grid(float(dt), len(t)), data[:, 1]), meta
