"""Time discretization and path-ensemble containers.

A TimeGrid is the uniform partition t_k = t_start + k*h, k = 0..n_steps,
with h = (t_end - t_start)/n_steps. All simulated objects live on such a
grid; sub-windows (e.g. [T0, (T0+delta) ^ T]) must align to grid points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TimeGrid", "PathEnsemble", "GridAlignmentError", "GridMismatchError"]


class GridAlignmentError(ValueError):
    """A requested time does not sit on a grid point."""


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps={self.n_steps} must be a positive integer")

    @property
    def h(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    def times(self) -> np.ndarray:
        """Grid points, exactly reproducible from the three fields."""
        return self.t_start + np.arange(self.n_steps + 1) * self.h

    def time_at(self, k: int) -> float:
        return self.t_start + k * self.h

    def index_of(self, t: float, *, what: str = "time") -> int:
        """Grid index of t; raises GridAlignmentError if t is off-grid."""
        k = int(round((t - self.t_start) / self.h))
        tol = 1e-9 * max(1.0, abs(self.t_end))
        if k < 0 or k > self.n_steps or abs(self.time_at(k) - t) > tol:
            raise GridAlignmentError(
                f"{what}={t} is not aligned to the grid "
                f"(t_start={self.t_start}, h={self.h}, n_steps={self.n_steps})"
            )
        return k

    def window(self, t0: float, delta: float) -> tuple[int, int]:
        """Step range [k0, k1) covering [t0, (t0+delta) ^ t_end].

        The right edge is clamped to the horizon; both edges must align to
        grid points.
        """
        if delta <= 0:
            raise ValueError(f"delta={delta} must be positive")
        k0 = self.index_of(t0, what="window start")
        t1 = min(t0 + delta, self.t_end)
        k1 = self.index_of(t1, what="window end")
        if k1 <= k0:
            raise ValueError(f"empty window [{t0}, {t1}]")
        return k0, k1

    def refinement_stride(self, coarse: "TimeGrid") -> int:
        """Steps of self per step of `coarse`; self must refine (or equal) it."""
        same_span = (
            abs(self.t_start - coarse.t_start) <= 1e-12 * max(1.0, abs(self.t_start))
            and abs(self.t_end - coarse.t_end) <= 1e-12 * max(1.0, abs(self.t_end))
        )
        if not same_span or self.n_steps % coarse.n_steps != 0:
            raise GridMismatchError(
                f"grid ({self.t_start},{self.t_end},{self.n_steps}) does not refine "
                f"({coarse.t_start},{coarse.t_end},{coarse.n_steps})"
            )
        return self.n_steps // coarse.n_steps


@dataclass
class PathEnsemble:
    """A block of sample paths: values[path, step, coordinate]."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"values must be (n_paths, n_steps+1, dim), got {v.shape}")
        if v.shape[1] != self.grid.n_steps + 1:
            raise ValueError(
                f"values has {v.shape[1]} steps, grid expects {self.grid.n_steps + 1}"
            )
        self.values = v

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def states_at(self, k: int) -> np.ndarray:
        return self.values[:, k, :]

    def marginal(self, t: float, coords=None) -> np.ndarray:
        """Time-t marginal samples, optionally restricted to coordinates."""
        k = self.grid.index_of(t)
        out = self.values[:, k, :]
        if coords is not None:
            out = out[:, np.atleast_1d(coords)]
        return out
