"""Pairwise interaction kernels and their empirical-measure averages.

A kernel represents a bounded two-body interaction b(t, x, y) in R^m. The
only operation the dynamics ever need is the equal-weight average over an
atom set,

    mean_over_atoms(t, X, Y)[i] = (1/M) sum_j b(t, X[i], Y[j]),

evaluated either against another ensemble (frozen law) or against the
ensemble itself (running empirical measure). Evaluations are chunked so
peak memory stays bounded; chunk boundaries are fixed constants so the
floating-point reduction order, and hence the result, never depends on
worker count.

For kernels whose value depends on a single coordinate difference, a
frozen atom set induces a smooth scalar field x -> (1/M) sum_j phi(y_j - x)
that can be tabulated once per time step and queried by local cubic
interpolation; `FieldTable` implements this with a guaranteed absolute
error bound and reports out-of-range queries so callers can fall back to
the exact average.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TanhDifferenceKernel",
    "ConstantKernel",
    "ZeroKernel",
    "LinearDifferenceKernel",
    "CallableKernel",
    "FieldTable",
    "build_field_table",
    "FIELD_MIN_ATOMS",
    "FIELD_TARGET_ERROR",
]

# Fixed chunking constant (elements per pairwise block). Must not depend on
# runtime conditions: reduction order is part of the determinism contract.
_PAIR_CHUNK = 1 << 22

# Tabulation is only worthwhile for large atom sets.
FIELD_MIN_ATOMS = 1024
FIELD_TARGET_ERROR = 1e-9


def _chunked_rows(total, per_row):
    rows = max(1, _PAIR_CHUNK // max(1, per_row))
    for start in range(0, total, rows):
        yield start, min(start + rows, total)


class TanhDifferenceKernel:
    """b(t, x, y) = kappa * tanh(y[c] - x[c]) acting on one output component.

    Bounded by kappa, centered and odd in the coordinate difference. With
    c = 0 this is the scalar mean-field kernel; composed with a kinetic
    state (position, velocity) it reads the position block only.
    """

    def __init__(self, kappa: float = 1.0, coord: int = 0):
        self.kappa = float(kappa)
        self.coord = int(coord)
        self.out_dim = 1
        self.bound = abs(self.kappa)
        # |d^4/dx^4 tanh| < 4.09; used to size interpolation tables.
        self.profile_coord = self.coord
        self.deriv4_bound = 4.1 * abs(self.kappa)

    def mean_over_atoms(self, t, states, atoms):
        xc = np.ascontiguousarray(states[:, self.coord])
        yc = np.ascontiguousarray(atoms[:, self.coord])
        out = np.empty((xc.shape[0], 1))
        for i0, i1 in _chunked_rows(xc.shape[0], yc.shape[0]):
            out[i0:i1, 0] = np.tanh(yc[None, :] - xc[i0:i1, None]).mean(axis=1)
        out *= self.kappa
        return out

    def mean_within_blocks(self, t, blocks):
        """Per-block empirical average: blocks is (R, N, d) -> (R, N, 1)."""
        xc = np.ascontiguousarray(blocks[:, :, self.coord])
        r, n = xc.shape
        out = np.empty((r, n, 1))
        for r0, r1 in _chunked_rows(r, n * n):
            out[r0:r1, :, 0] = np.tanh(
                xc[r0:r1, None, :] - xc[r0:r1, :, None]
            ).mean(axis=2)
        out *= self.kappa
        return out


class ConstantKernel:
    """b(t, x, y) = value, a constant vector; the interaction-free control."""

    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        self.out_dim = self.value.shape[0]
        self.bound = float(np.linalg.norm(self.value))
        self.profile_coord = None

    def mean_over_atoms(self, t, states, atoms):
        return np.tile(self.value, (states.shape[0], 1))

    def mean_within_blocks(self, t, blocks):
        r, n = blocks.shape[:2]
        return np.tile(self.value, (r, n, 1))


class ZeroKernel(ConstantKernel):
    def __init__(self, out_dim: int = 1):
        super().__init__(np.zeros(out_dim))


class LinearDifferenceKernel:
    """b(t, x, y) = kappa * (y[c] - x[c]); unbounded, closed-form test kernel.

    The empirical average collapses to kappa * (mean_j y_j[c] - x[c]), so
    linear mean-field systems have exact moment oracles at any step size.
    """

    def __init__(self, kappa: float = 1.0, coord: int = 0):
        self.kappa = float(kappa)
        self.coord = int(coord)
        self.out_dim = 1
        self.bound = None
        self.profile_coord = None

    def mean_over_atoms(self, t, states, atoms):
        m = atoms[:, self.coord].mean()
        return (self.kappa * (m - states[:, self.coord]))[:, None]

    def mean_within_blocks(self, t, blocks):
        xc = blocks[:, :, self.coord]
        return (self.kappa * (xc.mean(axis=1, keepdims=True) - xc))[:, :, None]


class CallableKernel:
    """Wrap an arbitrary vectorized pair function b(t, x, y) -> (n, out_dim).

    `fn` receives equal-length batches of x- and y-states (the flattened
    pair grid) and must be non-anticipative in whatever state convention
    the caller uses. Brute force only; no tabulation.
    """

    def __init__(self, fn, out_dim: int, bound: float | None = None):
        self.fn = fn
        self.out_dim = int(out_dim)
        self.bound = bound
        self.profile_coord = None

    def mean_over_atoms(self, t, states, atoms):
        n, m_atoms = states.shape[0], atoms.shape[0]
        out = np.zeros((n, self.out_dim))
        for i0, i1 in _chunked_rows(n, m_atoms * states.shape[1]):
            ns = i1 - i0
            xs = np.repeat(states[i0:i1], m_atoms, axis=0)
            ys = np.tile(atoms, (ns, 1))
            vals = np.asarray(self.fn(t, xs, ys), dtype=np.float64)
            out[i0:i1] = vals.reshape(ns, m_atoms, self.out_dim).mean(axis=1)
        return out

    def mean_within_blocks(self, t, blocks):
        return np.stack(
            [self.mean_over_atoms(t, blk, blk) for blk in blocks], axis=0
        )


@dataclass
class FieldTable:
    """Tabulated x -> (1/M) sum_j b(y_j - x) on a uniform node grid.

    Queries inside [lo, hi] are answered by 4-point (local cubic) Lagrange
    interpolation with absolute error below the table's `target_error`;
    queries outside are flagged for exact fallback.
    """

    x0: float
    spacing: float
    table: np.ndarray  # (n_nodes, out_dim)
    lo: float
    hi: float
    target_error: float

    def query(self, xc: np.ndarray):
        s = (xc - self.x0) / self.spacing
        idx = np.clip(s.astype(np.int64), 1, self.table.shape[0] - 3)
        u = s - idx
        um1 = u + 1.0
        up1 = u - 1.0
        up2 = u - 2.0
        w0 = -u * up1 * up2 / 6.0
        w1 = um1 * up1 * up2 / 2.0
        w2 = -um1 * u * up2 / 2.0
        w3 = um1 * u * up1 / 6.0
        vals = (
            w0[:, None] * self.table[idx - 1]
            + w1[:, None] * self.table[idx]
            + w2[:, None] * self.table[idx + 1]
            + w3[:, None] * self.table[idx + 2]
        )
        oob = (xc < self.lo) | (xc > self.hi)
        return vals, oob


def build_field_table(kernel, t, atoms, target_error: float = FIELD_TARGET_ERROR):
    """Tabulate a profile kernel's frozen-atom average at one time step."""
    c = kernel.profile_coord
    if c is None:
        raise ValueError("kernel does not expose a 1-d profile")
    yc = atoms[:, c]
    # 4-point Lagrange error <= (9/16)/24 * |f''''| * spacing^4.
    spacing = (target_error / (0.0235 * kernel.deriv4_bound)) ** 0.25
    lo = float(yc.min()) - 1.0
    hi = float(yc.max()) + 1.0
    n_nodes = int(np.ceil((hi - lo) / spacing)) + 4
    nodes = lo + (np.arange(n_nodes) - 1.5) * spacing
    node_states = np.zeros((n_nodes, atoms.shape[1]))
    node_states[:, c] = nodes
    table = kernel.mean_over_atoms(t, node_states, atoms)
    return FieldTable(
        x0=float(nodes[0]),
        spacing=spacing,
        table=table,
        lo=float(nodes[1]),
        hi=float(nodes[-2]),
        target_error=target_error,
    )
