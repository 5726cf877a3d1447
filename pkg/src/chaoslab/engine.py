"""Euler-Maruyama integration of path-dependent mean-field SDEs.

State advances by the left-point (Ito) rule

    x_{k+1} = x_k + c(t_k, past)*h + A(t_k, past) @ (B(t_k, past, mu)*h + dW_k),

where `mu` is either the running empirical measure of the ensemble itself
(interacting system) or a frozen reference law (independent McKean
copies). Coefficient functionals receive the path prefix up to the
current step only, so non-anticipativity holds by construction; the tests
additionally perturb the future block of the backing array and assert the
step output is unchanged.

Everything here is deterministic given an RngPlan: simulation never reads
global RNG state, and all reductions use fixed chunk boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .grids import PathEnsemble, TimeGrid
from .kernels import FIELD_MIN_ATOMS, build_field_table
from .rng import RngPlan, draw_path_randomness

__all__ = [
    "ModelSpec",
    "EmpiricalMeasure",
    "BlockEmpiricalMeasure",
    "FrozenLawMeasure",
    "euler_step",
    "simulate_interacting",
    "simulate_independent",
    "simulate_paths",
    "as_frozen_measure",
    "SimulationError",
    "NonFiniteModelOutput",
]


class SimulationError(RuntimeError):
    pass


class NonFiniteModelOutput(SimulationError):
    """A coefficient or state became non-finite; the replication is aborted."""


@dataclass(frozen=True)
class ModelSpec:
    """Coefficient triple (c, A, B) with declared dimensions.

    c: None, a constant (d,) vector, or callable(t, prefix) -> (n, d)
    A: None (identity, requires d == m), a constant (d, m) matrix, or
       callable(t, prefix) -> (n, d, m)
    B: None (no interaction) or callable(t, prefix, measure) -> (n, m)

    `prefix` is the (n, k+1, d) block of paths up to the current step;
    functionals must read only that. drift_bound is the analytic sup-norm
    of B when known (used by concentration constants).
    """

    d: int
    m: int
    c: Union[None, np.ndarray, Callable] = None
    A: Union[None, np.ndarray, Callable] = None
    B: Optional[Callable] = None
    drift_bound: Optional[float] = None
    model_id: str = "custom"

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if self.A is None and self.d != self.m:
            raise ValueError("A=None means identity diffusion and requires d == m")


class EmpiricalMeasure:
    """Running empirical measure over a (possibly still simulating) ensemble."""

    def __init__(self, values: np.ndarray):
        self.values = values

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    def atoms_at(self, k: int) -> np.ndarray:
        return self.values[:, k, :]

    def prefix(self, k: int) -> np.ndarray:
        return self.values[:, : k + 1, :]


class BlockEmpiricalMeasure(EmpiricalMeasure):
    """Block-diagonal empirical measure: R stacked replications of N paths.

    Path i belongs to block i // block_size and only sees atoms of its own
    block. Used to advance many independent interacting replications in
    one array without coupling them.
    """

    def __init__(self, values: np.ndarray, block_size: int):
        if values.shape[0] % block_size != 0:
            raise ValueError("path count must be a multiple of block_size")
        super().__init__(values)
        self.block_size = block_size


class FrozenLawMeasure:
    """Frozen empirical approximation of the limit law, as an atom ensemble.

    The law's grid must equal the simulation grid or refine it by an
    integer stride. Profile kernels get per-step field tables cached here,
    shared by every replication that simulates against this law.
    """

    def __init__(self, ensemble: PathEnsemble, grid: TimeGrid):
        self.ensemble = ensemble
        self.grid = grid
        self.stride = ensemble.grid.refinement_stride(grid)
        self._fields: dict = {}

    @property
    def n_atoms(self) -> int:
        return self.ensemble.n_paths

    def atoms_at(self, k: int) -> np.ndarray:
        return self.ensemble.values[:, k * self.stride, :]

    def prefix(self, k: int) -> np.ndarray:
        return self.ensemble.values[:, : k * self.stride + 1 : self.stride, :]

    def field_for(self, kernel, t: float, k: int):
        per_kernel = self._fields.setdefault(kernel, {})
        table = per_kernel.get(k)
        if table is None:
            table = build_field_table(kernel, t, self.atoms_at(k))
            per_kernel[k] = table
        return table

    def use_fields_for(self, kernel) -> bool:
        return (
            getattr(kernel, "profile_coord", None) is not None
            and self.n_atoms >= FIELD_MIN_ATOMS
        )


def as_frozen_measure(law, grid: TimeGrid) -> FrozenLawMeasure:
    """Accept a ReferenceLaw, PathEnsemble, or prebuilt FrozenLawMeasure."""
    if isinstance(law, FrozenLawMeasure):
        if law.grid != grid:
            from .grids import GridMismatchError

            raise GridMismatchError("frozen measure was built for a different grid")
        return law
    ensemble = getattr(law, "ensemble", law)
    return FrozenLawMeasure(ensemble, grid)


def _advance(values, k, grid, model: ModelSpec, measure, dw):
    """One Euler step for all paths; returns (next_states, b_value)."""
    t = grid.time_at(k)
    h = grid.h
    prefix = values[:, : k + 1, :]
    x = values[:, k, :]

    if model.B is not None:
        b = np.asarray(model.B(t, prefix, measure), dtype=np.float64)
        if not np.all(np.isfinite(b)):
            raise NonFiniteModelOutput(
                f"B produced non-finite values at step {k} (t={t:g}) "
                f"for model {model.model_id!r}"
            )
        inner = h * b + dw
    else:
        b = None
        inner = dw

    a = model.A
    if a is None:
        incr = inner
    elif callable(a):
        amat = np.asarray(a(t, prefix), dtype=np.float64)
        incr = np.einsum("ndm,nm->nd", amat, inner)
    else:
        incr = inner @ np.asarray(a, dtype=np.float64).T

    c = model.c
    if c is None:
        nxt = x + incr
    else:
        cval = np.asarray(c(t, prefix) if callable(c) else c, dtype=np.float64)
        nxt = x + h * cval + incr

    if not np.all(np.isfinite(nxt)):
        raise NonFiniteModelOutput(
            f"state became non-finite at step {k} (t={t:g}) "
            f"for model {model.model_id!r}; aborting replication"
        )
    return nxt, b


def euler_step(values, step_index, grid, model, measure, increments):
    """Advance every path one step; `increments` is the (n, m) N(0, h*I) draw."""
    nxt, _ = _advance(values, step_index, grid, model, measure, increments)
    return nxt


def simulate_paths(
    model: ModelSpec,
    grid: TimeGrid,
    keys,
    init_sampler,
    rng: RngPlan,
    measure_or_factory,
    observer=None,
) -> PathEnsemble:
    """Core driver: one path per (replication, particle) stream key.

    measure_or_factory is either a measure instance (frozen law) or a
    callable receiving the backing values array (running empirical).
    The optional observer is called as observer(k, t, prefix, b, dw_k)
    after the step-k coefficients are computed.
    """
    x0, dw = draw_path_randomness(
        rng, keys, init_sampler, grid.n_steps, model.m, grid.h
    )
    if x0.shape[1] != model.d:
        raise ValueError(
            f"init_sampler produced dim {x0.shape[1]}, model has d={model.d}"
        )
    values = np.empty((len(keys), grid.n_steps + 1, model.d))
    values[:, 0, :] = x0
    measure = (
        measure_or_factory(values)
        if callable(measure_or_factory)
        else measure_or_factory
    )
    for k in range(grid.n_steps):
        nxt, b = _advance(values, k, grid, model, measure, dw[:, k])
        if observer is not None:
            observer(k, grid.time_at(k), values[:, : k + 1, :], b, dw[:, k])
        values[:, k + 1, :] = nxt
    return PathEnsemble(grid, values)


def simulate_interacting(
    model: ModelSpec,
    n_particles: int,
    grid: TimeGrid,
    init_sampler,
    rng: RngPlan,
    *,
    replication: int = 0,
    particle_streams=None,
    observer=None,
) -> PathEnsemble:
    """N particles coupled through their own running empirical measure."""
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    streams = particle_streams if particle_streams is not None else range(n_particles)
    keys = [(replication, p) for p in streams]
    if len(keys) != n_particles:
        raise ValueError("particle_streams must provide one stream per particle")
    return simulate_paths(
        model, grid, keys, init_sampler, rng, EmpiricalMeasure, observer=observer
    )


def simulate_independent(
    model: ModelSpec,
    n_copies: int,
    law,
    grid: TimeGrid,
    init_sampler,
    rng: RngPlan,
    *,
    replication: int = 0,
    particle_streams=None,
    observer=None,
) -> PathEnsemble:
    """N independent copies with the measure argument frozen to `law`."""
    if n_copies < 1:
        raise ValueError("n_copies must be >= 1")
    measure = as_frozen_measure(law, grid)
    streams = particle_streams if particle_streams is not None else range(n_copies)
    keys = [(replication, p) for p in streams]
    if len(keys) != n_copies:
        raise ValueError("particle_streams must provide one stream per copy")
    return simulate_paths(
        model, grid, keys, init_sampler, rng, measure, observer=observer
    )
