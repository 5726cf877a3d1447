"""Girsanov change-of-measure diagnostics.

The drift deviation of path i at step k is

    dB[i, k] = B(t_k, path prefix; running empirical measure)
             - B(t_k, path prefix; frozen reference law),

and the log Radon-Nikodym derivative between the interacting law and the
product law over a step range is the left-point discretization

    log Z = - sum_{i,k} dB[i,k] . dW[i,k] - (1/2) sum_{i,k} |dB[i,k]|^2 h.

Because dB[.,k] is measurable for the paths up to t_k and dW[.,k] is the
increment actually used to advance them, exp(log Z) is an exact discrete
martingale: E[Z] = 1 holds at any step size, up to Monte Carlo error.

Two entropy estimators are provided. The primary one is the quadratic
(Fisher-information-style) identity under the interacting law,

    H = (1/2) E[ sum_i integral |B(t, X_i; empirical) - B(t, X_i; law)|^2 dt ],

which is nonnegative by construction and has a bounded integrand for
bounded kernels. The Z log Z form under the product law is kept as a
heavy-tailed cross-check; replications whose exponent would overflow are
excluded and counted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    BlockEmpiricalMeasure,
    EmpiricalMeasure,
    as_frozen_measure,
    simulate_paths,
)
from .grids import PathEnsemble, TimeGrid
from .parallel import map_chunked
from .rng import RngPlan

__all__ = [
    "DriftDeviationSeries",
    "GirsanovRecord",
    "EntropyEstimate",
    "drift_deviation",
    "log_density",
    "log_density_samples",
    "mckean_deviation_run",
    "entropy_quadratic",
    "entropy_zlogz",
    "REFERENCE_RATIO",
    "OVERFLOW_LOG",
]

# Minimum reference-ensemble size relative to the particle count for the
# quadratic entropy estimator: keeps the frozen-law bias below the 1/N
# signal over the N ranges used in rate studies.
REFERENCE_RATIO = 16

# exp() overflows just above 709; replications beyond this are excluded.
OVERFLOW_LOG = 700.0

_BATCH_BUDGET = 4_000_000  # floats per replication batch (fixed => deterministic)


def _rep_chunk(n_particles: int, n_steps: int, dim: int) -> int:
    per_rep = n_particles * (n_steps + 1) * max(dim, 1)
    return max(1, _BATCH_BUDGET // per_rep)


@dataclass
class DriftDeviationSeries:
    """Per (path, step) drift deviation dB, plus window accumulators."""

    grid: TimeGrid
    values: np.ndarray  # (n_paths, n_steps, m)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[1] != self.grid.n_steps:
            raise ValueError(
                f"deviation array must be (n_paths, {self.grid.n_steps}, m)"
            )
        self.values = v

    def window_quadratic(self, k0: int, k1: int) -> np.ndarray:
        """Per-path integral of |dB|^2 dt over steps [k0, k1)."""
        sq = np.sum(self.values[:, k0:k1, :] ** 2, axis=(1, 2))
        return sq * self.grid.h

    def max_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.sqrt(np.sum(self.values**2, axis=2)).max())


@dataclass(frozen=True)
class GirsanovRecord:
    """Ito sum, quadratic term, and log-density over one step range."""

    stoch_integral: float
    quad_term: float

    @property
    def log_z(self) -> float:
        return -self.stoch_integral - self.quad_term


@dataclass
class EntropyEstimate:
    h_hat: float
    std_err: float
    n_replications: int
    estimator_kind: str
    exclusions: int = 0


def drift_deviation(ensemble: PathEnsemble, model, law) -> DriftDeviationSeries:
    """dB along an ensemble: own running empirical minus the frozen law."""
    law_measure = as_frozen_measure(law, ensemble.grid)
    n, s = ensemble.n_paths, ensemble.grid.n_steps
    if model.B is None:
        return DriftDeviationSeries(ensemble.grid, np.zeros((n, s, model.m)))
    own = EmpiricalMeasure(ensemble.values)
    dev = np.empty((n, s, model.m))
    for k in range(s):
        t = ensemble.grid.time_at(k)
        prefix = ensemble.values[:, : k + 1, :]
        dev[:, k, :] = model.B(t, prefix, own) - model.B(t, prefix, law_measure)
    return DriftDeviationSeries(ensemble.grid, dev)


def log_density(dev, increments, h: float) -> GirsanovRecord:
    """Girsanov record from deviations and the increments used in simulation.

    `dev` is a DriftDeviationSeries or a raw (n, steps, m) array;
    `increments` must be the matching raw Brownian increments (N(0, h)),
    regenerated from the RngPlan when not retained.
    """
    values = dev.values if isinstance(dev, DriftDeviationSeries) else np.asarray(dev)
    inc = np.asarray(increments, dtype=np.float64)
    if inc.shape != values.shape:
        raise ValueError(f"shape mismatch: dev {values.shape} vs increments {inc.shape}")
    stoch = float(np.sum(values * inc))
    quad = 0.5 * float(np.sum(values * values)) * h
    return GirsanovRecord(stoch_integral=stoch, quad_term=quad)


def mckean_deviation_run(
    model,
    law,
    grid: TimeGrid,
    n_replications: int,
    n_particles: int,
    init_sampler,
    rng: RngPlan,
    *,
    window: tuple[int, int] | None = None,
    workers: int = 1,
):
    """Simulate replications of N independent McKean copies and accumulate
    their drift deviations against the generating frozen law.

    Returns (w, stoch) with w[r, i] = integral over the window of
    |dB[i]|^2 dt and stoch[r] = sum_i sum_k dB[i,k] . dW[i,k], both per
    replication. The deviations are exactly those of the simulated paths:
    the empirical side uses each replication's own N copies, the law side
    reuses the drift the engine evaluated while stepping.
    """
    k0, k1 = window if window is not None else (0, grid.n_steps)
    if not (0 <= k0 < k1 <= grid.n_steps):
        raise ValueError(f"window [{k0}, {k1}) outside grid range")
    if model.B is None:
        return (
            np.zeros((n_replications, n_particles)),
            np.zeros(n_replications),
        )
    law_measure = as_frozen_measure(law, grid)
    h = grid.h

    def run_chunk(r0: int, r1: int):
        n_rep = r1 - r0
        keys = [(r, p) for r in range(r0, r1) for p in range(n_particles)]
        w = np.zeros((n_rep, n_particles))
        stoch = np.zeros(n_rep)
        holder = {}

        def factory(values):
            holder["block"] = BlockEmpiricalMeasure(values, n_particles)
            return law_measure

        def observer(k, t, prefix, b_law, dw):
            if not (k0 <= k < k1):
                return
            b_emp = model.B(t, prefix, holder["block"])
            delta = b_emp - b_law
            w[...] += np.sum(delta * delta, axis=1).reshape(n_rep, n_particles) * h
            stoch[...] += (
                np.sum(delta * dw, axis=1).reshape(n_rep, n_particles).sum(axis=1)
            )

        simulate_paths(model, grid, keys, init_sampler, rng, factory, observer)
        return w, stoch

    chunk = _rep_chunk(n_particles, grid.n_steps, model.d)
    parts = map_chunked(run_chunk, n_replications, chunk, workers)
    w_all = np.concatenate([p[0] for p in parts], axis=0)
    stoch_all = np.concatenate([p[1] for p in parts])
    return w_all, stoch_all


def log_density_samples(
    model,
    law,
    n_particles: int,
    grid: TimeGrid,
    n_replications: int,
    init_sampler,
    rng: RngPlan,
    *,
    window: tuple[int, int] | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Per-replication log Z over a step window, along independent copies."""
    w, stoch = mckean_deviation_run(
        model, law, grid, n_replications, n_particles, init_sampler, rng,
        window=window, workers=workers,
    )
    return -stoch - 0.5 * w.sum(axis=1)


def _mean_and_se(samples: np.ndarray) -> tuple[float, float]:
    n = samples.shape[0]
    mean = float(samples.mean()) if n else float("nan")
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def entropy_quadratic(
    model,
    law,
    n_particles: int,
    grid: TimeGrid,
    n_replications: int,
    init_sampler,
    rng: RngPlan,
    *,
    workers: int = 1,
) -> EntropyEstimate:
    """Quadratic entropy estimator under the interacting particle law."""
    law_measure = as_frozen_measure(law, grid)
    if model.B is not None and law_measure.n_atoms < REFERENCE_RATIO * n_particles:
        raise ValueError(
            f"reference law has {law_measure.n_atoms} paths; the quadratic "
            f"estimator requires at least {REFERENCE_RATIO}*N = "
            f"{REFERENCE_RATIO * n_particles}"
        )
    if model.B is None:
        samples = np.zeros(n_replications)
        mean, se = _mean_and_se(samples)
        return EntropyEstimate(mean, se, n_replications, "quadratic")
    h = grid.h

    def run_chunk(r0: int, r1: int):
        n_rep = r1 - r0
        keys = [(r, p) for r in range(r0, r1) for p in range(n_particles)]
        quad = np.zeros(n_rep)

        def observer(k, t, prefix, b_emp, dw):
            b_law = model.B(t, prefix, law_measure)
            delta = b_emp - b_law
            quad[...] += (
                np.sum(delta * delta, axis=1).reshape(n_rep, n_particles).sum(axis=1)
            )

        simulate_paths(
            model, grid, keys, init_sampler, rng,
            lambda values: BlockEmpiricalMeasure(values, n_particles),
            observer,
        )
        return 0.5 * quad * h

    chunk = _rep_chunk(n_particles, grid.n_steps, model.d)
    parts = map_chunked(run_chunk, n_replications, chunk, workers)
    samples = np.concatenate(parts)
    mean, se = _mean_and_se(samples)
    return EntropyEstimate(mean, se, n_replications, "quadratic")


def entropy_zlogz(
    model,
    law,
    n_particles: int,
    grid: TimeGrid,
    n_replications: int,
    init_sampler,
    rng: RngPlan,
    *,
    workers: int = 1,
) -> EntropyEstimate:
    """E[Z log Z] along independent copies; heavy-tailed, cross-check only."""
    log_z = log_density_samples(
        model, law, n_particles, grid, n_replications, init_sampler, rng,
        workers=workers,
    )
    keep = log_z <= OVERFLOW_LOG
    kept = log_z[keep]
    samples = np.exp(kept) * kept
    mean, se = _mean_and_se(samples)
    return EntropyEstimate(
        mean, se, n_replications, "zlogz", exclusions=int((~keep).sum())
    )
