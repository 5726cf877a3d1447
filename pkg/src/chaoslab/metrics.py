"""Total-variation bounds, direct marginal TV estimates, and rate fits.

The entropy-to-TV chain: for the joint law of k of N particles,

    TV_k <= sqrt(2 * (k/N) * H_N),

with H_N the full-system relative entropy (subadditivity projects the
per-particle entropy onto any k-marginal). The explicit theorem-style
bound C (1 + beta T) sqrt(k/N) is also provided; it is typically vacuous
at desk scale (> 1), so rate studies assess the exponent, not the
constant.

Direct TV estimates are histogram L1 distances on low-dimensional time
marginals; they lower-bound the path-space TV and serve as a consistency
check against the entropy route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .girsanov import EntropyEstimate

__all__ = [
    "RateFit",
    "tv_bound_pinsker",
    "tv_bound_theorem",
    "tv_histogram",
    "tv_direct_marginal",
    "paired_marginal_samples",
    "fit_rate",
]


@dataclass
class RateFit:
    points: list
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float


def _entropy_value(h) -> tuple[float, float]:
    if isinstance(h, EntropyEstimate):
        return float(h.h_hat), float(h.std_err)
    return float(h), 0.0


def tv_bound_pinsker(h, k: int, n_particles: int) -> tuple[float, float]:
    """sqrt(2 (k/N) h_hat) with delta-method standard error.

    h may be an EntropyEstimate or a bare float. Slightly negative
    estimates (within 3 SE of zero) clamp to zero; anything more negative
    is an error in the caller's estimator.
    """
    if not 1 <= k <= n_particles:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n_particles}")
    h_hat, h_se = _entropy_value(h)
    if h_hat < 0:
        if h_hat < -(3 * h_se + 1e-12):
            raise ValueError(
                f"entropy estimate {h_hat} is negative beyond tolerance"
            )
        h_hat = 0.0
    value = math.sqrt(2.0 * k * h_hat / n_particles)
    se = (k / n_particles) * h_se / value if value > 0 else 0.0
    return value, se


def tv_bound_theorem(beta: float, t_end: float, k: int, n_particles: int,
                     constant: float) -> float:
    """C (1 + beta T) sqrt(k/N), unclamped; reports clamp at 1 themselves."""
    if not 1 <= k <= n_particles:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n_particles}")
    return constant * (1.0 + beta * t_end) * math.sqrt(k / n_particles)


def tv_histogram(samples_a: np.ndarray, samples_b: np.ndarray, bins=None) -> float:
    """Histogram total-variation distance between two sample sets.

    Samples are (n, dim) with dim in {1, 2}; bin edges are shared
    (Freedman-Diaconis style on the pooled samples when `bins` is not
    given) so the estimate is (1/2) sum |p_a - p_b| over common cells.
    """
    a = np.atleast_2d(np.asarray(samples_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(samples_b, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("empty sample sets")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("samples must be (n, dim) with matching dim")
    dim = a.shape[1]
    if dim > 2:
        raise ValueError("direct TV supported for 1- and 2-d marginals only")
    edges = []
    for j in range(dim):
        pooled = np.concatenate([a[:, j], b[:, j]])
        if bins is None:
            edges.append(np.histogram_bin_edges(pooled, bins="fd"))
        else:
            edges.append(
                np.histogram_bin_edges(pooled, bins=int(bins))
            )
    ha, _ = np.histogramdd(a, bins=edges)
    hb, _ = np.histogramdd(b, bins=edges)
    pa = ha / a.shape[0]
    pb = hb / b.shape[0]
    return 0.5 * float(np.abs(pa - pb).sum())


def tv_direct_marginal(ensemble_a, ensemble_b, t: float, coords=0, bins=None) -> float:
    """Histogram TV between time-t marginals of two ensembles.

    `coords` selects state coordinates (at most two). Lower-bounds the
    path-space TV between the ensembles' laws.
    """
    if ensemble_a.dim != ensemble_b.dim:
        raise ValueError("ensembles have different state dimensions")
    return tv_histogram(
        ensemble_a.marginal(t, coords), ensemble_b.marginal(t, coords), bins=bins
    )


def paired_marginal_samples(ensemble, t: float, coord: int = 0) -> np.ndarray:
    """(n//2, 2) samples of disjoint particle pairs at time t.

    Exchangeability makes every disjoint pair a draw from the 2-particle
    marginal; pooling the floor(n/2) pairs keeps them non-overlapping.
    """
    x = ensemble.marginal(t, coord)[:, 0]
    n2 = (x.shape[0] // 2) * 2
    return x[:n2].reshape(-1, 2)


def fit_rate(points) -> RateFit:
    """Least squares on (log N, log value); needs >= 4 positive points."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 4:
        raise ValueError(f"rate fit needs at least 4 points, got {len(pts)}")
    if any(v <= 0 for _, v in pts) or any(n <= 0 for n, _ in pts):
        raise ValueError("rate fit needs strictly positive N and values")
    x = np.log(np.array([n for n, _ in pts]))
    y = np.log(np.array([v for _, v in pts]))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    dof = len(pts) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    slope_stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 and sxx > 0 else 0.0
    return RateFit(
        points=pts,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        slope_stderr=slope_stderr,
    )
