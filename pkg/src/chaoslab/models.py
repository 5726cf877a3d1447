"""Concrete model specifications.

Two families are shipped:

* bounded-kernel mean-field diffusion in R^d, rewritten so the whole
  interaction sits in the measure drift: c = 0, A = sigma,
  B(t, x, mu) = integral of sigma^{-1}(t, x_t) b(t, x_t, y_t) mu(dy);

* kinetic (position, velocity) dynamics in R^{2m} with the degenerate
  block diffusion A = [[0], [sigma]]: positions move by dY = V dt exactly
  (no noise, no interaction), the bounded kernel acts on velocities only.

The concentration constant attached to a bounded kernel is
beta = 2 * ||sigma^{-1} b||_inf^2. Kernel bounds are supplied
analytically by the constructors, not estimated; `audit_drift_bound`
random-samples B and warns if the declared bound is ever exceeded.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .engine import (
    BlockEmpiricalMeasure,
    EmpiricalMeasure,
    FrozenLawMeasure,
    ModelSpec,
)
from .kernels import ConstantKernel, TanhDifferenceKernel

__all__ = [
    "MeanFieldDrift",
    "BoundedKernelModel",
    "KineticModel",
    "make_bounded_kernel_spec",
    "make_kinetic_spec",
    "make_control_spec",
    "beta_of",
    "audit_drift_bound",
    "normal_init",
    "ModelConstructionError",
    "tanh_model",
    "kinetic_tanh_model",
    "constant_drift_model",
]


class ModelConstructionError(ValueError):
    pass


class MeanFieldDrift:
    """B(t, x, mu) = sigma_inv . (equal-weight kernel average over mu).

    Dispatches on the measure type: frozen laws use cached field tables
    when the kernel admits a scalar profile and the atom set is large
    (with exact fallback outside the tabulated range), block measures use
    the per-block vectorized path, plain empirical measures use the exact
    pairwise average.
    """

    def __init__(self, kernel, sigma_inv: Union[None, float, np.ndarray] = None):
        self.kernel = kernel
        if sigma_inv is None or np.isscalar(sigma_inv):
            self.sigma_inv = sigma_inv
        else:
            self.sigma_inv = np.asarray(sigma_inv, dtype=np.float64)

    def _apply_sigma_inv(self, vals):
        if self.sigma_inv is None:
            return vals
        if np.isscalar(self.sigma_inv):
            return vals * self.sigma_inv
        return vals @ self.sigma_inv.T

    def __call__(self, t, prefix, measure):
        k = prefix.shape[1] - 1
        states = prefix[:, -1, :]
        kernel = self.kernel
        if isinstance(measure, FrozenLawMeasure) and measure.use_fields_for(kernel):
            table = measure.field_for(kernel, t, k)
            xc = np.ascontiguousarray(states[:, kernel.profile_coord])
            vals, oob = table.query(xc)
            if oob.any():
                vals[oob] = kernel.mean_over_atoms(
                    t, states[oob], measure.atoms_at(k)
                )
        elif isinstance(measure, BlockEmpiricalMeasure):
            if states.shape[0] != measure.n_atoms:
                raise ValueError("block measure must be the ensemble itself")
            blocks = states.reshape(-1, measure.block_size, states.shape[1])
            vals = kernel.mean_within_blocks(t, blocks)
            vals = vals.reshape(states.shape[0], kernel.out_dim)
        else:
            vals = kernel.mean_over_atoms(t, states, measure.atoms_at(k))
        return self._apply_sigma_inv(vals)


def _constant_sigma(sigma, dim) -> np.ndarray:
    if np.isscalar(sigma):
        return float(sigma) * np.eye(dim)
    mat = np.asarray(sigma, dtype=np.float64)
    if mat.shape != (dim, dim):
        raise ModelConstructionError(f"sigma must be scalar or ({dim},{dim})")
    return mat


def _invert_sigma(mat) -> np.ndarray:
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise ModelConstructionError(f"sigma is not invertible: {exc}") from exc
    return inv


@dataclass(frozen=True)
class BoundedKernelModel:
    """Bounded interaction kernel + uniformly elliptic constant diffusion.

    kernel_bound is ||sigma^{-1} b||_inf; by default it is derived from
    the kernel's bound and the operator norm of sigma^{-1} (exact for the
    shipped constant-sigma models).
    """

    kernel: object
    sigma: Union[float, np.ndarray] = 1.0
    d: int = 1
    kernel_bound: Optional[float] = None

    def __post_init__(self):
        if getattr(self.kernel, "bound", None) is None:
            raise ModelConstructionError("bounded-kernel models need a bounded kernel")
        if self.kernel.out_dim != self.d:
            raise ModelConstructionError(
                f"kernel output dim {self.kernel.out_dim} != state dim {self.d}"
            )
        mat = _constant_sigma(self.sigma, self.d)
        inv = _invert_sigma(mat)
        if self.kernel_bound is None:
            object.__setattr__(
                self,
                "kernel_bound",
                float(np.linalg.norm(inv, 2) * self.kernel.bound),
            )

    @property
    def sigma_matrix(self) -> np.ndarray:
        return _constant_sigma(self.sigma, self.d)

    def ellipticity(self) -> tuple[float, float]:
        """(lambda, Lambda) with lambda|xi|^2 <= xi . sigma sigma* xi <= Lambda|xi|^2."""
        gram = self.sigma_matrix @ self.sigma_matrix.T
        eig = np.linalg.eigvalsh(gram)
        return float(eig[0]), float(eig[-1])


@dataclass(frozen=True)
class KineticModel:
    """Kinetic dynamics: state (y, v) in R^{2m}, noise and kernel on v only."""

    kernel: object
    sigma: Union[float, np.ndarray] = 1.0
    m: int = 1
    kernel_bound: Optional[float] = None

    def __post_init__(self):
        if getattr(self.kernel, "bound", None) is None:
            raise ModelConstructionError("kinetic models need a bounded kernel")
        if self.kernel.out_dim != self.m:
            raise ModelConstructionError(
                f"kernel output dim {self.kernel.out_dim} != velocity dim {self.m}"
            )
        mat = _constant_sigma(self.sigma, self.m)
        inv = _invert_sigma(mat)
        if self.kernel_bound is None:
            object.__setattr__(
                self,
                "kernel_bound",
                float(np.linalg.norm(inv, 2) * self.kernel.bound),
            )

    @property
    def d(self) -> int:
        return 2 * self.m


def make_bounded_kernel_spec(model: BoundedKernelModel) -> ModelSpec:
    """c = 0, A = sigma, B = sigma^{-1} . kernel average; |B| <= kernel_bound."""
    sigma = model.sigma_matrix
    drift = MeanFieldDrift(model.kernel, _invert_sigma(sigma))
    lam, big = model.ellipticity()
    return ModelSpec(
        d=model.d,
        m=model.d,
        c=None,
        A=sigma,
        B=drift,
        drift_bound=model.kernel_bound,
        model_id=f"bounded[{type(model.kernel).__name__}]"
        f"(d={model.d},lam={lam:g},Lam={big:g})",
    )


def _kinetic_transport(m: int):
    def c(t, prefix):
        states = prefix[:, -1, :]
        out = np.zeros_like(states)
        out[:, :m] = states[:, m:]
        return out

    return c


def make_kinetic_spec(model: KineticModel) -> ModelSpec:
    """Degenerate block diffusion: A rows 1..m are identically zero."""
    m = model.m
    sigma = _constant_sigma(model.sigma, m)
    a = np.zeros((2 * m, m))
    a[m:, :] = sigma
    drift = MeanFieldDrift(model.kernel, _invert_sigma(sigma))
    return ModelSpec(
        d=2 * m,
        m=m,
        c=_kinetic_transport(m),
        A=a,
        B=drift,
        drift_bound=model.kernel_bound,
        model_id=f"kinetic[{type(model.kernel).__name__}](m={m})",
    )


def make_control_spec(d: int = 1, sigma: Union[float, np.ndarray] = 1.0,
                      drift: Optional[np.ndarray] = None) -> ModelSpec:
    """Zero-interaction control: B is literally absent, so every Girsanov
    quantity downstream is exactly zero, not just statistically small."""
    return ModelSpec(
        d=d,
        m=d,
        c=None if drift is None else np.asarray(drift, dtype=np.float64),
        A=_constant_sigma(sigma, d),
        B=None,
        drift_bound=0.0,
        model_id=f"control(d={d})",
    )


def beta_of(model) -> float:
    """Concentration constant beta = 2 * ||sigma^{-1} b||_inf^2."""
    bound = getattr(model, "kernel_bound", None)
    if bound is None:
        bound = getattr(model, "drift_bound", None)
    if bound is None:
        raise ValueError("model does not declare a kernel bound")
    return 2.0 * float(bound) ** 2


def audit_drift_bound(spec: ModelSpec, gen, n_samples: int = 10_000,
                      atom_count: int = 8, scale: float = 3.0) -> float:
    """Random-sample ||B|| and warn if the declared drift_bound is violated.

    Returns the largest sampled norm. States and atoms are drawn N(0,
    scale^2) at random grid times; kernels are time-homogeneous here so
    coverage in space is what matters.
    """
    if spec.B is None:
        return 0.0
    worst = 0.0
    batch = 256
    done = 0
    while done < n_samples:
        nb = min(batch, n_samples - done)
        states = gen.normal(scale=scale, size=(nb, 1, spec.d))
        atoms = gen.normal(scale=scale, size=(atom_count, 1, spec.d))
        t = float(gen.uniform(0.0, 1.0))
        vals = spec.B(t, states, EmpiricalMeasure(atoms))
        worst = max(worst, float(np.linalg.norm(vals, axis=1).max()))
        done += nb
    if spec.drift_bound is not None and worst > spec.drift_bound * (1 + 1e-9):
        warnings.warn(
            f"sampled ||B||={worst:g} exceeds declared bound "
            f"{spec.drift_bound:g} for {spec.model_id!r}",
            stacklevel=2,
        )
    return worst


def normal_init(d: int, scale: float = 1.0, loc: float = 0.0):
    """Centered Gaussian initial condition sampler of dimension d."""

    def sampler(gen):
        return loc + scale * gen.standard_normal(d)

    return sampler


def tanh_model(kappa: float = 1.0, sigma: float = 1.0) -> BoundedKernelModel:
    """The default bounded model: b(x, y) = kappa * tanh(y - x), d = 1."""
    return BoundedKernelModel(kernel=TanhDifferenceKernel(kappa), sigma=sigma, d=1)


def kinetic_tanh_model(kappa: float = 1.0, sigma: float = 1.0) -> KineticModel:
    """Kinetic default: velocities attract through tanh of position gaps."""
    return KineticModel(kernel=TanhDifferenceKernel(kappa, coord=0), sigma=sigma, m=1)


def constant_drift_model(value, sigma: float = 1.0) -> BoundedKernelModel:
    """Constant-kernel control: B is a fixed vector regardless of the measure."""
    vec = np.atleast_1d(np.asarray(value, dtype=np.float64))
    return BoundedKernelModel(
        kernel=ConstantKernel(vec), sigma=sigma, d=vec.shape[0]
    )
