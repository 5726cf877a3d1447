import numpy as np
import pytest

from chaoslab.engine import EmpiricalMeasure, FrozenLawMeasure, simulate_interacting
from chaoslab.grids import PathEnsemble, TimeGrid
from chaoslab.kernels import CallableKernel, TanhDifferenceKernel, ZeroKernel
from chaoslab.models import (
    BoundedKernelModel,
    KineticModel,
    ModelConstructionError,
    audit_drift_bound,
    beta_of,
    constant_drift_model,
    kinetic_tanh_model,
    make_bounded_kernel_spec,
    make_kinetic_spec,
    normal_init,
    tanh_model,
)
from chaoslab.rng import RngPlan


def eval_b(spec, states, atoms, t=0.0):
    prefix = np.asarray(states, dtype=float)[:, None, :]
    measure = EmpiricalMeasure(np.asarray(atoms, dtype=float)[:, None, :])
    return spec.B(t, prefix, measure)


def test_zero_kernel_gives_zero_drift():
    model = BoundedKernelModel(kernel=ZeroKernel(1), sigma=1.0, d=1)
    spec = make_bounded_kernel_spec(model)
    vals = eval_b(spec, [[0.3]], [[1.0], [2.0]])
    assert np.array_equal(vals, np.zeros((1, 1)))
    assert model.kernel_bound == 0.0


def test_odd_kernel_symmetric_measure_cancels():
    """b = tanh(y - x), atoms symmetric about x: the average vanishes."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    vals = eval_b(spec, [[0.0]], [[0.5], [-0.5]])
    assert abs(vals[0, 0]) < 1e-16


def test_constant_kernel_scalar_sigma_inverse():
    """sigma = 2I, b = (1, 0): B = sigma^{-1} b = (0.5, 0) at any state."""
    model = constant_drift_model([1.0, 0.0], sigma=2.0)
    spec = make_bounded_kernel_spec(model)
    vals = eval_b(spec, [[3.0, -1.0]], [[0.0, 0.0]])
    assert np.allclose(vals, [[0.5, 0.0]], atol=1e-15)


def test_kinetic_hand_value():
    """m=1, sigma=1, b = tanh(y' - y): B at (y,v)=(1,0) against a point mass
    at the origin is tanh(-1)."""
    spec = make_kinetic_spec(kinetic_tanh_model(1.0, 1.0))
    vals = eval_b(spec, [[1.0, 0.0]], [[0.0, 0.0]])
    assert vals.shape == (1, 1)
    assert vals[0, 0] == pytest.approx(np.tanh(-1.0), abs=1e-12)
    assert vals[0, 0] == pytest.approx(-0.76159, abs=1e-5)


def test_kinetic_block_structure():
    spec = make_kinetic_spec(kinetic_tanh_model(1.0, 2.0))
    # diffusion rows for the position block vanish identically
    assert np.array_equal(spec.A[:1, :], np.zeros((1, 1)))
    assert spec.A[1, 0] == 2.0


def test_kinetic_free_transport():
    """b = 0: positions integrate velocity exactly; velocity is sigma * W."""
    model = KineticModel(kernel=ZeroKernel(1), sigma=1.5, m=1)
    spec = make_kinetic_spec(model)
    grid = TimeGrid(0.0, 1.0, 20)
    ens = simulate_interacting(spec, 5, grid, normal_init(2), RngPlan(4))
    y, v = ens.values[:, :, 0], ens.values[:, :, 1]
    for k in range(grid.n_steps):
        assert np.array_equal(y[:, k + 1], y[:, k] + grid.h * v[:, k])


def test_beta_of_values():
    assert beta_of(tanh_model(1.0, 1.0)) == 2.0
    assert beta_of(BoundedKernelModel(kernel=ZeroKernel(1), sigma=1.0, d=1)) == 0.0
    assert beta_of(tanh_model(0.5, 1.0)) == pytest.approx(0.5)
    # spec objects carry the bound as drift_bound
    assert beta_of(make_bounded_kernel_spec(tanh_model(1.0, 1.0))) == 2.0


def test_kernel_bound_includes_sigma_inverse():
    assert tanh_model(1.0, 2.0).kernel_bound == pytest.approx(0.5)
    assert kinetic_tanh_model(3.0, 1.5).kernel_bound == pytest.approx(2.0)


def test_drift_bound_audit_passes_for_shipped_models(gen):
    import warnings

    for spec in (
        make_bounded_kernel_spec(tanh_model(1.3, 0.7)),
        make_kinetic_spec(kinetic_tanh_model(0.8, 2.0)),
        make_bounded_kernel_spec(constant_drift_model([0.4], sigma=2.0)),
    ):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            worst = audit_drift_bound(spec, gen, n_samples=10_000)
        assert worst <= spec.drift_bound + 1e-12


def test_ellipticity_spot_check(gen):
    model = BoundedKernelModel(
        kernel=TanhDifferenceKernel(1.0), sigma=np.array([[2.0]]), d=1
    )
    lam, big = model.ellipticity()
    assert lam == pytest.approx(4.0)
    assert big == pytest.approx(4.0)
    for _ in range(100):
        xi = gen.normal(size=1)
        quad = xi @ (model.sigma_matrix @ model.sigma_matrix.T) @ xi
        n2 = xi @ xi
        assert lam * n2 - 1e-12 <= quad <= big * n2 + 1e-12


def test_singular_sigma_rejected():
    with pytest.raises(ModelConstructionError):
        BoundedKernelModel(
            kernel=ConstKernelForTest(), sigma=np.zeros((2, 2)), d=2
        )


class ConstKernelForTest:
    out_dim = 2
    bound = 1.0
    profile_coord = None

    def mean_over_atoms(self, t, states, atoms):
        return np.zeros((states.shape[0], 2))


def test_kernel_dim_mismatch_rejected():
    with pytest.raises(ModelConstructionError):
        BoundedKernelModel(kernel=TanhDifferenceKernel(1.0), sigma=1.0, d=2)


def test_unbounded_kernel_rejected_for_bounded_model():
    from chaoslab.kernels import LinearDifferenceKernel

    with pytest.raises(ModelConstructionError):
        BoundedKernelModel(kernel=LinearDifferenceKernel(1.0), sigma=1.0, d=1)


def test_frozen_law_field_path_matches_bruteforce(gen):
    """The tabulated frozen-law drift agrees with the exact atom average."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 1.0, 2)
    atoms = gen.normal(size=(2048, 3, 1)) * 1.3
    law = FrozenLawMeasure(PathEnsemble(grid, atoms), grid)
    states = gen.normal(size=(300, 1)) * 1.2
    prefix = states[:, None, :]
    via_field = spec.B(0.0, prefix, law)
    exact = spec.B(0.0, prefix, EmpiricalMeasure(atoms))
    assert law.use_fields_for(spec.B.kernel)
    assert np.abs(via_field - exact).max() < 1e-8


def test_custom_callable_kernel_model(gen):
    """A user-supplied vectorized pair kernel runs through the same paths."""

    def fn(t, xs, ys):
        return 0.5 * np.tanh(ys[:, :1] - xs[:, :1])

    model = BoundedKernelModel(
        kernel=CallableKernel(fn, out_dim=1, bound=0.5), sigma=1.0, d=1
    )
    spec = make_bounded_kernel_spec(model)
    vals = eval_b(spec, [[0.0]], [[1.0]])
    assert vals[0, 0] == pytest.approx(0.5 * np.tanh(1.0), abs=1e-14)
    assert beta_of(model) == pytest.approx(0.5)
