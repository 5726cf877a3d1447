import numpy as np
import pytest

from chaoslab.engine import (
    BlockEmpiricalMeasure,
    EmpiricalMeasure,
    ModelSpec,
    NonFiniteModelOutput,
    euler_step,
    simulate_independent,
    simulate_interacting,
    simulate_paths,
)
from chaoslab.grids import TimeGrid
from chaoslab.kernels import LinearDifferenceKernel, TanhDifferenceKernel
from chaoslab.models import (
    MeanFieldDrift,
    make_bounded_kernel_spec,
    make_control_spec,
    normal_init,
    tanh_model,
)
from chaoslab.reference import build_reference_law
from chaoslab.rng import RngPlan


def zeros_init(d):
    return lambda gen: np.zeros(d)


def test_euler_step_pure_noise():
    """c=0, A=I, B=0: the step is exactly the Brownian increment."""
    spec = ModelSpec(d=2, m=2)
    grid = TimeGrid(0.0, 1.0, 10)
    values = np.zeros((1, 11, 2))
    dw = np.array([[0.3, -0.1]])
    nxt = euler_step(values, 0, grid, spec, EmpiricalMeasure(values), dw)
    assert np.array_equal(nxt, dw)


def test_euler_step_deterministic_drift():
    """c=1 constant, A=0, h=0.5: x moves by exactly c*h."""
    spec = ModelSpec(d=1, m=1, c=np.array([1.0]), A=np.zeros((1, 1)))
    grid = TimeGrid(0.0, 5.0, 10)
    values = np.zeros((1, 11, 1))
    values[0, 0, 0] = 2.0
    nxt = euler_step(values, 0, grid, spec, EmpiricalMeasure(values), np.array([[9.9]]))
    assert nxt[0, 0] == 2.5


def test_euler_step_empirical_mean_drift():
    """B = mean of the measure's current states: hand-evaluated 2-particle case."""

    def mean_state_drift(t, prefix, measure):
        k = prefix.shape[1] - 1
        atoms = measure.atoms_at(k)
        return np.full((prefix.shape[0], 1), atoms[:, 0].mean())

    spec = ModelSpec(d=1, m=1, B=mean_state_drift)
    grid = TimeGrid(0.0, 1.0, 10)
    values = np.zeros((2, 11, 1))
    values[:, 0, 0] = [1.0, 3.0]
    dw = np.zeros((2, 1))
    nxt = euler_step(values, 0, grid, spec, EmpiricalMeasure(values), dw)
    # empirical mean 2.0, h=0.1: both particles move by 0.2
    assert np.allclose(nxt[:, 0], [1.2, 3.2], atol=1e-15)


def test_non_anticipativity_by_future_perturbation():
    """Tampering with path entries after step k leaves the step unchanged."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 1.0, 10)
    gen = np.random.default_rng(3)
    values = gen.normal(size=(6, 11, 1))
    dw = gen.normal(size=(6, 1)) * np.sqrt(grid.h)
    base = euler_step(values, 4, grid, spec, EmpiricalMeasure(values), dw)
    tampered = values.copy()
    tampered[:, 5:, :] = 1e6
    got = euler_step(tampered, 4, grid, spec, EmpiricalMeasure(tampered), dw)
    assert np.array_equal(base, got)


def test_interaction_free_matches_independent_bitwise():
    """With B absent, interacting and independent ensembles coincide exactly."""
    spec = make_control_spec(d=1)
    grid = TimeGrid(0.0, 1.0, 40)
    plan = RngPlan(99)
    init = normal_init(1)
    a = simulate_interacting(spec, 10, grid, init, plan)
    dummy_law = simulate_interacting(spec, 50, grid, init, plan.child("law"))
    b = simulate_independent(spec, 10, dummy_law, grid, init, plan)
    assert np.array_equal(a.values, b.values)


def test_single_particle_measure_is_own_delta():
    """N=1: the empirical measure is the particle's own delta; for an odd
    kernel the interaction vanishes and the path is the driftless one."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    control = make_control_spec(d=1)
    grid = TimeGrid(0.0, 1.0, 30)
    plan = RngPlan(7)
    init = normal_init(1)
    a = simulate_interacting(spec, 1, grid, init, plan)
    b = simulate_interacting(control, 1, grid, init, plan)
    assert np.allclose(a.values, b.values, atol=1e-15)


def test_linear_two_particle_mean_variance():
    """Linear attraction b(x, y) = y - x: the two-particle sample mean is a
    Brownian motion of variance t/2 at any step size (drift cancels in the
    mean exactly, discretely included)."""
    spec = ModelSpec(d=1, m=1, B=MeanFieldDrift(LinearDifferenceKernel(1.0)))
    grid = TimeGrid(0.0, 0.5, 20)
    plan = RngPlan(1234)
    reps = 3000
    means = np.empty(reps)
    for r in range(reps):
        ens = simulate_interacting(
            spec, 2, grid, zeros_init(1), plan, replication=r
        )
        means[r] = ens.values[:, -1, 0].mean()
    var = means.var(ddof=1)
    expect = grid.t_end / 2.0
    se = expect * np.sqrt(2.0 / (reps - 1))
    assert abs(var - expect) <= 5 * se


def test_driftless_increment_variance():
    """B=0, c=0, A=I: increment variance matches h over >= 1e5 increments."""
    spec = make_control_spec(d=1)
    grid = TimeGrid(0.0, 1.0, 200)
    ens = simulate_interacting(spec, 600, grid, zeros_init(1), RngPlan(5))
    incs = np.diff(ens.values[:, :, 0], axis=1).ravel()
    assert incs.size >= 100_000
    var = incs.var(ddof=1)
    se = grid.h * np.sqrt(2.0 / (incs.size - 1))
    assert abs(var - grid.h) <= 5 * se


def test_exchangeability_swap_exact():
    """Swapping two particles' stream ids swaps their output paths exactly."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 0.5, 25)
    plan = RngPlan(21)
    init = normal_init(1)
    base = simulate_interacting(spec, 2, grid, init, plan)
    swapped = simulate_interacting(
        spec, 2, grid, init, plan, particle_streams=[1, 0]
    )
    assert np.array_equal(swapped.values[0], base.values[1])
    assert np.array_equal(swapped.values[1], base.values[0])


def test_exchangeability_general_permutation():
    """General permutations agree up to floating-point resummation order."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 0.5, 25)
    plan = RngPlan(22)
    init = normal_init(1)
    perm = [3, 0, 4, 1, 2]
    base = simulate_interacting(spec, 5, grid, init, plan)
    permuted = simulate_interacting(
        spec, 5, grid, init, plan, particle_streams=perm
    )
    assert np.allclose(permuted.values, base.values[perm], atol=1e-10)


def test_determinism_same_seed_bitwise():
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 0.5, 25)
    init = normal_init(1)
    a = simulate_interacting(spec, 6, grid, init, RngPlan(77), replication=3)
    b = simulate_interacting(spec, 6, grid, init, RngPlan(77), replication=3)
    c = simulate_interacting(spec, 6, grid, init, RngPlan(77), replication=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_block_simulation_matches_per_replication_bitwise():
    """Batching replications in one block-diagonal run changes nothing."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 0.5, 25)
    plan = RngPlan(31)
    init = normal_init(1)
    n, reps = 4, 3
    keys = [(r, p) for r in range(reps) for p in range(n)]
    block = simulate_paths(
        spec, grid, keys, init, plan, lambda v: BlockEmpiricalMeasure(v, n)
    )
    for r in range(reps):
        single = simulate_interacting(spec, n, grid, init, plan, replication=r)
        assert np.array_equal(block.values[r * n : (r + 1) * n], single.values)


def test_nonfinite_output_aborts_with_diagnostic():
    exploding = ModelSpec(
        d=1, m=1, c=lambda t, prefix: prefix[:, -1, :] * 1e180, model_id="boom"
    )
    grid = TimeGrid(0.0, 1.0, 10)
    with pytest.raises(NonFiniteModelOutput, match="boom"):
        simulate_interacting(exploding, 2, grid, normal_init(1), RngPlan(1))


def test_independent_marginals_track_reference_law():
    """Fresh independent copies reproduce the reference marginal mean."""
    spec = make_bounded_kernel_spec(tanh_model(1.0, 1.0))
    grid = TimeGrid(0.0, 0.25, 25)
    plan = RngPlan(6)
    init = normal_init(1)
    law = build_reference_law(spec, 10_000, 2, grid, init, plan.child("ref"))
    out = simulate_independent(spec, 4000, law, grid, init, plan.child("sim"))
    for t in (0.1, 0.25):
        ref = law.ensemble.marginal(t)[:, 0]
        got = out.marginal(t)[:, 0]
        se = np.hypot(
            ref.std(ddof=1) / np.sqrt(ref.size), got.std(ddof=1) / np.sqrt(got.size)
        )
        assert abs(got.mean() - ref.mean()) <= 3 * se


def test_independent_requires_compatible_grid():
    spec = make_control_spec(d=1)
    plan = RngPlan(3)
    init = normal_init(1)
    law = simulate_interacting(spec, 20, TimeGrid(0.0, 1.0, 30), init, plan)
    from chaoslab.grids import GridMismatchError

    with pytest.raises(GridMismatchError):
        simulate_independent(spec, 5, law, TimeGrid(0.0, 1.0, 40), init, plan)
    # refinement by an integer stride is allowed
    coarse = TimeGrid(0.0, 1.0, 10)
    out = simulate_independent(spec, 5, law, coarse, init, plan)
    assert out.grid == coarse
