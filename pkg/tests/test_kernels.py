import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslab.kernels import (
    CallableKernel,
    ConstantKernel,
    FieldTable,
    LinearDifferenceKernel,
    TanhDifferenceKernel,
    ZeroKernel,
    build_field_table,
)


def brute_tanh_mean(kappa, states, atoms):
    out = np.empty((states.shape[0], 1))
    for i, x in enumerate(states[:, 0]):
        out[i, 0] = kappa * np.mean(np.tanh(atoms[:, 0] - x))
    return out


def test_tanh_mean_matches_bruteforce(gen):
    kern = TanhDifferenceKernel(1.3)
    states = gen.normal(size=(17, 1))
    atoms = gen.normal(size=(29, 1))
    got = kern.mean_over_atoms(0.0, states, atoms)
    assert np.allclose(got, brute_tanh_mean(1.3, states, atoms), atol=1e-14)


def test_tanh_blocks_match_per_block_means(gen):
    kern = TanhDifferenceKernel(0.7)
    blocks = gen.normal(size=(5, 9, 1))
    got = kern.mean_within_blocks(0.0, blocks)
    for r in range(5):
        expect = kern.mean_over_atoms(0.0, blocks[r], blocks[r])
        assert np.array_equal(got[r], expect)


def test_tanh_kinetic_coordinate(gen):
    """Kernel reads the position coordinate of (position, velocity) states."""
    kern = TanhDifferenceKernel(1.0, coord=0)
    states = np.array([[1.0, 0.0]])  # y=1, v=0
    atoms = np.array([[0.0, 0.0]])
    val = kern.mean_over_atoms(0.0, states, atoms)
    assert val[0, 0] == pytest.approx(np.tanh(-1.0), abs=1e-12)
    assert val[0, 0] == pytest.approx(-0.76159, abs=1e-5)


def test_constant_and_zero_kernels(gen):
    kern = ConstantKernel([1.0, 0.0])
    states = gen.normal(size=(4, 2))
    atoms = gen.normal(size=(6, 2))
    assert np.array_equal(
        kern.mean_over_atoms(0.0, states, atoms), np.tile([1.0, 0.0], (4, 1))
    )
    z = ZeroKernel(2)
    assert np.array_equal(z.mean_over_atoms(0.0, states, atoms), np.zeros((4, 2)))
    assert z.bound == 0.0


def test_linear_kernel_closed_form(gen):
    kern = LinearDifferenceKernel(2.0)
    states = gen.normal(size=(5, 1))
    atoms = gen.normal(size=(11, 1))
    got = kern.mean_over_atoms(0.0, states, atoms)
    expect = 2.0 * (atoms[:, 0].mean() - states[:, 0])
    assert np.allclose(got[:, 0], expect, atol=1e-14)


def test_callable_kernel_matches_tanh(gen):
    def fn(t, xs, ys):
        return np.tanh(ys[:, :1] - xs[:, :1])

    kern = CallableKernel(fn, out_dim=1, bound=1.0)
    states = gen.normal(size=(7, 1))
    atoms = gen.normal(size=(13, 1))
    ref = TanhDifferenceKernel(1.0).mean_over_atoms(0.0, states, atoms)
    assert np.allclose(kern.mean_over_atoms(0.0, states, atoms), ref, atol=1e-13)


def test_field_table_accuracy(gen):
    """Interpolated frozen-law field agrees with the exact average."""
    kern = TanhDifferenceKernel(1.0)
    atoms = gen.normal(size=(2000, 1)) * 1.5
    table = build_field_table(kern, 0.0, atoms)
    queries = gen.normal(size=(500,)) * 1.5
    vals, oob = table.query(queries)
    assert not oob.any()
    exact = kern.mean_over_atoms(0.0, queries[:, None], atoms)
    assert np.abs(vals - exact).max() < 1e-8


def test_field_table_flags_out_of_range(gen):
    kern = TanhDifferenceKernel(1.0)
    atoms = gen.normal(size=(1500, 1))
    table = build_field_table(kern, 0.0, atoms)
    far = np.array([atoms[:, 0].min() - 5.0, 0.0, atoms[:, 0].max() + 5.0])
    _, oob = table.query(far)
    assert oob.tolist() == [True, False, True]


@given(st.floats(0.1, 3.0), st.integers(0, 10_000))
def test_tanh_mean_respects_bound(kappa, seed):
    gen = np.random.default_rng(seed)
    kern = TanhDifferenceKernel(kappa)
    states = gen.normal(size=(8, 1)) * 3
    atoms = gen.normal(size=(5, 1)) * 3
    vals = kern.mean_over_atoms(0.0, states, atoms)
    assert np.all(np.abs(vals) <= kern.bound + 1e-12)
