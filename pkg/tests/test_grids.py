import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslab.grids import GridAlignmentError, GridMismatchError, PathEnsemble, TimeGrid


def test_grid_points_reproducible():
    g = TimeGrid(0.0, 1.0, 200)
    t = g.times()
    assert t.shape == (201,)
    assert t[0] == 0.0
    assert np.allclose(t[-1], 1.0)
    assert g.h == pytest.approx(0.005)
    # t_k = t_start + k*h bitwise
    assert np.array_equal(t, 0.0 + np.arange(201) * g.h)


def test_grid_rejects_bad_fields():
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)


def test_index_of_aligned_and_misaligned():
    g = TimeGrid(0.0, 1.0, 200)
    assert g.index_of(0.2) == 40
    assert g.index_of(1.0) == 200
    with pytest.raises(GridAlignmentError):
        g.index_of(0.2001)
    with pytest.raises(GridAlignmentError):
        g.index_of(1.5)


def test_window_clamps_to_horizon():
    g = TimeGrid(0.0, 0.25, 50)
    k0, k1 = g.window(0.2, 0.1)  # right edge 0.3 clamps to 0.25
    assert (k0, k1) == (40, 50)
    with pytest.raises(ValueError):
        g.window(0.2, -0.1)


def test_refinement_stride():
    fine = TimeGrid(0.0, 1.0, 200)
    coarse = TimeGrid(0.0, 1.0, 50)
    assert fine.refinement_stride(coarse) == 4
    assert fine.refinement_stride(fine) == 1
    with pytest.raises(GridMismatchError):
        coarse.refinement_stride(fine)
    with pytest.raises(GridMismatchError):
        fine.refinement_stride(TimeGrid(0.0, 2.0, 50))


@given(
    n_steps=st.integers(1, 500),
    t_end=st.floats(0.01, 100.0),
)
def test_every_grid_point_roundtrips(n_steps, t_end):
    g = TimeGrid(0.0, t_end, n_steps)
    for k in (0, n_steps // 2, n_steps):
        assert g.index_of(g.time_at(k)) == k


def test_ensemble_shape_validation():
    g = TimeGrid(0.0, 1.0, 10)
    PathEnsemble(g, np.zeros((3, 11, 2)))
    with pytest.raises(ValueError):
        PathEnsemble(g, np.zeros((3, 10, 2)))
    with pytest.raises(ValueError):
        PathEnsemble(g, np.zeros((3, 11)))


def test_marginal_slicing():
    g = TimeGrid(0.0, 1.0, 4)
    vals = np.arange(2 * 5 * 3, dtype=float).reshape(2, 5, 3)
    ens = PathEnsemble(g, vals)
    m = ens.marginal(0.5, coords=[0, 2])
    assert m.shape == (2, 2)
    assert np.array_equal(m, vals[:, 2][:, [0, 2]])
