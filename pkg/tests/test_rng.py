import numpy as np
import pytest

from chaoslab.models import normal_init
from chaoslab.rng import RngPlan, draw_path_randomness


def test_same_key_same_stream():
    plan = RngPlan(42)
    a = plan.stream(3, 7).standard_normal(100)
    b = plan.stream(3, 7).standard_normal(100)
    assert np.array_equal(a, b)


def test_distinct_keys_distinct_streams():
    plan = RngPlan(42)
    a = plan.stream(3, 7).standard_normal(100)
    b = plan.stream(3, 8).standard_normal(100)
    c = plan.stream(4, 7).standard_normal(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_children_are_separated_and_stable():
    plan = RngPlan(42)
    assert plan.child("x").master_seed == plan.child("x").master_seed
    assert plan.child("x").master_seed != plan.child("y").master_seed
    a = plan.child("x").stream(0, 0).standard_normal(50)
    b = plan.child("y").stream(0, 0).standard_normal(50)
    assert not np.array_equal(a, b)


def test_master_seed_bounds():
    RngPlan((1 << 64) - 1)
    with pytest.raises(ValueError):
        RngPlan(-1)
    with pytest.raises(ValueError):
        RngPlan(1 << 64)


def test_randomness_regeneration_is_exact():
    plan = RngPlan(7)
    init = normal_init(2, scale=0.5)
    keys = [(0, p) for p in range(5)]
    x0a, dwa = draw_path_randomness(plan, keys, init, 20, 3, 0.01)
    x0b, dwb = draw_path_randomness(plan, keys, init, 20, 3, 0.01)
    assert np.array_equal(x0a, x0b)
    assert np.array_equal(dwa, dwb)
    assert dwa.shape == (5, 20, 3)


def test_increment_scale():
    plan = RngPlan(7)
    keys = [(0, p) for p in range(400)]
    _, dw = draw_path_randomness(plan, keys, normal_init(1), 50, 1, 0.25)
    # N(0, h) increments
    assert dw.std() == pytest.approx(0.5, rel=0.02)


def test_key_order_defines_path_identity():
    """Path i is fully determined by its stream key, not its slot."""
    plan = RngPlan(11)
    init = normal_init(1)
    keys = [(0, 0), (0, 1), (0, 2)]
    x0, dw = draw_path_randomness(plan, keys, init, 10, 1, 0.1)
    perm = [(0, 2), (0, 0), (0, 1)]
    x0p, dwp = draw_path_randomness(plan, perm, init, 10, 1, 0.1)
    assert np.array_equal(x0p[1], x0[0])
    assert np.array_equal(dwp[0], dw[2])
