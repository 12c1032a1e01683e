"""Cocycle evaluation, pullbacks and the built-in systems."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randattr.cloud import Box, PointCloud, hausdorff, sample_box, semidist
from randattr.cocycle import (ZOO, Trajectory, affine_series, cocycle_residual, continuity_probe, evolve,
                              evolve_batch, forward_images, make_affine, make_contraction, make_double_well,
                              make_identity, make_logistic, make_rotation, pullback, pullback_stack,
                              system_from_config)
from randattr.driver import NoiseSpec, increments, shift
from randattr.errors import ConfigError, DivergenceError

AFFINE_DISCRETE = make_affine(NoiseSpec.discrete([0.3, 0.6], [0.5, 0.5]), 1.0)
SYSTEMS = {
    "affine": make_affine(NoiseSpec.uniform(0.0, 0.8), NoiseSpec.uniform(0.0, 0.8)),
    "logistic": make_logistic(NoiseSpec.uniform(3.5, 4.0)),
    "double_well": make_double_well(),
    "contraction": make_contraction(0.5, 2),
    "rotation": make_rotation(),
    "identity": make_identity(3),
}


def _series_by_hand(sys, w, depth):
    # direct loop over the raw increments; a is component 0, b is the constant 1
    a = increments(w, -depth, depth)[::-1, 0]
    total, prod = 0.0, 1.0
    for k in range(depth):
        total += 1.0 * prod
        prod *= a[k]
    return total


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_time_zero_is_identity(name):
    sys = SYSTEMS[name]
    x = np.linspace(0.1, 0.9, sys.dimension)
    assert np.array_equal(evolve(sys, 0, x, sys.driver(3)), x)


def test_affine_hand_iteration():
    sys = make_affine(0.5, 1.0)
    assert evolve(sys, 3, 0.0, sys.driver(0)) == 1.75
    assert evolve(sys, 3, np.array([0.0]), sys.driver(0)).tolist() == [1.75]


@pytest.mark.parametrize("name", sorted(SYSTEMS))
@given(s=st.integers(0, 60), t=st.integers(0, 60), seed=st.integers(0, 2**40),
       x=st.floats(-1, 1, allow_nan=False))
def test_cocycle_identity_is_bit_exact(name, s, t, seed, x):
    sys = SYSTEMS[name]
    w = sys.driver(seed)
    x0 = np.full(sys.dimension, abs(x) if name == "logistic" else x)
    lhs = evolve(sys, s + t, x0, w)
    rhs = evolve(sys, t, evolve(sys, s, x0, w), shift(w, s))
    assert np.array_equal(lhs, rhs)


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_cocycle_residual_zero(name):
    assert cocycle_residual(SYSTEMS[name], 50, horizon=30) == 0.0


def test_cocycle_residual_logistic_hundred_trials():
    assert cocycle_residual(make_logistic(NoiseSpec.uniform(3.0, 4.0)), 100, horizon=50) == 0.0


def test_batch_equals_single_path_bitwise():
    sys = SYSTEMS["double_well"]
    ws = [sys.driver(i) for i in range(7)]
    x = np.linspace(-2, 2, 9)[:, None]
    batch = evolve_batch(sys, 123, x, ws)
    for i, w in enumerate(ws):
        assert np.array_equal(batch[i], evolve(sys, 123, x, w))


def test_pullback_affine_constant_limit():
    sys = make_affine(0.5, 1.0)
    out = pullback(sys, 30, PointCloud([[0.0]]), sys.driver(0))
    assert abs(out.points[0, 0] - 2.0) < 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_pullback_matches_series_oracle(seed):
    w = AFFINE_DISCRETE.driver(seed)
    x = pullback(AFFINE_DISCRETE, 60, PointCloud([[0.0]]), w).points[0, 0]
    assert abs(x - _series_by_hand(AFFINE_DISCRETE, w, 60)) < 1e-9
    assert abs(affine_series(AFFINE_DISCRETE, w, 60) - _series_by_hand(AFFINE_DISCRETE, w, 60)) < 1e-12


def test_pullback_identity_and_zero_time():
    X = PointCloud(np.arange(6.0).reshape(2, 3))
    sys = make_identity(3)
    assert np.array_equal(pullback(sys, 17, X, sys.driver(1)).points, X.points)
    assert pullback(SYSTEMS["affine"], 0, PointCloud([[0.3]]), sys.driver(1)) is not None


def test_pullback_is_evolve_on_shifted_path():
    sys = SYSTEMS["logistic"]
    w = sys.driver(5)
    X = sample_box(Box([0.1], [0.9]), 11)
    assert np.array_equal(pullback(sys, 40, X, w).points, evolve(sys, 40, X.points, shift(w, -40)))


def test_pullback_stack_matches_individual_pullbacks():
    sys = SYSTEMS["affine"]
    ws = [sys.driver(i) for i in range(4)]
    X = sample_box(Box([-1.0], [1.0]), 7)
    times = [0, 3, 10, 25]
    imgs, escaped = pullback_stack(sys, X, ws, times)
    assert not escaped.any()
    for s, w in enumerate(ws):
        for j, t in enumerate(times):
            assert np.array_equal(imgs[s, j], pullback(sys, t, X, w).points)


def test_forward_images_match_evolve():
    sys = SYSTEMS["rotation"]
    ws = [sys.driver(i) for i in range(3)]
    X = PointCloud([[1.0, 0.0], [0.0, 2.0]])
    imgs, _ = forward_images(sys, X, ws, [1, 5])
    assert np.array_equal(imgs[2, 1], evolve(sys, 5, X.points, ws[2]))


def test_rotation_preserves_norm():
    sys = make_rotation()
    x = np.array([[2.0, 0.0], [0.0, -1.0]])
    y = evolve(sys, 1000, x, sys.driver(0))
    assert np.allclose(np.linalg.norm(y, axis=1), [2.0, 1.0], rtol=1e-12)


def test_contraction_pullback_of_unit_ball():
    sys = make_contraction(0.5, 2)
    X = sample_box(Box([-1.0, -1.0], [1.0, 1.0]), 50)
    out = pullback(sys, 40, X, sys.driver(0))
    assert semidist(out, PointCloud([[0.0, 0.0]])) < 1e-10


def test_double_well_stays_bounded():
    sys = make_double_well(0.01, 0.1)
    ws = [sys.driver(i) for i in range(100)]
    x = np.array([[-1.0], [0.0], [1.0]])
    init = np.broadcast_to(x, (100, 1, 3, 1))
    from randattr.cocycle import sweep
    _, snaps, _ = sweep(sys, ws, 0, init, record=list(range(0, 100001, 5000)))
    worst = max(float(np.abs(v).max()) for v in snaps.values())
    assert worst <= 3.0


def test_unclamped_divergence_raises_with_step():
    sys = make_affine(3.0, 1.0)
    with pytest.raises(DivergenceError) as info:
        evolve(sys, 1000, 1.0, sys.driver(0))
    assert 150 < info.value.step < 300


def test_logistic_state_stays_in_unit_interval():
    sys = make_logistic(4.0)
    y = evolve(sys, 500, np.linspace(0, 1, 101), sys.driver(0))
    assert y.min() >= 0 and y.max() <= 1


def test_continuity_probe_examples():
    ident = make_identity(2)
    rows = continuity_probe(ident, 5, [0.0, 0.0], ident.driver(0), [1.0, 0.1, 0.01])
    assert [r for r, _ in rows] == [1.0, 0.1, 0.01]
    assert np.allclose([v for _, v in rows], [1.0, 0.1, 0.01], rtol=1e-12)
    aff = make_affine(0.5, 1.0)
    rows = continuity_probe(aff, 1, [0.3], aff.driver(0), [0.4, 0.2])
    assert [v for _, v in rows] == pytest.approx([0.2, 0.1], rel=1e-12)


def test_continuity_probe_logistic_trend():
    sys = make_logistic(NoiseSpec.uniform(3.6, 4.0))
    radii = [10.0 ** -k for k in range(1, 7)]
    vals = [v for _, v in continuity_probe(sys, 5, [0.3], sys.driver(2), radii)]
    assert vals[-1] < 1e-3
    assert all(b <= a * 1.01 for a, b in zip(vals, vals[1:]))


def test_continuity_probe_rejects_bad_radii():
    with pytest.raises(ValueError):
        continuity_probe(make_identity(), 1, [0.0], make_identity().driver(0), [0.1, 0.2])


def test_state_shape_checks():
    with pytest.raises(ValueError):
        evolve(make_contraction(0.5, 2), 1, np.zeros(3), make_contraction().driver(0))
    with pytest.raises(ValueError):
        evolve(make_identity(), -1, 0.0, make_identity().driver(0))


def test_trajectory_invariants():
    Trajectory(np.zeros((3, 1)), np.array([0, 1, 2]))
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 1)), np.array([0, 2, 1]))
    with pytest.raises(ValueError):
        Trajectory(np.zeros((2, 1)), np.array([0, 1, 2]))


def test_system_config_roundtrip():
    sys = system_from_config({"system": "affine", "params": {
        "a": {"distribution": "uniform", "params": {"a": 0.0, "b": 0.5}}, "b": 2.0}})
    assert sys.noise == NoiseSpec.uniform(0.0, 0.5)
    assert sorted(ZOO) == ["affine", "contraction", "double_well", "identity", "logistic", "rotation"]
    for name in ZOO:
        assert system_from_config(name).name == name


@pytest.mark.parametrize("cfg", [
    {"system": "pendulum"},
    {"system": "contraction", "params": {"rate": 1.5}},
    {"system": "logistic", "params": {"a": 5.0}},
    {"system": "logistic", "params": {"a": {"distribution": "gaussian", "params": {"mu": 3, "sigma": 1}}}},
    {"system": "double_well", "params": {"step_size": -1}},
])
def test_bad_system_configs(cfg):
    with pytest.raises(ConfigError):
        system_from_config(cfg)


def test_random_coefficients_must_share_a_distribution():
    with pytest.raises(ConfigError):
        make_affine(NoiseSpec.uniform(0, 1), NoiseSpec.gaussian())


def test_monotone_step_refinement_affine():
    # pullback(t2) is the image of pullback(t1)'s starting set pushed t2 - t1 more steps
    sys = SYSTEMS["affine"]
    w = sys.driver(0)
    X = sample_box(Box([-1.0], [1.0]), 21)
    deep = pullback(sys, 30, X, w)
    mid = pullback(sys, 20, PointCloud(evolve(sys, 10, X.points, shift(w, -30))), w)
    assert hausdorff(deep, mid) == 0.0
