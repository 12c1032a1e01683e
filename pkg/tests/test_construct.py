"""Strong and weak attractor constructions and the schedule search."""
import numpy as np
import pytest

from randattr.cloud import Box, Neighborhood, PointCloud, hausdorff, semidist
from randattr.cocycle import affine_series, make_affine, make_contraction, make_double_well, make_rotation, pullback
from randattr.construct import (Schedule, _j0, ball_radii, build_strong_B, build_strong_C, build_weak, build_weak_C,
                                ensemble_summary, exhausting_set, feasibility_table, find_schedule, find_schedule_C,
                                fit_c_sets, level_table, schedule_levels, strong_B_batch, weak_batch, weak_ensemble)
from randattr.driver import NoiseSpec
from randattr.errors import ScheduleInfeasible, WeakConstructionUnstable
from randattr.omega import OmegaConfig

AFFINE = make_affine(NoiseSpec.discrete([0.3, 0.6], [0.5, 0.5]), 1.0)
CONTRACTION = make_contraction(0.5)
LEVELS = [1 - 2.0 ** -m for m in range(1, 7)]
DW_CFG = OmegaConfig(2000, 2500, 50, 21, 0.01)


@pytest.fixture(scope="module")
def affine_setup():
    ws = [AFFINE.driver(i) for i in range(500)]
    c_sets = fit_c_sets(AFFINE, ws, Box([-1.0], [1.0]), LEVELS, 60, 41)
    return ws, c_sets


@pytest.fixture(scope="module")
def contraction_setup():
    ws = [CONTRACTION.driver(i) for i in range(500)]
    c_sets = fit_c_sets(CONTRACTION, ws, Box([-1.0], [1.0]), LEVELS, 30, 41)
    return ws, c_sets


def test_schedule_levels():
    contain, nest = schedule_levels(3)
    assert contain == [0.5, 0.75, 0.875] and nest == 0.75
    contain, nest = schedule_levels(3, relaxed=True)
    assert contain == [0.0, 0.5, 0.75] and nest == 0.5


@pytest.mark.parametrize("events,n,expected", [
    ([True, True, True], 3, 1),
    ([True, False, True], 3, 3),
    ([True, True, False], 3, None),
    ([True], 1, 1),
    ([True, False, True, True, True], 5, 3),
])
def test_borel_cantelli_index(events, n, expected):
    assert _j0(events, n) == expected


def test_strong_B_contraction_and_affine():
    cfg = OmegaConfig(60, 100, 10, 21, 1e-9)
    sb = build_strong_B(CONTRACTION, CONTRACTION.driver(0), 3, cfg)
    assert semidist(sb.attractor, PointCloud([[0.0]])) < 1e-12 and sb.saturated
    for seed in range(5):
        w = AFFINE.driver(seed)
        sb = build_strong_B(AFFINE, w, 3, cfg)
        assert len(sb.attractor) == 1 and sb.saturated
        assert abs(sb.attractor.points[0, 0] - affine_series(AFFINE, w, 200)) < 1e-8
        assert max(sb.increments) < 1e-8


@pytest.mark.parametrize("seed", range(2))
def test_strong_B_double_well(seed):
    sb = build_strong_B(make_double_well(), make_double_well().driver(seed), 4, DW_CFG)
    assert np.all(np.abs(sb.attractor.points) <= 2.0)
    assert all(inc < 0.02 for inc in sb.increments[1:])


def test_strong_B_monotone_in_k_max():
    sys = make_double_well()
    a2, a3 = (build_strong_B(sys, sys.driver(1), k, OmegaConfig(300, 400, 20, 15, 0.01)).attractor for k in (2, 3))
    assert semidist(a2, a3) == 0.0


def test_strong_B_batch_equals_single():
    cfg = OmegaConfig(20, 40, 5, 11, 1e-9)
    ws = [AFFINE.driver(i) for i in range(3)]
    for w, b in zip(ws, strong_B_batch(AFFINE, ws, 2, cfg)):
        s = build_strong_B(AFFINE, w, 2, cfg)
        assert np.array_equal(s.attractor.points, b.attractor.points)


def test_exhausting_set_respects_state_box():
    sys = make_double_well(box=1.5)
    X = exhausting_set(sys, np.zeros(1), 3.0, 11)
    assert X.points.min() == -1.5 and X.points.max() == 1.5


def test_strong_C_contraction_affine(affine_setup):
    ws, c_sets = affine_setup
    cfg = OmegaConfig(60, 100, 10, 21, 1e-9)
    sc = build_strong_C(CONTRACTION, CONTRACTION.driver(0), [Box([-0.1], [0.1]), Box([-0.01], [0.01])], cfg)
    assert semidist(sc.attractor, PointCloud([[0.0]])) < 1e-12
    for w in ws[:5]:
        sc = build_strong_C(AFFINE, w, c_sets[:3], cfg)
        assert len(sc.attractor) == 1
        assert abs(sc.attractor.points[0, 0] - affine_series(AFFINE, w, 200)) < 1e-8


def test_strong_C_agrees_with_strong_B_on_double_well():
    sys = make_double_well()
    ws = [sys.driver(i) for i in range(100)]
    c_sets = fit_c_sets(sys, ws, Box([-2.0], [2.0]), [1 - 1 / k for k in (2, 3, 4)], 1000, 21)
    for w in ws[:2]:
        a_b = build_strong_B(sys, w, 3, DW_CFG).attractor
        a_c = build_strong_C(sys, w, c_sets, DW_CFG).attractor
        assert hausdorff(a_b, a_c) <= 0.05


def test_schedule_contraction_u_is_n_plus_one(contraction_setup):
    ws, c_sets = contraction_setup
    sched = find_schedule(CONTRACTION, ws, c_sets, 6, range(2, 30))
    assert sched.u == [n + 1 for n in range(1, 7)]
    assert sched.t == list(np.cumsum(sched.u))
    assert all(b > a for a, b in zip(sched.B_radii, sched.B_radii[1:]))
    for k, r in enumerate(sched.B_radii, start=1):
        assert c_sets[k - 1].farthest_distance([0.0]) + 1 <= r


def test_schedule_affine_feasible(affine_setup):
    ws, c_sets = affine_setup
    sched = find_schedule(AFFINE, ws, c_sets, 5, range(6, 40))
    assert len(sched) == 5 and all(u > n for n, u in enumerate(sched.u, start=1))


def test_schedule_rotation_infeasible_at_level_one():
    sys = make_rotation()
    ws = [sys.driver(i) for i in range(200)]
    ring = PointCloud(Neighborhood.ball([0.0, 0.0], 2.0)._boundary(64))
    c_sets = fit_c_sets(sys, ws, ring, LEVELS[:3], 20)
    with pytest.raises(ScheduleInfeasible) as info:
        find_schedule(sys, ws, c_sets, 3, range(2, 30))
    assert info.value.level == 1


def test_schedule_search_is_deterministic(affine_setup):
    ws, c_sets = affine_setup
    a = find_schedule(AFFINE, ws[:300], c_sets, 3, range(5, 20))
    b = find_schedule(AFFINE, ws[:300], c_sets, 3, range(5, 20))
    assert a.to_json() == b.to_json()


def test_schedule_json_roundtrip_and_invariants(contraction_setup):
    ws, c_sets = contraction_setup
    sched = find_schedule(CONTRACTION, ws, c_sets, 3, range(2, 10))
    back = Schedule.from_json(sched.to_json())
    assert back.to_json() == sched.to_json()
    with pytest.raises(ValueError):
        Schedule(sched.regions, [1, 3, 4], [1, 4, 8], [], [], c_sets)
    with pytest.raises(ValueError):
        Schedule(sched.regions, [2, 3, 4], [2, 2, 8], [], [], c_sets)


def test_radii_validation(contraction_setup):
    ws, c_sets = contraction_setup
    with pytest.raises(ValueError):
        find_schedule(CONTRACTION, ws, c_sets, 3, range(2, 10), radii=[0.5, 2.0, 3.0])
    with pytest.raises(ValueError):
        find_schedule(CONTRACTION, ws, c_sets, 3, range(2, 10), radii=[2.0, 2.0, 3.0])
    r = ball_radii(c_sets, np.zeros(1), 4)
    assert r == sorted(set(r))


def test_weak_contraction(contraction_setup):
    ws, c_sets = contraction_setup
    sched = find_schedule(CONTRACTION, ws, c_sets, 6, range(2, 30))
    wb = build_weak(CONTRACTION, ws[0], sched, 6)
    assert wb.j0 == 1
    assert semidist(wb.attractor, PointCloud([[0.0]])) <= 6 * 0.5 ** sched.t[-1]
    one = build_weak(CONTRACTION, ws[0], sched, 1)
    d1 = pullback(CONTRACTION, sched.t[0], Neighborhood.ball([0.0], sched.B_radii[0]).sample(41), ws[0])
    assert hausdorff(one.attractor, d1) == 0.0 and one.j0 == 1


def test_weak_affine_matches_oracle(affine_setup):
    ws, c_sets = affine_setup
    sched = find_schedule(AFFINE, ws, c_sets, 6, range(10, 60))
    res = weak_batch(AFFINE, ws[:100], sched, 6, 1e-9)
    for w, wb in zip(ws, res):
        assert len(wb.attractor) == 1
        assert abs(wb.attractor.points[0, 0] - affine_series(AFFINE, w, 200)) < 1e-7
    assert np.mean([wb.j0 <= 3 for wb in res]) >= 0.95


def test_weak_batch_equals_single(affine_setup):
    ws, c_sets = affine_setup
    sched = find_schedule(AFFINE, ws, c_sets, 3, range(5, 20))
    batch = weak_batch(AFFINE, ws[:5], sched, 3)
    for w, b in zip(ws, batch):
        s = build_weak(AFFINE, w, sched, 3)
        assert np.array_equal(s.attractor.points, b.attractor.points) and s.j0 == b.j0


def test_weak_unstable_when_last_nesting_fails(contraction_setup):
    ws, c_sets = contraction_setup
    sched = find_schedule(CONTRACTION, ws, c_sets, 3, range(2, 10))
    # shrink B_2 so the image of B_3 after u_3 steps cannot fit
    regions = list(sched.regions)
    regions[1] = Neighborhood.ball([0.0], 1e-6)
    bad = Schedule(regions, sched.u, sched.t, sched.prob_floor, sched.delta_seq, sched.c_sets)
    with pytest.raises(WeakConstructionUnstable):
        build_weak(CONTRACTION, ws[0], bad, 3)
    ens = weak_ensemble(CONTRACTION, ws[:10], bad, 3)
    assert ens.summary["unstable"] == 10
    assert ens.summary == ensemble_summary(ens.records, 3)


def test_weak_C_contraction_and_affine(contraction_setup, affine_setup):
    ws, c_sets = contraction_setup
    sched = find_schedule_C(CONTRACTION, ws, c_sets, 4, range(2, 20))
    assert sched.kind == "C" and len(sched.gammas) == 4
    wb = build_weak_C(CONTRACTION, ws[0], sched, 4)
    assert semidist(wb.attractor, PointCloud([[0.0]])) < 1e-3
    ws, c_sets = affine_setup
    sched = find_schedule_C(AFFINE, ws, c_sets, 6, range(10, 60))
    for w in ws[:20]:
        wb = build_weak_C(AFFINE, w, sched, 6, 1e-9)
        assert abs(wb.attractor.points[0, 0] - affine_series(AFFINE, w, 200)) < 1e-7
    plain = find_schedule(AFFINE, ws, c_sets, 3, range(10, 60))
    with pytest.raises(ValueError):
        build_weak_C(AFFINE, ws[0], plain, 3)


def test_relaxed_feasibility_is_a_superset_on_double_well():
    sys = make_double_well()
    ws = [sys.driver(i) for i in range(200)]
    c_sets = fit_c_sets(sys, ws, Box([-2.0], [2.0]), LEVELS[:4], 1000, 21)
    radii = ball_radii(c_sets, np.zeros(1), 4)
    regions = [Neighborhood.ball([0.0], r) for r in radii]
    grid = list(range(5, 400, 40))
    t_prev = 0
    for n in range(1, 5):
        prev = regions[n - 2] if n > 1 else None
        strict = level_table(sys, ws, n, regions[n - 1], prev, c_sets, t_prev, grid, False, density=15)
        loose = level_table(sys, ws, n, regions[n - 1], prev, c_sets, t_prev, grid, True, density=15)
        assert all(b or not a for a, b in zip(strict.feasible, loose.feasible))
        t_prev += grid[-1]


def test_feasibility_table_of_found_schedule(affine_setup):
    ws, c_sets = affine_setup
    sched = find_schedule(AFFINE, ws, c_sets, 3, range(5, 20))
    strict = feasibility_table(AFFINE, ws, sched, range(5, 20), relaxed=False)
    loose = feasibility_table(AFFINE, ws, sched, range(5, 20), relaxed=True)
    for n, (s, l) in enumerate(zip(strict, loose), start=1):
        assert s.feasible[s.u.index(sched.u[n - 1])]
        assert all(b or not a for a, b in zip(s.feasible, l.feasible))


def test_borel_cantelli_budget_affine(affine_setup):
    ws, c_sets = affine_setup
    sched = find_schedule(AFFINE, ws, c_sets, 6, range(10, 60))
    ens = weak_ensemble(AFFINE, ws, sched, 6)
    s = ens.summary
    assert len(ens.records) == len(ws)
    assert s["unstable_frequency"] <= s["unstable_budget"] + 3 * s["unstable_stderr"]
    assert s["j0_at_most_3"] >= 0.95
