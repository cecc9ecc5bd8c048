import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pibtsmooth import (
    Connectivity,
    CriticalRegion,
    DiscretePlan,
    GridMap,
    TimedPath,
    arclength,
    build_schedule,
    line_of_sight,
    plan,
    smooth_plan,
    string_pull,
)
from pibtsmooth.benchmark_io import scenario_from_cells
from pibtsmooth.interaction import InteractionSchedule
from pibtsmooth.smoothing import final_arrival, raw_paths, split_times, supercover

FOUR, EIGHT = Connectivity.FOUR, Connectivity.EIGHT


def _schedule(regions, n=2, w=10, h=10):
    return InteractionSchedule([[] for _ in range(n)], list(regions), w, h)


def _reference_pull(seg, blocked, regions, agent):
    """First-failure greedy pulling driven by the exact oracle."""
    out, i = [seg[0]], 0
    while i < len(seg) - 1:
        nxt = i + 1
        for j in range(i + 2, len(seg)):
            if not oracles.los_exact(seg[i], seg[j], blocked, regions, agent):
                break
            nxt = j
        out.append(seg[nxt])
        i = nxt
    return out


def test_wait_in_place_is_visible():
    g = GridMap.empty(3, 3)
    assert line_of_sight((0.0, 1.5, 1.5), (1.0, 1.5, 1.5), g, _schedule([]), 0)


def test_blocked_cell_breaks_sight():
    g = GridMap.from_obstacles(5, 5, [(2, 2)])
    assert not line_of_sight((0.0, 0.5, 2.5), (4.0, 4.5, 2.5), g, None, None)


def test_corner_graze_counts_as_blocked():
    g = GridMap.from_obstacles(3, 3, [(1, 0)])
    # this chord runs through (1, 1), the corner of the blocked cell
    assert not line_of_sight((0.0, 0.5, 1.5), (1.0, 1.5, 0.5), g, None, None)
    assert (1, 0) in supercover(0.5, 1.5, 1.5, 0.5)


def test_region_blocks_only_during_its_window():
    g = GridMap.empty(10, 10)
    sched = _schedule([CriticalRegion(1, (2.0, 3.0), 4, 5, 0, 1)])
    a, b = (0.0, 0.5, 0.5), (4.0, 8.5, 0.5)  # inside x in [4, 6] for t in [1.75, 2.75]
    assert not line_of_sight(a, b, g, sched, 0)
    shifted = (a[0] + 1.5, a[1], a[2]), (b[0] + 1.5, b[1], b[2])
    assert line_of_sight(*shifted, g, sched, 0)
    for seg, want in (((a, b), False), (shifted, True)):
        verdict, _ = oracles.los_oracle(*seg, g.blocked, sched.regions, 0)
        assert verdict is want


def test_own_region_is_ignored():
    g = GridMap.empty(10, 10)
    sched = _schedule([CriticalRegion(0, (0.0, 5.0), 0, 9, 0, 9)])
    assert line_of_sight((0.0, 0.5, 0.5), (4.0, 8.5, 0.5), g, sched, 0)


def test_time_must_advance():
    with pytest.raises(ValueError):
        line_of_sight((1.0, 0.5, 0.5), (1.0, 0.5, 0.5), GridMap.empty(2, 2), None, None)


def test_straight_run_collapses():
    g = GridMap.empty(12, 3)
    seg = TimedPath.from_cells([(x, 1) for x in range(11)]).waypoints
    out = string_pull(seg, g, None, None)
    assert out == [seg[0], seg[-1]]
    assert arclength(TimedPath(tuple(out))) == pytest.approx(10.0)


def test_l_shape_becomes_a_chord():
    g = GridMap.empty(6, 6)
    cells = [(x, 0) for x in range(4)] + [(3, y) for y in range(1, 5)]
    raw = TimedPath.from_cells(cells)
    out = TimedPath(tuple(string_pull(raw.waypoints, g, None, None)))
    assert len(out) == 2
    assert arclength(raw) == 7 and arclength(out) == pytest.approx(5.0)
    assert 100 * (7 - 5) / 7 == pytest.approx(28.57, abs=0.01)


def _staircase(k):
    cells = [(0, 0)]
    for i in range(k):
        cells += [(i + 1, i), (i + 1, i + 1)]
    return cells


def test_staircase_pulls_to_one_chord():
    g = GridMap.empty(8, 8)
    seg = TimedPath.from_cells(_staircase(4)).waypoints
    assert string_pull(seg, g, None, None) == [seg[0], seg[-1]]


def test_region_splits_staircase_chord():
    g = GridMap.empty(8, 8)
    seg = TimedPath.from_cells(_staircase(4)).waypoints
    regions = [CriticalRegion(1, (2.0, 3.0), 2, 2, 2, 2)]
    sched = _schedule(regions)
    # the staircase itself respects the region, the full chord does not
    assert all(oracles.los_exact(p, q, g.blocked, regions, 0) for p, q in zip(seg, seg[1:]))
    assert not oracles.los_exact(seg[0], seg[-1], g.blocked, regions, 0)
    out = string_pull(seg, g, sched, 0)
    assert 2 < len(out) < len(seg)
    assert out == _reference_pull(seg, g.blocked, regions, 0)
    for p, q in zip(out, out[1:]):
        assert oracles.los_sampled(p, q, g.blocked, regions, 0) is not False


def test_everyone_home_single_waypoint():
    g = GridMap.empty(4, 4)
    p = DiscretePlan([((0, 0), (3, 3))], [(0, 0), (3, 3)], True, EIGHT)
    assert all(len(path) == 1 for path in smooth_plan(p, g, EIGHT))


def test_idle_tail_split():
    cells = [(0, 0), (1, 0), (2, 0), (2, 0), (2, 0)]
    p = DiscretePlan([(c,) for c in cells], [(2, 0)], True, EIGHT)
    assert final_arrival(p, 0) == 2
    sched = build_schedule(p, EIGHT, GridMap.empty(4, 4))
    assert split_times(p, sched, 0) == [0, 2, 4]
    out = smooth_plan(p, GridMap.empty(4, 4), EIGHT)[0]
    assert [w[0] for w in out.waypoints] == [0.0, 2.0, 4.0]


def test_unknown_mode():
    p = DiscretePlan([((0, 0),)], [(0, 0)], True, EIGHT)
    with pytest.raises(ValueError):
        smooth_plan(p, GridMap.empty(2, 2), EIGHT, mode="fast")


@st.composite
def solved_plans(draw):
    w, h = draw(st.integers(4, 10)), draw(st.integers(4, 10))
    seed = draw(st.integers(0, 2**16))
    rng = np.random.default_rng(seed)
    blocked = rng.random((h, w)) < draw(st.sampled_from([0.0, 0.15]))
    free = [(x, y) for y in range(h) for x in range(w) if not blocked[y, x]]
    n = draw(st.integers(1, max(1, min(6, len(free) // 3))))
    order = rng.permutation(len(free))
    starts = [free[i] for i in order[:n]]
    goals = [free[i] for i in order[n : 2 * n]]
    g = GridMap(w, h, blocked)
    conn = draw(st.sampled_from([FOUR, EIGHT]))
    try:
        p = plan(scenario_from_cells(starts, goals), g, conn, rng_seed=seed, horizon=150)
    except Exception:
        p = None
    return g, conn, p


@settings(max_examples=40)
@given(solved_plans(), st.sampled_from(["aware", "naive"]))
def test_smoothing_invariants(case, mode):
    g, conn, p = case
    if p is None:
        return
    raw = raw_paths(p)
    out = smooth_plan(p, g, conn, mode)
    sched = build_schedule(p, conn, g)
    for a, (r, s) in enumerate(zip(raw, out)):
        assert arclength(s) <= arclength(r) + 1e-9
        assert s.end_time == r.end_time == p.t_max
        assert s.waypoints[0] == r.waypoints[0] and s.waypoints[-1] == r.waypoints[-1]
        assert s.max_speed() <= math.sqrt(2) + 1e-9
        kept = set(s.waypoints)
        assert set(r.waypoints) >= kept
        if mode == "aware":
            for pin in sched.pinned[a]:
                assert (float(pin.t), pin.cell[0] + 0.5, pin.cell[1] + 0.5) in kept
            # single raw steps are kept unchecked; every pulled chord must see
            for q0, q1 in zip(s.waypoints, s.waypoints[1:]):
                if q1[0] - q0[0] > 1:
                    assert oracles.los_exact(q0, q1, g.blocked, sched.regions, a)
        else:
            for q0, q1 in zip(s.waypoints, s.waypoints[1:]):
                assert oracles.los_exact(q0, q1, g.blocked, [], a)


def test_greedy_pull_is_not_idempotent():
    # corner grazing makes visibility non-monotone: (2.5, 1.5) cannot see the
    # next raw point (1.5, 0.5) past blocked (2, 0), yet sees the goal beyond it
    blocked = np.zeros((7, 5), dtype=bool)
    for x, y in ((2, 0), (3, 0), (1, 2), (3, 2), (0, 4), (1, 4), (2, 6)):
        blocked[y, x] = True
    g = GridMap(5, 7, blocked)
    seg = TimedPath.from_cells([(4, 3), (3, 3), (2, 3), (2, 2), (2, 1), (1, 1), (1, 0), (0, 0)]).waypoints
    once = string_pull(seg, g, None, None)
    assert [w[0] for w in once] == [0.0, 2.0, 4.0, 5.0, 7.0]
    assert [w[0] for w in string_pull(once, g, None, None)] == [0.0, 2.0, 4.0, 7.0]


@settings(max_examples=30)
@given(solved_plans())
def test_second_pass_only_shortens(case):
    g, conn, p = case
    if p is None:
        return
    sched = build_schedule(p, conn, g)
    for a, s in enumerate(smooth_plan(p, g, conn, "aware", sched)):
        cuts = set(float(t) for t in split_times(p, sched, a))
        wp = list(s.waypoints)
        ends = [k for k, w in enumerate(wp) if w[0] in cuts]
        for k0, k1 in zip(ends, ends[1:]):
            seg = wp[k0 : k1 + 1]
            again = string_pull(seg, g, sched, a)
            assert again[0] == seg[0] and again[-1] == seg[-1]
            assert set(again) <= set(seg)
            assert arclength(TimedPath(tuple(again))) <= arclength(TimedPath(tuple(seg))) + 1e-9
            for q0, q1 in zip(again, again[1:]):
                if q1[0] - q0[0] > 1:
                    assert oracles.los_exact(q0, q1, g.blocked, sched.regions, a)
