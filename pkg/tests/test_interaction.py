import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from pibtsmooth import Connectivity, CriticalRegion, DiscretePlan, GridMap, build_schedule, directly_interacting
from pibtsmooth.interaction import PinnedWaypoint, trivial_schedule

FOUR, EIGHT = Connectivity.FOUR, Connectivity.EIGHT


def _plan(paths, conn=EIGHT):
    configs = [tuple(p[t] for p in paths) for t in range(len(paths[0]))]
    return DiscretePlan(configs, [p[-1] for p in paths], True, conn)


def test_three_apart_do_not_interact():
    assert not directly_interacting([(0, 0), (3, 0)], 0, 1, EIGHT)


def test_diagonal_neighbors_interact():
    assert directly_interacting([(4, 4), (5, 5)], 0, 1, EIGHT)


def test_chebyshev_two_interacts():
    cfg = [(4, 4), (6, 6)]
    assert directly_interacting(cfg, 0, 1, EIGHT)
    assert (6, 6) in oracles.hop_ball((4, 4), 2, 8, 12)


def test_four_connected_uses_manhattan():
    assert not directly_interacting([(4, 4), (6, 6)], 0, 1, FOUR)
    assert directly_interacting([(4, 4), (5, 5)], 0, 1, FOUR)


def test_self_interaction_is_an_error():
    with pytest.raises(ValueError):
        directly_interacting([(0, 0)], 0, 0, EIGHT)


def test_single_agent_pins_only_endpoints():
    g = GridMap.empty(8, 8)
    s = build_schedule(_plan([[(0, 0), (1, 1), (2, 2), (3, 3)]]), EIGHT, g)
    assert s.pinned == [[PinnedWaypoint(0, (0, 0)), PinnedWaypoint(3, (3, 3))]]
    assert s.regions == []


def _passing_pair():
    a = [(t, 4) for t in range(11)]
    a[5] = (5, 5)
    b = [(11 - t, 7) for t in range(11)]
    b[5] = (6, 6)
    return a, b


def test_passing_pair_pinned_once():
    g = GridMap.empty(12, 12)
    s = build_schedule(_plan(list(_passing_pair())), EIGHT, g)
    assert s.pin_times(0) == [0, 5, 10]
    assert s.pin_times(1) == [0, 5, 10]
    assert s.pinned[0][1].cell == (5, 5) and s.pinned[1][1].cell == (6, 6)
    assert sorted((r.agent, r.window) for r in s.regions) == [(0, (5.0, 6.0)), (1, (5.0, 6.0))]
    cells = {r.agent: r.cells for r in s.regions}
    assert cells[0] == {(x, y) for x in (4, 5, 6) for y in (4, 5, 6)}


def test_corner_region_is_clipped():
    g = GridMap.empty(6, 6)
    s = build_schedule(_plan([[(0, 0), (0, 0)], [(1, 1), (1, 1)]]), EIGHT, g)
    corner = [r for r in s.regions if r.agent == 0]
    assert corner and all(r.cells == {(0, 0), (0, 1), (1, 0), (1, 1)} for r in corner)


def test_trivial_schedule():
    g = GridMap.empty(12, 12)
    s = trivial_schedule(_plan(list(_passing_pair())), g)
    assert s.pin_times(0) == [0, 10] and s.regions == []


def test_region_cells_property():
    r = CriticalRegion(3, (2.0, 3.0), 1, 3, 0, 1)
    assert len(r.cells) == 6 and (2, 1) in r.cells


@st.composite
def random_plans(draw):
    n = draw(st.integers(1, 5))
    t = draw(st.integers(0, 6))
    seed = draw(st.integers(0, 2**16))
    rng = np.random.default_rng(seed)
    paths = []
    for _ in range(n):
        c = (int(rng.integers(0, 10)), int(rng.integers(0, 10)))
        p = [c]
        for _ in range(t):
            dx, dy = rng.integers(-1, 2, size=2)
            c = (int(np.clip(c[0] + dx, 0, 9)), int(np.clip(c[1] + dy, 0, 9)))
            p.append(c)
        paths.append(p)
    return paths, draw(st.sampled_from([FOUR, EIGHT]))


@given(random_plans())
def test_schedule_matches_brute_force(case):
    paths, conn = case
    g = GridMap.empty(10, 10)
    s = build_schedule(_plan(paths, conn), conn, g)
    t_max = len(paths[0]) - 1
    for a, p in enumerate(paths):
        want = {0, t_max}
        for t in range(t_max + 1):
            others = [b for b in range(len(paths)) if b != a]
            if any(paths[b][t] in oracles.hop_ball(p[t], 2, conn.value, 10) for b in others):
                want.add(t)
        assert s.pin_times(a) == sorted(want)
        assert all(w.cell == p[w.t] for w in s.pinned[a])


@given(random_plans())
def test_regions_are_symmetric_unit_windows(case):
    paths, conn = case
    g = GridMap.empty(10, 10)
    s = build_schedule(_plan(paths, conn), conn, g)
    by_time: dict[float, set[int]] = {}
    for r in s.regions:
        assert r.window[1] - r.window[0] == 1.0
        assert paths[r.agent][int(r.window[0])] in r.cells
        assert all(0 <= x < 10 and 0 <= y < 10 for x, y in r.cells)
        by_time.setdefault(r.window[0], set()).add(r.agent)
    # interaction is mutual, so nobody is ever alone in a window
    assert all(len(agents) >= 2 for agents in by_time.values())


@given(st.integers(0, 4), st.integers(3, 6))
def test_far_apart_agents_never_pinned(t_max, gap):
    paths = [[(0, y) for y in range(t_max + 1)], [(gap, y) for y in range(t_max + 1)]]
    s = build_schedule(_plan(paths), EIGHT, GridMap.empty(10, 10))
    assert s.regions == []
    assert all(s.pin_times(a) == sorted({0, t_max}) for a in range(2))
