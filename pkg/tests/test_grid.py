import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from pibtsmooth import Connectivity, GridError, GridMap, distance_field, neighbors
from pibtsmooth.grid import distance_fields

FOUR, EIGHT = Connectivity.FOUR, Connectivity.EIGHT


@st.composite
def maps(draw, max_side=9):
    w = draw(st.integers(1, max_side))
    h = draw(st.integers(1, max_side))
    cells = draw(st.lists(st.booleans(), min_size=w * h, max_size=w * h))
    blocked = np.array(cells, dtype=bool).reshape(h, w)
    return GridMap(w, h, blocked)


@st.composite
def map_and_free_cell(draw):
    g = draw(maps())
    free = [(x, y) for y in range(g.height) for x in range(g.width) if not g.blocked[y, x]]
    if not free:
        g = GridMap.empty(g.width, g.height)
        free = [(0, 0)]
    return g, draw(st.sampled_from(free))


def test_interior_cell_four_connected():
    assert len(neighbors(GridMap.empty(5, 5), (2, 2), FOUR)) == 5


def test_interior_cell_eight_connected():
    assert len(neighbors(GridMap.empty(5, 5), (2, 2), EIGHT)) == 9


def test_corner_cutting_excluded():
    g = GridMap.from_obstacles(5, 5, [(1, 2), (2, 1)])
    assert set(neighbors(g, (1, 1), EIGHT)) == {(1, 1), (0, 1), (1, 0), (0, 0)}


def test_corner_cutting_allowed_when_asked():
    g = GridMap.from_obstacles(5, 5, [(1, 2), (2, 1)])
    assert (2, 2) in neighbors(g, (1, 1), EIGHT, corner_cutting=True)


def test_neighbors_rejects_bad_cells():
    g = GridMap.from_obstacles(3, 3, [(1, 1)])
    with pytest.raises(GridError):
        neighbors(g, (1, 1), FOUR)
    with pytest.raises(GridError):
        neighbors(g, (3, 0), FOUR)


def test_wait_move_listed_first():
    assert neighbors(GridMap.empty(3, 3), (1, 1), EIGHT)[0] == (1, 1)


def test_distance_to_goal_itself():
    assert distance_field(GridMap.empty(5, 5), (2, 3), EIGHT)[(2, 3)] == 0.0


def test_manhattan_on_empty_map():
    f = distance_field(GridMap.empty(10, 10), (0, 0), FOUR)
    assert f[(3, 4)] == 7.0


def test_octile_on_empty_map():
    f = distance_field(GridMap.empty(10, 10), (0, 0), EIGHT)
    assert f[(3, 5)] == pytest.approx(3 * math.sqrt(2) + 2)
    assert f[(3, 5)] == pytest.approx(oracles.dijkstra(np.zeros((10, 10), bool), (0, 0), 8)[(3, 5)])


def test_blocked_goal_is_an_error():
    g = GridMap.from_obstacles(3, 3, [(1, 1)])
    with pytest.raises(GridError):
        distance_field(g, (1, 1), FOUR)


def test_unreachable_cells_are_infinite():
    g = GridMap.from_obstacles(3, 3, [(1, 0), (1, 1), (1, 2)])
    assert math.isinf(distance_field(g, (0, 0), EIGHT)[(2, 2)])


def test_unit_diagonal_cost_gives_chebyshev():
    f = distance_field(GridMap.empty(10, 10), (0, 0), EIGHT, diagonal_cost=1.0)
    assert f[(3, 5)] == 5.0


def test_map_dimensions_validated():
    with pytest.raises(GridError):
        GridMap(3, 2, np.zeros((3, 3), bool))
    with pytest.raises(GridError):
        GridMap(0, 2, np.zeros((2, 0), bool))


def test_blocked_mask_is_frozen():
    g = GridMap.empty(2, 2)
    with pytest.raises(ValueError):
        g.blocked[0, 0] = True


@given(map_and_free_cell(), st.sampled_from([FOUR, EIGHT]))
def test_neighbors_are_free_and_include_self(gc, conn):
    g, c = gc
    out = neighbors(g, c, conn)
    assert c in out
    assert all(g.passable(n) for n in out)
    assert set(out) == set(oracles.moves(g.blocked, c, conn.value))


@given(map_and_free_cell())
def test_eight_neighbors_contain_four_neighbors(gc):
    g, c = gc
    assert set(neighbors(g, c, FOUR)) <= set(neighbors(g, c, EIGHT))


@given(map_and_free_cell(), st.sampled_from([FOUR, EIGHT]))
def test_distance_field_matches_dijkstra(gc, conn):
    g, goal = gc
    ours = distance_field(g, goal, conn).dist
    ref = oracles.dijkstra(g.blocked, goal, conn.value)
    for y in range(g.height):
        for x in range(g.width):
            want = ref.get((x, y), math.inf)
            assert ours[y, x] == pytest.approx(want) if math.isfinite(want) else math.isinf(ours[y, x])


@given(map_and_free_cell(), st.sampled_from([FOUR, EIGHT]))
def test_distance_field_triangle_inequality(gc, conn):
    g, goal = gc
    f = distance_field(g, goal, conn)
    for y in range(g.height):
        for x in range(g.width):
            if g.blocked[y, x] or math.isinf(f[(x, y)]):
                continue
            for n in neighbors(g, (x, y), conn)[1:]:
                step = math.sqrt(2) if n[0] != x and n[1] != y else 1.0
                assert f[(x, y)] <= f[n] + step + 1e-9


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 11), st.integers(0, 11))
def test_closed_forms_on_empty_maps(w, h, gx, gy):
    goal = (min(gx, w - 1), min(gy, h - 1))
    g = GridMap.empty(w, h)
    four, eight = distance_fields(g, [goal, goal], FOUR)[0], distance_field(g, goal, EIGHT)
    for y in range(h):
        for x in range(w):
            dx, dy = x - goal[0], y - goal[1]
            assert four[(x, y)] == abs(dx) + abs(dy)
            assert eight[(x, y)] == pytest.approx(oracles.octile(dx, dy), abs=1e-12)
