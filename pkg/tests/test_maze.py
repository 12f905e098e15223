from __future__ import annotations


import pytest

from ace.errors import ConfigError, DomainError, ParseError
from ace.maze import (
    Maze,
    MazeDomain,
    bfs_shortest_path,
    execute_trajectory,
    fitness,
    generate_maze,
    manhattan,
    maze_from_text,
    maze_to_text,
    path_efficiency,
    valid_neighbors,
)

N, E, S, W = 0, 1, 2, 3


def corridor(n):
    """1 x n corridor built by hand (the generator requires >= 2x2)."""
    edges = {((x, 0), (x + 1, 0)) for x in range(n - 1)}
    return Maze(n, 1, (0, 0), (n - 1, 0), 0.0, 0, edges)


def reachable_cells(maze):
    seen = {maze.start}
    stack = [maze.start]
    while stack:
        cell = stack.pop()
        for _, nxt in valid_neighbors(maze, cell):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


# -- generation -------------------------------------------------------------


def test_perfect_maze_is_spanning_tree():
    m = generate_maze(15, 15, 0.0, 3)
    assert len(m.open_edges) == 15 * 15 - 1
    assert len(reachable_cells(m)) == 15 * 15


def test_full_connectivity_opens_everything():
    m = generate_maze(15, 15, 1.0, 3)
    assert len(m.open_edges) == len(m.all_interior_edges())


def test_partial_connectivity_edge_count():
    tree = generate_maze(15, 15, 0.0, 12345)
    closed = len(tree.all_interior_edges()) - len(tree.open_edges)
    m = generate_maze(15, 15, 0.3, 12345)
    assert len(m.open_edges) == 224 + int(0.3 * closed)


def test_generation_deterministic():
    a = generate_maze(9, 9, 0.3, 42)
    b = generate_maze(9, 9, 0.3, 42)
    assert a.open_edges == b.open_edges
    c = generate_maze(9, 9, 0.3, 43)
    assert c.open_edges != a.open_edges


def test_connectivity_monotone_in_open_edges():
    counts = [
        len(generate_maze(11, 11, conn, 5).open_edges)
        for conn in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    assert counts == sorted(counts)


def test_generator_validates_arguments():
    with pytest.raises(ConfigError):
        generate_maze(1, 5, 0.0, 0)
    with pytest.raises(ConfigError):
        generate_maze(5, 5, 1.5, 0)


# -- neighbors ----------------------------------------------------------------


def test_neighbors_full_grid_order():
    m = generate_maze(5, 5, 1.0, 1)
    assert valid_neighbors(m, (2, 2)) == [
        (N, (2, 1)),
        (E, (3, 2)),
        (S, (2, 3)),
        (W, (1, 2)),
    ]
    assert valid_neighbors(m, (0, 0)) == [(E, (1, 0)), (S, (0, 1))]


def test_neighbors_match_rendered_walls():
    m = generate_maze(5, 5, 0.0, 7)
    text = maze_to_text(m)
    lines = text.splitlines()
    for move, cell in valid_neighbors(m, (0, 0)):
        if move == E:
            assert lines[2][3] == " "  # no wall between (0,0) and (1,0)
        if move == S:
            assert lines[3][1] == " "


def test_neighbors_out_of_bounds():
    m = generate_maze(4, 4, 0.0, 1)
    with pytest.raises(DomainError):
        valid_neighbors(m, (4, 0))


def test_corner_of_perfect_maze_has_single_opening():
    m = corridor(5)
    assert valid_neighbors(m, (0, 0)) == [(E, (1, 0))]


# -- execution ----------------------------------------------------------------


def test_empty_sequence():
    m = generate_maze(4, 4, 1.0, 1)
    res = execute_trajectory(m, [])
    assert res.final == (0, 0)
    assert not res.success
    trivial = Maze(2, 2, (0, 0), (0, 0), 1.0, 0, {((0, 0), (1, 0))})
    assert execute_trajectory(trivial, []).success


def test_straight_corridor():
    m = corridor(6)
    res = execute_trajectory(m, [E] * 5)
    assert res.success and res.steps_used == 5 and res.wall_hits == 0


def test_wall_hits_are_skipped_and_counted():
    m = corridor(3)
    res = execute_trajectory(m, [N, E, S, E])
    assert res.success
    assert res.steps_used == 2
    assert res.wall_hits == 2


def test_execution_stops_at_goal():
    m = corridor(3)
    res = execute_trajectory(m, [E, E, W, W])
    assert res.success and res.steps_used == 2
    assert res.final == (2, 0)


def test_bfs_move_list_executes_optimally():
    for seed in (2, 5, 9):
        m = generate_maze(5, 5, 0.0, seed)
        length, moves = bfs_shortest_path(m)
        res = execute_trajectory(m, moves)
        assert res.success
        assert res.steps_used == length
        assert path_efficiency(m, res) == 1.0


# -- fitness --------------------------------------------------------------------


def test_fitness_success_example():
    m = generate_maze(15, 15, 1.0, 1)
    res = execute_trajectory(m, bfs_shortest_path(m)[1])
    assert res.steps_used == 28
    from ace.maze import ExecutionResult

    twenty = ExecutionResult(final=m.goal, visited=[], success=True, steps_used=20, wall_hits=0)
    assert fitness(m, twenty) == 9800.0


def test_fitness_no_progress_is_zero():
    m = generate_maze(8, 8, 0.0, 4)
    res = execute_trajectory(m, [])
    assert fitness(m, res) == 0.0


def test_fitness_half_distance():
    from ace.maze import ExecutionResult

    m = generate_maze(15, 15, 1.0, 1)
    d_init = manhattan(m.start, m.goal)
    mid = (7, 7)
    assert manhattan(mid, m.goal) * 2 == d_init
    res = ExecutionResult(final=mid, visited=[], success=False, steps_used=14, wall_hits=0)
    assert fitness(m, res) == 2500.0


def test_fitness_success_ordering():
    from ace.maze import ExecutionResult

    m = generate_maze(10, 10, 1.0, 1)
    f = [
        fitness(m, ExecutionResult(m.goal, [], True, steps, 3))
        for steps in (20, 30, 50)
    ]
    assert f[0] > f[1] > f[2]


def test_path_efficiency_cases():
    m = corridor(5)
    optimal = execute_trajectory(m, [E] * 4)
    assert path_efficiency(m, optimal) == 1.0
    wandering = execute_trajectory(m, [E, W] * 2 + [E] * 4)
    assert wandering.steps_used == 8
    assert path_efficiency(m, wandering) == pytest.approx(0.5)
    failed = execute_trajectory(m, [E])
    assert path_efficiency(m, failed) is None


# -- shortest path ----------------------------------------------------------------


def test_bfs_open_2x2():
    m = Maze(
        2, 2, (0, 0), (1, 1), 1.0, 0,
        {((0, 0), (1, 0)), ((0, 0), (0, 1)), ((1, 0), (1, 1)), ((0, 1), (1, 1))},
    )
    length, moves = bfs_shortest_path(m)
    assert length == 2
    assert moves == [E, S]  # E before S in expansion order


def test_bfs_corridor():
    assert bfs_shortest_path(corridor(9))[0] == 8


def test_bfs_full_grid_is_manhattan():
    m = generate_maze(15, 15, 1.0, 77)
    assert bfs_shortest_path(m)[0] == 28


# -- text format ------------------------------------------------------------------


def test_text_round_trip():
    for conn, seed in ((0.0, 1), (0.3, 2), (1.0, 3)):
        m = generate_maze(7, 5, conn, seed)
        again = maze_from_text(maze_to_text(m))
        assert again.open_edges == m.open_edges
        assert (again.width, again.height) == (7, 5)
        assert again.start == m.start and again.goal == m.goal
        assert again.connectivity == conn and again.seed == seed


def test_text_parse_errors():
    with pytest.raises(ParseError):
        maze_from_text("")
    with pytest.raises(ParseError):
        maze_from_text("3 3 0 0 2 2 0.0\n")  # missing field
    m = generate_maze(3, 3, 0.0, 1)
    truncated = "\n".join(maze_to_text(m).splitlines()[:3])
    with pytest.raises(ParseError):
        maze_from_text(truncated)


def test_text_rejects_open_border():
    m = generate_maze(3, 3, 1.0, 1)
    lines = maze_to_text(m).splitlines()
    lines[1] = "+  " + lines[1][3:]
    with pytest.raises(ParseError, match="border"):
        maze_from_text("\n".join(lines))


# -- domain adapter -----------------------------------------------------------------


def test_domain_tables_match_maze():
    m = generate_maze(6, 6, 0.3, 11)
    dom = MazeDomain(m)
    assert dom.atomic_op_names == ["N", "E", "S", "W"]
    for y in range(6):
        for x in range(6):
            idx = y * 6 + x
            nbrs = [(mv, (c % 6, c // 6)) for mv, c in dom.neighbor_table[idx]]
            assert nbrs == valid_neighbors(m, (x, y))
    assert dom.heuristic[dom.goal_index] == 1.0
    assert dom.heuristic[dom.start_index] == 0.0


def test_domain_path_budget():
    m = generate_maze(8, 8, 0.0, 3)
    assert MazeDomain(m).default_max_path_len == 2 * 64
    dom = MazeDomain(m, path_slack=6)
    assert dom.default_max_path_len == bfs_shortest_path(m)[0] + 6


def test_domain_evaluates_sequences():
    m = corridor(4)
    dom = MazeDomain(m)
    traj = dom.evaluate_sequence([E, E, E], [E, E, E])
    assert traj.success and traj.fitness == 10000 - 30
    assert traj.states == [0, 1, 2, 3]
    assert dom.path_efficiency(traj) == 1.0
