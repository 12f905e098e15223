"""Grid-maze world: procedural generation, movement queries, trajectory
execution and scoring, plus a breadth-first shortest-path oracle."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError, InternalError, ParseError
from .loop import Trajectory

MOVE_NAMES = ("N", "E", "S", "W")
# (dx, dy) per move; y grows downward so N decreases y.
MOVE_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))
INVERSE_MOVE = (2, 3, 0, 1)

Cell = tuple[int, int]


def _edge(a: Cell, b: Cell) -> tuple[Cell, Cell]:
    return (a, b) if a <= b else (b, a)


@dataclass
class Maze:
    """Immutable grid with per-edge walls.  Border edges are implicit and
    always closed; open_edges holds the open interior cell pairs."""

    width: int
    height: int
    start: Cell
    goal: Cell
    connectivity: float
    seed: int
    open_edges: set[tuple[Cell, Cell]]
    _bfs: tuple[int, list[int]] | None = field(default=None, repr=False, compare=False)

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_open(self, a: Cell, b: Cell) -> bool:
        return _edge(a, b) in self.open_edges

    def all_interior_edges(self) -> list[tuple[Cell, Cell]]:
        edges = []
        for y in range(self.height):
            for x in range(self.width):
                if x + 1 < self.width:
                    edges.append(((x, y), (x + 1, y)))
                if y + 1 < self.height:
                    edges.append(((x, y), (x, y + 1)))
        return edges


def generate_maze(width: int, height: int, connectivity: float, seed: int) -> Maze:
    """Depth-first carved spanning tree, then a connectivity fraction of
    the remaining closed walls opened uniformly at random.  Deterministic
    per seed; start is the top-left cell and goal the bottom-right."""
    if width < 2 or height < 2:
        raise ConfigError(f"maze dimensions must be >= 2, got {width}x{height}")
    if not 0.0 <= connectivity <= 1.0:
        raise ConfigError(f"connectivity must lie in [0, 1], got {connectivity}")
    rng = random.Random(seed)
    start = (0, 0)
    goal = (width - 1, height - 1)
    open_edges: set[tuple[Cell, Cell]] = set()
    visited = {start}
    stack = [start]
    while stack:
        x, y = stack[-1]
        options = []
        for dx, dy in MOVE_DELTAS:
            nxt = (x + dx, y + dy)
            if 0 <= nxt[0] < width and 0 <= nxt[1] < height and nxt not in visited:
                options.append(nxt)
        if not options:
            stack.pop()
            continue
        nxt = options[rng.randrange(len(options))]
        open_edges.add(_edge((x, y), nxt))
        visited.add(nxt)
        stack.append(nxt)

    maze = Maze(width, height, start, goal, connectivity, seed, open_edges)
    closed = sorted(e for e in maze.all_interior_edges() if e not in open_edges)
    extra = int(connectivity * len(closed))
    for e in rng.sample(closed, extra):
        open_edges.add(e)
    return maze


def valid_neighbors(maze: Maze, cell: Cell) -> list[tuple[int, Cell]]:
    """Open cardinal neighbors of a cell as (move, cell), in N,E,S,W order."""
    if not maze.in_bounds(cell):
        raise DomainError(f"cell {cell} outside {maze.width}x{maze.height} maze")
    x, y = cell
    out = []
    for move, (dx, dy) in enumerate(MOVE_DELTAS):
        nxt = (x + dx, y + dy)
        if maze.in_bounds(nxt) and maze.is_open(cell, nxt):
            out.append((move, nxt))
    return out


@dataclass(slots=True)
class ExecutionResult:
    final: Cell
    visited: list[Cell]
    success: bool
    steps_used: int
    wall_hits: int


def execute_trajectory(maze: Maze, moves: list[int]) -> ExecutionResult:
    """Walk a move sequence from the start.  Blocked moves are skipped and
    counted as wall hits; execution stops as soon as the goal is reached."""
    pos = maze.start
    visited = [pos]
    steps = 0
    hits = 0
    if pos == maze.goal:
        return ExecutionResult(pos, visited, True, 0, 0)
    for move in moves:
        dx, dy = MOVE_DELTAS[move]
        nxt = (pos[0] + dx, pos[1] + dy)
        if maze.in_bounds(nxt) and maze.is_open(pos, nxt):
            pos = nxt
            visited.append(pos)
            steps += 1
            if pos == maze.goal:
                break
        else:
            hits += 1
    return ExecutionResult(pos, visited, pos == maze.goal, steps, hits)


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def fitness(
    maze: Maze,
    result: ExecutionResult,
    *,
    success_base: float = 10000.0,
    step_cost: float = 10.0,
    wall_cost: float = 2.0,
    failure_scale: float = 5000.0,
) -> float:
    """Score an execution: successes earn the base minus step and wall
    penalties; failures earn credit for distance covered toward the goal.
    Never negative."""
    if result.success:
        f = success_base - step_cost * result.steps_used - wall_cost * result.wall_hits
    else:
        d_init = manhattan(maze.start, maze.goal)
        d_rem = manhattan(result.final, maze.goal)
        progress = 1.0 - d_rem / d_init if d_init > 0 else 0.0
        f = failure_scale * progress - wall_cost * result.wall_hits
    return max(f, 0.0)


def bfs_shortest_path(maze: Maze) -> tuple[int, list[int]]:
    """Minimal move count from start to goal plus one witness move list;
    ties resolve by N,E,S,W expansion order."""
    if maze._bfs is not None:
        return maze._bfs[0], list(maze._bfs[1])
    prev: dict[Cell, tuple[Cell, int]] = {maze.start: (maze.start, -1)}
    q = deque([maze.start])
    while q:
        cell = q.popleft()
        if cell == maze.goal:
            break
        for move, nxt in valid_neighbors(maze, cell):
            if nxt not in prev:
                prev[nxt] = (cell, move)
                q.append(nxt)
    if maze.goal not in prev:
        raise InternalError("goal unreachable; maze generation guarantees connectivity")
    moves = []
    cell = maze.goal
    while cell != maze.start:
        cell, move = prev[cell]
        moves.append(move)
    moves.reverse()
    maze._bfs = (len(moves), list(moves))
    return len(moves), moves


def path_efficiency(maze: Maze, result: ExecutionResult) -> float | None:
    """Shortest-path length over steps actually used; None for failures."""
    if not result.success:
        return None
    shortest, _ = bfs_shortest_path(maze)
    if result.steps_used == 0:
        return 1.0
    return shortest / result.steps_used


# -- text format -----------------------------------------------------------


def maze_to_text(maze: Maze) -> str:
    """Header line with dimensions/endpoints/parameters, then the wall
    grid drawn with +--+ rows.  Start and goal cells are marked S and G."""
    sx, sy = maze.start
    gx, gy = maze.goal
    lines = [
        f"{maze.width} {maze.height} {sx} {sy} {gx} {gy} {maze.connectivity!r} {maze.seed}"
    ]
    for y in range(maze.height):
        top = []
        mid = []
        for x in range(maze.width):
            wall_n = y == 0 or not maze.is_open((x, y), (x, y - 1))
            top.append("+" + ("--" if wall_n else "  "))
            wall_w = x == 0 or not maze.is_open((x - 1, y), (x, y))
            content = "S " if (x, y) == maze.start else ("G " if (x, y) == maze.goal else "  ")
            mid.append(("|" if wall_w else " ") + content)
        lines.append("".join(top) + "+")
        lines.append("".join(mid) + "|")
    lines.append("+--" * maze.width + "+")
    return "\n".join(lines) + "\n"


def maze_from_text(text: str) -> Maze:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty maze document")
    head = lines[0].split()
    if len(head) != 8:
        raise ParseError(f"header must have 8 fields, got {len(head)}")
    try:
        width, height, sx, sy, gx, gy = (int(v) for v in head[:6])
        connectivity = float(head[6])
        seed = int(head[7])
    except ValueError as e:
        raise ParseError(f"malformed header: {e}") from e
    expected = 1 + 2 * height + 1
    if len(lines) < expected:
        raise ParseError(f"expected {expected} lines for a {width}x{height} maze")
    open_edges: set[tuple[Cell, Cell]] = set()
    for y in range(height):
        top = lines[1 + 2 * y]
        mid = lines[2 + 2 * y]
        if len(top) < 3 * width + 1 or len(mid) < 3 * width + 1:
            raise ParseError(f"row {y}: line too short")
        for x in range(width):
            if top[3 * x + 1] != "-":
                if y == 0:
                    raise ParseError(f"row {y}: border edge must be closed")
                open_edges.add(_edge((x, y), (x, y - 1)))
            if mid[3 * x] != "|":
                if x == 0:
                    raise ParseError(f"row {y}: border edge must be closed")
                open_edges.add(_edge((x - 1, y), (x, y)))
    bottom = lines[1 + 2 * height]
    for x in range(width):
        if bottom[3 * x + 1] != "-":
            raise ParseError("bottom border must be closed")
    return Maze(width, height, (sx, sy), (gx, gy), connectivity, seed, open_edges)


# -- loop-facing adapter ----------------------------------------------------


class MazeDomain:
    """Binds a maze to the explorer interfaces: a four-move atomic
    vocabulary for sequence genomes, and an indexed cell graph with a
    goal-distance heuristic for stepwise path construction."""

    atomic_op_names = list(MOVE_NAMES)
    atomic_count = len(MOVE_NAMES)
    # Repeating a move is the domain's most basic structure (straight
    # corridors), so self-transitions stay in the valid relation.
    transition_mask_mode = "all"

    def __init__(
        self,
        maze: Maze,
        *,
        success_base: float = 10000.0,
        step_cost: float = 10.0,
        wall_cost: float = 2.0,
        failure_scale: float = 5000.0,
        path_slack: int | None = None,
    ):
        self.maze = maze
        self.fitness_args = dict(
            success_base=success_base,
            step_cost=step_cost,
            wall_cost=wall_cost,
            failure_scale=failure_scale,
        )
        w, h = maze.width, maze.height
        self.start_index = maze.start[1] * w + maze.start[0]
        self.goal_index = maze.goal[1] * w + maze.goal[0]
        self.default_genome_bounds = (1, 4 * w * h)
        if path_slack is not None:
            # Step budget = this instance's shortest path plus a fixed
            # error allowance; longer optimal routes then offer more
            # chances to waste it, which is what makes sparse mazes hard.
            shortest, _ = bfs_shortest_path(maze)
            self.default_max_path_len = shortest + path_slack
        else:
            self.default_max_path_len = 2 * w * h

        self.neighbor_table: list[tuple[tuple[int, int], ...]] = []
        for y in range(h):
            for x in range(w):
                nbrs = tuple(
                    (move, ny * w + nx)
                    for move, (nx, ny) in valid_neighbors(maze, (x, y))
                )
                self.neighbor_table.append(nbrs)

        d_init = manhattan(maze.start, maze.goal)
        self.heuristic: list[float] = []
        for y in range(h):
            for x in range(w):
                if d_init == 0:
                    self.heuristic.append(1.0)
                else:
                    v = 1.0 - manhattan((x, y), maze.goal) / d_init
                    self.heuristic.append(min(max(v, 0.0), 1.0))

    def evaluate_sequence(self, ops: list[int], atomic_moves: list[int]) -> Trajectory:
        w = self.maze.width
        result = execute_trajectory(self.maze, atomic_moves)
        return Trajectory(
            ops=ops,
            atomic_ops=atomic_moves,
            fitness=fitness(self.maze, result, **self.fitness_args),
            success=result.success,
            states=[y * w + x for x, y in result.visited],
            steps_used=result.steps_used,
            wall_hits=result.wall_hits,
        )

    def evaluate_path(
        self, states: list[int], ops: list[int], atomic_moves: list[int], success: bool
    ) -> Trajectory:
        w = self.maze.width
        final_idx = states[-1]
        result = ExecutionResult(
            final=(final_idx % w, final_idx // w),
            visited=[],
            success=success,
            steps_used=len(atomic_moves),
            wall_hits=0,
        )
        return Trajectory(
            ops=ops,
            atomic_ops=atomic_moves,
            fitness=fitness(self.maze, result, **self.fitness_args),
            success=success,
            states=states,
            steps_used=len(atomic_moves),
        )

    def path_efficiency(self, traj: Trajectory) -> float | None:
        if not traj.success:
            return None
        shortest, _ = bfs_shortest_path(self.maze)
        if traj.steps_used == 0:
            return 1.0
        return shortest / traj.steps_used
