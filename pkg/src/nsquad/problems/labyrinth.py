"""Random walk in a walled grid; the rare event is visiting the goal cell.

Maps are ASCII: ``#`` wall, ``.`` open, ``S`` start, ``G`` goal, one row per
line. A walk takes K steps from the start, each uniform over the moves that
stay on the grid and off walls. Its surrogate is -min_i d(w_i), with d the
BFS step distance to the goal, so the event "goal visited" is {g > -0.5}.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numba
import numpy as np

from ..core import Problem, SamplerConfig, indicator

MOVES = ((-1, 0), (1, 0), (0, 1), (0, -1))  # N, S, E, W


@dataclass(frozen=True, eq=False)
class LabyrinthSpec:
    walls: np.ndarray  # bool (N, N), True = wall
    start: tuple[int, int]
    goal: tuple[int, int]
    K: int = 100

    @property
    def shape(self) -> tuple[int, int]:
        return self.walls.shape

    def to_ascii(self) -> str:
        rows = []
        for r in range(self.shape[0]):
            row = []
            for c in range(self.shape[1]):
                if (r, c) == self.start:
                    row.append("S")
                elif (r, c) == self.goal:
                    row.append("G")
                else:
                    row.append("#" if self.walls[r, c] else ".")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"


class GridError(ValueError):
    pass


def parse_map(text: str, K: int = 100) -> LabyrinthSpec:
    rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise GridError("map rows must be non-empty and of equal length")
    walls = np.zeros((len(rows), len(rows[0])), dtype=bool)
    start = goal = None
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "#":
                walls[r, c] = True
            elif ch == "S":
                start = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch != ".":
                raise GridError(f"unknown map character {ch!r}")
    if start is None or goal is None:
        raise GridError("map needs one S and one G")
    spec = LabyrinthSpec(walls, start, goal, int(K))
    validate(spec)
    return spec


def open_grid(n: int, K: int) -> LabyrinthSpec:
    return LabyrinthSpec(np.zeros((n, n), dtype=bool), (0, 0), (n - 1, n - 1), int(K))


def load_map(name_or_path: str, K: int = 100) -> LabyrinthSpec:
    p = Path(name_or_path)
    if p.exists():
        return parse_map(p.read_text(), K)
    text = resources.files("nsquad.problems").joinpath("maps", f"{name_or_path}.txt").read_text()
    return parse_map(text, K)


def neighbours(spec: LabyrinthSpec, cell: tuple[int, int]) -> list[tuple[int, int]]:
    n_r, n_c = spec.shape
    out = []
    for dr, dc in MOVES:
        r, c = cell[0] + dr, cell[1] + dc
        if 0 <= r < n_r and 0 <= c < n_c and not spec.walls[r, c]:
            out.append((r, c))
    return out


def goal_distance(spec: LabyrinthSpec) -> np.ndarray:
    """BFS step distance to the goal; -1 for walls and unreachable cells."""
    dist = np.full(spec.shape, -1, dtype=np.int64)
    dist[spec.goal] = 0
    queue = deque([spec.goal])
    while queue:
        cell = queue.popleft()
        for nb in neighbours(spec, cell):
            if dist[nb] < 0:
                dist[nb] = dist[cell] + 1
                queue.append(nb)
    return dist


def walk_distance(spec: LabyrinthSpec) -> np.ndarray:
    """Flat goal distances with cells the goal cannot be reached from set to
    the cell count, so they never look closer than any reachable cell."""
    d = goal_distance(spec).ravel()
    d[d < 0] = d.size
    return d


def validate(spec: LabyrinthSpec) -> None:
    for cell in (spec.start, spec.goal):
        if spec.walls[cell]:
            raise GridError(f"cell {cell} is a wall")
    for r in range(spec.shape[0]):
        for c in range(spec.shape[1]):
            if not spec.walls[r, c] and not neighbours(spec, (r, c)):
                raise GridError(f"open cell {(r, c)} has no admissible move")
    if goal_distance(spec)[spec.start] < 0:
        raise GridError("goal not reachable from start")


def _move_table(spec: LabyrinthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per flat cell index: admissible target cells (padded) and their count."""
    n_r, n_c = spec.shape
    table = np.zeros((n_r * n_c, 4), dtype=np.int32)
    count = np.zeros(n_r * n_c, dtype=np.int32)
    for r in range(n_r):
        for c in range(n_c):
            if spec.walls[r, c]:
                continue
            nbs = neighbours(spec, (r, c))
            i = r * n_c + c
            count[i] = len(nbs)
            for k, (rr, cc) in enumerate(nbs):
                table[i, k] = rr * n_c + cc
    return table, count


@numba.njit(cache=True)
def _walks(choices, start, table, count, dist):
    # choices uniform on {0..11}; 12 is divisible by 1..4, so choice % count is uniform
    n, K = choices.shape
    walks = np.empty((n, K + 1), dtype=np.int16)
    levels = np.empty(n)
    for i in range(n):
        cell = start
        walks[i, 0] = cell
        best = dist[cell]
        for k in range(K):
            cell = table[cell, choices[i, k] % count[cell]]
            walks[i, k + 1] = cell
            if dist[cell] < best:
                best = dist[cell]
        levels[i] = -best
    return walks, levels


class _Walker:
    def __init__(self, spec: LabyrinthSpec):
        self.spec = spec
        self.table, self.count = _move_table(spec)
        self.dist = walk_distance(spec)
        self.start = spec.start[0] * spec.shape[1] + spec.start[1]

    def batch(self, rng: np.random.Generator, n: int):
        choices = rng.integers(0, 12, size=(n, self.spec.K), dtype=np.uint8)
        return _walks(choices, self.start, self.table, self.count, self.dist)

    def level(self, walk: np.ndarray) -> float:
        return -float(self.dist[np.asarray(walk, dtype=np.int64)].min())


def labyrinth_walk(spec: LabyrinthSpec, rng: np.random.Generator) -> np.ndarray:
    """One K-step walk as flat cell indices (row * n_cols + col)."""
    return _Walker(spec).batch(rng, 1)[0][0]


def labyrinth_surrogate(spec: LabyrinthSpec, walk: np.ndarray) -> float:
    return -float(walk_distance(spec)[np.asarray(walk, dtype=np.int64)].min())


def walk_cells(spec: LabyrinthSpec, walk: np.ndarray) -> np.ndarray:
    w = np.asarray(walk, dtype=np.int64)
    return np.stack([w // spec.shape[1], w % spec.shape[1]], axis=1)


def mc_event_count(spec: LabyrinthSpec, n: int, rng: np.random.Generator, chunk: int = 50_000) -> int:
    walker = _Walker(spec)
    hits = 0
    for s in range(0, n, chunk):
        hits += int(np.count_nonzero(walker.batch(rng, min(chunk, n - s))[1] > -0.5))
    return hits


def labyrinth_problem(map: str = "maze12", K: int = 100, size: int | None = None) -> Problem:
    """Labyrinth walk problem; ``size`` selects an open size x size grid instead of a map."""
    spec = open_grid(size, K) if size else load_map(map, K)
    walker = _Walker(spec)
    params = {"map": None if size else map, "K": int(K), "size": int(size) if size else None}
    return Problem(
        name="labyrinth",
        params=params,
        sample_prior=lambda rng: walker.batch(rng, 1)[0][0],
        surrogate=walker.level,
        integrands={"indicator": indicator(-0.5)},
        event_threshold=-0.5,
        dimension="walk",
        statistics={"end_row": lambda w: float(int(w[-1]) // spec.shape[1]),
                    "end_col": lambda w: float(int(w[-1]) % spec.shape[1]),
                    "min_distance": lambda w: -walker.level(w)},
        sup_level=0.0,
        sampler=SamplerConfig("rejection", max_tries=1_000_000),
        prior_batch=walker.batch,
        trajectory=lambda w: walk_cells(spec, w)[-1].astype(float),
    )
