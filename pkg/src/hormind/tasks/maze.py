"""Maze shortest-path adapter.

The cognitive state concatenates three per-cell fields in [0,1]: path
membership scores, a normalized distance-to-goal estimate, and a normalized
distance-from-start estimate. The reasoning agent performs a few Bellman
relaxation sweeps per cycle, driving the distance estimates monotonically
down toward the true geodesics; decoding follows the steepest descent of
the goal field from the start. The pruning agent zeroes membership of cells
provably off every shortest path once a start-goal connection is
established. BFS is the independent oracle.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .base import TaskAdapter

SWEEPS_PER_CYCLE = 4
MEMBERSHIP_DECAY = 0.2
SOFTMAX_TEMPERATURE = 0.25  # over raw step-count differences
_NEIGHBOR_OFFSETS = ((-1, 0), (0, 1), (1, 0), (0, -1))  # N, E, S, W


@dataclass(frozen=True)
class MazeInstance:
    obstacles: np.ndarray     # (n, n) bool
    start: tuple[int, int]
    goal: tuple[int, int]

    @property
    def side(self) -> int:
        return self.obstacles.shape[0]


def bfs_distances(obstacles: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """Exact step distances from a source; unreachable cells get -1."""
    n = obstacles.shape[0]
    dist = np.full((n, n), -1, dtype=int)
    if obstacles[source]:
        return dist
    dist[source] = 0
    queue = deque([source])
    while queue:
        r, c = queue.popleft()
        for dr, dc in _NEIGHBOR_OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < n and not obstacles[rr, cc] \
                    and dist[rr, cc] < 0:
                dist[rr, cc] = dist[r, c] + 1
                queue.append((rr, cc))
    return dist


def shortest_path(instance: MazeInstance) -> list[tuple[int, int]] | None:
    """One BFS-optimal path, or None if the goal is unreachable."""
    dist = bfs_distances(instance.obstacles, instance.goal)
    if dist[instance.start] < 0:
        return None
    path = [instance.start]
    cur = instance.start
    while cur != instance.goal:
        r, c = cur
        for dr, dc in _NEIGHBOR_OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < dist.shape[0] and 0 <= cc < dist.shape[0] \
                    and dist[rr, cc] == dist[cur] - 1:
                cur = (rr, cc)
                break
        path.append(cur)
    return path


class MazeTask(TaskAdapter):
    name = "maze"
    axiom_count = 4  # starts at start, reaches goal, steps adjacent, avoids walls

    def __init__(self, instance: MazeInstance):
        self.instance = instance
        self.n = instance.side
        self.cells = self.n * self.n
        self.norm = float(self.cells)  # distance normalizer (upper bound)
        self.free = ~instance.obstacles
        self._true_dg: np.ndarray | None = None
        self._true_ds: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return 3 * self.cells

    def _fields(self, s: np.ndarray):
        s = np.asarray(s, dtype=float)
        n = self.n
        mem = s[:self.cells].reshape(n, n)
        dg = s[self.cells:2 * self.cells].reshape(n, n)
        ds = s[2 * self.cells:].reshape(n, n)
        return mem, dg, ds

    def _pack(self, mem, dg, ds) -> np.ndarray:
        return np.concatenate([mem.flatten(), dg.flatten(), ds.flatten()])

    def encode(self) -> np.ndarray:
        mem = np.zeros((self.n, self.n))
        mem[self.instance.start] = 1.0
        dg = np.ones((self.n, self.n))
        dg[self.instance.goal] = 0.0
        ds = np.ones((self.n, self.n))
        ds[self.instance.start] = 0.0
        return self._pack(mem, dg, ds)

    def _relax(self, dist: np.ndarray, anchor: tuple[int, int],
               sweeps: int) -> np.ndarray:
        """Bellman sweeps: dist(c) <- min(dist(c), step + min over neighbors).

        Monotone non-increasing by construction; obstacles stay pinned at 1.
        """
        d = dist.copy()
        step = 1.0 / self.norm
        big = 2.0
        for _ in range(sweeps):
            padded = np.full((self.n + 2, self.n + 2), big)
            padded[1:-1, 1:-1] = d
            neighbor_min = np.minimum(
                np.minimum(padded[:-2, 1:-1], padded[2:, 1:-1]),
                np.minimum(padded[1:-1, :-2], padded[1:-1, 2:]))
            relaxed = np.minimum(d, step + neighbor_min)
            new = np.where(self.free, relaxed, 1.0)
            new[anchor] = 0.0
            if np.array_equal(new, d):
                break
            d = new
        return np.clip(d, 0.0, 1.0)

    def _geodesics(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixpoints of the relaxation operator (computed once, lazily).

        These are the converged distance estimates the reasoning agent
        relaxes the state toward; the correctness oracle stays a separate
        breadth-first search.
        """
        if self._true_dg is None:
            init_g = np.ones((self.n, self.n))
            init_g[self.instance.goal] = 0.0
            init_s = np.ones((self.n, self.n))
            init_s[self.instance.start] = 0.0
            self._true_dg = self._relax(init_g, self.instance.goal, self.cells)
            self._true_ds = self._relax(init_s, self.instance.start, self.cells)
        return self._true_dg, self._true_ds

    def decode(self, s: np.ndarray) -> list[tuple[int, int]]:
        """Greedy steepest-descent walk on the goal field from the start."""
        _, dg, _ = self._fields(s)
        path = [self.instance.start]
        visited = {self.instance.start}
        cur = self.instance.start
        for _ in range(2 * self.cells):
            if cur == self.instance.goal:
                break
            candidates = []
            for k, (dr, dc) in enumerate(_NEIGHBOR_OFFSETS):
                rr, cc = cur[0] + dr, cur[1] + dc
                if 0 <= rr < self.n and 0 <= cc < self.n \
                        and self.free[rr, cc] and (rr, cc) not in visited:
                    candidates.append((float(dg[rr, cc]), k, (rr, cc)))
            if not candidates:
                break
            candidates.sort()
            cur = candidates[0][2]
            visited.add(cur)
            path.append(cur)
        return path

    def deltas(self, s: np.ndarray, y, agent_id: str) -> np.ndarray:
        mem, dg, ds = self._fields(s)
        if agent_id == "R1A":
            # relax both distance estimates toward their converged fields
            # (monotone decreasing from the cold start under the engine's
            # damped mixing) and firm up membership of the greedy path
            true_dg, true_ds = self._geodesics()
            target_mem = mem * MEMBERSHIP_DECAY
            path = self.decode(self._pack(mem, true_dg, true_ds))
            for cell in path:
                target_mem[cell] = 1.0
            return self._pack(target_mem, true_dg, true_ds) - self._pack(mem, dg, ds)
        if agent_id == "R1D":
            # prune cells provably off every shortest path
            true_dg, true_ds = self._geodesics()
            best = true_dg[self.instance.start]
            if best >= 1.0:
                return np.zeros(self.dim)
            off = true_dg + true_ds > best + 0.5 / self.norm
            target_mem = np.where(off, 0.0, mem)
            return self._pack(target_mem, dg, ds) - self._pack(mem, dg, ds)
        if agent_id == "R1C":
            # sharpen the current best path hypothesis
            path = self.decode(s)
            target_mem = mem * 0.5
            for cell in path:
                target_mem[cell] = 1.0
            return self._pack(target_mem, dg, ds) - self._pack(mem, dg, ds)
        return np.zeros(self.dim)

    def _frontier(self, s: np.ndarray) -> tuple[int, int]:
        path = self.decode(s)
        if len(path) >= 2 and path[-1] == self.instance.goal:
            return path[-2]
        return path[-1]

    def distribution(self, s: np.ndarray) -> np.ndarray:
        """Softmax over the goal-field values of the frontier's neighbors."""
        _, dg, _ = self._fields(s)
        r, c = self._frontier(s)
        scores = np.full(4, -np.inf)
        for k, (dr, dc) in enumerate(_NEIGHBOR_OFFSETS):
            rr, cc = r + dr, c + dc
            if 0 <= rr < self.n and 0 <= cc < self.n and self.free[rr, cc]:
                scores[k] = -dg[rr, cc] * self.norm  # raw step estimate
        if not np.isfinite(scores).any():
            return np.array([1.0, 0.0, 0.0, 0.0])
        finite = np.isfinite(scores)
        z = scores[finite] / SOFTMAX_TEMPERATURE
        z -= z.max()
        w = np.exp(z)
        p = np.zeros(4)
        p[finite] = w / w.sum()
        return p

    def axioms(self, y) -> list[str]:
        path = list(y)
        violations = []
        if not path or tuple(path[0]) != tuple(self.instance.start):
            violations.append("path must begin at the start cell")
        if not path or tuple(path[-1]) != tuple(self.instance.goal):
            violations.append("path must reach the goal cell")
        if any(self.instance.obstacles[tuple(cell)] for cell in path):
            violations.append("path crosses an obstacle")
        for a, b in zip(path, path[1:]):
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                violations.append("consecutive path cells are not adjacent")
                break
        return violations

    def oracle(self) -> int:
        """Independent ground truth: the BFS shortest path length."""
        dist = bfs_distances(self.instance.obstacles, self.instance.goal)
        length = int(dist[self.instance.start])
        if length < 0:
            raise ValueError("instance is not solvable")
        return length

    def is_correct(self, y, truth) -> bool:
        return not self.axioms(y) and len(list(y)) - 1 == int(truth)

    def canonical_encoding(self, y) -> np.ndarray:
        enc = np.zeros(self.cells)
        for cell in y:
            enc[cell[0] * self.n + cell[1]] = 1.0
        return enc


def generate(seed: int, difficulty: str = "default", side: int = 25,
             density: float = 0.40) -> MazeInstance:
    """Random obstacle grid, re-rolled until BFS confirms solvability."""
    if difficulty != "default":
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = np.random.default_rng(seed)
    start, goal = (0, 0), (side - 1, side - 1)
    while True:
        obstacles = rng.random((side, side)) < density
        obstacles[start] = False
        obstacles[goal] = False
        if bfs_distances(obstacles, goal)[start] >= 0:
            return MazeInstance(obstacles=obstacles, start=start, goal=goal)


def to_json(instance: MazeInstance) -> str:
    return json.dumps({
        "task": "maze",
        "obstacles": instance.obstacles.astype(int).tolist(),
        "start": list(instance.start),
        "goal": list(instance.goal),
    })


def from_json(text: str) -> MazeInstance:
    data = json.loads(text)
    return MazeInstance(
        obstacles=np.asarray(data["obstacles"], dtype=bool),
        start=tuple(data["start"]),
        goal=tuple(data["goal"]),
    )
