"""Sudoku constraint-satisfaction adapter.

The cognitive state is a per-cell candidate-probability tensor flattened to
[0,1]^(n*n*n) (n = 9 for standard grids, 4 for the mini variant used in
exhaustive tests). The reasoning agent nudges candidate mass toward
single-candidate conclusions (soft naked/hidden singles, one pass); the
consistency propagator runs singles elimination to fixpoint and renormalizes
through a sharp temperature weighting; the refiner commits the most
confident undecided cell. The correctness oracle is an independent
backtracking solver.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .base import TaskAdapter

DECIDED_PROB = 0.95     # a cell this confident is treated as assigned
CANDIDATE_FLOOR = 1e-3  # candidates below this mass are no longer viable
SOFT_KEEP = 0.05        # soft elimination factor for the one-pass update
HIDDEN_BOOST = 3.0
SOFTMAX_TEMPERATURE = 0.1


@dataclass(frozen=True)
class SudokuInstance:
    grid: np.ndarray          # (n, n) ints, 0 = blank
    clue_count: int

    @property
    def side(self) -> int:
        return self.grid.shape[0]


def _structure(n: int):
    """Peer and unit incidence matrices for an n x n grid (n a square)."""
    box = int(math.isqrt(n))
    if box * box != n:
        raise ValueError("side must be a perfect square")
    cells = n * n
    rows = np.repeat(np.arange(n), n)
    cols = np.tile(np.arange(n), n)
    boxes = (rows // box) * box + cols // box
    units = np.zeros((3 * n, cells), dtype=bool)
    for i in range(cells):
        units[rows[i], i] = True
        units[n + cols[i], i] = True
        units[2 * n + boxes[i], i] = True
    peers = (units.T.astype(int) @ units.astype(int)) > 0
    np.fill_diagonal(peers, False)
    return units, peers


_STRUCTURE_CACHE: dict[int, tuple] = {}


def structure(n: int):
    if n not in _STRUCTURE_CACHE:
        _STRUCTURE_CACHE[n] = _structure(n)
    return _STRUCTURE_CACHE[n]


def singles_fixpoint(cand: np.ndarray, units: np.ndarray,
                     peers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Naked/hidden-singles propagation to fixpoint on boolean candidates.

    Returns the filtered candidate mask and a per-cell contradiction flag;
    contradicted cells keep their pre-elimination candidates so the caller
    can surface the violation without killing the distribution.
    """
    cand = cand.copy()
    original = cand.copy()
    cells, n = cand.shape
    for _ in range(cells):
        changed = False
        # naked singles: assigned cells eliminate their digit from peers
        assigned = cand.sum(axis=1) == 1
        claims = cand & assigned[:, None]
        elim = (peers.astype(int) @ claims.astype(int)) > 0
        mask = elim & cand & ~claims
        if mask.any():
            cand &= ~mask
            changed = True
        # hidden singles: a digit feasible in exactly one cell of a unit
        counts = units.astype(int) @ cand.astype(int)
        for u, v in zip(*np.where(counts == 1)):
            cell_idx = np.nonzero(units[u] & cand[:, v])[0][0]
            if cand[cell_idx].sum() > 1:
                cand[cell_idx] = False
                cand[cell_idx, v] = True
                changed = True
        if not changed:
            break
    contradicted = cand.sum(axis=1) == 0
    if contradicted.any():
        cand[contradicted] = original[contradicted]
    return cand, contradicted


class SudokuTask(TaskAdapter):
    name = "sudoku"

    def __init__(self, instance: SudokuInstance):
        self.instance = instance
        self.n = instance.side
        self.units, self.peers = structure(self.n)
        self.axiom_count = 3 * self.n * self.n  # one uniqueness axiom per (unit, digit)
        flat = instance.grid.flatten()
        self.clue_mask = flat > 0
        self.clue_digits = flat

    @property
    def dim(self) -> int:
        return self.n * self.n * self.n

    def _probs(self, s: np.ndarray) -> np.ndarray:
        p = np.asarray(s, dtype=float).reshape(self.n * self.n, self.n)
        p = np.clip(p, 0.0, None)
        totals = p.sum(axis=1, keepdims=True)
        uniform = np.full_like(p, 1.0 / self.n)
        return np.where(totals > 1e-12, p / np.where(totals > 0, totals, 1.0),
                        uniform)

    def encode(self) -> np.ndarray:
        p = np.full((self.n * self.n, self.n), 1.0 / self.n)
        for i in np.nonzero(self.clue_mask)[0]:
            p[i] = 0.0
            p[i, self.clue_digits[i] - 1] = 1.0
        return p.flatten()

    def decode(self, s: np.ndarray) -> np.ndarray:
        p = self._probs(s)
        digits = p.argmax(axis=1) + 1
        digits[self.clue_mask] = self.clue_digits[self.clue_mask]
        return digits.reshape(self.n, self.n)

    def _decided(self, p: np.ndarray) -> np.ndarray:
        return self.clue_mask | (p.max(axis=1) >= DECIDED_PROB)

    def _candidates(self, p: np.ndarray) -> np.ndarray:
        cand = p > CANDIDATE_FLOOR
        for i in np.nonzero(self.clue_mask)[0]:
            cand[i] = False
            cand[i, self.clue_digits[i] - 1] = True
        none = ~cand.any(axis=1)
        if none.any():  # fully flattened cell: everything stays viable
            cand[none] = True
        return cand

    def deltas(self, s: np.ndarray, y, agent_id: str) -> np.ndarray:
        p = self._probs(s)
        if agent_id == "R1A":
            target = self._soft_singles_target(p)
        elif agent_id == "R1D":
            target = self._propagated_target(p)
        elif agent_id == "R1C":
            target = self._commit_target(p)
        else:
            return np.zeros(self.dim)
        return (target - p).flatten()

    def _soft_singles_target(self, p: np.ndarray) -> np.ndarray:
        """One pass of soft naked/hidden singles over the probability tensor."""
        decided = self._decided(p)
        claims = np.zeros_like(p, dtype=bool)
        idx = np.nonzero(decided)[0]
        claims[idx, p[idx].argmax(axis=1)] = True
        elim = (self.peers.astype(int) @ claims.astype(int)) > 0
        weight = np.where(elim & ~claims, SOFT_KEEP, 1.0)
        cand = self._candidates(p) & ~(elim & ~claims)
        none = ~cand.any(axis=1)
        cand[none] = self._candidates(p)[none]
        counts = self.units.astype(int) @ cand.astype(int)
        for u, v in zip(*np.where(counts == 1)):
            cell_idx = np.nonzero(self.units[u] & cand[:, v])[0][0]
            if not decided[cell_idx]:
                weight[cell_idx, v] *= HIDDEN_BOOST
        target = p * weight
        target[self.clue_mask] = 0.0
        target[self.clue_mask, self.clue_digits[self.clue_mask] - 1] = 1.0
        totals = target.sum(axis=1, keepdims=True)
        return np.where(totals > 1e-12, target / np.where(totals > 0, totals, 1.0),
                        p)

    def _propagated_target(self, p: np.ndarray) -> np.ndarray:
        """Singles propagation to fixpoint, then sharp reweighting.

        Candidates eliminated by the propagation are suppressed by
        exp(-1/T); contradicted cells were already restored inside the
        fixpoint, so their distribution survives unchanged.
        """
        cand, _ = singles_fixpoint(self._candidates(p), self.units, self.peers)
        weight = np.where(cand, 1.0, math.exp(-1.0 / SOFTMAX_TEMPERATURE))
        target = p * weight
        target[self.clue_mask] = 0.0
        target[self.clue_mask, self.clue_digits[self.clue_mask] - 1] = 1.0
        totals = target.sum(axis=1, keepdims=True)
        return np.where(totals > 1e-12, target / np.where(totals > 0, totals, 1.0),
                        p)

    def _commit_target(self, p: np.ndarray) -> np.ndarray:
        """Commit the single most confident undecided cell to its best digit."""
        undecided = ~self._decided(p)
        if not undecided.any():
            return p
        conf = np.where(undecided, p.max(axis=1), -1.0)
        cell_idx = int(conf.argmax())
        target = p.copy()
        target[cell_idx] = 0.0
        target[cell_idx, p[cell_idx].argmax()] = 1.0
        return target

    def distribution(self, s: np.ndarray) -> np.ndarray:
        """Candidate distribution of the most uncertain cell."""
        p = self._probs(s)
        safe = np.clip(p, 1e-12, None)
        entropies = -(safe * np.log(safe)).sum(axis=1)
        cell_idx = int(entropies.argmax())
        row = p[cell_idx]
        total = row.sum()
        return row / total if total > 0 else np.full(self.n, 1.0 / self.n)

    def axioms(self, y) -> list[str]:
        grid = np.asarray(y)
        n = self.n
        box = int(math.isqrt(n))
        violations = []
        for r in range(n):
            vals = grid[r]
            for v in range(1, n + 1):
                if int((vals == v).sum()) > 1:
                    violations.append(f"row {r}: digit {v} duplicated")
        for c in range(n):
            vals = grid[:, c]
            for v in range(1, n + 1):
                if int((vals == v).sum()) > 1:
                    violations.append(f"col {c}: digit {v} duplicated")
        for b in range(n):
            r0, c0 = (b // box) * box, (b % box) * box
            vals = grid[r0:r0 + box, c0:c0 + box].flatten()
            for v in range(1, n + 1):
                if int((vals == v).sum()) > 1:
                    violations.append(f"box {b}: digit {v} duplicated")
        return violations

    def oracle(self):
        solution = solve(self.instance.grid)
        if solution is None:
            raise ValueError("instance has no solution")
        return solution

    def is_correct(self, y, truth) -> bool:
        return bool(np.array_equal(np.asarray(y), np.asarray(truth)))

    def canonical_encoding(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float).flatten()

    def sample_outputs(self, s: np.ndarray, y) -> list[tuple]:
        """Current decode plus variants of the most uncertain cell."""
        p = self._probs(s)
        grid = self.decode(s)
        out = [(grid, self.canonical_encoding(grid), 1.0)]
        safe = np.clip(p, 1e-12, None)
        entropies = -(safe * np.log(safe)).sum(axis=1)
        cell_idx = int(entropies.argmax())
        if entropies[cell_idx] > 0.1:
            order = np.argsort(-p[cell_idx])
            r, c = divmod(cell_idx, self.n)
            for v in order[:2]:
                variant = grid.copy()
                variant[r, c] = v + 1
                out.append((variant, self.canonical_encoding(variant),
                            float(p[cell_idx, v])))
        return out


# --- independent solver / generator -------------------------------------

def _unit_free(grid: np.ndarray, r: int, c: int, box: int) -> np.ndarray:
    n = grid.shape[0]
    used = set(grid[r]) | set(grid[:, c])
    r0, c0 = (r // box) * box, (c // box) * box
    used |= set(grid[r0:r0 + box, c0:c0 + box].flatten())
    return np.array([v for v in range(1, n + 1) if v not in used])


def _solve_count(grid: np.ndarray, limit: int,
                 rng: np.random.Generator | None = None):
    """Backtracking with most-constrained-cell ordering.

    Returns (solution_count up to limit, first solution found).
    """
    n = grid.shape[0]
    box = int(math.isqrt(n))
    grid = grid.copy()
    count = 0
    first = None

    def recurse() -> bool:
        nonlocal count, first
        best = None
        best_opts = None
        for r in range(n):
            for c in range(n):
                if grid[r, c] == 0:
                    opts = _unit_free(grid, r, c, box)
                    if best is None or len(opts) < len(best_opts):
                        best, best_opts = (r, c), opts
                        if len(opts) <= 1:
                            break
            if best_opts is not None and len(best_opts) <= 1:
                break
        if best is None:
            count += 1
            if first is None:
                first = grid.copy()
            return count >= limit
        if len(best_opts) == 0:
            return False
        opts = best_opts
        if rng is not None:
            opts = rng.permutation(opts)
        r, c = best
        for v in opts:
            grid[r, c] = v
            if recurse():
                grid[r, c] = 0
                return True
            grid[r, c] = 0
        return False

    recurse()
    return count, first


def solve(grid: np.ndarray) -> np.ndarray | None:
    """First solution by exhaustive backtracking (the correctness oracle)."""
    _, first = _solve_count(np.asarray(grid, dtype=int), limit=1)
    return first


def count_solutions(grid: np.ndarray, limit: int = 2) -> int:
    cnt, _ = _solve_count(np.asarray(grid, dtype=int), limit=limit)
    return cnt


def generate(seed: int, difficulty: str = "default",
             side: int = 9) -> SudokuInstance:
    """Deterministic unique-solution puzzle.

    The default tier lands in a moderate clue regime (28-36 for 9x9); the
    "extreme" tier keeps stripping clues toward 22-26 while uniqueness
    holds. Every removal is verified by the second-solution-aborting
    backtracker, so the uniqueness invariant is unconditional.
    """
    rng = np.random.default_rng(seed)
    n = side
    full = np.zeros((n, n), dtype=int)
    _, full = _solve_count(full, limit=1, rng=rng)
    if difficulty == "extreme":
        target = int(rng.integers(22, 27)) if n == 9 else n * n // 2
    elif difficulty == "default":
        target = int(rng.integers(28, 37)) if n == 9 else n * n // 2 + 2
    else:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    grid = full.copy()
    order = rng.permutation(n * n)
    clues = n * n
    for pos in order:
        if clues <= target:
            break
        r, c = divmod(int(pos), n)
        saved = grid[r, c]
        grid[r, c] = 0
        if count_solutions(grid, limit=2) == 1:
            clues -= 1
        else:
            grid[r, c] = saved
    return SudokuInstance(grid=grid, clue_count=int((grid > 0).sum()))


# --- interchange formats -------------------------------------------------

def from_string(text: str) -> SudokuInstance:
    """81-character digit string, 0 (or '.') for blanks."""
    clean = text.strip().replace(".", "0")
    n = int(math.isqrt(len(clean)))
    if n * n != len(clean) or int(math.isqrt(n)) ** 2 != n:
        raise ValueError("grid string must have a square-of-a-square length")
    grid = np.array([int(ch) for ch in clean], dtype=int).reshape(n, n)
    instance = SudokuInstance(grid=grid, clue_count=int((grid > 0).sum()))
    if SudokuTask(instance).axioms(grid):  # blanks (0) never count as digits
        raise ValueError("clues violate a uniqueness constraint")
    return instance


def to_string(instance: SudokuInstance) -> str:
    return "".join(str(int(v)) for v in instance.grid.flatten())


def to_json(instance: SudokuInstance) -> str:
    return json.dumps({"task": "sudoku", "grid": instance.grid.tolist()})


def from_json(text: str) -> SudokuInstance:
    data = json.loads(text)
    grid = np.asarray(data["grid"], dtype=int)
    return SudokuInstance(grid=grid, clue_count=int((grid > 0).sum()))
