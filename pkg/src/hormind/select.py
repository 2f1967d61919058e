"""Per-cycle budget-constrained agent selection.

Two solvers for the same 0-1 knapsack: exhaustive enumeration (exact, the
default for the small registry) and a saddle-point primal-dual gradient
scheme on the LP relaxation with threshold rounding plus greedy feasibility
repair (the scalable path). Both are deterministic for identical inputs.

The published dynamics clip the *derivative* into [0,1], which could never
decrease an activation; here the clipping projects the iterates instead,
which is the standard projected-gradient saddle scheme the relaxation calls
for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EXACT_CANDIDATE_CAP = 20


@dataclass(frozen=True)
class Candidate:
    agent_id: str
    utility: float
    cost: float

    def __post_init__(self):
        if not np.isfinite(self.utility):
            raise ValueError("utility must be finite")
        if self.cost <= 0:
            raise ValueError("cost must be positive")


@dataclass(frozen=True)
class SelectionProblem:
    candidates: tuple[Candidate, ...]
    budget: float

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class SelectionResult:
    chosen: frozenset[str]
    total_utility: float
    total_cost: float
    dual_price: float = 0.0


def _result(problem: SelectionProblem, chosen_ids: set[str],
            mu: float = 0.0) -> SelectionResult:
    util = sum(c.utility for c in problem.candidates if c.agent_id in chosen_ids)
    cost = sum(c.cost for c in problem.candidates if c.agent_id in chosen_ids)
    return SelectionResult(frozenset(chosen_ids), util, cost, mu)


def solve_exact(problem: SelectionProblem) -> SelectionResult:
    """Utility-maximal feasible subset by enumeration.

    Ties break toward lower total cost, then the lexicographically smallest
    id tuple, so identical problems always yield identical selections.
    """
    cands = problem.candidates
    n = len(cands)
    if n > EXACT_CANDIDATE_CAP:
        raise ValueError(
            f"{n} candidates exceed the enumeration cap {EXACT_CANDIDATE_CAP}; "
            "use solve_primal_dual")
    best_key = None
    best_ids: set[str] = set()
    for mask in range(1 << n):
        util = 0.0
        cost = 0.0
        ids = []
        for i in range(n):
            if mask >> i & 1:
                util += cands[i].utility
                cost += cands[i].cost
                ids.append(cands[i].agent_id)
        if cost > problem.budget:
            continue
        key = (-util, cost, tuple(sorted(ids)))
        if best_key is None or key < best_key:
            best_key = key
            best_ids = set(ids)
    return _result(problem, best_ids)


def solve_primal_dual(problem: SelectionProblem, steps: int = 2000,
                      alpha_x: float = 0.10, alpha_mu: float = 0.05,
                      mu_max: float = 10.0) -> SelectionResult:
    """Projected primal-dual gradient iteration, rounded then repaired.

    x ascends the Lagrangian, mu (the budget's shadow price) descends it;
    both are projected onto their boxes each step. Rounding at 0.5 may
    overshoot the budget, so the repair pass drops the worst utility/cost
    member until feasible. Always returns a feasible set.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cands = problem.candidates
    if not cands:
        return _result(problem, set())
    u = np.array([c.utility for c in cands])
    c = np.array([c.cost for c in cands])
    x = np.full(len(cands), 0.5)
    mu = 0.0
    for _ in range(steps):
        x = np.clip(x + alpha_x * (u - mu * c), 0.0, 1.0)
        mu = float(np.clip(mu + alpha_mu * (float(c @ x) - problem.budget),
                           0.0, mu_max))
    chosen = {cands[i].agent_id for i in range(len(cands)) if x[i] > 0.5}
    # feasibility repair: drop lowest utility/cost ratio first
    while chosen:
        cost = sum(cc.cost for cc in cands if cc.agent_id in chosen)
        if cost <= problem.budget:
            break
        worst = min((cc for cc in cands if cc.agent_id in chosen),
                    key=lambda cc: (cc.utility / cc.cost, -cc.cost, cc.agent_id))
        chosen.remove(worst.agent_id)
    return _result(problem, chosen, mu)


def cycle_budget(b_max: float, h_ene: float, beta_b: float) -> float:
    """Cycle budget shrunk by the energy hormone: b_max * (1 - beta_b*h_ene)."""
    if b_max < 0:
        raise ValueError("b_max must be >= 0")
    if not (0.0 <= h_ene <= 1.0):
        raise ValueError("h_ene outside [0,1]")
    if not (0.0 < beta_b < 1.0):
        raise ValueError("beta_b outside (0,1)")
    return max(0.0, b_max * (1.0 - beta_b * h_ene))
