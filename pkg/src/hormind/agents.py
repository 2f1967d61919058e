"""Twelve-agent registry: utilities, thresholds, TTL/cooldown, execution.

Three layers. Emission agents (R1A-R1D) produce and refine the provisional
output and are driven by Confusionin; verification agents (R2A-R2D) sense
residual error, entropy, convergence geometry, and symbolic consistency and
are driven by Clarifine; governance agents (R3A-R3D) manage budget, memory,
warm starts, and the explainability record.

Utility coefficients, thresholds, and TTL/cooldown values are the reference
calibration and are asserted verbatim by the test suite. Costs are
normalized compute units ordered by each agent's asymptotic class; the
published spec gives only the classes, not numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hormones import HormoneVector

AGENT_ORDER = ("R1A", "R1B", "R1C", "R1D",
               "R2A", "R2B", "R2C", "R2D",
               "R3A", "R3B", "R3C", "R3D")

R1_AGENTS = ("R1A", "R1B", "R1C", "R1D")
R2_AGENTS = ("R2A", "R2B", "R2C", "R2D")
PERSISTENT_AGENTS = ("R2A", "R2B", "R2C", "R3A")

HYPOTHESIS_CAPACITY = 32
HYPOTHESIS_FLOOR = 1e-3


@dataclass(frozen=True)
class CycleContext:
    """Non-hormonal inputs some utilities need."""

    t: int = 0
    t_eff: int = 20
    err_norm_prev: float = 0.0  # previous cycle's normalized residual
    psm_size: int = 0
    k_ret: int = 3
    stop_flag: bool = False
    warm_enabled: bool = True


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    name: str
    kind: str                # emission | verification | governance
    utility: Callable[[HormoneVector, CycleContext], float]
    threshold: float
    cost: float
    ttl: int | None          # None = persistent
    cooldown: int

    @property
    def persistent(self) -> bool:
        return self.ttl is None


def _u_r1a(h, ctx):
    return 0.6 * h.h_u + 0.4 * (1.0 - h.h_c)


def _u_r1b(h, ctx):
    return 0.5 * h.h_u + 0.3 * h.h_cur + 0.2 * (1.0 - h.h_c)


def _u_r1c(h, ctx):
    return 0.7 * h.h_u - 0.3 * h.h_ene


def _u_r1d(h, ctx):
    return 0.6 * h.h_u + 0.2 * h.h_ale


def _u_one(h, ctx):
    return 1.0


def _u_r2c(h, ctx):
    return 0.5 * h.h_c + 0.3 * (1.0 - h.h_u) + 0.2 * (1.0 - ctx.err_norm_prev)


def _u_r2d(h, ctx):
    return 0.6 * h.h_u + 0.3 * h.h_ale


def _u_r3b(h, ctx):
    return 0.5 * h.h_c + 0.3 * (1.0 - h.h_u) + 0.2 * (1.0 - h.h_ene)


def _u_r3c(h, ctx):
    fires = ctx.t == 0 and ctx.psm_size >= ctx.k_ret and ctx.warm_enabled
    return 1.0 if fires else 0.0


def _u_r3d(h, ctx):
    return 1.0 if (ctx.stop_flag or ctx.t == ctx.t_eff) else 0.0


def build_registry() -> dict[str, AgentSpec]:
    """The fixed 12-agent registry in execution order."""
    specs = [
        AgentSpec("R1A", "RecursiveReasoner", "emission", _u_r1a,
                  threshold=0.25, cost=4.0, ttl=None, cooldown=0),
        AgentSpec("R1B", "HypothesisGenerator", "emission", _u_r1b,
                  threshold=0.35, cost=2.0, ttl=3, cooldown=2),
        AgentSpec("R1C", "PartialSolutionRefiner", "emission", _u_r1c,
                  threshold=0.30, cost=1.5, ttl=2, cooldown=1),
        AgentSpec("R1D", "ConsistencyPropagator", "emission", _u_r1d,
                  threshold=0.40, cost=2.5, ttl=3, cooldown=2),
        AgentSpec("R2A", "ResidualErrorDetector", "verification", _u_one,
                  threshold=0.0, cost=0.5, ttl=None, cooldown=0),
        AgentSpec("R2B", "EntropyMonitor", "verification", _u_one,
                  threshold=0.0, cost=0.5, ttl=None, cooldown=0),
        AgentSpec("R2C", "ConvergenceDetector", "verification", _u_r2c,
                  threshold=0.30, cost=0.5, ttl=None, cooldown=0),
        AgentSpec("R2D", "SymbolicVerifier", "verification", _u_r2d,
                  threshold=0.35, cost=2.0, ttl=5, cooldown=2),
        AgentSpec("R3A", "IterationBudgetManager", "governance", _u_one,
                  threshold=0.0, cost=0.1, ttl=None, cooldown=0),
        AgentSpec("R3B", "RecursiveMemory", "governance", _u_r3b,
                  threshold=0.25, cost=1.0, ttl=2, cooldown=1),
        AgentSpec("R3C", "WarmStartInitializer", "governance", _u_r3c,
                  threshold=0.5, cost=0.5, ttl=1, cooldown=20),
        AgentSpec("R3D", "RecursiveExplainability", "governance", _u_r3d,
                  threshold=0.5, cost=0.5, ttl=1, cooldown=0),
    ]
    return {s.agent_id: s for s in specs}


@dataclass
class AgentRuntime:
    """Per-episode TTL/cooldown counters for one agent."""

    ttl_remaining: int | None = None
    cooldown_remaining: int = 0
    last_active_cycle: int = -1


def fresh_runtimes(registry: dict[str, AgentSpec]) -> dict[str, AgentRuntime]:
    return {aid: AgentRuntime(ttl_remaining=spec.ttl)
            for aid, spec in registry.items()}


def eligibility(spec: AgentSpec, runtime: AgentRuntime, h: HormoneVector,
                ctx: CycleContext) -> tuple[bool, float]:
    """Eligibility and the utility that selection will maximize.

    Persistent agents are always eligible; the three pure sensors report a
    flat utility of 1 while the convergence detector's composite utility is
    still computed for the trace. Non-persistent utilities are zeroed once
    the iteration budget is exhausted (termination guard) and an agent in
    cooldown is ineligible regardless of utility.
    """
    utility = float(spec.utility(h, ctx))
    if spec.persistent:
        return True, utility
    if ctx.t >= ctx.t_eff:
        utility = 0.0
    eligible = runtime.cooldown_remaining == 0 and utility > spec.threshold
    return eligible, utility


def tick(spec: AgentSpec, runtime: AgentRuntime, activated: bool,
         cycle: int = -1) -> AgentRuntime:
    """Advance TTL/cooldown counters after a cycle."""
    if spec.persistent:
        if activated:
            runtime.last_active_cycle = cycle
        return runtime
    if activated:
        runtime.last_active_cycle = cycle
        runtime.ttl_remaining -= 1
        if runtime.ttl_remaining <= 0:
            runtime.cooldown_remaining = spec.cooldown
            runtime.ttl_remaining = spec.ttl
    elif runtime.cooldown_remaining > 0:
        runtime.cooldown_remaining -= 1
    return runtime


@dataclass
class Hypothesis:
    output: object
    encoding: np.ndarray
    prob: float


@dataclass
class HypothesisSet:
    """Bounded candidate-output pool, lowest-probability eviction."""

    items: list[Hypothesis] = field(default_factory=list)
    capacity: int = HYPOTHESIS_CAPACITY

    def __len__(self) -> int:
        return len(self.items)

    def _renormalize(self) -> None:
        total = sum(it.prob for it in self.items)
        if total > 0:
            for it in self.items:
                it.prob /= total

    def add(self, output, encoding: np.ndarray, prob: float) -> None:
        encoding = np.asarray(encoding, dtype=float)
        for it in self.items:
            if it.encoding.shape == encoding.shape \
                    and np.array_equal(it.encoding, encoding):
                it.prob = max(it.prob, prob)
                self._renormalize()
                return
        self.items.append(Hypothesis(output, encoding, prob))
        self._renormalize()
        if len(self.items) > self.capacity:
            self.items.sort(key=lambda it: -it.prob)
            del self.items[self.capacity:]
            self._renormalize()

    def prune_floor(self, floor: float = HYPOTHESIS_FLOOR) -> None:
        if not self.items:
            return
        survivors = [it for it in self.items if it.prob >= floor]
        if survivors:
            self.items = survivors
            self._renormalize()

    def best(self) -> Hypothesis | None:
        if not self.items:
            return None
        return max(self.items, key=lambda it: it.prob)


@dataclass
class EmissionOutcome:
    deltas: dict[str, np.ndarray]
    pruned_count: int = 0
    contradiction: bool = False


def execute_emission_agents(active: set[str], s: np.ndarray, y,
                            h: HormoneVector, task,
                            hypotheses: HypothesisSet) -> EmissionOutcome:
    """Run the active R1 agents.

    R1A/R1C/R1D contribute state deltas through the task adapter. R1B grows
    the hypothesis pool from the adapter's samples and prunes insignificant
    entries. R1D additionally prunes hypotheses that violate the task's
    axioms; if that would empty the pool, the top hypothesis is retained
    unconditionally so the episode cannot go dead.
    """
    deltas: dict[str, np.ndarray] = {}
    for aid in R1_AGENTS:
        if aid in active:
            deltas[aid] = np.asarray(task.deltas(s, y, aid), dtype=float)

    pruned = 0
    contradiction = False
    if "R1B" in active:
        for output, encoding, weight in task.sample_outputs(s, y):
            hypotheses.add(output, encoding, weight)
        hypotheses.prune_floor()
    if "R1D" in active and hypotheses.items:
        survivors = [it for it in hypotheses.items if not task.axioms(it.output)]
        pruned = len(hypotheses.items) - len(survivors)
        if not survivors:
            contradiction = True
            survivors = [hypotheses.best()]
        hypotheses.items = survivors
        hypotheses._renormalize()
    return EmissionOutcome(deltas=deltas, pruned_count=pruned,
                           contradiction=contradiction)


def execute_verification_agents(active: set[str], y, task,
                                held_consistency: float) -> tuple[float, list[str]]:
    """Run the symbolic side of the R2 layer.

    The numeric sensors (residual, entropy, convergence geometry) are
    computed by the observation builder every cycle since their owners are
    persistent. The symbolic verifier re-scores consistency only when
    active; otherwise its last value carries over. An empty axiom base is
    vacuously consistent.
    """
    if "R2D" not in active:
        return held_consistency, []
    violations = task.axioms(y)
    n_ax = task.axiom_count
    if n_ax == 0:
        return 1.0, []
    consistency = max(0.0, 1.0 - len(violations) / n_ax)
    return consistency, violations
