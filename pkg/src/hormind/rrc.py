"""Recursive reasoning engine: the hormonally gated refinement loop.

One episode runs cycles of: observe the last transition, emit and step the
hormone pair, check the iteration budget, select agents under the cycle
budget, apply the composed state update, verify, and test the three-part
stopping criterion (state stable AND Clarifine above its floor AND
Confusionin below its ceiling). Termination is structurally guaranteed by
the budget; the criterion usually fires first on converging tasks.

Cycle order within an episode (t = 1, 2, ...):
observation -> emissions + hormone step -> budget check -> selection ->
emission agents + state update -> verification agents -> energy -> stop
check. The budget is checked before agent execution; the criterion is
checked after verification so it sees current-cycle hormones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import engrams as engram_mod
from .agents import (AGENT_ORDER, PERSISTENT_AGENTS, R1_AGENTS, AgentSpec,
                     CycleContext, HypothesisSet, build_registry, eligibility,
                     execute_emission_agents, execute_verification_agents,
                     fresh_runtimes, tick)
from .hormones import (EmissionWeights, HormoneParams, HormoneVector, emit,
                       estimate_equilibrium, lyapunov, phi_clarifine,
                       phi_confusionin, sigmoid, step_dynamics)
from .observe import (ObservationHistory, ObservationParams,
                      build_observation, initial_observation, residual_error)
from .select import Candidate, SelectionProblem, cycle_budget, solve_exact


@dataclass(frozen=True)
class StoppingThresholds:
    eps_s: float = 1e-3
    theta_c: float = 0.70
    theta_u: float = 0.30

    def __post_init__(self):
        if self.eps_s <= 0:
            raise ValueError("eps_s must be positive")
        for name in ("theta_c", "theta_u"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name}={v} outside (0,1)")


@dataclass(frozen=True)
class BudgetParams:
    t_max0: int = 20
    beta_e: float = 0.80
    kappa_u: float = 0.80
    t_min: int = 1

    def __post_init__(self):
        if not (self.t_max0 >= self.t_min >= 1):
            raise ValueError("need t_max0 >= t_min >= 1")
        for name in ("beta_e", "kappa_u"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name}={v} outside (0,1)")


@dataclass(frozen=True)
class EnergyModel:
    c_base: float = 1.0
    c_iter: float = 0.5
    c_mem: float = 0.2

    def __post_init__(self):
        if min(self.c_base, self.c_iter, self.c_mem) < 0:
            raise ValueError("energy constants must be >= 0")


@dataclass(frozen=True)
class EngineConfig:
    hormones: HormoneParams = field(default_factory=HormoneParams)
    weights: EmissionWeights = field(default_factory=EmissionWeights)
    observation: ObservationParams = field(default_factory=ObservationParams)
    stopping: StoppingThresholds = field(default_factory=StoppingThresholds)
    budget: BudgetParams = field(default_factory=BudgetParams)
    energy: EnergyModel = field(default_factory=EnergyModel)
    retrieval: engram_mod.RetrievalParams = field(
        default_factory=engram_mod.RetrievalParams)
    eta0: float = 0.3
    b_max: float = 12.0
    beta_b: float = 0.80
    eps_sig: float = 1e-3
    # initial recursive hormones (quiescent start) and exogenous levels
    h_c0: float = 0.0
    h_u0: float = 0.0
    h_conf: float = 0.5
    h_inh: float = 0.5
    h_cur: float = 0.3
    h_ene: float = 0.0
    h_ale: float = 0.5
    warm_enabled: bool = True
    # Confusionin resource damping stays off until this budget fraction
    rho_u_gate_fraction: float = 0.8
    noise_enabled: bool = True
    force_all_agents: bool = False  # frugality baseline: bypass selection
    t_max_override: int | None = None

    def initial_hormones(self) -> HormoneVector:
        return HormoneVector(h_c=self.h_c0, h_u=self.h_u0, h_conf=self.h_conf,
                             h_inh=self.h_inh, h_cur=self.h_cur,
                             h_ene=self.h_ene, h_ale=self.h_ale)

    def budget_params(self) -> BudgetParams:
        if self.t_max_override is None:
            return self.budget
        return replace(self.budget, t_max0=self.t_max_override,
                       t_min=min(self.budget.t_min, self.t_max_override))


@dataclass
class CycleRecord:
    t: int
    hormones: np.ndarray            # 7-vector snapshot
    active: tuple[str, ...]
    err: float
    entropy: float
    entropy_norm: float
    conf_max: float
    cos_align: float
    consistency: float
    hamming: float
    chi: float
    t_eff: int
    energy: float
    stop_precheck: bool
    n_hypotheses: int
    utilities: dict[str, float] = field(default_factory=dict)
    v: float = 0.0                  # filled once the episode equilibrium is known
    state: np.ndarray | None = None
    output: np.ndarray | None = None


@dataclass
class EpisodeTrace:
    records: list[CycleRecord] = field(default_factory=list)
    t_star: int = 0
    stop_reason: str = ""           # "criterion" | "budget"
    total_energy: float = 0.0
    warm_flag: bool = False
    n_retrieved: int = 0
    h_star: tuple[float, float] = (0.0, 0.0)
    final_output: object = None
    final_encoding: np.ndarray | None = None
    correct: bool | None = None
    episode_index: int = -1
    seed: int = 0

    def lighten(self) -> "EpisodeTrace":
        """Drop per-cycle state/output arrays (bulk-run memory guard)."""
        for r in self.records:
            r.state = None
            r.output = None
        return self


def iterate(s: np.ndarray, y, h: HormoneVector, active: set[str], task,
            eta0: float = 0.3):
    """One composed state update from the active emission agents.

    s_next = clip(s + eta(h) * mean of active R1 deltas), with the step
    intensity eta(h) = eta0 * (0.5 + 0.5*h_u): cycles under high Confusionin
    apply stronger corrections. No active emission agent means an identity
    cycle.
    """
    active_r1 = [aid for aid in R1_AGENTS if aid in active]
    deltas = {aid: np.asarray(task.deltas(s, y, aid), dtype=float)
              for aid in active_r1}
    s_next = compose_update(s, deltas, h, eta0)
    return s_next, task.decode(s_next)


def compose_update(s: np.ndarray, deltas: dict[str, np.ndarray],
                   h: HormoneVector, eta0: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if not deltas:
        return s.copy()
    combined = np.mean([deltas[aid] for aid in sorted(deltas)], axis=0)
    step = eta0 * (0.5 + 0.5 * h.h_u)
    return np.clip(s + step * combined, 0.0, 1.0)


def should_stop(s_t: np.ndarray, s_prev: np.ndarray, h: HormoneVector,
                thr: StoppingThresholds) -> bool:
    """Three-part stopping criterion; all conditions must hold at once."""
    return (residual_error(s_t, s_prev) <= thr.eps_s
            and h.h_c >= thr.theta_c
            and h.h_u <= thr.theta_u)


def converged_drive(config: EngineConfig) -> tuple[float, float]:
    """Constant emission drive of the standard converged-task observation.

    A fully converged transition reads: zero normalized entropy, zero
    normalized residual, neutral update direction (a stalled update carries
    no directional signal), full output confidence.
    """
    w = config.weights
    phi_c = phi_clarifine(0.0, 0.0, 0.0, w)
    phi_u = phi_confusionin(0.0, 0.0, 1.0, w)
    a, b = config.hormones.a_k, config.hormones.b_k
    return (sigmoid(a * phi_c + b), sigmoid(a * phi_u + b))


def nominal_equilibrium(config: EngineConfig) -> tuple[float, float]:
    """Attractor of the hormone dynamics under the converged-task drive.

    This is the reference point of the per-cycle Lyapunov value: distance
    to the state the regulated pair reaches once the task has settled.
    Mid-budget resource load is assumed (chi = 0.5).
    """
    return estimate_equilibrium(config.hormones, converged_drive(config),
                                chi=0.5, inherited=(config.h_cur, config.h_inh))


def effective_budget(h: HormoneVector, p: BudgetParams) -> int:
    """Energy-modulated budget with a Confusionin override.

    The base budget shrinks with Energexine; high residual uncertainty can
    override energy parsimony and force more cycles. Ceiling integerization
    never terminates earlier than the continuous law allows.
    """
    t_base = p.t_max0 * (1.0 - p.beta_e * h.h_ene)
    override = p.t_min + p.kappa_u * h.h_u * (p.t_max0 - p.t_min)
    t_eff = max(t_base, override)
    return max(p.t_min, math.ceil(t_eff - 1e-9))


def cycle_energy(n_active: int, n_retrieved: int, m: EnergyModel) -> float:
    if n_active < 0 or n_retrieved < 0:
        raise ValueError("counts must be >= 0")
    return m.c_base + m.c_iter * n_active + m.c_mem * n_retrieved


def _select_agents(registry: dict[str, AgentSpec], runtimes, h: HormoneVector,
                   ctx: CycleContext, config: EngineConfig,
                   utilities: dict[str, float]) -> set[str]:
    """Knapsack selection over eligible non-persistent agents.

    Persistent agents bypass selection and do not consume the cycle budget;
    the warm-start and explainability indicators are driven directly by the
    engine at episode start / termination.
    """
    # the convergence detector is persistent; its utility is still tracked
    _, utilities["R2C"] = eligibility(registry["R2C"], runtimes["R2C"], h, ctx)
    if config.force_all_agents:
        return {aid for aid in AGENT_ORDER if aid not in ("R3C", "R3D")}
    active = set(PERSISTENT_AGENTS)
    candidates = []
    for aid in ("R1A", "R1B", "R1C", "R1D", "R2D", "R3B"):
        spec = registry[aid]
        ok, utility = eligibility(spec, runtimes[aid], h, ctx)
        utilities[aid] = utility
        if ok:
            candidates.append(Candidate(aid, utility, spec.cost))
    if candidates:
        budget = cycle_budget(config.b_max, h.h_ene, config.beta_b)
        result = solve_exact(SelectionProblem(tuple(candidates), budget))
        active |= result.chosen
    return active


def run_episode(task, config: EngineConfig,
                store: engram_mod.EngramStore | None = None,
                seed: int = 0, episode_index: int = 0,
                warm_allowed: bool = True) -> EpisodeTrace:
    """Run one full reasoning episode and return its trace.

    The engram store, when given, is consulted for a warm start at t=0 and
    receives a significance-gated write at termination. The per-episode
    noise stream is fully determined by (seed, episode_index).
    """
    rng = np.random.default_rng([seed, episode_index])
    registry = build_registry()
    runtimes = fresh_runtimes(registry)
    params = config.hormones
    budget_params = config.budget_params()
    trace = EpisodeTrace(episode_index=episode_index, seed=seed)

    h = config.initial_hormones()
    s = task.encode()

    # t = 0: warm start when the memory gate fires
    active0: list[str] = []
    n_retrieved = 0
    psm_size = len(store) if store is not None else 0
    if store is not None and config.warm_enabled and warm_allowed \
            and psm_size >= config.retrieval.k_ret:
        active0.append("R3C")
        retrieved = engram_mod.retrieve(h.as_array(), store, config.retrieval)
        n_retrieved = len(retrieved)
        if retrieved and retrieved[0].terminal_state.shape == s.shape:
            s = engram_mod.warm_start(retrieved)
            trace.warm_flag = True
    trace.n_retrieved = n_retrieved

    y = task.decode(s)
    y_enc = np.asarray(task.canonical_encoding(y), dtype=float)
    hypotheses = HypothesisSet()
    hypotheses.add(y, y_enc, 1.0)
    history = ObservationHistory(params=config.observation)
    obs = initial_observation(task.distribution(s), history)
    held_consistency = 1.0

    queue_c: list[float] = []
    queue_u: list[float] = []

    trace.records.append(CycleRecord(
        t=0, hormones=h.as_array(), active=tuple(active0),
        err=0.0, entropy=obs.entropy, entropy_norm=obs.entropy_norm,
        conf_max=obs.conf_max, cos_align=0.0, consistency=held_consistency,
        hamming=0.0, chi=0.0, t_eff=effective_budget(h, budget_params),
        energy=cycle_energy(len(active0), n_retrieved, config.energy),
        stop_precheck=False, n_hypotheses=len(hypotheses),
        state=np.asarray(s, dtype=float).copy(), output=y_enc.copy(),
    ))

    stop_reason = "budget"
    t_star = 0
    for t in range(1, budget_params.t_max0 + 2):
        # Emission drive from the observation in force, then the hormone
        # step. The drive entering the dynamics is the raw logistic
        # intensity: boundedness is handled by the projection, and damping
        # the drive by (1 - h) as well would cap Clarifine near 0.55,
        # permanently below its 0.70 stopping floor.
        phi_u = phi_confusionin(obs.entropy_norm, obs.err_norm, obs.conf_max,
                                config.weights)
        phi_c = phi_clarifine(obs.entropy_norm, obs.err_norm, obs.cos_align,
                              config.weights)
        queue_c.append(sigmoid(params.a_k * phi_c + params.b_k))
        queue_u.append(sigmoid(params.a_k * phi_u + params.b_k))
        e_c = queue_c[-1 - params.delta_c] if len(queue_c) > params.delta_c else 0.0
        e_u = queue_u[-1 - params.delta_u] if len(queue_u) > params.delta_u else 0.0
        t_eff_prev = effective_budget(h, budget_params)
        chi = min(1.0, t / t_eff_prev)
        rho_u_scale = 1.0 if t >= config.rho_u_gate_fraction * t_eff_prev else 0.0
        noise = tuple(rng.standard_normal(2)) if config.noise_enabled else (0.0, 0.0)
        h = step_dynamics(h, (e_c, e_u), chi, params, noise=noise,
                          rho_u_scale=rho_u_scale)

        # budget gate precedes any agent execution
        t_eff = effective_budget(h, budget_params)
        if t > t_eff:
            stop_reason = "budget"
            t_star = t - 1
            break

        ctx = CycleContext(t=t - 1, t_eff=t_eff, err_norm_prev=obs.err_norm,
                           psm_size=psm_size, k_ret=config.retrieval.k_ret,
                           stop_flag=False, warm_enabled=config.warm_enabled)
        utilities: dict[str, float] = {}
        active = _select_agents(registry, runtimes, h, ctx, config, utilities)
        for aid in AGENT_ORDER:
            if aid not in ("R3C", "R3D"):
                tick(registry[aid], runtimes[aid], aid in active, cycle=t)

        outcome = execute_emission_agents(active, s, y, h, task, hypotheses)
        s_new = compose_update(s, outcome.deltas, h, config.eta0)
        y_new = task.decode(s_new)
        y_enc_new = np.asarray(task.canonical_encoding(y_new), dtype=float)

        held_consistency, _violations = execute_verification_agents(
            active, y_new, task, held_consistency)
        obs = build_observation(s_new, s, task.distribution(s_new),
                                y_enc_new, y_enc, held_consistency, history)
        precheck = (obs.err_abs <= config.stopping.eps_s
                    and h.h_c >= config.stopping.theta_c
                    and h.h_u <= config.stopping.theta_u)
        stop_hit = should_stop(s_new, s, h, config.stopping)
        active_final = set(active)
        if stop_hit:
            active_final.add("R3D")
        trace.records.append(CycleRecord(
            t=t, hormones=h.as_array(), active=tuple(
                aid for aid in AGENT_ORDER if aid in active_final),
            err=obs.err_abs, entropy=obs.entropy,
            entropy_norm=obs.entropy_norm, conf_max=obs.conf_max,
            cos_align=obs.cos_align, consistency=held_consistency,
            hamming=obs.output_hamming, chi=chi, t_eff=t_eff,
            energy=cycle_energy(len(active_final), 0, config.energy),
            stop_precheck=precheck, n_hypotheses=len(hypotheses),
            utilities=utilities,
            state=s_new.copy(), output=y_enc_new.copy(),
        ))
        s, y, y_enc = s_new, y_new, y_enc_new
        if stop_hit:
            stop_reason = "criterion"
            t_star = t
            break

    if stop_reason == "budget":
        # the explainability agent fires on the terminal record
        last = trace.records[-1]
        if "R3D" not in last.active:
            last.active = tuple(aid for aid in AGENT_ORDER
                                if aid in set(last.active) | {"R3D"})
            last.energy = cycle_energy(len(last.active),
                                       n_retrieved if last.t == 0 else 0,
                                       config.energy)
        t_star = trace.records[-1].t

    trace.t_star = max(t_star, trace.records[-1].t)
    trace.stop_reason = stop_reason
    trace.total_energy = float(sum(r.energy for r in trace.records))
    trace.final_output = y
    trace.final_encoding = y_enc

    # Lyapunov values measure distance to the converged-task attractor
    trace.h_star = nominal_equilibrium(config)
    for r in trace.records:
        hv = HormoneVector(*[float(v) for v in r.hormones])
        r.v = lyapunov(hv, trace.h_star, params)

    if store is not None:
        _memorize(trace, store, config, budget_params)
    return trace


def _memorize(trace: EpisodeTrace, store: engram_mod.EngramStore,
              config: EngineConfig, budget_params: BudgetParams) -> None:
    """Significance-gated engram write at episode completion."""
    y_enc = trace.final_encoding
    prev = store.prev_output
    comparable = prev is not None and prev.shape == y_enc.shape
    if engram_mod.should_write(y_enc, prev if comparable else None,
                               config.eps_sig) and trace.t_star >= 1:
        e_max = (budget_params.t_max0 + 1) * cycle_energy(
            len(AGENT_ORDER), config.retrieval.k_ret, config.energy)
        profile = np.array([any(aid in r.active for r in trace.records)
                            for aid in AGENT_ORDER])
        engram = engram_mod.make_engram(
            hormonal_context=trace.records[0].hormones,
            activation_profile=profile,
            s0=trace.records[0].state,
            trajectory=[r.state for r in trace.records[1:]],
            y_final=y_enc,
            t_star=trace.t_star,
            beta=min(1.0, trace.total_energy / e_max),
        )
        engram_mod.insert(engram, store)
    store.prev_output = y_enc.copy()


# --- trace serialization --------------------------------------------------

def record_to_dict(r: CycleRecord) -> dict:
    return {
        "t": r.t,
        "hormones": r.hormones.tolist(),
        "active": list(r.active),
        "err": r.err,
        "entropy": r.entropy,
        "entropy_norm": r.entropy_norm,
        "conf_max": r.conf_max,
        "cos_align": r.cos_align,
        "consistency": r.consistency,
        "hamming": r.hamming,
        "chi": r.chi,
        "t_eff": r.t_eff,
        "energy": r.energy,
        "stop_precheck": r.stop_precheck,
        "n_hypotheses": r.n_hypotheses,
        "utilities": {k: v for k, v in sorted(r.utilities.items())},
        "v": r.v,
        "state": None if r.state is None else r.state.tolist(),
        "output": None if r.output is None else r.output.tolist(),
    }


def trace_to_jsonl(trace: EpisodeTrace) -> str:
    """One line per cycle record plus a terminal summary line."""
    lines = [json.dumps(record_to_dict(r)) for r in trace.records]
    lines.append(json.dumps({"summary": {
        "t_star": trace.t_star,
        "stop_reason": trace.stop_reason,
        "total_energy": trace.total_energy,
        "warm_flag": trace.warm_flag,
        "n_retrieved": trace.n_retrieved,
        "h_star": list(trace.h_star),
        "correct": trace.correct,
        "episode_index": trace.episode_index,
        "seed": trace.seed,
    }}))
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str) -> EpisodeTrace:
    trace = EpisodeTrace()
    for lineno, line in enumerate(text.strip().splitlines(), start=1):
        data = json.loads(line)
        if "summary" in data:
            s = data["summary"]
            trace.t_star = s["t_star"]
            trace.stop_reason = s["stop_reason"]
            trace.total_energy = s["total_energy"]
            trace.warm_flag = s["warm_flag"]
            trace.n_retrieved = s["n_retrieved"]
            trace.h_star = tuple(s["h_star"])
            trace.correct = s["correct"]
            trace.episode_index = s["episode_index"]
            trace.seed = s["seed"]
            continue
        trace.records.append(CycleRecord(
            t=data["t"], hormones=np.asarray(data["hormones"]),
            active=tuple(data["active"]), err=data["err"],
            entropy=data["entropy"], entropy_norm=data["entropy_norm"],
            conf_max=data["conf_max"], cos_align=data["cos_align"],
            consistency=data["consistency"], hamming=data["hamming"],
            chi=data["chi"], t_eff=data["t_eff"], energy=data["energy"],
            stop_precheck=data["stop_precheck"],
            n_hypotheses=data["n_hypotheses"],
            utilities=data.get("utilities", {}), v=data["v"],
            state=None if data["state"] is None else np.asarray(data["state"]),
            output=None if data["output"] is None else np.asarray(data["output"]),
        ))
    return trace
