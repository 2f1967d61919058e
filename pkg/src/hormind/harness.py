"""Experiment driver: multi-seed episode runs, metrics, sweeps, reports.

A run executes ``n_seeds`` independent seed streams; within a stream,
episodes run serially over a fixed instance pool and share one engram store
(warm starts disabled during the warm-up prefix). Metrics: resolution rate,
mean/std convergence depth, mean cognitive energy, frugality against a
forced single-pass baseline, per-iteration averaged Lyapunov and entropy
series with their Pearson correlation, an empirical contraction rate, and
an empirical Lyapunov decay rate. Both deployability gates are enforced
before any episode runs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .engrams import EngramStore, RetrievalParams, save_store
from .hormones import EmissionWeights, HormoneParams, check_stability, dt_bound
from .observe import ObservationParams
from .rrc import (BudgetParams, EnergyModel, EngineConfig, EpisodeTrace,
                  StoppingThresholds, run_episode, trace_to_jsonl)
from .tasks import TASK_NAMES, generate_instance, make_adapter

SWEEPABLE_PARAMS = ("gamma_cu", "gamma_uc", "lambda_c", "lambda_u",
                    "theta_c", "theta_u")


class GateError(RuntimeError):
    """A deployability gate failed; the experiment refuses to run."""


@dataclass(frozen=True)
class RunConfig:
    """Flat experiment configuration; JSON keys mirror the parameter symbols."""

    task: str = "dde"
    n_episodes: int = 500
    warmup_episodes: int = 100
    n_seeds: int = 5
    difficulty: str = "default"
    pool_size: int = 200
    instance_seed_base: int = 424242
    run_seed_base: int = 1000
    warm_start_enabled: bool = True
    noise_enabled: bool = True
    # hormone dynamics
    tau_c: float = 1.5
    tau_u: float = 1.0
    lambda_c: float = 0.75
    lambda_u: float = 0.70
    gamma_cu: float = 0.60
    gamma_uc: float = 0.55
    gamma_cur_u: float = 0.25
    gamma_inh_c: float = 0.20
    delta_c: int = 1
    delta_u: int = 0
    rho_c: float = 0.10
    rho_u: float = 0.10
    sigma_eta_c: float = 0.02
    sigma_eta_u: float = 0.02
    a_k: float = 5.0
    b_k: float = -2.5
    dt: float = 1.0
    rho_u_gate_fraction: float = 0.8
    # emission weights
    alpha_u: float = 0.45
    beta_u: float = 0.35
    gamma_u: float = 0.20
    alpha_c: float = 0.40
    beta_c: float = 0.35
    gamma_c: float = 0.25
    # observation
    w: int = 5
    ema_decay: float = 0.8
    # stopping
    eps_s: float = 1e-3
    theta_c: float = 0.70
    theta_u: float = 0.30
    # budget and energy
    t_max0: int = 20
    beta_e: float = 0.80
    kappa_u: float = 0.80
    t_min: int = 1
    c_base: float = 1.0
    c_iter: float = 0.5
    c_mem: float = 0.2
    # memory
    alpha: float = 0.70
    k_ret: int = 3
    theta_ret: float = 0.3
    m_max: int = 1000
    eps_sig: float = 1e-3
    # selection
    b_max: float = 12.0
    beta_b: float = 0.80
    alpha_x: float = 0.10
    alpha_mu: float = 0.05
    mu_max: float = 10.0
    # iteration
    eta0: float = 0.3
    # exogenous hormone levels (constant schedule)
    h_c0: float = 0.0
    h_u0: float = 0.0
    h_conf: float = 0.5
    h_inh: float = 0.5
    h_cur: float = 0.3
    h_ene: float = 0.0
    h_ale: float = 0.5

    def __post_init__(self):
        if self.task not in TASK_NAMES:
            raise ValueError(f"unknown task {self.task!r}")
        if not (0 <= self.warmup_episodes < self.n_episodes):
            raise ValueError("need 0 <= warmup_episodes < n_episodes")
        if self.n_seeds < 1 or self.pool_size < 1:
            raise ValueError("n_seeds and pool_size must be >= 1")

    def hormone_params(self) -> HormoneParams:
        return HormoneParams(
            tau_c=self.tau_c, tau_u=self.tau_u, lambda_c=self.lambda_c,
            lambda_u=self.lambda_u, gamma_cu=self.gamma_cu,
            gamma_uc=self.gamma_uc, gamma_cur_u=self.gamma_cur_u,
            gamma_inh_c=self.gamma_inh_c, delta_c=self.delta_c,
            delta_u=self.delta_u, rho_c=self.rho_c, rho_u=self.rho_u,
            sigma_eta_c=self.sigma_eta_c, sigma_eta_u=self.sigma_eta_u,
            a_k=self.a_k, b_k=self.b_k, dt=self.dt)

    def engine_config(self, force_all_agents: bool = False,
                      t_max_override: int | None = None,
                      warm_enabled: bool | None = None) -> EngineConfig:
        return EngineConfig(
            hormones=self.hormone_params(),
            weights=EmissionWeights(alpha_u=self.alpha_u, beta_u=self.beta_u,
                                    gamma_u=self.gamma_u, alpha_c=self.alpha_c,
                                    beta_c=self.beta_c, gamma_c=self.gamma_c),
            observation=ObservationParams(window=self.w,
                                          ema_decay=self.ema_decay),
            stopping=StoppingThresholds(eps_s=self.eps_s, theta_c=self.theta_c,
                                        theta_u=self.theta_u),
            budget=BudgetParams(t_max0=self.t_max0, beta_e=self.beta_e,
                                kappa_u=self.kappa_u, t_min=self.t_min),
            energy=EnergyModel(c_base=self.c_base, c_iter=self.c_iter,
                               c_mem=self.c_mem),
            retrieval=RetrievalParams(alpha=self.alpha, k_ret=self.k_ret,
                                      theta_ret=self.theta_ret,
                                      m_max=self.m_max),
            eta0=self.eta0, b_max=self.b_max, beta_b=self.beta_b,
            eps_sig=self.eps_sig, h_c0=self.h_c0, h_u0=self.h_u0,
            h_conf=self.h_conf, h_inh=self.h_inh, h_cur=self.h_cur,
            h_ene=self.h_ene, h_ale=self.h_ale,
            warm_enabled=self.warm_start_enabled
            if warm_enabled is None else warm_enabled,
            rho_u_gate_fraction=self.rho_u_gate_fraction,
            noise_enabled=self.noise_enabled,
            force_all_agents=force_all_agents,
            t_max_override=t_max_override)

    def seeds(self) -> list[int]:
        return [self.run_seed_base + i for i in range(self.n_seeds)]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def enforce_gates(config: RunConfig) -> None:
    """Refuse to run under parameters failing either deployability gate."""
    try:
        params = config.hormone_params()
    except ValueError as exc:
        raise GateError(str(exc))
    report = check_stability(params, chi_max=1.0)
    if not report.passed:
        raise GateError("stability gate failed: " + "; ".join(report.lines()))
    bound = dt_bound(params, chi_max=1.0)
    if params.dt >= bound:
        raise GateError(f"dt gate failed: dt={params.dt} >= bound {bound:.4f}")


@dataclass
class InstancePool:
    """Fixed benchmark set shared by all seed streams of a run."""

    task: str
    adapters: list
    truths: list

    @classmethod
    def build(cls, config: RunConfig) -> "InstancePool":
        adapters = []
        truths = []
        for i in range(config.pool_size):
            seed = config.instance_seed_base + 7919 * i
            instance = generate_instance(config.task, seed, config.difficulty)
            adapter = make_adapter(config.task, instance)
            adapters.append(adapter)
            truths.append(adapter.oracle())
        return cls(task=config.task, adapters=adapters, truths=truths)

    def __len__(self) -> int:
        return len(self.adapters)


@dataclass
class SeedResult:
    seed: int
    traces: list[EpisodeTrace]
    rsr: float = 0.0
    t_star_mean: float = 0.0
    t_star_std: float = 0.0
    e_cog_mean: float = 0.0
    frugality_fp: float = 0.0
    e_baseline: float = 0.0
    criterion_rate: float = 0.0
    pearson_r: float = math.nan
    rho_hat: float = math.nan
    mu_hat: float = math.nan
    v_series: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h_series: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class ExperimentResult:
    config: RunConfig
    seed_results: list[SeedResult]
    aggregate: dict[str, float]
    v_series: np.ndarray
    h_series: np.ndarray


def rsr(traces: list[EpisodeTrace]) -> float:
    """Share of episodes whose committed output the oracle accepts."""
    if not traces:
        return 0.0
    return float(np.mean([1.0 if t.correct else 0.0 for t in traces]))


def frugality(e_mean: float, e_baseline: float) -> float:
    if e_baseline <= 0:
        raise ValueError("baseline energy must be positive")
    return 1.0 - e_mean / e_baseline


def pearson(x, y) -> float:
    """Sample Pearson coefficient; NaN flags a constant (undefined) series."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("series must share a length >= 3")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx < 1e-15 or sy < 1e-15:
        return math.nan
    return float(np.sum(dx * dy) / (sx * sy))


def estimate_rho(traces: list[EpisodeTrace]) -> float:
    """Empirical contraction rate from mid-episode residual ratios.

    Per episode: the geometric mean of successive residual ratios over the
    mid window t in [2, t*-1] (initialization transient and criterion cycle
    excluded); episodes average arithmetically. Clipped into (0,1); a value
    pinned at the upper clip means no contraction was observed.
    """
    per_episode = []
    for trace in traces:
        errs = {r.t: r.err for r in trace.records}
        logs = []
        for t in range(2, trace.t_star):
            prev, cur = errs.get(t - 1), errs.get(t)
            if prev is not None and cur is not None \
                    and prev > 1e-15 and cur > 1e-15:
                logs.append(math.log(cur / prev))
        if logs:
            per_episode.append(math.exp(float(np.mean(logs))))
    if not per_episode:
        return 1.0 - 1e-6
    return float(np.clip(np.mean(per_episode), 1e-6, 1.0 - 1e-6))


def _ragged_mean(series: list[np.ndarray]) -> np.ndarray:
    """Per-index mean; episodes shorter than t drop out of the average at t."""
    if not series:
        return np.zeros(0)
    length = max(len(s) for s in series)
    out = np.zeros(length)
    for t in range(length):
        vals = [s[t] for s in series if len(s) > t]
        out[t] = float(np.mean(vals))
    return out


def mu_hat_from_series(v_series: np.ndarray) -> float:
    """Mean fractional Lyapunov decrease over the early iterations."""
    drops = []
    for t in range(1, min(6, len(v_series) - 1)):
        if v_series[t] > 1e-12:
            drops.append(1.0 - v_series[t + 1] / v_series[t])
    return float(np.mean(drops)) if drops else math.nan


def _measure_baseline(config: RunConfig, pool: InstancePool, seed: int,
                      episodes: int = 10) -> float:
    """Energy of the forced single-pass baseline, measured in-harness.

    Same configuration with the budget forced to one cycle, warm start
    disabled, and every selectable agent force-activated.
    """
    cfg = config.engine_config(force_all_agents=True, t_max_override=1,
                               warm_enabled=False)
    total = []
    for e in range(min(episodes, len(pool))):
        trace = run_episode(pool.adapters[e], cfg, store=None, seed=seed,
                            episode_index=e, warm_allowed=False)
        total.append(trace.total_energy)
    return float(np.mean(total))


def _run_seed(config: RunConfig, pool: InstancePool, seed: int,
              light: bool = False,
              warm_enabled: bool | None = None) -> SeedResult:
    engine_cfg = config.engine_config(warm_enabled=warm_enabled)
    store = EngramStore(params=RetrievalParams(
        alpha=config.alpha, k_ret=config.k_ret, theta_ret=config.theta_ret,
        m_max=config.m_max))
    traces: list[EpisodeTrace] = []
    for e in range(config.n_episodes):
        idx = e % len(pool)
        adapter = pool.adapters[idx]
        trace = run_episode(adapter, engine_cfg, store=store, seed=seed,
                            episode_index=e,
                            warm_allowed=e >= config.warmup_episodes)
        trace.correct = bool(adapter.is_correct(trace.final_output,
                                                pool.truths[idx]))
        if light:
            trace.lighten()
        traces.append(trace)

    result = SeedResult(seed=seed, traces=traces)
    eval_traces = traces[config.warmup_episodes:]
    result.rsr = rsr(eval_traces)
    t_stars = np.array([t.t_star for t in eval_traces], dtype=float)
    result.t_star_mean = float(t_stars.mean())
    result.t_star_std = float(t_stars.std())
    energies = np.array([t.total_energy for t in eval_traces])
    result.e_cog_mean = float(energies.mean())
    result.e_baseline = _measure_baseline(config, pool, seed)
    result.frugality_fp = frugality(result.e_cog_mean, result.e_baseline)
    result.criterion_rate = float(np.mean(
        [1.0 if t.stop_reason == "criterion" else 0.0 for t in eval_traces]))
    result.v_series = _ragged_mean([np.array([r.v for r in t.records])
                                    for t in eval_traces])
    result.h_series = _ragged_mean([np.array([r.entropy for r in t.records])
                                    for t in eval_traces])
    if len(result.v_series) >= 3:
        result.pearson_r = pearson(result.v_series, result.h_series)
    result.rho_hat = estimate_rho(eval_traces)
    result.mu_hat = mu_hat_from_series(result.v_series)
    return result


_AGG_FIELDS = ("rsr", "t_star_mean", "t_star_std", "e_cog_mean",
               "frugality_fp", "criterion_rate", "pearson_r", "rho_hat",
               "mu_hat")


def run_experiment(config: RunConfig, light: bool = False,
                   pool: InstancePool | None = None,
                   warm_enabled: bool | None = None) -> ExperimentResult:
    """Execute all seed streams and aggregate their metrics.

    Raises GateError (without running anything) if the stability or step
    bound gates fail.
    """
    enforce_gates(config)
    if pool is None:
        pool = InstancePool.build(config)
    seed_results = [_run_seed(config, pool, seed, light=light,
                              warm_enabled=warm_enabled)
                    for seed in config.seeds()]
    aggregate: dict[str, float] = {}
    for name in _AGG_FIELDS:
        vals = [getattr(r, name) for r in seed_results]
        clean = [v for v in vals if not math.isnan(v)]
        aggregate[f"{name}_mean"] = float(np.mean(clean)) if clean else math.nan
        aggregate[f"{name}_std"] = float(np.std(clean)) if clean else math.nan
    v_series = _ragged_mean([r.v_series for r in seed_results])
    h_series = _ragged_mean([r.h_series for r in seed_results])
    return ExperimentResult(config=config, seed_results=seed_results,
                            aggregate=aggregate, v_series=v_series,
                            h_series=h_series)


# --- sweeps ----------------------------------------------------------------

@dataclass
class SweepRow:
    param: str
    offset: float
    value: float
    stable: bool
    rsr: float = math.nan
    t_star_mean: float = math.nan


def sweep(config: RunConfig, param: str,
          offsets: tuple[float, ...] = (-0.30, 0.0, 0.30),
          episodes: int = 50) -> list[SweepRow]:
    """One-at-a-time sensitivity sweep over +/-30% of one parameter.

    Offsets that violate a deployability gate are flagged instead of being
    silently run.
    """
    if param not in SWEEPABLE_PARAMS:
        raise ValueError(f"{param!r} is not sweepable; "
                         f"choose one of {SWEEPABLE_PARAMS}")
    rows = []
    base = getattr(config, param)
    for offset in offsets:
        value = base * (1.0 + offset)
        swept = replace(config, **{param: value}, n_episodes=episodes,
                        warmup_episodes=0, n_seeds=1,
                        warm_start_enabled=False)
        try:
            enforce_gates(swept)
        except (GateError, ValueError) as exc:
            rows.append(SweepRow(param=param, offset=offset, value=value,
                                 stable=False))
            continue
        result = run_experiment(swept, light=True)
        rows.append(SweepRow(
            param=param, offset=offset, value=value, stable=True,
            rsr=result.aggregate["rsr_mean"],
            t_star_mean=result.aggregate["t_star_mean_mean"]))
    return rows


# --- persistence -----------------------------------------------------------

def persist_result(result: ExperimentResult, out_dir) -> None:
    """Write traces, summary.csv, and the iteration-series CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(result.config.to_json() + "\n",
                                     encoding="utf-8")
    for sr in result.seed_results:
        seed_dir = out / "traces" / f"seed{sr.seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        for trace in sr.traces:
            path = seed_dir / f"ep{trace.episode_index:05d}.jsonl"
            path.write_text(trace_to_jsonl(trace), encoding="utf-8")
    write_summary_csv(result, out / "summary.csv")
    write_series_csv([sr.v_series for sr in result.seed_results],
                     result.v_series, [sr.seed for sr in result.seed_results],
                     out / "series_v.csv")
    write_series_csv([sr.h_series for sr in result.seed_results],
                     result.h_series, [sr.seed for sr in result.seed_results],
                     out / "series_h.csv")


_SUMMARY_COLUMNS = ("task", "seed", "episodes", "eval_episodes", "rsr",
                    "t_star_mean", "t_star_std", "e_cog_mean", "e_baseline",
                    "frugality_fp", "criterion_rate", "pearson_r", "rho_hat",
                    "mu_hat")


def _summary_rows(result: ExperimentResult) -> list[dict]:
    rows = []
    cfg = result.config
    n_eval = cfg.n_episodes - cfg.warmup_episodes
    for sr in result.seed_results:
        rows.append({
            "task": cfg.task, "seed": str(sr.seed),
            "episodes": cfg.n_episodes, "eval_episodes": n_eval,
            "rsr": sr.rsr, "t_star_mean": sr.t_star_mean,
            "t_star_std": sr.t_star_std, "e_cog_mean": sr.e_cog_mean,
            "e_baseline": sr.e_baseline, "frugality_fp": sr.frugality_fp,
            "criterion_rate": sr.criterion_rate, "pearson_r": sr.pearson_r,
            "rho_hat": sr.rho_hat, "mu_hat": sr.mu_hat,
        })
    agg = result.aggregate
    for suffix, tag in (("_mean", "all_mean"), ("_std", "all_std")):
        rows.append({
            "task": cfg.task, "seed": tag,
            "episodes": cfg.n_episodes, "eval_episodes": n_eval,
            "rsr": agg["rsr" + suffix],
            "t_star_mean": agg["t_star_mean" + suffix],
            "t_star_std": agg["t_star_std" + suffix],
            "e_cog_mean": agg["e_cog_mean" + suffix],
            "e_baseline": "",
            "frugality_fp": agg["frugality_fp" + suffix],
            "criterion_rate": agg["criterion_rate" + suffix],
            "pearson_r": agg["pearson_r" + suffix],
            "rho_hat": agg["rho_hat" + suffix],
            "mu_hat": agg["mu_hat" + suffix],
        })
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(result: ExperimentResult, path) -> None:
    rows = _summary_rows(result)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in _SUMMARY_COLUMNS])


def write_series_csv(per_seed: list[np.ndarray], mean_series: np.ndarray,
                     seeds: list[int], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean"] + [f"seed{s}" for s in seeds])
        for t in range(len(mean_series)):
            row = [str(t), repr(float(mean_series[t]))]
            for series in per_seed:
                row.append(repr(float(series[t])) if t < len(series) else "")
            writer.writerow(row)


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "offset", "value", "stable", "rsr",
                         "t_star_mean"])
        for r in rows:
            writer.writerow([r.param, repr(r.offset), repr(r.value),
                             str(r.stable), _fmt(r.rsr), _fmt(r.t_star_mean)])


# --- independent trace reader (aggregation audit) ---------------------------

def recompute_summary(out_dir) -> list[dict]:
    """Rebuild per-seed summary statistics from persisted trace files.

    Reads only the trace JSONL lines, so it independently audits the
    aggregation path that produced summary.csv.
    """
    from .rrc import trace_from_jsonl

    out = Path(out_dir)
    config = RunConfig.from_json((out / "config.json").read_text())
    rows = []
    for sr_dir in sorted((out / "traces").iterdir()):
        seed = int(sr_dir.name.replace("seed", ""))
        traces = [trace_from_jsonl(p.read_text())
                  for p in sorted(sr_dir.glob("ep*.jsonl"))]
        eval_traces = traces[config.warmup_episodes:]
        t_stars = np.array([t.t_star for t in eval_traces], dtype=float)
        energies = np.array([t.total_energy for t in eval_traces])
        rows.append({
            "task": config.task, "seed": str(seed),
            "rsr": rsr(eval_traces),
            "t_star_mean": float(t_stars.mean()),
            "t_star_std": float(t_stars.std()),
            "e_cog_mean": float(energies.mean()),
            "criterion_rate": float(np.mean(
                [1.0 if t.stop_reason == "criterion" else 0.0
                 for t in eval_traces])),
        })
    return rows
