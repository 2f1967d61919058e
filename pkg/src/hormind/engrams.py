"""Persistent trajectory memory: gated writes, weighted retrieval, warm starts.

An engram stores one complete reasoning episode (hormonal context at
initiation, agent activation profile, full state trajectory, committed
output, depth, normalized energy). Writes are gated on behavioral
significance; retrieval scores hormonal-context similarity under a
query-weighted cosine plus a convergence-speed prior; eviction is LRU with a
significance override that lets fast-converging episodes outlive slow ones.

The store is owned by a single serial episode runner; independent runs own
independent stores.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Trajectories larger than this many scalars are thinned to every 2nd state
# with both endpoints kept; warm starts only ever read exact terminal states.
_TRAJECTORY_SCALAR_CAP = 10_000


def thinned_indices(t_star: int) -> list[int]:
    """Time indices kept when a trajectory is thinned: odd steps + endpoint."""
    idx = list(range(1, t_star + 1, 2))
    if idx[-1] != t_star:
        idx.append(t_star)
    return idx


@dataclass
class Engram:
    hormonal_context: np.ndarray      # 7-vector in [0,1]
    activation_profile: np.ndarray    # 12 booleans, fixed agent order
    s0: np.ndarray
    trajectory: list[np.ndarray]      # states t=1..t_star (possibly thinned)
    y_final: np.ndarray               # canonical output encoding
    t_star: int
    beta: float                       # normalized energy consumed
    stride: int = 1                   # 1 = full trajectory, 2 = thinned
    last_access: int = 0

    def __post_init__(self):
        self.hormonal_context = np.asarray(self.hormonal_context, dtype=float)
        if self.hormonal_context.shape != (7,):
            raise ValueError("hormonal context must have 7 components")
        if np.any(self.hormonal_context < 0) or np.any(self.hormonal_context > 1):
            raise ValueError("hormonal context outside [0,1]")
        self.activation_profile = np.asarray(self.activation_profile, dtype=bool)
        if self.activation_profile.shape != (12,):
            raise ValueError("activation profile must have 12 components")
        if self.t_star < 1:
            raise ValueError("t_star must be >= 1")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta outside [0,1]")
        if self.stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")
        expect = self.t_star if self.stride == 1 \
            else len(thinned_indices(self.t_star))
        if len(self.trajectory) != expect:
            raise ValueError(
                f"trajectory length {len(self.trajectory)} inconsistent with "
                f"t_star={self.t_star}, stride={self.stride}")

    @property
    def terminal_state(self) -> np.ndarray:
        return self.trajectory[-1]


def make_engram(hormonal_context, activation_profile, s0, trajectory,
                y_final, t_star, beta) -> Engram:
    """Build an engram, thinning oversized trajectories (endpoints kept)."""
    trajectory = [np.asarray(s, dtype=float) for s in trajectory]
    if len(trajectory) != t_star:
        raise ValueError("full trajectory must have t_star states")
    d = trajectory[0].shape[0] if t_star else 0
    stride = 1
    if d * t_star > _TRAJECTORY_SCALAR_CAP and t_star > 2:
        keep = thinned_indices(t_star)
        trajectory = [trajectory[i - 1] for i in keep]
        stride = 2
    return Engram(
        hormonal_context=np.asarray(hormonal_context, dtype=float),
        activation_profile=np.asarray(activation_profile, dtype=bool),
        s0=np.asarray(s0, dtype=float),
        trajectory=trajectory,
        y_final=np.asarray(y_final, dtype=float),
        t_star=t_star, beta=beta, stride=stride,
    )


@dataclass(frozen=True)
class RetrievalParams:
    alpha: float = 0.70      # weight of hormonal similarity vs speed prior
    k_ret: int = 3
    theta_ret: float = 0.3   # retrieval floor; below it a cold start is used
    m_max: int = 1000

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha outside (0,1)")
        if self.k_ret < 1:
            raise ValueError("k_ret must be >= 1")
        if self.m_max < self.k_ret:
            raise ValueError("m_max must be >= k_ret")


def should_write(y_curr: np.ndarray, y_prev: np.ndarray | None,
                 eps_sig: float = 1e-3) -> bool:
    """Significance gate: the output moved by >= 1 in L1 and is non-trivial."""
    y_curr = np.asarray(y_curr, dtype=float)
    if float(np.linalg.norm(y_curr)) < eps_sig:
        return False
    if y_prev is None:
        return True
    y_prev = np.asarray(y_prev, dtype=float)
    if y_curr.shape != y_prev.shape:
        raise ValueError("output encodings differ in length")
    return float(np.abs(y_curr - y_prev).sum()) >= 1.0


def similarity(h_query: np.ndarray, engram: Engram, alpha: float = 0.70) -> float:
    """Query-weighted cosine plus a 1/t* convergence-speed prior.

    The diagonal weights 1 + h_query amplify whichever hormonal dimensions
    are currently elevated; among equally similar contexts, episodes that
    converged faster score higher.
    """
    h_query = np.asarray(h_query, dtype=float)
    if h_query.shape != (7,):
        raise ValueError("query must have 7 components")
    w = 1.0 + h_query
    hm = engram.hormonal_context
    nq = math.sqrt(float(np.sum(w * h_query * h_query)))
    nm = math.sqrt(float(np.sum(w * hm * hm)))
    if nq < 1e-12 or nm < 1e-12:
        cos = 0.0
    else:
        cos = float(np.sum(w * h_query * hm)) / (nq * nm)
    return alpha * cos + (1.0 - alpha) / engram.t_star


@dataclass
class EngramStore:
    params: RetrievalParams = field(default_factory=RetrievalParams)
    engrams: list[Engram] = field(default_factory=list)
    op_counter: int = 0
    prev_output: np.ndarray | None = None  # last committed output, for the gate

    def __len__(self) -> int:
        return len(self.engrams)


def insert(engram: Engram, store: EngramStore,
           m_max: int | None = None) -> EngramStore:
    """Add an engram, evicting once capacity is hit.

    Eviction pool: every engram whose last access is no newer than the
    LRU-oldest decile boundary. Within the pool the slowest episode (largest
    t*) goes first, so fast-converging engrams survive longer.
    """
    cap = store.params.m_max if m_max is None else m_max
    engram.last_access = 0
    while len(store.engrams) >= cap:
        order = sorted(range(len(store.engrams)),
                       key=lambda i: (store.engrams[i].last_access, i))
        decile = max(1, len(order) // 10)
        boundary = store.engrams[order[decile - 1]].last_access
        pool = [i for i in order if store.engrams[i].last_access <= boundary]
        victim = max(pool, key=lambda i: (store.engrams[i].t_star,
                                          -store.engrams[i].last_access, -i))
        store.engrams.pop(victim)
    store.engrams.append(engram)
    return store


def retrieve(h_query: np.ndarray, store: EngramStore,
             params: RetrievalParams | None = None) -> list[Engram]:
    """Top-k engrams above the similarity floor, most similar first.

    Ties break toward smaller t*, then insertion order. Returned engrams get
    their last-access stamp refreshed.
    """
    p = store.params if params is None else params
    scored = []
    for idx, e in enumerate(store.engrams):
        sim = similarity(h_query, e, p.alpha)
        if sim >= p.theta_ret:
            scored.append((-sim, e.t_star, idx))
    scored.sort()
    hits = [store.engrams[idx] for _, _, idx in scored[:p.k_ret]]
    for e in hits:
        store.op_counter += 1
        e.last_access = store.op_counter
    return hits


def warm_start(retrieved: list[Engram]) -> np.ndarray:
    """Centroid of the retrieved terminal states, projected into [0,1]^d."""
    if not retrieved:
        raise ValueError("warm start needs at least one engram")
    terminals = [e.terminal_state for e in retrieved]
    dims = {t.shape[0] for t in terminals}
    if len(dims) != 1:
        raise ValueError("terminal state dimensions differ")
    return np.clip(np.mean(terminals, axis=0), 0.0, 1.0)


def predicted_saving(eps_cold: float, eps_warm: float, rho: float) -> int:
    """Iterations saved by a contraction from a closer start.

    ceil(log(eps_cold/eps_warm) / log(1/rho)): the number of rate-rho
    contractions needed to close the initial-error gap.
    """
    if eps_cold <= 0 or eps_warm <= 0:
        raise ValueError("errors must be positive")
    if eps_warm > eps_cold:
        raise ValueError("warm-start error must not exceed cold-start error")
    if not (0.0 < rho < 1.0):
        raise ValueError("rho outside (0,1)")
    ratio = eps_cold / eps_warm
    return int(math.ceil(math.log(ratio) / math.log(1.0 / rho) - 1e-9))


def _to_jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def engram_to_dict(e: Engram) -> dict:
    return {
        "hormonal_context": e.hormonal_context.tolist(),
        "activation_profile": [bool(b) for b in e.activation_profile],
        "s0": e.s0.tolist(),
        "trajectory": [s.tolist() for s in e.trajectory],
        "y_final": e.y_final.tolist(),
        "t_star": e.t_star,
        "beta": e.beta,
        "stride": e.stride,
        "last_access": e.last_access,
    }


def engram_from_dict(d: dict) -> Engram:
    required = {"hormonal_context", "activation_profile", "s0", "trajectory",
                "y_final", "t_star", "beta"}
    missing = required - d.keys()
    if missing:
        raise ValueError(f"missing fields: {sorted(missing)}")
    e = Engram(
        hormonal_context=np.asarray(d["hormonal_context"], dtype=float),
        activation_profile=np.asarray(d["activation_profile"], dtype=bool),
        s0=np.asarray(d["s0"], dtype=float),
        trajectory=[np.asarray(s, dtype=float) for s in d["trajectory"]],
        y_final=np.asarray(d["y_final"], dtype=float),
        t_star=int(d["t_star"]),
        beta=float(d["beta"]),
        stride=int(d.get("stride", 1)),
    )
    e.last_access = int(d.get("last_access", 0))
    return e


def save_store(store: EngramStore, path) -> None:
    """One engram per line, JSON-encoded."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in store.engrams:
            fh.write(json.dumps(engram_to_dict(e)) + "\n")


def load_store(path, params: RetrievalParams | None = None) -> EngramStore:
    """Load a line-delimited store; malformed lines raise with their number."""
    store = EngramStore(params=params or RetrievalParams())
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                store.engrams.append(engram_from_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"line {lineno}: invalid engram record: {exc}")
    if len(store.engrams) > store.params.m_max:
        raise ValueError(
            f"store holds {len(store.engrams)} engrams, capacity "
            f"{store.params.m_max}")
    store.op_counter = max((e.last_access for e in store.engrams), default=0)
    return store


def decision_record(trace) -> dict:
    """Verbatim explainability record for a completed episode.

    Copies the hormonal trajectory, activated-agent sequence, state
    trajectory, provisional output sequence, convergence profile, and energy
    ledger straight out of the trace; nothing is recomputed or approximated.
    """
    return {
        "t_star": trace.t_star,
        "stop_reason": trace.stop_reason,
        "warm_start": trace.warm_flag,
        "hormonal_trajectory": [r.hormones.tolist() for r in trace.records],
        "agent_sequence": [list(r.active) for r in trace.records],
        "state_trajectory": [r.state.tolist() for r in trace.records],
        "output_sequence": [r.output.tolist() for r in trace.records],
        "convergence_profile": [r.err for r in trace.records],
        "energy_per_cycle": [r.energy for r in trace.records],
        "total_energy": trace.total_energy,
    }
