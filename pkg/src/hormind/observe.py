"""Normalized observation bundle built from consecutive reasoning states.

Each cycle the engine summarizes its progress as four blocks of scalars:
residual error (absolute, relative, windowed mean), output-distribution
entropy (value, normalized, rate), update geometry (norm, cosine alignment
with an EMA convergence direction), and provisional-output quality (max
confidence, symbolic consistency, Hamming drift). Everything the emission
functions consume is normalized to [0,1].

Cognitive states are plain float arrays in [0,1]^d; output distributions are
plain probability vectors. Validation helpers below enforce the domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def validate_state(s: np.ndarray, dim: int | None = None) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ValueError("cognitive state must be a 1-d vector")
    if dim is not None and s.shape[0] != dim:
        raise ValueError(f"state dimension {s.shape[0]} != expected {dim}")
    if np.any(s < -1e-12) or np.any(s > 1.0 + 1e-12):
        raise ValueError("state components outside [0,1]")
    return np.clip(s, 0.0, 1.0)


def validate_distribution(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a non-empty 1-d vector")
    if np.any(p < -1e-12):
        raise ValueError("negative probability")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    return np.clip(p, 0.0, None)


@dataclass(frozen=True)
class ObservationParams:
    window: int = 5          # moving-average span for the error block
    ema_decay: float = 0.8   # persistence of the convergence direction

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not (0.0 <= self.ema_decay < 1.0):
            raise ValueError("ema_decay outside [0,1)")


@dataclass(frozen=True)
class Observation:
    """One cycle's normalized progress summary (four blocks)."""

    # residual error block
    err_abs: float
    err_norm: float
    err_rel: float
    err_ma: float
    # entropy block
    entropy: float
    entropy_norm: float
    entropy_rate: float
    conf_var: float          # computed and logged; feeds no emission
    # progression block
    update_norm: float
    cos_align: float
    # provisional output block
    conf_max: float
    consistency: float
    output_hamming: float


@dataclass
class ObservationHistory:
    """Per-episode running state backing the observation builder."""

    params: ObservationParams = field(default_factory=ObservationParams)
    err_window: list[float] = field(default_factory=list)
    err_max: float = 0.0
    prev_err: float | None = None
    prev_entropy: float | None = None
    d_conv: np.ndarray | None = None
    cycles: int = 0


def residual_error(s_t: np.ndarray, s_prev: np.ndarray) -> float:
    """Euclidean magnitude of the state update."""
    s_t = np.asarray(s_t, dtype=float)
    s_prev = np.asarray(s_prev, dtype=float)
    if s_t.shape != s_prev.shape:
        raise ValueError("state dimensions differ")
    return float(np.linalg.norm(s_t - s_prev))


def shannon_entropy(p: np.ndarray) -> tuple[float, float]:
    """Entropy in nats and its normalization by log of the alphabet size."""
    p = validate_distribution(p)
    nz = p[p > 0.0]
    entropy = float(-np.sum(nz * np.log(nz)))
    log_card = math.log(p.size) if p.size > 1 else 0.0
    norm = entropy / log_card if log_card > 0 else 0.0
    return entropy, float(min(1.0, max(0.0, norm)))


def update_direction(delta_s: np.ndarray, d_conv_prev: np.ndarray,
                     ema_decay: float) -> tuple[float, np.ndarray]:
    """Cosine alignment of the update with the EMA convergence direction.

    Zero-norm inputs give a neutral alignment of 0: a stalled update should
    neither reward nor penalize the directional component. A zero update
    leaves the EMA untouched; a zero EMA is (re)initialized from the update.
    """
    delta_s = np.asarray(delta_s, dtype=float)
    d_prev = np.asarray(d_conv_prev, dtype=float)
    if delta_s.shape != d_prev.shape:
        raise ValueError("vector dimensions differ")
    n_delta = float(np.linalg.norm(delta_s))
    if n_delta < 1e-12:
        return 0.0, d_prev
    unit = delta_s / n_delta
    n_prev = float(np.linalg.norm(d_prev))
    if n_prev < 1e-12:
        return 0.0, unit
    cos = float(np.dot(delta_s, d_prev) / (n_delta * n_prev))
    cos = min(1.0, max(-1.0, cos))
    mixed = ema_decay * d_prev + (1.0 - ema_decay) * unit
    n_mixed = float(np.linalg.norm(mixed))
    d_new = mixed / n_mixed if n_mixed >= 1e-12 else d_prev
    return cos, d_new


def hamming_fraction(y_t: np.ndarray, y_prev: np.ndarray) -> float:
    """Fraction of differing components between canonical output encodings."""
    y_t = np.asarray(y_t, dtype=float)
    y_prev = np.asarray(y_prev, dtype=float)
    if y_t.shape != y_prev.shape:
        raise ValueError("encodings differ in length")
    if y_t.size == 0:
        return 0.0
    return float(np.mean(np.abs(y_t - y_prev) > 1e-9))


_ERR_FLOOR = 1e-9


def initial_observation(p0: np.ndarray, history: ObservationHistory,
                        consistency: float = 1.0) -> Observation:
    """Neutral first-cycle observation: no prior transition exists yet."""
    p0 = validate_distribution(p0)
    entropy, entropy_norm = shannon_entropy(p0)
    history.prev_entropy = entropy
    history.cycles = 1
    return Observation(
        err_abs=0.0, err_norm=0.0, err_rel=1.0, err_ma=0.0,
        entropy=entropy, entropy_norm=entropy_norm, entropy_rate=0.0,
        conf_var=float(np.var(p0)),
        update_norm=0.0, cos_align=0.0,
        conf_max=float(p0.max()), consistency=consistency,
        output_hamming=0.0,
    )


def build_observation(s_t: np.ndarray, s_prev: np.ndarray, p: np.ndarray,
                      y_t: np.ndarray, y_prev: np.ndarray,
                      consistency: float,
                      history: ObservationHistory) -> Observation:
    """Assemble the full observation for one transition and advance history."""
    if not (0.0 <= consistency <= 1.0):
        raise ValueError("consistency outside [0,1]")
    p = validate_distribution(p)
    params = history.params

    err = residual_error(s_t, s_prev)
    history.err_max = max(history.err_max, err)
    err_norm = err / max(history.err_max, _ERR_FLOOR)
    err_rel = 1.0 if history.prev_err is None or history.prev_err < _ERR_FLOOR \
        else err / history.prev_err
    history.err_window.append(err)
    if len(history.err_window) > params.window:
        history.err_window.pop(0)
    err_ma = float(np.mean(history.err_window))

    entropy, entropy_norm = shannon_entropy(p)
    entropy_rate = 0.0 if history.prev_entropy is None \
        else entropy - history.prev_entropy

    delta = np.asarray(s_t, dtype=float) - np.asarray(s_prev, dtype=float)
    if history.d_conv is None:
        history.d_conv = np.zeros_like(delta)
    cos_align, history.d_conv = update_direction(
        delta, history.d_conv, params.ema_decay)

    history.prev_err = err
    history.prev_entropy = entropy
    history.cycles += 1

    return Observation(
        err_abs=err,
        err_norm=float(min(1.0, err_norm)),
        err_rel=float(err_rel),
        err_ma=err_ma,
        entropy=entropy,
        entropy_norm=entropy_norm,
        entropy_rate=float(entropy_rate),
        conf_var=float(np.var(p)),
        update_norm=err,
        cos_align=cos_align,
        conf_max=float(p.max()),
        consistency=consistency,
        output_hamming=hamming_fraction(y_t, y_prev),
    )
