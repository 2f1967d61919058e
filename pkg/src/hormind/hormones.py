"""Two-hormone regulatory core: emissions, stochastic dynamics, stability gates.

The engine keeps a seven-component hormonal field in [0,1]^7. Two components
(Clarifine ``h_c``, the convergence signal, and Confusionin ``h_u``, the
residual-uncertainty signal) evolve by a discretized stochastic ODE with
decay, delayed emission, antagonistic cross-inhibition, and resource damping.
The remaining five (Confidexin, Inhibitine, Curiosine, Energexine, Alertine)
are exogenous inputs set per cycle by the caller and pass through unchanged.

Deployability is gated twice before any run: the decay-dominance condition
``lambda_k > gamma_km + rho_k * chi_max`` and the explicit-scheme step bound
``dt < min_k 2 tau_k / (lambda_k + gamma_km + rho_k * chi_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

HORMONE_NAMES = ("h_c", "h_u", "h_conf", "h_inh", "h_cur", "h_ene", "h_ale")

_SIGMOID_CLIP = 60.0  # exp argument guard


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-min(x, _SIGMOID_CLIP)))
    z = math.exp(max(x, -_SIGMOID_CLIP))
    return z / (1.0 + z)


def clip01(x):
    return np.clip(x, 0.0, 1.0)


@dataclass(frozen=True)
class HormoneVector:
    """Full hormonal field; every component stays in [0,1]."""

    h_c: float = 0.0
    h_u: float = 0.0
    h_conf: float = 0.0
    h_inh: float = 0.0
    h_cur: float = 0.0
    h_ene: float = 0.0
    h_ale: float = 0.0

    def __post_init__(self):
        for name in HORMONE_NAMES:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0,1]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in HORMONE_NAMES], dtype=float)

    @property
    def recursive(self) -> tuple[float, float]:
        """Projection onto the two regulated components (h_c, h_u)."""
        return (self.h_c, self.h_u)

    def with_inherited(self, h_conf=None, h_inh=None, h_cur=None, h_ene=None,
                       h_ale=None) -> "HormoneVector":
        return replace(
            self,
            h_conf=self.h_conf if h_conf is None else h_conf,
            h_inh=self.h_inh if h_inh is None else h_inh,
            h_cur=self.h_cur if h_cur is None else h_cur,
            h_ene=self.h_ene if h_ene is None else h_ene,
            h_ale=self.h_ale if h_ale is None else h_ale,
        )


@dataclass(frozen=True)
class HormoneParams:
    """Dynamics constants for the two regulated hormones.

    Defaults are the reference calibration; the constructor enforces the
    timescale ordering tau_u <= tau_c and rejects any dt that violates the
    explicit-scheme admissibility bound at worst-case resource load.
    """

    tau_c: float = 1.5
    tau_u: float = 1.0
    lambda_c: float = 0.75
    lambda_u: float = 0.70
    gamma_cu: float = 0.60   # Confusionin inhibits Clarifine
    gamma_uc: float = 0.55   # Clarifine inhibits Confusionin
    gamma_cur_u: float = 0.25  # Curiosine amplifies Confusionin
    gamma_inh_c: float = 0.20  # Inhibitine amplifies Clarifine
    delta_c: int = 1
    delta_u: int = 0
    rho_c: float = 0.10
    rho_u: float = 0.10
    sigma_eta_c: float = 0.02
    sigma_eta_u: float = 0.02
    a_k: float = 5.0
    b_k: float = -2.5
    dt: float = 1.0

    def __post_init__(self):
        if self.tau_c <= 0 or self.tau_u <= 0:
            raise ValueError("timescales must be positive")
        if self.tau_u > self.tau_c:
            raise ValueError("timescale ordering violated: tau_u must be <= tau_c")
        for name in ("lambda_c", "lambda_u"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name}={v} outside (0,1)")
        for name in ("gamma_cu", "gamma_uc", "gamma_cur_u", "gamma_inh_c",
                     "rho_c", "rho_u"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name}={v} outside [0,1)")
        if self.delta_c < 0 or self.delta_u < 0:
            raise ValueError("emission delays must be >= 0 cycles")
        if self.sigma_eta_c < 0 or self.sigma_eta_u < 0:
            raise ValueError("noise amplitudes must be >= 0")
        if self.a_k <= 0:
            raise ValueError("emission gain must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        bound = dt_bound(self, chi_max=1.0)
        if self.dt >= bound:
            raise ValueError(
                f"dt={self.dt} violates admissibility bound {bound:.4f}")


@dataclass(frozen=True)
class EmissionWeights:
    """Convex aggregation weights; each triple must sum to one."""

    alpha_u: float = 0.45
    beta_u: float = 0.35
    gamma_u: float = 0.20
    alpha_c: float = 0.40
    beta_c: float = 0.35
    gamma_c: float = 0.25

    def __post_init__(self):
        for triple, tag in (((self.alpha_u, self.beta_u, self.gamma_u), "u"),
                            ((self.alpha_c, self.beta_c, self.gamma_c), "c")):
            if any(w < 0 for w in triple):
                raise ValueError(f"negative {tag}-weight")
            if abs(sum(triple) - 1.0) > 1e-9:
                raise ValueError(f"{tag}-weights sum to {sum(triple)}, not 1")


def emit(phi: float, h_k: float, a_k: float = 5.0, b_k: float = -2.5) -> float:
    """Logistic emission with anti-saturation: sigma(a*phi + b) * (1 - h_k).

    Exactly zero when the hormone is saturated (h_k = 1), which keeps the
    discrete dynamics inside [0,1] without a reflecting boundary.
    """
    if not (0.0 <= phi <= 1.0 and 0.0 <= h_k <= 1.0):
        raise ValueError("emit inputs must lie in [0,1]")
    return sigmoid(a_k * phi + b_k) * (1.0 - h_k)


def phi_confusionin(entropy_norm: float, err_norm: float, conf_max: float,
                    w: EmissionWeights = EmissionWeights()) -> float:
    """Uncertainty aggregation: entropy, residual error, and low confidence."""
    val = (w.alpha_u * entropy_norm + w.beta_u * err_norm
           + w.gamma_u * (1.0 - conf_max))
    return float(min(1.0, max(0.0, val)))


def phi_clarifine(entropy_norm: float, err_norm: float, cos_align: float,
                  w: EmissionWeights = EmissionWeights()) -> float:
    """Convergence aggregation; the [-1,1] cosine is rescaled to [0,1].

    The directional term separates a merely stalled state from one whose
    updates consistently point along the estimated convergence direction.
    """
    if not (-1.0 - 1e-12 <= cos_align <= 1.0 + 1e-12):
        raise ValueError("cos_align outside [-1,1]")
    direction = (cos_align + 1.0) / 2.0
    val = (w.alpha_c * (1.0 - entropy_norm) + w.beta_c * (1.0 - err_norm)
           + w.gamma_c * direction)
    return float(min(1.0, max(0.0, val)))


def _drift(h_c, h_u, e_c, e_u, chi, p: HormoneParams, h_cur, h_inh,
           rho_u_scale=1.0):
    """Deterministic drift of the regulated pair, before the dt/tau scaling."""
    x_c = p.gamma_inh_c * h_inh * (1.0 - h_c)
    x_u = p.gamma_cur_u * h_cur * (1.0 - h_u)
    d_c = (-p.lambda_c * h_c + e_c - p.gamma_cu * h_c * h_u
           - p.rho_c * chi * h_c + x_c)
    d_u = (-p.lambda_u * h_u + e_u - p.gamma_uc * h_u * h_c
           - p.rho_u * rho_u_scale * chi * h_u + x_u)
    return d_c, d_u


def step_dynamics(h: HormoneVector, emissions_delayed: tuple[float, float],
                  chi: float, params: HormoneParams,
                  noise: tuple[float, float] = (0.0, 0.0),
                  rho_u_scale: float = 1.0) -> HormoneVector:
    """One projected Euler-Maruyama step of the regulated pair.

    ``emissions_delayed`` are emission values computed delta_k cycles ago
    (the caller owns the delay queue; an unfilled queue yields 0).
    ``rho_u_scale`` lets the engine disable Confusionin resource damping
    while the budget is far from exhausted. Inherited components pass
    through unchanged.
    """
    if not (0.0 <= chi <= 1.0):
        raise ValueError("chi outside [0,1]")
    e_c, e_u = emissions_delayed
    d_c, d_u = _drift(h.h_c, h.h_u, e_c, e_u, chi, params,
                      h_cur=h.h_cur, h_inh=h.h_inh, rho_u_scale=rho_u_scale)
    sqdt = math.sqrt(params.dt)
    h_c = h.h_c + (params.dt / params.tau_c) * d_c \
        + sqdt * params.sigma_eta_c * noise[0]
    h_u = h.h_u + (params.dt / params.tau_u) * d_u \
        + sqdt * params.sigma_eta_u * noise[1]
    return replace(h, h_c=float(clip01(h_c)), h_u=float(clip01(h_u)))


@dataclass(frozen=True)
class StabilityEntry:
    hormone: str
    lhs: float   # decay rate
    rhs: float   # cross-inhibitory load + resource damping
    passed: bool


@dataclass(frozen=True)
class StabilityReport:
    entries: tuple[StabilityEntry, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def lines(self) -> list[str]:
        out = []
        for e in self.entries:
            verdict = "pass" if e.passed else "FAIL"
            op = ">" if e.passed else "<="
            out.append(f"lambda_{e.hormone} = {e.lhs:.4f} {op} {e.rhs:.4f}  [{verdict}]")
        return out


def check_stability(params: HormoneParams, chi_max: float = 1.0) -> StabilityReport:
    """Decay-dominance deployability gate, checked per hormone a priori."""
    entries = (
        StabilityEntry("c", params.lambda_c,
                       params.gamma_cu + params.rho_c * chi_max,
                       params.lambda_c > params.gamma_cu + params.rho_c * chi_max),
        StabilityEntry("u", params.lambda_u,
                       params.gamma_uc + params.rho_u * chi_max,
                       params.lambda_u > params.gamma_uc + params.rho_u * chi_max),
    )
    return StabilityReport(entries)


def dt_bounds(params: HormoneParams, chi_max: float = 1.0) -> dict[str, float]:
    """Per-hormone admissible step bounds for the explicit scheme."""
    return {
        "c": 2.0 * params.tau_c
             / (params.lambda_c + params.gamma_cu + params.rho_c * chi_max),
        "u": 2.0 * params.tau_u
             / (params.lambda_u + params.gamma_uc + params.rho_u * chi_max),
    }


def dt_bound(params: HormoneParams, chi_max: float = 1.0) -> float:
    """Overall admissible dt: the minimum of the per-hormone bounds."""
    return min(dt_bounds(params, chi_max).values())


def lyapunov(h: HormoneVector, h_star: tuple[float, float],
             params: HormoneParams) -> float:
    """Timescale-weighted squared distance of (h_c, h_u) to an equilibrium."""
    return 0.5 * (params.tau_c * (h.h_c - h_star[0]) ** 2
                  + params.tau_u * (h.h_u - h_star[1]) ** 2)


def estimate_equilibrium(params: HormoneParams,
                         emissions: tuple[float, float],
                         chi: float,
                         inherited: tuple[float, float] = (0.0, 0.0),
                         max_steps: int = 100_000) -> tuple[float, float]:
    """Attractor of the noiseless dynamics under constant emission drive.

    Iterates the projected step with fixed (E_c, E_u), fixed chi, and fixed
    inherited (h_cur, h_inh) until the post-projection state change is below
    1e-12. Interior equilibria satisfy |drift| < 1e-9; projection-pinned
    boundary points are returned as-is (the drive pushes outward there).
    """
    h_cur, h_inh = inherited
    h = HormoneVector(h_c=0.5, h_u=0.5, h_cur=h_cur, h_inh=h_inh)
    for _ in range(max_steps):
        nxt = step_dynamics(h, emissions, chi, params)
        if abs(nxt.h_c - h.h_c) < 1e-12 and abs(nxt.h_u - h.h_u) < 1e-12:
            return (nxt.h_c, nxt.h_u)
        h = nxt
    raise RuntimeError(
        "equilibrium iteration did not converge; check parameter stability")
