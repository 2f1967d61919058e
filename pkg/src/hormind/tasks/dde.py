"""Discrete dynamical-system parameter identification adapter.

Instances are linear second-order recurrences x[t+1] = th1*x[t] + th2*x[t-1]
with unknown (th1, th2) and an observed length-10 trajectory. The cognitive
state is the current estimate mapped affinely into [0,1]^2. The reasoning
agent descends the mean squared one-step-prediction residual with a
norm-bounded gradient step (the gradient is finite-difference-verified in
the tests); the refiner runs a backtracking line search along the same
direction, never the closed-form solve. The independent oracle is ordinary
least squares via the normal equations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .base import TaskAdapter

TRAJECTORY_LEN = 10
GRID_SIDE = 21           # candidate grid for the output distribution
GRID_SPACING = 0.05
KERNEL_BANDWIDTH = 0.05  # residual scale of the grid weighting
KERNEL_FLOOR = 0.1       # temperature floor factor, in bandwidth^2 units
SPECTRAL_CAP = 0.95
MIN_SEED_AMPLITUDE = 0.3
CONDITION_CAP = 50.0     # identifiability floor for generated trajectories
STEP_GAIN = 5.0          # Cauchy-step multiplier; engine damping keeps it < 2x


@dataclass(frozen=True)
class DdeInstance:
    theta: np.ndarray        # true parameters, shape (2,)
    x: np.ndarray            # observed trajectory, shape (10,)
    family: str = "linear2"


def spectral_radius(theta: np.ndarray) -> float:
    """Largest root magnitude of z^2 - th1 z - th2."""
    roots = np.roots([1.0, -float(theta[0]), -float(theta[1])])
    return float(np.max(np.abs(roots)))


def generate(seed: int, difficulty: str = "default") -> DdeInstance:
    """Random stable system with an identifiable observed trajectory.

    Initial values are redrawn until the one-step design matrix is well
    conditioned; a near-geometric trajectory makes the two parameters
    indistinguishable from ten points, which would leave the instance with
    no recoverable ground truth at the benchmark tolerance.
    """
    if difficulty != "default":
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = np.random.default_rng(seed)
    while True:
        theta = rng.uniform(-0.9, 0.9, size=2)
        if spectral_radius(theta) <= SPECTRAL_CAP:
            break
    while True:
        x0, x1 = rng.uniform(-1.0, 1.0, size=2)
        if max(abs(x0), abs(x1)) < MIN_SEED_AMPLITUDE:
            continue
        x = np.empty(TRAJECTORY_LEN)
        x[0], x[1] = x0, x1
        for t in range(1, TRAJECTORY_LEN - 1):
            x[t + 1] = theta[0] * x[t] + theta[1] * x[t - 1]
        design = np.column_stack([x[1:-1], x[:-2]])
        eigs = np.linalg.eigvalsh(design.T @ design)
        if eigs[-1] / max(eigs[0], 1e-15) <= CONDITION_CAP:
            return DdeInstance(theta=theta, x=x)


class DdeTask(TaskAdapter):
    name = "dde"
    axiom_count = 2  # parameters in range, recurrence spectrally stable

    def __init__(self, instance: DdeInstance):
        self.instance = instance
        x = instance.x
        # design matrix for one-step predictions x[k] ~ th1*x[k-1] + th2*x[k-2]
        self.design = np.column_stack([x[1:-1], x[:-2]])
        self.targets = x[2:]
        # mean curvature of the residual surface (trace/2 of its Hessian);
        # keeps the distribution temperature scale-invariant across instances
        self.curv_theta = max(2.0 * float(np.mean(self.design ** 2)), 1e-12)

    @property
    def dim(self) -> int:
        return 2

    def encode(self) -> np.ndarray:
        """Quiescent cold start: the state-space origin (theta = (-1,-1))."""
        return np.zeros(2)

    def decode(self, s: np.ndarray) -> np.ndarray:
        return 2.0 * np.asarray(s, dtype=float) - 1.0

    def residual(self, theta: np.ndarray) -> float:
        """Mean squared one-step prediction error."""
        err = self.design @ np.asarray(theta, dtype=float) - self.targets
        return float(np.mean(err * err))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        err = self.design @ np.asarray(theta, dtype=float) - self.targets
        return 2.0 * (self.design.T @ err) / len(self.targets)

    def deltas(self, s: np.ndarray, y, agent_id: str) -> np.ndarray:
        theta = self.decode(s)
        if agent_id == "R1A":
            # negative-gradient step normalized by the exact line minimizer
            # (Cauchy step); the engine's intensity damping keeps the
            # applied multiple below the divergence threshold of 2
            g_state = 2.0 * self.gradient(theta)  # chain rule through theta = 2s-1
            norm = float(np.linalg.norm(g_state))
            if norm < 1e-15:
                return np.zeros(2)
            hess_state = 8.0 * self.design.T @ self.design / len(self.targets)
            curvature = max(float(g_state @ hess_state @ g_state), 1e-15)
            alpha = norm * norm / curvature
            return -min(STEP_GAIN * alpha, 1.0 / norm) * g_state
        if agent_id == "R1B":
            # exploration jump: half-step toward the best candidate of the
            # uncertainty-scaled hypothesis grid
            grid, _ = self._zoom_grid(theta)
            best = np.clip(grid[int(self._grid_residuals(grid).argmin())],
                           -1.0, 1.0)
            return 0.5 * ((best + 1.0) / 2.0 - np.asarray(s, dtype=float))
        if agent_id == "R1C":
            return self._line_search_delta(s, theta)
        if agent_id == "R1D":
            if spectral_radius(theta) <= 1.0:
                return np.zeros(2)
            # pull an unstable estimate back toward the admissible family
            return (np.full(2, 0.5) - np.asarray(s, dtype=float)) * 0.5
        return np.zeros(2)

    def _line_search_delta(self, s: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Best halving step along the negative gradient (local refiner)."""
        g = self.gradient(theta)
        gn = float(np.linalg.norm(g))
        if gn < 1e-15:
            return np.zeros(2)
        direction = -g / gn
        best_step = 0.0
        best_val = self.residual(theta)
        step = 1.0
        for _ in range(12):
            candidate = np.clip(theta + step * direction, -1.0, 1.0)
            val = self.residual(candidate)
            if val < best_val:
                best_step, best_val = step, val
            step *= 0.5
        if best_step == 0.0:
            return np.zeros(2)
        refined = np.clip(theta + best_step * direction, -1.0, 1.0)
        return (refined + 1.0) / 2.0 - np.asarray(s, dtype=float)

    def _grid_residuals(self, grid: np.ndarray) -> np.ndarray:
        err = grid @ self.design.T - self.targets
        return np.mean(err * err, axis=1)

    def _make_grid(self, theta: np.ndarray, spacing: float) -> np.ndarray:
        half = (GRID_SIDE - 1) // 2
        offsets = (np.arange(GRID_SIDE) - half) * spacing
        g1, g2 = np.meshgrid(theta[0] + offsets, theta[1] + offsets,
                             indexing="ij")
        return np.column_stack([g1.ravel(), g2.ravel()])

    def _grid(self, theta: np.ndarray) -> np.ndarray:
        return self._make_grid(theta, GRID_SPACING)

    def _zoom_grid(self, theta: np.ndarray) -> tuple[np.ndarray, float]:
        """Hypothesis grid whose spacing tracks the current fit uncertainty."""
        scale = math.sqrt(max(self.residual(theta), 1e-12) / self.curv_theta)
        spacing = float(np.clip(scale, 5e-4, GRID_SPACING))
        return self._make_grid(theta, spacing), spacing

    def distribution(self, s: np.ndarray) -> np.ndarray:
        """Residual-weighted candidate grid centered on the estimate.

        The weighting temperature anneals with the current fit quality, so
        the distribution collapses onto the best grid cell as the residual
        vanishes and stays broad while the estimate is poor.
        """
        theta = self.decode(s)
        r = self._grid_residuals(self._grid(theta))
        floor = KERNEL_FLOOR * KERNEL_BANDWIDTH ** 2 * self.curv_theta
        temperature = max(self.residual(theta), floor)
        z = -(r - r.min()) / temperature
        w = np.exp(z - z.max())
        return w / w.sum()

    def axioms(self, y) -> list[str]:
        theta = np.asarray(y, dtype=float)
        violations = []
        if np.any(np.abs(theta) > 1.0 + 1e-9):
            violations.append("parameters outside [-1,1]^2")
        if spectral_radius(theta) > 1.0 + 1e-6:
            violations.append("recurrence is spectrally unstable")
        return violations

    def oracle(self) -> np.ndarray:
        """Least-squares identification via the normal equations."""
        gram = self.design.T @ self.design
        rhs = self.design.T @ self.targets
        return np.linalg.solve(gram, rhs)

    def is_correct(self, y, truth) -> bool:
        return float(np.linalg.norm(np.asarray(y) - np.asarray(truth))) <= 1e-2

    def canonical_encoding(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float).copy()

    def sample_outputs(self, s: np.ndarray, y) -> list[tuple]:
        """Current estimate plus the best cell of the hypothesis grid."""
        theta = self.decode(s)
        grid, _ = self._zoom_grid(theta)
        best = np.clip(grid[int(self._grid_residuals(grid).argmin())],
                       -1.0, 1.0)
        out = [(theta, self.canonical_encoding(theta), 1.0)]
        if not np.allclose(best, theta):
            out.append((best, self.canonical_encoding(best), 0.5))
        return out


def to_json(instance: DdeInstance) -> str:
    return json.dumps({
        "task": "dde",
        "family": instance.family,
        "theta": instance.theta.tolist(),
        "x": instance.x.tolist(),
    })


def from_json(text: str) -> DdeInstance:
    data = json.loads(text)
    return DdeInstance(
        theta=np.asarray(data["theta"], dtype=float),
        x=np.asarray(data["x"], dtype=float),
        family=data.get("family", "linear2"),
    )
