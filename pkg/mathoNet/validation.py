"""
Checks on discovered models: re-simulation, trajectory error and
Monte-Carlo predictive bands from the diagonal posterior.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .bayes import RegState
from .benchmarks import rk4_step
from .errors import IntegrationError, StructuralError
from .network import FlatModel
from .symbolic import Expression

__all__ = (
    "DIVERGENCE_NORM",
    "Trajectory",
    "UncertaintyBand",
    "simulate_discovered",
    "simulate_expressions",
    "trajectory_rmse",
    "mc_uncertainty",
)

logger = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e6


@dataclass
class Trajectory:
    """Sampled states, ``x0`` first.

    Attributes
    -----------
    t: :class:`numpy.ndarray`
        Sample times.
    states: :class:`numpy.ndarray`
        One row per sample.
    diverged: :class:`bool`
        Whether integration stopped early on a non-finite or exploding state.
    """

    t: np.ndarray
    states: np.ndarray
    diverged: bool = False

    def __len__(self) -> int:
        return self.states.shape[0]


def _simulate(
    rhs: Callable[[np.ndarray], np.ndarray],
    x0,
    dt: float,
    steps: int,
    sample_every: int,
    threshold: float,
) -> Trajectory:
    if steps < 0 or sample_every < 1:
        raise ValueError("steps must be non-negative and sample_every at least 1")
    state = np.asarray(x0, dtype=float).reshape(-1)
    times, visited = [0.0], [state]
    diverged = False
    for step in range(1, steps + 1):
        try:
            state = rk4_step(rhs, state, dt)
        except (IntegrationError, StructuralError):
            diverged = True
        else:
            diverged = not np.linalg.norm(state) <= threshold
        if diverged:
            logger.info("Simulation diverged at step %d (t=%g)", step, step * dt)
            break
        if step % sample_every == 0:
            times.append(step * dt)
            visited.append(state)
    return Trajectory(np.array(times), np.array(visited), diverged)


def simulate_discovered(
    nets: Sequence[FlatModel],
    x0,
    dt: float,
    steps: int,
    sample_every: int = 1,
    threshold: float = DIVERGENCE_NORM,
) -> Trajectory:
    """RK4 integration with one discovered model per state dimension as the right-hand side.

    Raises
    -------
    StructuralError
        The number of models or their input dimension does not match ``x0``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(nets) != x0.shape[0]:
        raise StructuralError(f"{len(nets)} models for a {x0.shape[0]}-dimensional state.")
    for net in nets:
        n_inputs = getattr(net, "n_inputs", None)
        if n_inputs != x0.shape[0]:
            raise StructuralError(
                f"Model {net!r} takes {n_inputs} inputs, the state has {x0.shape[0]}."
            )

    def rhs(state):
        row = state.reshape(1, -1)
        return np.array([net.predict(row)[0] for net in nets])

    return _simulate(rhs, x0, dt, steps, sample_every, threshold)


def simulate_expressions(
    exprs: Sequence[Expression],
    x0,
    dt: float,
    steps: int,
    sample_every: int = 1,
    threshold: float = DIVERGENCE_NORM,
) -> Trajectory:
    """Like :func:`simulate_discovered`, driven by extracted expressions."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(exprs) != x0.shape[0]:
        raise StructuralError(f"{len(exprs)} expressions for a {x0.shape[0]}-dimensional state.")

    def rhs(state):
        row = state.reshape(1, -1)
        return np.array([expr.evaluate(row)[0] for expr in exprs])

    return _simulate(rhs, x0, dt, steps, sample_every, threshold)


def _states(traj: Union[Trajectory, np.ndarray]) -> np.ndarray:
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    return states.reshape(states.shape[0], -1)


def trajectory_rmse(
    traj_a: Union[Trajectory, np.ndarray],
    traj_b: Union[Trajectory, np.ndarray],
    horizon: Optional[int] = None,
) -> float:
    """Root-mean-square Euclidean state distance over the first ``horizon`` samples.

    Without a horizon both trajectories must have the same length.
    """
    a, b = _states(traj_a), _states(traj_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"State dimensions differ: {a.shape[1]} and {b.shape[1]}")
    if horizon is None:
        if a.shape[0] != b.shape[0]:
            raise ValueError(f"Trajectory lengths differ: {a.shape[0]} and {b.shape[0]}")
        horizon = a.shape[0]
    if not 1 <= horizon <= min(a.shape[0], b.shape[0]):
        raise ValueError(
            f"horizon {horizon} exceeds the trajectory lengths {a.shape[0]} and {b.shape[0]}"
        )
    diff = a[:horizon] - b[:horizon]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


@dataclass
class UncertaintyBand:
    mean: np.ndarray
    variance: np.ndarray
    T: int

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def mc_uncertainty(
    model: FlatModel,
    reg: Optional[RegState],
    X_test,
    T: int = 1000,
    seed: int = 0,
) -> UncertaintyBand:
    """Predictive mean and variance from ``T`` draws of the posterior.

    Every active weight is drawn from ``Normal(w, zeta)``; masked weights
    stay 0. Without ``reg`` all variances are 0. The variance uses the
    ``1/T`` normalization, so ``T == 1`` gives 0.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    live = model.effective_mask() > 0
    if reg is None:
        zeta = np.zeros(model.n_weights)
    else:
        zeta = np.asarray(reg.zeta, dtype=float).reshape(-1)
        if zeta.shape[0] != model.n_weights:
            raise StructuralError(
                f"RegState holds {zeta.shape[0]} variances for {model.n_weights} weights."
            )
    std = np.sqrt(np.where(np.isfinite(zeta) & (zeta > 0), zeta, 0.0))[live]
    if not np.any(std > 0):
        point = model.predict(X_test)
        return UncertaintyBand(point, np.zeros_like(point), T)

    rng = np.random.default_rng(seed)
    sampled = model.copy()
    center = sampled.weights.copy()
    draws = np.empty((T, X_test.shape[0]))
    for t in range(T):
        sampled.weights[:] = center
        sampled.weights[live] = center[live] + std * rng.standard_normal(std.shape[0])
        draws[t] = sampled.predict(X_test)

    mean = np.mean(draws, axis=0)
    variance = np.mean((draws - mean) ** 2, axis=0)
    logger.debug("MC band over %d points with T=%d", X_test.shape[0], T)
    return UncertaintyBand(mean, variance, T)
