"""
Ground-truth dynamics of the benchmark systems, a classical RK4
integrator and dataset generation with Gaussian noise on the derivative
targets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import IntegrationError, StructuralError

__all__ = (
    "NOISE_LEVELS",
    "SystemSpec",
    "Dataset",
    "lorenz_rhs",
    "lv_rhs",
    "fisher_rhs",
    "lv_first_integral",
    "rk4_step",
    "integrate",
    "simulate_fisher",
    "generate_dataset",
)

logger = logging.getLogger(__name__)

NOISE_LEVELS: Tuple[float, ...] = (0.0, 0.01, 0.1, 1.0, 10.0)

Rhs = Callable[[np.ndarray], np.ndarray]


def lorenz_rhs(state, sigma: float = 10.0, beta: float = 8.0 / 3.0, rho: float = 28.0) -> np.ndarray:
    x, y, z = _vector(state, 3, "Lorenz")
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def lv_rhs(
    state, alpha: float = 1.3, beta: float = 0.9, delta: float = 0.8, gamma: float = 1.8
) -> np.ndarray:
    x, y = _vector(state, 2, "Lotka-Volterra")
    return np.array([alpha * x - beta * x * y, delta * x * y - gamma * y])


def fisher_rhs(p, dx: float, d: float = 6.25, r: float = 1.0) -> np.ndarray:
    """Method-of-lines right-hand side of ``p_t = d p_xx + r p (1 - p)``.

    The end points use a reflected ghost value (zero flux).
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] < 3:
        raise StructuralError("The Fisher-KPP grid needs at least 3 points.")
    padded = np.concatenate([[p[1]], p, [p[-2]]])
    laplacian = (padded[:-2] - 2.0 * padded[1:-1] + padded[2:]) / dx**2
    return d * laplacian + r * p * (1.0 - p)


def lv_first_integral(
    state, alpha: float = 1.3, beta: float = 0.9, delta: float = 0.8, gamma: float = 1.8
) -> np.ndarray:
    """``V = delta x - gamma ln x + beta y - alpha ln y``, constant along exact orbits."""
    state = np.atleast_2d(np.asarray(state, dtype=float))
    x, y = state[:, 0], state[:, 1]
    return delta * x - gamma * np.log(x) + beta * y - alpha * np.log(y)


def _vector(state, n: int, what: str) -> np.ndarray:
    state = np.asarray(state, dtype=float).reshape(-1)
    if state.shape[0] != n:
        raise StructuralError(f"{what} state must have {n} entries, got {state.shape[0]}.")
    return state


def rk4_step(rhs: Rhs, state, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(state), dtype=float)
    k2 = np.asarray(rhs(state + k1 / 2 * dt), dtype=float)
    k3 = np.asarray(rhs(state + k2 / 2 * dt), dtype=float)
    k4 = np.asarray(rhs(state + k3 * dt), dtype=float)
    new = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise IntegrationError("RK4 step produced a non-finite state.")
    return new


def integrate(rhs: Rhs, x0, dt: float, steps: int, sample_every: int = 1) -> np.ndarray:
    """Integrates ``steps`` RK4 steps and returns every ``sample_every``-th state, ``x0`` first."""
    if sample_every < 1:
        raise ValueError("sample_every must be at least 1")
    state = np.asarray(x0, dtype=float)
    visited = [state]
    for step in range(1, steps + 1):
        try:
            state = rk4_step(rhs, state, dt)
        except IntegrationError as exc:
            raise IntegrationError(str(exc), step) from None
        if step % sample_every == 0:
            visited.append(state)
    return np.array(visited)


@dataclass
class SystemSpec:
    """A benchmark system with its integration schedule.

    ``steps`` RK4 steps of size ``dt`` are taken from ``x0`` and every
    ``sample_every``-th state (``x0`` included) becomes a sample. Fisher-KPP
    additionally carries its spatial grid.
    """

    name: str
    params: Dict[str, float]
    x0: np.ndarray
    dt: float
    steps: int
    sample_every: int = 1
    grid_points: Optional[int] = None
    length: float = 1.0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.dt <= 0:
            raise StructuralError("dt must be positive.")
        if self.steps < 1 or self.sample_every < 1:
            raise StructuralError("steps and sample_every must be at least 1.")
        if self.grid_points is not None and self.grid_points < 3:
            raise StructuralError("A stencil needs at least 3 grid points.")

    @property
    def dx(self) -> Optional[float]:
        if self.grid_points is None:
            return None
        return self.length / (self.grid_points - 1)

    @property
    def n_samples(self) -> int:
        return self.steps // self.sample_every + 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.grid_points)

    def rhs(self, state) -> np.ndarray:
        if self.name == "lorenz":
            return lorenz_rhs(state, **self.params)
        if self.name == "lotka_volterra":
            return lv_rhs(state, **self.params)
        return fisher_rhs(state, self.dx, **self.params)

    @classmethod
    def lorenz(cls) -> SystemSpec:
        return cls(
            "lorenz",
            {"sigma": 10.0, "beta": 8.0 / 3.0, "rho": 28.0},
            x0=[-8.0, 7.0, 27.0],
            dt=0.01,
            steps=999,
        )

    @classmethod
    def lotka_volterra(cls) -> SystemSpec:
        return cls(
            "lotka_volterra",
            {"alpha": 1.3, "beta": 0.9, "delta": 0.8, "gamma": 1.8},
            x0=[0.442, 4.628],
            dt=0.01,
            steps=2990,
            sample_every=10,
        )

    @classmethod
    def fisher_kpp(cls) -> SystemSpec:
        grid = np.linspace(0.0, 1.0, 26)
        return cls(
            "fisher_kpp",
            {"d": 6.25, "r": 1.0},
            x0=np.exp(-100.0 * (grid - 0.5) ** 2),
            dt=1e-4,
            steps=5000,
            sample_every=500,
            grid_points=26,
        )

    @classmethod
    def named(cls, name: str) -> SystemSpec:
        factories = {
            "lorenz": cls.lorenz,
            "lotka_volterra": cls.lotka_volterra,
            "fisher_kpp": cls.fisher_kpp,
        }
        try:
            return factories[name]()
        except KeyError:
            raise StructuralError(f"Unknown system {name!r}.") from None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "system": self.name,
            "params": dict(self.params),
            "x0": [float(v) for v in self.x0],
            "dt": self.dt,
            "steps": self.steps,
            "sample_every": self.sample_every,
        }
        if self.grid_points is not None:
            data.update(
                grid_points=self.grid_points,
                dx=self.dx,
                initial_condition="exp(-100*(x-0.5)^2)",
                boundary="zero-flux",
            )
        return data


@dataclass
class Dataset:
    """Stacked states ``X`` (K x n) and derivative targets ``Y`` (K x m)."""

    X: np.ndarray
    Y: np.ndarray
    noise_sigma: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim == 1:
            self.Y = self.Y.reshape(-1, 1)
        if self.X.shape[0] != self.Y.shape[0]:
            raise StructuralError(
                f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}."
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise StructuralError("Datasets must be finite.")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.X.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.Y.shape[1]

    @property
    def columns(self) -> List[str]:
        return [f"x{i + 1}" for i in range(self.n_inputs)] + [
            f"y{j + 1}" for j in range(self.n_outputs)
        ]

    def rows(self, index: Sequence[int]) -> Dataset:
        index = np.asarray(index, dtype=int)
        return Dataset(self.X[index], self.Y[index], self.noise_sigma, dict(self.meta))

    def target(self, j: int) -> Dataset:
        """The same states with only output column ``j``."""
        if not 0 <= j < self.n_outputs:
            raise StructuralError(f"Target {j} out of range for {self.n_outputs} outputs.")
        return Dataset(self.X, self.Y[:, j], self.noise_sigma, dict(self.meta, target=j))

    def split(self, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
        """Deterministic shuffled train/validation split."""
        n = len(self)
        order = np.random.default_rng(seed).permutation(n)
        n_train = int(round(n * train_fraction))
        n_train = min(max(n_train, 1), max(n - 1, 1))
        return self.rows(order[:n_train]), self.rows(order[n_train:])


def simulate_fisher(spec: SystemSpec) -> np.ndarray:
    """The sampled ``p`` field, one row per time sample (11 x 26 by default)."""
    return integrate(spec.rhs, spec.x0, spec.dt, spec.steps, spec.sample_every)


def generate_dataset(spec: SystemSpec, noise_sigma: float = 0.0, seed: int = 0) -> Dataset:
    """Integrates ``spec`` and stacks states with their exact derivatives.

    Fisher-KPP rows are the 3-point windows ``(p[i-1], p[i], p[i+1])`` of
    every interior grid point at every time sample. Gaussian noise of
    standard deviation ``noise_sigma`` is added to ``Y`` only.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    if spec.grid_points is None:
        X = integrate(spec.rhs, spec.x0, spec.dt, spec.steps, spec.sample_every)
        Y = np.array([spec.rhs(x) for x in X])
    else:
        field_ = simulate_fisher(spec)
        windows, targets = [], []
        for p in field_:
            windows.append(np.stack([p[:-2], p[1:-1], p[2:]], axis=1))
            targets.append(spec.rhs(p)[1:-1])
        X = np.concatenate(windows)
        Y = np.concatenate(targets)

    exact = np.array(Y, dtype=float, copy=True)
    rng = np.random.default_rng(seed)
    noisy = exact + rng.normal(0.0, noise_sigma, size=exact.shape) if noise_sigma > 0 else exact

    meta = dict(spec.to_dict(), seed=seed, noise_sigma=noise_sigma)
    logger.debug(
        "Generated %s dataset: %d rows, noise %g, seed %d",
        spec.name,
        X.shape[0],
        noise_sigma,
        seed,
    )
    return Dataset(X, noisy, noise_sigma, meta)
