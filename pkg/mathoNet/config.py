from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError

__all__ = (
    "SYSTEMS",
    "TrainConfig",
    "RunConfig",
    "load_config",
)

logger = logging.getLogger(__name__)

SYSTEMS: Tuple[str, ...] = ("lorenz", "lotka_volterra", "fisher_kpp")

_ODE_GRID = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10]
_PDE_GRID = [1e-8, 1e-10, 1e-12, 1e-14, 1e-16]

_CHOICES: Dict[str, Tuple[str, ...]] = {
    "optimizer": ("adam", "sgd"),
    "sigma2_mode": ("residual", "fixed"),
    "selection": ("occam", "accuracy"),
    "model": ("mathonet", "stencil"),
}


@dataclass
class TrainConfig:
    """Everything one discovery sweep needs.

    ``lam`` is the starting penalty of a single run; a sweep runs every
    entry of ``lambda_grid`` instead. ``lam_g = lambda_g_ratio * lam``
    throughout. ``n_epoch`` defaults to ``decay_every`` so the penalty
    decays once per cycle.
    """

    hidden: List[int] = field(default_factory=lambda: [3])
    unary_set: List[str] = field(
        default_factory=lambda: ["identity", "sin", "cos", "log", "exp"]
    )
    lam: float = 1e-4
    lambda_grid: List[float] = field(default_factory=lambda: list(_ODE_GRID))
    lambda_g_ratio: float = 1.0
    decay_every: int = 200
    decay_factor: float = 0.1
    n_cycle: int = 12
    n_epoch: Optional[int] = None
    kappa_alpha: float = 1e3
    kappa_alpha_g: float = 1e3
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    batch_size: int = 32
    restarts: int = 10
    seed: int = 0
    train_fraction: float = 0.9
    sigma2_mode: str = "residual"
    sigma2: float = 1.0
    sigma2_floor: float = 1e-8
    selection: str = "occam"
    occam_tolerance: float = 1.1
    coeff_floor: float = 1e-4
    model: str = "mathonet"
    beta_clip: Tuple[float, float] = (1e-6, 1e6)
    init_scale: float = 0.5
    prox: bool = True

    def __post_init__(self):
        self.hidden = [int(n) for n in self.hidden]
        self.unary_set = [str(name).lower() for name in self.unary_set]
        self.lambda_grid = [float(v) for v in self.lambda_grid]
        self.beta_clip = tuple(float(v) for v in self.beta_clip)
        if self.n_epoch is None:
            self.n_epoch = self.decay_every
        self.validate()

    @property
    def lam_g(self) -> float:
        return self.lambda_g_ratio * self.lam

    def validate(self) -> None:
        """Checks the invariants, raising :exc:`~mathoNet.errors.ConfigError`."""
        if not self.hidden or any(n < 1 for n in self.hidden):
            raise ConfigError("Every hidden layer needs at least one neuron.", "hidden")
        for name in ("decay_every", "n_cycle", "n_epoch", "batch_size", "restarts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1.", name)
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1.", "train_fraction")
        if self.lam < 0 or any(v < 0 for v in self.lambda_grid):
            raise ConfigError("Penalty strengths must be non-negative.", "lambda_grid")
        if not self.lambda_grid:
            raise ConfigError("lambda_grid must hold at least one value.", "lambda_grid")
        if self.lambda_g_ratio < 0:
            raise ConfigError("lambda_g_ratio must be non-negative.", "lambda_g_ratio")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError("decay_factor must lie in (0, 1].", "decay_factor")
        if self.kappa_alpha <= 0 or self.kappa_alpha_g <= 0:
            raise ConfigError("Pruning thresholds must be positive.", "kappa_alpha")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive.", "learning_rate")
        if self.sigma2 <= 0 or self.sigma2_floor <= 0:
            raise ConfigError("Noise variances must be positive.", "sigma2")
        if self.occam_tolerance < 1.0:
            raise ConfigError("occam_tolerance must be at least 1.", "occam_tolerance")
        if self.coeff_floor < 0:
            raise ConfigError("coeff_floor must be non-negative.", "coeff_floor")
        lo, hi = self.beta_clip
        if not 0 < lo <= hi:
            raise ConfigError("beta_clip must be an increasing positive pair.", "beta_clip")
        for name, choices in _CHOICES.items():
            if getattr(self, name) not in choices:
                raise ConfigError(
                    f"{name} must be one of {', '.join(choices)}, got {getattr(self, name)!r}.",
                    name,
                )

    @classmethod
    def for_system(cls, name: str, **overrides: Any) -> TrainConfig:
        """The defaults used for each benchmark system."""
        if name == "lorenz":
            base = {}
        elif name == "lotka_volterra":
            base = {"hidden": [2], "decay_every": 800}
        elif name == "fisher_kpp":
            base = {
                "hidden": [3],
                "unary_set": ["identity", "sin", "cos"],
                "decay_every": 800,
                "lambda_grid": list(_PDE_GRID),
                "lam": 1e-10,
                "selection": "accuracy",
                "model": "stencil",
            }
        else:
            raise ConfigError(
                f"Unknown system {name!r}; expected one of {', '.join(SYSTEMS)}.", "system"
            )
        base.update(overrides)
        return cls.from_dict(base)

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def field_default(cls, name: str) -> Any:
        """The default value of a field, used to coerce flag strings."""
        for f in dataclasses.fields(cls):
            if f.name == name:
                if f.default is not dataclasses.MISSING:
                    return f.default
                return f.default_factory()
        raise ConfigError(f"Unknown configuration field {name!r}.", name)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> TrainConfig:
        unknown = sorted(set(data) - set(cls.field_names()))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}.", unknown[0])
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid configuration: {exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["beta_clip"] = list(self.beta_clip)
        return data

    def replace(self, **overrides: Any) -> TrainConfig:
        """A copy with ``overrides`` applied; flags win over file values.

        ``n_epoch`` follows a changed ``decay_every`` unless it was given too.
        """
        data = self.to_dict()
        if "decay_every" in overrides and "n_epoch" not in overrides:
            if self.n_epoch == self.decay_every:
                data["n_epoch"] = None
        data.update(overrides)
        return type(self).from_dict(data)


@dataclass
class RunConfig:
    """A :class:`TrainConfig` plus where it runs and what it runs on."""

    train: TrainConfig
    system: Optional[str] = None
    out_dir: Path = Path(".")
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.system is not None and self.system not in SYSTEMS:
            raise ConfigError(f"Unknown system {self.system!r}.", "system")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1.", "jobs")

    def prepare(self) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"Output directory {self.out_dir} is not writable: {exc}") from exc
        return self.out_dir


def load_config(
    path: Union[str, Path],
    *,
    system: Optional[str] = None,
    default_system: Optional[str] = None,
) -> TrainConfig:
    """Reads a JSON configuration file.

    Keys not given fall back to the defaults of a benchmark system (or the
    plain defaults): ``system`` if given, else the file's ``"system"`` key,
    else ``default_system``. Unknown keys are rejected.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf8"))
    except FileNotFoundError:
        raise ConfigError(f"Configuration file {path} does not exist.") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Configuration file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration file {path} must hold a JSON object.")
    system = system or data.pop("system", None) or default_system
    data.pop("system", None)
    logger.debug("Loaded configuration %s (system=%s)", path, system)
    if system is not None:
        return TrainConfig.for_system(system, **data)
    return TrainConfig.from_dict(data)
