"""
The discovery loop.

Each run trains a freshly initialized model for ``n_cycle`` cycles of
``n_epoch`` epochs. The first cycle minimizes the plain sparse group
Lasso; every cycle ends with a noise estimate, the Gauss-Newton curvature,
the Bayesian hyper-parameter update and (except after the last cycle)
pruning. A sweep runs ``restarts`` runs for every penalty of the grid and
picks one winner.
"""

from __future__ import annotations

import logging
import multiprocessing
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .bayes import (
    MaskDecision,
    RegState,
    evidence_update,
    loss_bayes,
    loss_sgl,
    penalty_subgradient,
    prox_sparse_group,
    update_masks,
)
from .benchmarks import Dataset
from .config import TrainConfig
from .errors import AllRunsDivergedError, ConfigError, DivergenceError, StructuralError
from .grad import backward, gauss_newton_diag
from .hybrid import HYBRID_NAMES, StencilModel
from .network import FlatModel, MathONet, count_active_connections
from .symbolic import (
    coefficients,
    default_names,
    extract_expression,
    from_prefix,
    simplify,
    term_count,
    to_prefix,
    to_string,
)

__all__ = (
    "SGL_LABEL",
    "BAYES_LABEL",
    "Optimizer",
    "Adam",
    "MomentumSGD",
    "make_optimizer",
    "build_model",
    "model_from_dict",
    "iter_batches",
    "train_epoch",
    "estimate_sigma2",
    "run_cycle",
    "run_discovery",
    "discover",
    "select_model",
    "Candidate",
    "CycleRecord",
    "RunRecord",
    "DiscoveryReport",
)

logger = logging.getLogger(__name__)

SGL_LABEL = "sparse-group-lasso"
BAYES_LABEL = "sparse-group-bayesian"


# optimizers


class Optimizer:
    """Base class of the weight optimizers.

    :meth:`step` updates the weights in place and returns the per-weight
    step sizes it used, which scale the proximal map that follows.
    """

    def __init__(self, n_weights: int, learning_rate: float):
        self.n_weights = n_weights
        self.learning_rate = learning_rate

    def step(self, weights: np.ndarray, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError("Derived classes need to implement this.")

    def reset(self, frozen: np.ndarray) -> None:
        """Forgets the state of the ``frozen`` weights."""
        raise NotImplementedError("Derived classes need to implement this.")


class Adam(Optimizer):
    def __init__(
        self,
        n_weights: int,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        super().__init__(n_weights, learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_weights)
        self.v = np.zeros(n_weights)

    def step(self, weights, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        scale = self.learning_rate / (np.sqrt(v_hat) + self.eps)
        weights -= scale * m_hat
        return scale

    def reset(self, frozen):
        self.m[frozen] = 0.0
        self.v[frozen] = 0.0


class MomentumSGD(Optimizer):
    def __init__(self, n_weights: int, learning_rate: float = 1e-3, momentum: float = 0.9):
        super().__init__(n_weights, learning_rate)
        self.momentum = momentum
        self.velocity = np.zeros(n_weights)

    def step(self, weights, grad):
        self.velocity = self.momentum * self.velocity + grad
        weights -= self.learning_rate * self.velocity
        return np.full(self.n_weights, self.learning_rate)

    def reset(self, frozen):
        self.velocity[frozen] = 0.0


def make_optimizer(config: TrainConfig, n_weights: int) -> Optimizer:
    if config.optimizer == "sgd":
        return MomentumSGD(n_weights, config.learning_rate, config.momentum)
    return Adam(n_weights, config.learning_rate)


# models


def build_model(config: TrainConfig, data: Dataset, rng: np.random.Generator) -> FlatModel:
    """A randomly initialized model shaped for ``data``."""
    if config.model == "stencil":
        dx = data.meta.get("dx")
        if dx is None:
            raise ConfigError("The stencil model needs a dataset with grid spacing dx.", "model")
        if data.n_inputs != 3:
            raise StructuralError(
                f"The stencil model needs 3-point windows, the dataset has {data.n_inputs} inputs."
            )
        return StencilModel.random(
            float(dx), config.hidden, config.unary_set, rng=rng, scale=config.init_scale
        )
    return MathONet.random(
        data.n_inputs, config.hidden, config.unary_set, rng=rng, scale=config.init_scale
    )


def model_from_dict(data: Dict[str, Any]) -> FlatModel:
    if data.get("model") == "stencil":
        return StencilModel.from_dict(data)
    return MathONet.from_dict(data)


def variable_names(model: FlatModel) -> List[str]:
    if isinstance(model, StencilModel):
        return list(HYBRID_NAMES)
    return default_names(model.n_inputs)


# training


def iter_batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Shuffled index batches covering ``range(n)`` once."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_epoch(
    model: FlatModel,
    reg: RegState,
    batches: Iterable[Tuple[np.ndarray, np.ndarray]],
    optimizer: Optimizer,
    *,
    sgl: bool = False,
    prox: bool = True,
    epoch: int = 0,
) -> FlatModel:
    """One pass over ``batches`` of ``(X, Y)`` pairs.

    Minimizes the mean-squared energy plus the reweighted penalty (the plain
    sparse group Lasso when ``sgl``). With ``prox`` the penalty is applied
    by its proximal map after each optimizer step, otherwise by its
    subgradient. Masked weights stay at 0.

    Raises
    -------
    DivergenceError
        The loss or the gradient stopped being finite.
    """
    live = model.effective_mask()
    if not np.any(live):
        return model
    groups = model.groups
    prunable = model.prunable.astype(float)
    if sgl:
        beta, beta_g = np.ones(model.n_weights), np.ones(model.n_groups)
    else:
        beta, beta_g = reg.beta, reg.beta_g
    lam, lam_g = reg.lam, reg.lam_g

    for Xb, Yb in batches:
        try:
            output, trace = model.evaluate(Xb)
        except StructuralError as exc:
            raise DivergenceError(epoch) from exc
        residual = output - np.asarray(Yb, dtype=float).reshape(-1)
        energy = 0.5 * float(np.mean(residual * residual))
        grad = backward(model, trace, residual, float(residual.shape[0]))
        if sgl:
            loss = loss_sgl(energy, model.weights, groups, lam, lam_g, prunable)
        else:
            loss = loss_bayes(
                energy, model.weights, model.mask, beta, groups,
                model.group_mask, beta_g, lam, lam_g, prunable,
            )
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergenceError(epoch)

        if not prox:
            grad = grad + penalty_subgradient(
                model.weights, beta, groups, beta_g, lam, lam_g, prunable
            )
        step = optimizer.step(model.weights, grad * live)
        if prox and (lam > 0 or lam_g > 0):
            model.weights[:] = prox_sparse_group(
                model.weights, step, beta, groups, beta_g, lam, lam_g, prunable
            )
        model.apply_masks()
        if not np.all(np.isfinite(model.weights)):
            raise DivergenceError(epoch)
    return model


def estimate_sigma2(
    model: FlatModel,
    data: Dataset,
    mode: str = "residual",
    sigma2: float = 1.0,
    floor: float = 1e-8,
) -> float:
    """Noise variance: the residual MSE floored at ``floor``, or the fixed ``sigma2``."""
    if mode == "fixed":
        return float(sigma2)
    if len(data) == 0:
        raise ValueError("estimate_sigma2 needs at least one sample")
    residual = model.predict(data.X) - data.Y[:, 0]
    return max(float(np.mean(residual * residual)), floor)


def _mse(model: FlatModel, data: Dataset) -> float:
    if len(data) == 0:
        return float("nan")
    residual = model.predict(data.X) - data.Y[:, 0]
    return float(np.mean(residual * residual))


@dataclass
class CycleRecord:
    """Snapshot of a run at the end of one cycle's training (before its pruning)."""

    cycle: int
    train_mse: float
    val_mse: float
    active_connections: int
    term_count: int
    nested_term_count: int
    nonzero_weights: int
    expression: str
    elapsed: float
    sigma2: float = float("nan")
    mask: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cycle": self.cycle,
            "train_mse": self.train_mse,
            "val_mse": self.val_mse,
            "active_connections": self.active_connections,
            "term_count": self.term_count,
            "nested_term_count": self.nested_term_count,
            "nonzero_weights": self.nonzero_weights,
            "expression": self.expression,
            "elapsed": self.elapsed,
            "sigma2": self.sigma2,
            "mask": self.mask,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> CycleRecord:
        return cls(**data)


def _snapshot(
    model: FlatModel,
    train: Dataset,
    val: Dataset,
    cycle: int,
    coeff_floor: float,
    elapsed: float,
):
    expr = simplify(extract_expression(model), coeff_floor)
    live = model.effective_mask()
    record = CycleRecord(
        cycle=cycle,
        train_mse=_mse(model, train),
        val_mse=_mse(model, val) if len(val) else _mse(model, train),
        active_connections=count_active_connections(model),
        term_count=term_count(expr),
        nested_term_count=term_count(expr, nested=True),
        nonzero_weights=int(np.count_nonzero(model.active_weights())),
        expression=to_string(expr, names=variable_names(model)),
        elapsed=elapsed,
        mask="".join("1" if bit > 0 else "0" for bit in live),
    )
    return record, expr


def run_cycle(
    model: FlatModel,
    reg: RegState,
    train: Dataset,
    val: Dataset,
    config: TrainConfig,
    *,
    cycle: int,
    optimizer: Optimizer,
    rng: np.random.Generator,
    final: bool = False,
) -> Tuple[FlatModel, RegState, CycleRecord]:
    """Trains one cycle, records it, then runs the Bayesian update and prunes.

    Cycle 1 trains the plain sparse group Lasso. The penalty decays by
    ``decay_factor`` every ``decay_every`` epochs counted over the whole run.
    The ``final`` cycle still updates ``reg`` (its ``zeta`` feeds the
    uncertainty bands) but does not prune.
    """
    if cycle < 1:
        raise ValueError("cycles are numbered from 1")
    start = time.perf_counter()
    first_epoch = (cycle - 1) * config.n_epoch
    for offset in range(config.n_epoch):
        epoch = first_epoch + offset
        decay = config.decay_factor ** (epoch // config.decay_every)
        reg.lam = config.lam * decay
        reg.lam_g = config.lam_g * decay
        batches = (
            (train.X[index], train.Y[index, 0])
            for index in iter_batches(len(train), config.batch_size, rng)
        )
        train_epoch(model, reg, batches, optimizer, sgl=cycle == 1, prox=config.prox, epoch=epoch)

    last_epoch = first_epoch + config.n_epoch - 1
    try:
        record, _ = _snapshot(model, train, val, cycle, config.coeff_floor, 0.0)
        sigma2 = estimate_sigma2(
            model, train, config.sigma2_mode, config.sigma2, config.sigma2_floor
        )
        H = gauss_newton_diag(model, train, sigma2)
    except StructuralError as exc:
        raise DivergenceError(last_epoch) from exc
    if not np.all(np.isfinite(H)):
        raise DivergenceError(last_epoch)

    reg = evidence_update(reg, model.weights, H, model.groups, config.beta_clip)
    if not final:
        decision = update_masks(
            reg.alpha,
            reg.alpha_g,
            reg.kappa_alpha,
            reg.kappa_alpha_g,
            MaskDecision(model.mask.copy(), model.group_mask.copy()),
            model.groups,
            model.prunable,
        )
        model.set_masks(decision.mask, decision.group_mask)
        optimizer.reset(model.effective_mask() == 0)

    record.sigma2 = sigma2
    record.elapsed = time.perf_counter() - start
    return model, reg, record


@dataclass
class RunRecord:
    """One run of the sweep: its penalty, restart seed, history and outcome."""

    lam: float
    seed: int
    status: str
    cycles: List[CycleRecord] = field(default_factory=list)
    error: Optional[str] = None
    model: Optional[Dict[str, Any]] = None
    reg: Optional[Dict[str, Any]] = None
    expression: Optional[List[Any]] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def final(self) -> Optional[CycleRecord]:
        return self.cycles[-1] if self.cycles else None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "lambda": self.lam,
            "seed": self.seed,
            "status": self.status,
            "cycles": [c.to_dict() for c in self.cycles],
        }
        if self.error is not None:
            data["error"] = self.error
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> RunRecord:
        return cls(
            lam=float(data["lambda"]),
            seed=int(data["seed"]),
            status=data["status"],
            cycles=[CycleRecord.from_dict(c) for c in data.get("cycles", [])],
            error=data.get("error"),
        )


def run_discovery(
    train: Dataset,
    val: Dataset,
    config: TrainConfig,
    *,
    lam_index: int = 0,
    restart: int = 0,
) -> RunRecord:
    """A single run at ``config.lam``; divergence is reported, not raised."""
    rng = np.random.default_rng([config.seed, lam_index, restart])
    model = build_model(config, train, rng)
    reg = RegState.initial(
        model.n_weights,
        model.n_groups,
        lam=config.lam,
        lam_g=config.lam_g,
        kappa_alpha=config.kappa_alpha,
        kappa_alpha_g=config.kappa_alpha_g,
    )
    optimizer = make_optimizer(config, model.n_weights)
    run = RunRecord(config.lam, restart, "ok")
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for cycle in range(1, config.n_cycle + 1):
                model, reg, record = run_cycle(
                    model, reg, train, val, config,
                    cycle=cycle, optimizer=optimizer, rng=rng,
                    final=cycle == config.n_cycle,
                )
                run.cycles.append(record)
                logger.info(
                    "lambda=%g seed=%d cycle=%d terms=%d connections=%d val_mse=%.6g",
                    config.lam,
                    restart,
                    cycle,
                    record.term_count,
                    record.active_connections,
                    record.val_mse,
                )
    except DivergenceError as exc:
        logger.warning("Run lambda=%g seed=%d diverged: %s", config.lam, restart, exc)
        run.status = "diverged"
        run.error = str(exc)
        return run

    run.model = model.to_dict()
    run.reg = reg.to_dict()
    run.expression = to_prefix(simplify(extract_expression(model), config.coeff_floor))
    return run


def _run_job(job: Tuple[Dataset, Dataset, TrainConfig, int, float, int]) -> RunRecord:
    train, val, config, lam_index, lam, restart = job
    return run_discovery(
        train, val, config.replace(lam=lam), lam_index=lam_index, restart=restart
    )


class Candidate(NamedTuple):
    term_count: int
    val_mse: float
    model: Any = None
    seed: int = 0
    lam: float = 0.0


def select_model(
    candidates: Sequence[Sequence[Any]],
    tolerance: float = 1.1,
    mode: str = "occam",
) -> Candidate:
    """Picks the winner of a sweep.

    ``occam``: among the candidates whose validation MSE is within
    ``tolerance`` times the best one, the fewest terms win; ties go to the
    lower validation MSE, then the lower seed. ``accuracy``: the lowest
    validation MSE wins.

    Raises
    -------
    ValueError
        No candidate has a finite validation MSE.
    """
    pool = [Candidate(*c) for c in candidates]
    pool = [c for c in pool if np.isfinite(c.val_mse)]
    if not pool:
        raise ValueError("select_model needs at least one finite candidate")
    if mode == "accuracy":
        return min(pool, key=lambda c: (c.val_mse, c.term_count, c.seed, c.lam))
    best = min(c.val_mse for c in pool)
    near = [c for c in pool if c.val_mse <= tolerance * best]
    return min(near, key=lambda c: (c.term_count, c.val_mse, c.seed, c.lam))


@dataclass
class DiscoveryReport:
    """The outcome of a sweep for one target column.

    ``winner_model`` and ``winner_reg`` hold the winning run's model and
    Bayesian state; they are written to their own files.
    """

    runs: List[RunRecord]
    target: int = 0
    names: List[str] = field(default_factory=list)
    label: str = BAYES_LABEL
    winner: Optional[Dict[str, Any]] = None
    winner_model: Optional[Dict[str, Any]] = None
    winner_reg: Optional[Dict[str, Any]] = None
    config: Optional[Dict[str, Any]] = None

    @property
    def winner_run(self) -> Optional[RunRecord]:
        if self.winner is None:
            return None
        for run in self.runs:
            if run.lam == self.winner["lambda"] and run.seed == self.winner["seed"]:
                return run
        return None

    @property
    def history(self) -> List[CycleRecord]:
        run = self.winner_run
        return run.cycles if run is not None else []

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "target": self.target,
            "names": list(self.names),
            "winner": self.winner,
            "runs": [run.to_dict() for run in self.runs],
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> DiscoveryReport:
        return cls(
            runs=[RunRecord.from_dict(r) for r in data["runs"]],
            target=int(data.get("target", 0)),
            names=list(data.get("names", [])),
            label=data.get("label", BAYES_LABEL),
            winner=data.get("winner"),
            config=data.get("config"),
        )


def discover(
    data: Dataset, config: TrainConfig, *, target: int = 0, jobs: int = 1
) -> DiscoveryReport:
    """Runs the penalty grid times ``restarts`` and selects one model for column ``target``.

    Runs are independent jobs, spread over ``jobs`` worker processes and
    merged in ``(lambda, seed)`` order.

    Raises
    -------
    AllRunsDivergedError
        No run finished; the error carries the report.
    """
    column = data.target(target)
    train, val = column.split(config.train_fraction, config.seed)
    work = [
        (train, val, config, index, lam, restart)
        for index, lam in enumerate(config.lambda_grid)
        for restart in range(config.restarts)
    ]
    logger.info(
        "Discovering target %d: %d penalties x %d restarts on %d/%d rows",
        target,
        len(config.lambda_grid),
        config.restarts,
        len(train),
        len(val),
    )
    if jobs > 1 and len(work) > 1:
        with multiprocessing.Pool(min(jobs, len(work))) as pool:
            runs = pool.map(_run_job, work)
    else:
        runs = [_run_job(job) for job in work]
    runs.sort(key=lambda run: (run.lam, run.seed))

    names = list(HYBRID_NAMES) if config.model == "stencil" else default_names(data.n_inputs)
    report = DiscoveryReport(
        runs=runs,
        target=target,
        names=names,
        label=SGL_LABEL if config.n_cycle == 1 else BAYES_LABEL,
        config=config.to_dict(),
    )
    finished = [run for run in runs if run.ok]
    if not finished:
        raise AllRunsDivergedError(report)

    chosen = select_model(
        [
            Candidate(run.final.term_count, run.final.val_mse, run, run.seed, run.lam)
            for run in finished
        ],
        config.occam_tolerance,
        config.selection,
    )
    run = chosen.model
    expr = from_prefix(run.expression)
    report.winner = {
        "expression": to_string(expr, names=names),
        "coefficients": coefficients(expr, names=names),
        "term_count": run.final.term_count,
        "val_mse": run.final.val_mse,
        "lambda": run.lam,
        "seed": run.seed,
        "prefix": run.expression,
    }
    report.winner_model = run.model
    report.winner_reg = run.reg
    logger.info("Target %d winner (lambda=%g seed=%d): %s", target, run.lam, run.seed, report.winner["expression"])
    return report
