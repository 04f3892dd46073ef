"""
Sparse group Bayesian learning: prior variances ``nu``, the Laplace
posterior variances ``zeta``, the reweighting factors ``alpha``/``beta``,
mask thresholding, and the two training objectives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = (
    "BETA_CLIP",
    "RegState",
    "MaskDecision",
    "update_zeta",
    "update_alpha_beta",
    "update_group_alpha",
    "update_nu",
    "update_masks",
    "evidence_update",
    "loss_sgl",
    "loss_bayes",
    "penalty_subgradient",
    "prox_sparse_group",
)

logger = logging.getLogger(__name__)

BETA_CLIP: Tuple[float, float] = (1e-6, 1e6)

Real = Union[float, np.ndarray]


def _unwrap(value: np.ndarray) -> Real:
    return float(value) if np.ndim(value) == 0 else value


def _floats(values: np.ndarray) -> List[Optional[float]]:
    return [float(v) if np.isfinite(v) else None for v in values]


def _array(values: Sequence[Optional[float]]) -> np.ndarray:
    return np.array([np.inf if v is None else float(v) for v in values], dtype=float)


@dataclass
class MaskDecision:
    """Per-weight bits ``C`` and per-group bits ``C_g``."""

    mask: np.ndarray
    group_mask: np.ndarray

    @classmethod
    def all_on(cls, n_weights: int, n_groups: int) -> MaskDecision:
        return cls(np.ones(n_weights), np.ones(n_groups))


@dataclass
class RegState:
    """Bayesian bookkeeping of one training run.

    Per weight: ``nu`` (prior variance), ``alpha``, ``beta`` (reweighting
    factor of the l1 term) and ``zeta`` (diagonal posterior variance). Per
    group: ``nu_g``, ``alpha_g`` and ``beta_g``. Thresholds and the
    current penalty strengths ride along so the state fully describes the
    objective of the next cycle.
    """

    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray
    nu_g: np.ndarray
    alpha_g: np.ndarray
    beta_g: np.ndarray
    kappa_alpha: float = 1e3
    kappa_alpha_g: float = 1e3
    lam: float = 0.0
    lam_g: float = 0.0

    @classmethod
    def initial(
        cls,
        n_weights: int,
        n_groups: int,
        *,
        lam: float = 0.0,
        lam_g: float = 0.0,
        kappa_alpha: float = 1e3,
        kappa_alpha_g: float = 1e3,
    ) -> RegState:
        """``beta = nu = 1`` everywhere, as the discovery loop starts."""
        return cls(
            nu=np.ones(n_weights),
            alpha=np.zeros(n_weights),
            beta=np.ones(n_weights),
            zeta=np.ones(n_weights),
            nu_g=np.ones(n_groups),
            alpha_g=np.zeros(n_groups),
            beta_g=np.ones(n_groups),
            kappa_alpha=kappa_alpha,
            kappa_alpha_g=kappa_alpha_g,
            lam=lam,
            lam_g=lam_g,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu": _floats(self.nu),
            "alpha": _floats(self.alpha),
            "beta": _floats(self.beta),
            "zeta": _floats(self.zeta),
            "nu_g": _floats(self.nu_g),
            "alpha_g": _floats(self.alpha_g),
            "beta_g": _floats(self.beta_g),
            "kappa_alpha": self.kappa_alpha,
            "kappa_alpha_g": self.kappa_alpha_g,
            "lambda": self.lam,
            "lambda_g": self.lam_g,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> RegState:
        return cls(
            nu=_array(data["nu"]),
            alpha=_array(data["alpha"]),
            beta=_array(data["beta"]),
            zeta=_array(data["zeta"]),
            nu_g=_array(data["nu_g"]),
            alpha_g=_array(data["alpha_g"]),
            beta_g=_array(data["beta_g"]),
            kappa_alpha=float(data.get("kappa_alpha", 1e3)),
            kappa_alpha_g=float(data.get("kappa_alpha_g", 1e3)),
            lam=float(data.get("lambda", 0.0)),
            lam_g=float(data.get("lambda_g", 0.0)),
        )


def update_zeta(nu: Real, H: Real) -> Real:
    """Diagonal posterior variance ``zeta = (1/nu + H)^-1``.

    Evaluated as ``nu / (1 + nu*H)`` so that ``0 < zeta <= nu`` holds
    exactly in floating point. A dead weight (``nu == 0``) gets 0.
    """
    nu = np.asarray(nu, dtype=float)
    H = np.asarray(H, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.where(nu > 0, nu / (1.0 + nu * H), 0.0)
    return _unwrap(zeta)


def update_alpha_beta(
    nu: Real, zeta: Real, clip: Tuple[float, float] = BETA_CLIP
) -> Tuple[Real, Real]:
    """``alpha = -zeta/nu^2 + 1/nu`` and ``beta = sqrt(|alpha|)`` clipped.

    A dead weight (``nu == 0``) gets ``alpha = inf`` so the next mask
    update prunes it.
    """
    nu = np.asarray(nu, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(nu > 0, (nu - zeta) / (nu * nu), np.inf)
    beta = np.clip(np.sqrt(np.abs(alpha)), *clip)
    return _unwrap(alpha), _unwrap(beta)


def update_group_alpha(
    nu_g: float, zeta_g: Sequence[float], clip: Tuple[float, float] = BETA_CLIP
) -> Tuple[float, float]:
    """``alpha_g = sum_i (-zeta_gi/nu_g^2 + 1/nu_g)``; ``beta_g`` is shared by the group."""
    zeta_g = np.asarray(zeta_g, dtype=float)
    if nu_g <= 0:
        return np.inf, clip[1]
    alpha_g = float(np.sum((nu_g - zeta_g) / (nu_g * nu_g)))
    beta_g = float(np.clip(np.sqrt(abs(alpha_g)), *clip))
    return alpha_g, beta_g


def update_nu(
    W: np.ndarray,
    beta: np.ndarray,
    groups: Sequence[np.ndarray],
    beta_g: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """``nu = |W|/beta`` and ``nu_g = ||W_g||_2 / beta_g``."""
    W = np.asarray(W, dtype=float)
    nu = np.abs(W) / np.asarray(beta, dtype=float)
    nu_g = np.array(
        [np.linalg.norm(W[members]) / beta_g[g] for g, members in enumerate(groups)],
        dtype=float,
    )
    return nu, nu_g


def update_masks(
    alpha: np.ndarray,
    alpha_g: np.ndarray,
    kappa_alpha: float,
    kappa_alpha_g: float,
    prev: MaskDecision,
    groups: Sequence[np.ndarray],
    prunable: Optional[np.ndarray] = None,
) -> MaskDecision:
    """Thresholds ``alpha > kappa`` into pruning decisions.

    Pruning is monotone: the result is intersected with ``prev``. A pruned
    group clears every member bit. Weights that are not ``prunable`` keep
    their previous bit and only go with their group.
    """
    if kappa_alpha <= 0 or kappa_alpha_g <= 0:
        raise ValueError("pruning thresholds must be positive")
    alpha = np.asarray(alpha, dtype=float)
    keep = ~(alpha > kappa_alpha) & ~np.isnan(alpha)
    if prunable is not None:
        keep = keep | ~np.asarray(prunable, dtype=bool)
    mask = prev.mask * keep

    alpha_g = np.asarray(alpha_g, dtype=float)
    keep_g = ~(alpha_g > kappa_alpha_g) & ~np.isnan(alpha_g)
    group_mask = prev.group_mask * keep_g
    for g, members in enumerate(groups):
        if group_mask[g] == 0:
            mask[members] = 0.0
    return MaskDecision(mask.astype(float), group_mask.astype(float))


def evidence_update(
    reg: RegState,
    W: np.ndarray,
    H: np.ndarray,
    groups: Sequence[np.ndarray],
    clip: Tuple[float, float] = BETA_CLIP,
) -> RegState:
    """One pass of the hyper-parameter iteration.

    ``zeta`` from the current ``nu`` and curvature ``H``, then ``alpha``
    and ``beta``, then fresh ``nu`` from the weights. Weights (groups)
    whose new ``nu`` is 0 get ``alpha = inf``.
    """
    zeta = np.asarray(update_zeta(reg.nu, H))
    alpha, beta = update_alpha_beta(reg.nu, zeta, clip)
    alpha = np.array(alpha, dtype=float, ndmin=1)
    beta = np.array(beta, dtype=float, ndmin=1)

    alpha_g = np.zeros(len(groups))
    beta_g = np.ones(len(groups))
    for g, members in enumerate(groups):
        zeta_g = np.asarray(update_zeta(reg.nu_g[g], H[members]))
        alpha_g[g], beta_g[g] = update_group_alpha(reg.nu_g[g], zeta_g, clip)

    nu, nu_g = update_nu(W, beta, groups, beta_g)
    alpha[nu == 0] = np.inf
    alpha_g[nu_g == 0] = np.inf
    logger.debug(
        "evidence update: %d weights and %d groups with nu = 0",
        int(np.sum(nu == 0)),
        int(np.sum(nu_g == 0)),
    )
    return RegState(
        nu=nu,
        alpha=alpha,
        beta=beta,
        zeta=zeta,
        nu_g=nu_g,
        alpha_g=alpha_g,
        beta_g=beta_g,
        kappa_alpha=reg.kappa_alpha,
        kappa_alpha_g=reg.kappa_alpha_g,
        lam=reg.lam,
        lam_g=reg.lam_g,
    )


def _weighting(values, n: int) -> np.ndarray:
    return np.ones(n) if values is None else np.asarray(values, dtype=float)


def loss_sgl(
    E: float,
    W: np.ndarray,
    groups: Sequence[np.ndarray],
    lam: float,
    lam_g: float,
    prunable: Optional[np.ndarray] = None,
) -> float:
    """Sparse group Lasso: ``E + lam*||W||_1 + lam_g * sum_g ||W_g||_2``."""
    if lam < 0 or lam_g < 0:
        raise ValueError("penalty strengths must be non-negative")
    W = np.asarray(W, dtype=float)
    l1 = np.abs(W) * _weighting(prunable, W.shape[0])
    l2 = [np.linalg.norm(W[members]) for members in groups]
    return float(E + lam * np.sum(l1) + lam_g * np.sum(l2))


def loss_bayes(
    E: float,
    W: np.ndarray,
    C: np.ndarray,
    beta: np.ndarray,
    groups: Sequence[np.ndarray],
    C_g: np.ndarray,
    beta_g: np.ndarray,
    lam: float,
    lam_g: float,
    prunable: Optional[np.ndarray] = None,
) -> float:
    """Reweighted objective ``E + lam*||beta.C.W||_1 + lam_g * sum_g ||beta_g C_g W_g||_2``.

    With unit ``beta``/``beta_g`` and all masks on it equals :func:`loss_sgl`.
    """
    W = np.asarray(W, dtype=float)
    if not (W.shape == np.shape(C) == np.shape(beta)):
        raise ValueError("W, C and beta must have the same shape")
    l1 = np.abs(np.asarray(beta) * np.asarray(C) * W) * _weighting(prunable, W.shape[0])
    l2 = [
        np.linalg.norm(beta_g[g] * C_g[g] * W[members]) for g, members in enumerate(groups)
    ]
    return float(E + lam * np.sum(l1) + lam_g * np.sum(l2))


def penalty_subgradient(
    W: np.ndarray,
    beta: np.ndarray,
    groups: Sequence[np.ndarray],
    beta_g: np.ndarray,
    lam: float,
    lam_g: float,
    prunable: np.ndarray,
) -> np.ndarray:
    """Subgradient of the penalty part of :func:`loss_bayes` (0 at the kinks)."""
    grad = lam * beta * np.sign(W) * prunable
    for g, members in enumerate(groups):
        norm = np.linalg.norm(W[members])
        if norm > 0:
            grad[members] += lam_g * beta_g[g] * W[members] / norm
    return grad


def prox_sparse_group(
    W: np.ndarray,
    step: np.ndarray,
    beta: np.ndarray,
    groups: Sequence[np.ndarray],
    beta_g: np.ndarray,
    lam: float,
    lam_g: float,
    prunable: np.ndarray,
) -> np.ndarray:
    """Proximal map of the sparse group penalty with per-weight step sizes.

    Soft-thresholding of every prunable weight by ``step*lam*beta``, then
    block shrinkage of every group by its mean step. Weights that reach 0
    here stay at the dead-weight fixpoint ``nu = 0``.
    """
    W = np.asarray(W, dtype=float)
    threshold = step * lam * beta * prunable
    out = np.sign(W) * np.maximum(np.abs(W) - threshold, 0.0)
    if lam_g > 0:
        for g, members in enumerate(groups):
            if members.size == 0:
                continue
            norm = np.linalg.norm(out[members])
            if norm == 0:
                continue
            shrink = float(np.mean(step[members])) * lam_g * beta_g[g]
            out[members] *= max(0.0, 1.0 - shrink / norm)
    return out
