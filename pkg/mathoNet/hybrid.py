"""
The reaction-diffusion hybrid: a trainable 3-point stencil scaled by an
outer coefficient, plus a MathONet reaction term over the local value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateStencilError, StructuralError
from .network import ALL_UNARY, FlatModel, MathONet, UnaryKind
from .symbolic import (
    Const,
    Expression,
    Var,
    coefficients,
    extract_net,
    make_add,
    make_mul,
    simplify,
    to_string,
)

__all__ = (
    "LAPLACE_KERNEL",
    "HYBRID_NAMES",
    "StencilModel",
    "StencilRescale",
    "stencil_apply",
    "stencil_windows",
    "hybrid_forward",
    "rescale_stencil",
)

logger = logging.getLogger(__name__)

LAPLACE_KERNEL = np.array([1.0, -2.0, 1.0])
HYBRID_NAMES = ["CNN(p)", "p"]

_KERNEL = slice(0, 3)
_OUTER = 3
_HEAD = 4


def stencil_windows(p) -> np.ndarray:
    """The ``(p[i-1], p[i], p[i+1])`` window of every interior point."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] < 3:
        raise StructuralError(f"A 3-point stencil needs at least 3 grid points, got {p.shape[0]}.")
    return np.stack([p[:-2], p[1:-1], p[2:]], axis=1)


def stencil_apply(kernel, p, dx: float) -> np.ndarray:
    """``(s1 p[i-1] + s2 p[i] + s3 p[i+1]) / dx^2`` at every interior point."""
    kernel = np.asarray(kernel, dtype=float).reshape(-1)
    if kernel.shape[0] != 3:
        raise StructuralError(f"Stencil kernels have 3 taps, got {kernel.shape[0]}.")
    return stencil_windows(p) @ kernel / dx**2


@dataclass
class HybridTrace:
    windows: np.ndarray
    stencil: np.ndarray
    reaction: Any
    output: np.ndarray


class StencilModel(FlatModel):
    """``p_t = w_c * CNN(p) + R(p)`` evaluated on 3-point windows.

    The flat layout is ``[s1, s2, s3, w_c, reaction weights...]``. The
    kernel forms one group whose taps are never pruned on their own;
    ``w_c`` sits in a group of its own; the reaction net keeps its groups.

    Parameters
    -----------
    dx: :class:`float`
        Grid spacing; the stencil divides by ``dx**2``.
    hidden: Sequence[:class:`int`]
        Hidden layer sizes of the reaction net.
    unary_set: Sequence[Union[:class:`str`, :class:`UnaryKind`]]
        Unary kinds of the reaction net.
    """

    def __init__(
        self,
        dx: float,
        hidden: Sequence[int] = (3,),
        unary_set: Sequence[Union[str, UnaryKind]] = ALL_UNARY,
    ):
        if dx <= 0:
            raise StructuralError("dx must be positive.")
        self.dx = float(dx)
        self.reaction = MathONet(1, hidden, unary_set)
        n_weights = _HEAD + self.reaction.n_weights
        n_groups = 2 + self.reaction.n_groups
        self._bind(np.zeros(n_weights), np.ones(n_weights), np.ones(n_groups))

    def __repr__(self) -> str:
        return f"<StencilModel dx={self.dx} reaction={self.reaction!r}>"

    def _bind(self, weights: np.ndarray, mask: np.ndarray, group_mask: np.ndarray) -> None:
        self.weights = weights
        self.mask = mask
        self.group_mask = group_mask
        self.reaction._bind(weights[_HEAD:], mask[_HEAD:], group_mask[2:])

        inner = self.reaction.group_of
        self.group_of = np.concatenate([[0, 0, 0, 1], np.where(inner >= 0, inner + 2, -1)])
        self.prunable = np.concatenate([[False, False, False, True], self.reaction.prunable])
        self.connection = np.concatenate([[True] * 4, self.reaction.connection])
        self.__dict__.pop("_groups", None)

    @classmethod
    def random(
        cls,
        dx: float,
        hidden: Sequence[int] = (3,),
        unary_set: Sequence[Union[str, UnaryKind]] = ALL_UNARY,
        *,
        rng: np.random.Generator,
        scale: float = 0.5,
    ) -> StencilModel:
        model = cls(dx, hidden, unary_set)
        model.weights[:] = rng.uniform(-scale, scale, size=model.n_weights)
        for layer in model.reaction.layers:
            layer.bias[:] = 0.0
        return model

    @property
    def kernel(self) -> np.ndarray:
        return self.weights[_KERNEL]

    @kernel.setter
    def kernel(self, value) -> None:
        value = np.asarray(value, dtype=float).reshape(-1)
        if value.shape[0] != 3:
            raise StructuralError("Stencil kernels have 3 taps.")
        self.weights[_KERNEL] = value

    @property
    def outer_coeff(self) -> float:
        return float(self.weights[_OUTER])

    @outer_coeff.setter
    def outer_coeff(self, value: float) -> None:
        self.weights[_OUTER] = float(value)

    def evaluate(self, X) -> Tuple[np.ndarray, HybridTrace]:
        """Evaluates the model on rows of 3-point windows."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 3:
            raise StructuralError(f"StencilModel expects 3-point windows, got shape {X.shape}.")
        live = self.effective_mask()
        kernel = np.where(live[_KERNEL] > 0, self.kernel, 0.0)
        outer = self.outer_coeff if live[_OUTER] > 0 else 0.0
        stencil = X @ kernel / self.dx**2
        reaction, reaction_trace = self.reaction.evaluate(X[:, 1:2])
        output = outer * stencil + reaction
        if not np.all(np.isfinite(output)):
            raise StructuralError("StencilModel produced a non-finite output.")
        return output, HybridTrace(X, stencil, reaction_trace, output)

    def jacobian(self, trace: HybridTrace) -> np.ndarray:
        from .grad import output_jacobian

        live = self.effective_mask()
        outer = self.outer_coeff if live[_OUTER] > 0 else 0.0
        d_kernel = outer * trace.windows / self.dx**2
        d_outer = trace.stencil[:, None]
        d_reaction = output_jacobian(self.reaction, trace.reaction)
        jac = np.concatenate([d_kernel, d_outer, d_reaction], axis=1)
        return jac * live[None, :]

    def to_expression(self) -> Expression:
        """``w_c * CNN(p) + R(p)`` with ``CNN(p)`` as variable 0 and ``p`` as variable 1."""
        live = self.effective_mask()
        outer = self.outer_coeff if live[_OUTER] > 0 else 0.0
        diffusion = make_mul([Const(outer), Var(0)])
        return make_add([diffusion, extract_net(self.reaction, [Var(1)])])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": "stencil",
            "kernel": [float(v) for v in self.kernel],
            "outer_coeff": self.outer_coeff,
            "dx": self.dx,
            "kernel_group_mask": int(self.group_mask[0]),
            "outer_mask": int(self.mask[_OUTER] * self.group_mask[1]),
            "reaction": self.reaction.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> StencilModel:
        try:
            inner = MathONet.from_dict(data["reaction"])
            model = cls(float(data["dx"]), inner.hidden, inner.unary_set)
            model.weights[_HEAD:] = inner.weights
            model.mask[_HEAD:] = inner.mask
            model.group_mask[2:] = inner.group_mask
            model.kernel = data["kernel"]
            model.outer_coeff = float(data["outer_coeff"])
            model.group_mask[0] = int(data.get("kernel_group_mask", 1))
            outer_bit = int(data.get("outer_mask", 1))
            model.mask[_OUTER] = outer_bit
            model.group_mask[1] = outer_bit
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"Malformed StencilModel document: {exc!r}") from exc
        return model


def hybrid_forward(model: StencilModel, p, dx: Optional[float] = None) -> np.ndarray:
    """Predicted ``p_t`` at the interior points of the grid vector ``p``.

    ``dx`` overrides the model's grid spacing.
    """
    windows = stencil_windows(p)
    if dx is None or dx == model.dx:
        return model.predict(windows)
    scaled = model.copy()
    scaled.dx = float(dx)
    return scaled.predict(windows)


@dataclass
class StencilRescale:
    """A learned stencil expressed against ``[1, -2, 1]``.

    Attributes
    -----------
    d_equiv: :class:`float`
        Diffusion coefficient after rescaling, ``w_c * (-s2 / 2)``.
    normalized_kernel: :class:`numpy.ndarray`
        ``kernel / (-s2 / 2)``.
    deviation: :class:`float`
        Largest elementwise relative deviation of the normalized kernel from ``[1, -2, 1]``.
    kernel_sum: :class:`float`
        ``s1 + s2 + s3``; 0 for a consistent second-difference operator.
    growth_rate: :class:`float`
        Coefficient of ``p`` in the simplified reaction term.
    logistic_rate: :class:`float`
        Negated coefficient of ``p^2`` in the simplified reaction term.
    reaction: :class:`str`
        The simplified reaction term.
    """

    d_equiv: float
    normalized_kernel: np.ndarray
    deviation: float
    kernel_sum: float
    growth_rate: float
    logistic_rate: float
    reaction: str

    @property
    def equation(self) -> str:
        return f"{self.d_equiv:.3f}*CNN(p) + {self.reaction}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d_equiv": self.d_equiv,
            "normalized_kernel": [float(v) for v in self.normalized_kernel],
            "deviation": self.deviation,
            "kernel_sum": self.kernel_sum,
            "growth_rate": self.growth_rate,
            "logistic_rate": self.logistic_rate,
            "reaction": self.reaction,
        }


def rescale_stencil(model: StencilModel, coeff_floor: float = 1e-4) -> StencilRescale:
    """Rescales the kernel to the ``[1, -2, 1]`` convention.

    Raises
    -------
    DegenerateStencilError
        The centre tap is 0.
    """
    kernel = np.array(model.kernel, dtype=float)
    if kernel[1] == 0.0:
        raise DegenerateStencilError(tuple(kernel))
    factor = -kernel[1] / 2.0
    normalized = kernel / factor
    deviation = float(np.max(np.abs(normalized - LAPLACE_KERNEL) / np.abs(LAPLACE_KERNEL)))

    reaction = simplify(extract_net(model.reaction), coeff_floor)
    coeffs = coefficients(reaction, names=["p"])
    result = StencilRescale(
        d_equiv=float(model.outer_coeff * factor),
        normalized_kernel=normalized,
        deviation=deviation,
        kernel_sum=float(np.sum(kernel)),
        growth_rate=float(coeffs.get("p", 0.0)),
        logistic_rate=float(-coeffs.get("p^2", 0.0)),
        reaction=to_string(reaction, names=["p"]),
    )
    logger.debug("Rescaled stencil %s -> %s", list(kernel), list(normalized))
    return result
