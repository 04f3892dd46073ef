"""
Reverse-mode derivatives of the data energy

    E(W, s2) = 1/(2 s2) * sum_k (Net(X_k, W) - Y_k)^2

through a MathONet, the diagonal Gauss-Newton curvature used by the
Bayesian updates, and a central-difference oracle.
"""

from __future__ import annotations

from typing import Any, Union

import numpy as np

from .network import FlatModel, MathONet

__all__ = (
    "output_jacobian",
    "backward",
    "gauss_newton_diag",
    "finite_diff_gradient",
    "energy",
)


def output_jacobian(model: FlatModel, trace: Any) -> np.ndarray:
    """``d yhat_k / d w_i`` for every traced sample ``k`` and weight ``i``.

    Masked positions are exactly 0. Models other than :class:`MathONet`
    provide their own ``jacobian(trace)``.
    """
    if isinstance(model, MathONet):
        return _mathonet_jacobian(model, trace)
    return model.jacobian(trace)


def _mathonet_jacobian(net: MathONet, trace) -> np.ndarray:
    Xa = trace.inputs
    n_samples = Xa.shape[0]
    a_last = trace.layers[-1].a

    d_out = Xa[:, None, :] * a_last[:, :, None]
    delta_a = trace.q

    blocks = []
    for view, lt in zip(reversed(net.layers), reversed(trace.layers)):
        oper_bits = view.oper_mask * view.oper_group[:, None]
        ow = np.where(oper_bits > 0, view.oper_w, 0.0)
        fprime = np.zeros_like(lt.z)
        for o, kind in enumerate(net.unary_set):
            live = oper_bits[:, o] > 0
            if np.any(live):
                fprime[:, live, o] = kind.derivative(lt.z[:, live, o])

        d_oper = delta_a[:, :, None] * fprime * lt.h[:, :, None]
        delta_h = delta_a * np.sum(fprime * ow[None, :, :], axis=2)
        d_bias = delta_h
        d_poly = (
            delta_h[:, :, None, None]
            * lt.inputs[:, None, :, None]
            * Xa[:, None, None, :]
        )
        blocks.append(
            [
                d_poly.reshape(n_samples, -1),
                d_bias.reshape(n_samples, -1),
                d_oper.reshape(n_samples, -1),
            ]
        )
        delta_a = np.einsum("bk,bki->bi", delta_h, lt.polys)

    flat = [part for layer in reversed(blocks) for part in layer]
    flat.append(d_out.reshape(n_samples, -1))
    jac = np.concatenate(flat, axis=1)
    return jac * net.effective_mask()[None, :]


def backward(
    model: FlatModel, trace: Any, residual: Union[float, np.ndarray], sigma2: float
) -> np.ndarray:
    """Gradient of the energy for the traced samples.

    Parameters
    -----------
    model: :class:`~mathoNet.network.FlatModel`
        The model the trace was produced by.
    trace:
        The trace returned by ``model.evaluate``.
    residual: Union[:class:`float`, :class:`numpy.ndarray`]
        ``yhat - Y`` per traced sample.
    sigma2: :class:`float`
        The noise variance, ``> 0``.

    Returns
    --------
    :class:`numpy.ndarray`
        One real per weight; masked positions are 0.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    jac = output_jacobian(model, trace)
    residual = np.broadcast_to(np.asarray(residual, dtype=float), (jac.shape[0],))
    return (residual / sigma2) @ jac


def gauss_newton_diag(model: FlatModel, X, sigma2: float) -> np.ndarray:
    """Diagonal Gauss-Newton curvature ``H_ii = 1/s2 * sum_k (d yhat_k / d w_i)^2``.

    ``X`` may be a :class:`~mathoNet.benchmarks.Dataset` or a feature matrix.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    X = getattr(X, "X", X)
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros(model.n_weights)
    _, trace = model.evaluate(X)
    jac = output_jacobian(model, trace)
    return np.sum(jac * jac, axis=0) / sigma2


def energy(model: FlatModel, X, Y, sigma2: float) -> float:
    residual = model.predict(X) - np.asarray(Y, dtype=float).reshape(-1)
    return float(0.5 * np.dot(residual, residual) / sigma2)


def finite_diff_gradient(
    model: FlatModel, x, Y, sigma2: float, step: float = 1e-5
) -> np.ndarray:
    """Central-difference estimate of :func:`backward` for the same samples."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    live = model.effective_mask() > 0
    grad = np.zeros(model.n_weights)
    for i in np.flatnonzero(live):
        saved = model.weights[i]
        model.weights[i] = saved + step
        upper = energy(model, x, Y, sigma2)
        model.weights[i] = saved - step
        lower = energy(model, x, Y, sigma2)
        model.weights[i] = saved
        grad[i] = (upper - lower) / (2.0 * step)
    return grad
