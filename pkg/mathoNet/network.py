"""
The MathONet super-graph: PolyNets, OperNets, biases and output
PolyNets laid out over one flat weight vector, with per-weight and
per-group masks.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import StructuralError

__all__ = (
    "LOG_EPSILON",
    "EXP_CLAMP",
    "UnaryKind",
    "PolyNet",
    "OperNet",
    "LayerTrace",
    "EvalTrace",
    "FlatModel",
    "MathONet",
    "poly_eval",
    "oper_eval",
    "forward",
    "count_active_connections",
    "expression_space_size",
    "parse_unary_set",
)

logger = logging.getLogger(__name__)

LOG_EPSILON = 1e-8
EXP_CLAMP = 30.0


class UnaryKind(enum.Enum):
    """The unary operations an OperNet may hold.

    ``LOG`` evaluates ``ln(|z| + 1e-8)`` and ``EXP`` clamps its argument to
    ``[-30, 30]`` so both stay finite on arbitrary data.
    """

    IDENTITY = "identity"
    SIN = "sin"
    COS = "cos"
    LOG = "log"
    EXP = "exp"

    def __call__(self, z):
        if self is UnaryKind.IDENTITY:
            return z
        if self is UnaryKind.SIN:
            return np.sin(z)
        if self is UnaryKind.COS:
            return np.cos(z)
        if self is UnaryKind.LOG:
            return np.log(np.abs(z) + LOG_EPSILON)
        return np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP))

    def derivative(self, z):
        if self is UnaryKind.IDENTITY:
            return np.ones_like(z)
        if self is UnaryKind.SIN:
            return np.cos(z)
        if self is UnaryKind.COS:
            return -np.sin(z)
        if self is UnaryKind.LOG:
            # sign(0) = 0 keeps the kink bounded
            return np.sign(z) / (np.abs(z) + LOG_EPSILON)
        inside = np.abs(z) <= EXP_CLAMP
        return np.where(inside, np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP)), 0.0)


ALL_UNARY: Tuple[UnaryKind, ...] = tuple(UnaryKind)


def parse_unary_set(names: Sequence[Union[str, UnaryKind]]) -> Tuple[UnaryKind, ...]:
    """Turns a list of names (``"identity"``, ``"sin"``, ...) into unary kinds."""
    result = []
    for name in names:
        if isinstance(name, UnaryKind):
            result.append(name)
            continue
        try:
            result.append(UnaryKind(str(name).lower()))
        except ValueError:
            raise StructuralError(f"Unknown unary operation {name!r}.") from None
    if not result:
        raise StructuralError("The unary set must not be empty.")
    if len(set(result)) != len(result):
        raise StructuralError("The unary set holds duplicates.")
    return tuple(result)


def _as_bits(values, length: int, what: str) -> np.ndarray:
    bits = np.asarray(values, dtype=float).reshape(-1)
    if bits.shape[0] != length:
        raise StructuralError(f"{what} has {bits.shape[0]} entries, expected {length}.")
    if not np.all((bits == 0.0) | (bits == 1.0)):
        raise StructuralError(f"{what} entries must be 0 or 1.")
    return bits


@dataclass
class PolyNet:
    """A linear combination of the system inputs plus a constant slot.

    ``weights[:n]`` multiply the inputs, ``weights[n]`` is the constant.
    """

    weights: np.ndarray
    mask: Optional[np.ndarray] = None
    group_mask: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.mask is None:
            self.mask = np.ones_like(self.weights)
        self.mask = _as_bits(self.mask, self.weights.shape[0], "PolyNet mask")
        if self.group_mask not in (0, 1):
            raise StructuralError("PolyNet group_mask must be 0 or 1.")
        if self.group_mask == 0:
            self.mask = np.zeros_like(self.mask)

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0] - 1


@dataclass
class OperNet:
    """A masked sum of unary functions, one weight per configured kind."""

    weights: np.ndarray
    mask: Optional[np.ndarray] = None
    group_mask: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.mask is None:
            self.mask = np.ones_like(self.weights)
        self.mask = _as_bits(self.mask, self.weights.shape[0], "OperNet mask")
        if self.group_mask not in (0, 1):
            raise StructuralError("OperNet group_mask must be 0 or 1.")
        if self.group_mask == 0:
            self.mask = np.zeros_like(self.mask)


def poly_eval(poly: PolyNet, x) -> float:
    """Evaluates a PolyNet at one input vector.

    Parameters
    -----------
    poly: :class:`PolyNet`
        The block to evaluate.
    x: array-like
        The ``n`` system inputs.

    Raises
    -------
    StructuralError
        ``x`` does not have ``n`` entries.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != poly.n_inputs:
        raise StructuralError(
            f"PolyNet expects {poly.n_inputs} inputs, got {x.shape[0]}."
        )
    active = poly.mask * poly.group_mask > 0
    w = np.where(active, poly.weights, 0.0)
    return float(np.dot(w[:-1], x) + w[-1])


def oper_eval(oper: OperNet, h: float, unary_set: Sequence[UnaryKind]) -> float:
    """Evaluates ``sum_o [mask_o] f_o(w_o * h)``; pruned kinds add exactly 0."""
    unary_set = parse_unary_set(unary_set)
    if oper.weights.shape[0] != len(unary_set):
        raise StructuralError(
            f"OperNet has {oper.weights.shape[0]} weights for {len(unary_set)} unary kinds."
        )
    total = 0.0
    for o, kind in enumerate(unary_set):
        if oper.mask[o] * oper.group_mask > 0:
            total += float(kind(oper.weights[o] * h))
    return total


@dataclass
class LayerTrace:
    inputs: np.ndarray
    polys: np.ndarray
    h: np.ndarray
    z: np.ndarray
    a: np.ndarray


@dataclass
class EvalTrace:
    """Per-sample intermediates cached by a forward pass (the backprop cache)."""

    inputs: np.ndarray
    layers: List[LayerTrace] = field(default_factory=list)
    q: Optional[np.ndarray] = None
    output: Optional[np.ndarray] = None

    def replay(self) -> np.ndarray:
        """Recomputes the output from the cached output PolyNets and last activations."""
        return np.sum(self.q * self.layers[-1].a, axis=1)


class FlatModel:
    """Bookkeeping shared by every trainable model.

    Subclasses lay their parameters out over :attr:`weights` and describe
    them with the arrays below; training, pruning and serialization only
    ever touch the flat views.

    Attributes
    -----------
    weights: :class:`numpy.ndarray`
        Every trainable real, biases included.
    mask: :class:`numpy.ndarray`
        Per-weight bits ``C``.
    group_mask: :class:`numpy.ndarray`
        Per-group bits ``C_g``.
    group_of: :class:`numpy.ndarray`
        Group index of every weight, ``-1`` for weights in no group.
    prunable: :class:`numpy.ndarray`
        Whether a weight may be pruned on its own (group pruning applies
        regardless).
    connection: :class:`numpy.ndarray`
        Whether a weight counts as a graph connection (biases do not).
    """

    weights: np.ndarray
    mask: np.ndarray
    group_mask: np.ndarray
    group_of: np.ndarray
    prunable: np.ndarray
    connection: np.ndarray

    @property
    def n_weights(self) -> int:
        return self.weights.shape[0]

    @property
    def n_groups(self) -> int:
        return self.group_mask.shape[0]

    @property
    def groups(self) -> List[np.ndarray]:
        try:
            return self._groups
        except AttributeError:
            order = np.argsort(self.group_of, kind="stable")
            members = [[] for _ in range(self.n_groups)]
            for index in order:
                g = self.group_of[index]
                if g >= 0:
                    members[g].append(index)
            self._groups = [np.asarray(m, dtype=int) for m in members]
            return self._groups

    def effective_mask(self) -> np.ndarray:
        """Per-weight bits with group removal applied on top."""
        gm = np.ones(self.n_weights)
        grouped = self.group_of >= 0
        gm[grouped] = self.group_mask[self.group_of[grouped]]
        return self.mask * gm

    def apply_masks(self) -> None:
        """Zeroes every weight whose effective bit is 0."""
        self.weights[self.effective_mask() == 0] = 0.0

    def set_masks(self, mask: np.ndarray, group_mask: np.ndarray) -> None:
        self.mask[:] = mask
        self.group_mask[:] = group_mask
        self.apply_masks()

    def active_weights(self) -> np.ndarray:
        return np.where(self.effective_mask() > 0, self.weights, 0.0)

    def predict(self, X) -> np.ndarray:
        return self.evaluate(X)[0]

    def evaluate(self, X) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError("Derived classes need to implement this.")

    def copy(self):
        return type(self).from_dict(self.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError("Derived classes need to implement this.")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]):
        raise NotImplementedError("Derived classes need to implement this.")


class _LayerView:
    """Array views of one hidden layer, all backed by the net's flat storage."""

    __slots__ = (
        "n_in",
        "n_neurons",
        "poly_w",
        "poly_mask",
        "poly_group",
        "bias",
        "bias_mask",
        "oper_w",
        "oper_mask",
        "oper_group",
    )


class MathONet(FlatModel):
    """An over-parameterized MathONet.

    Every hidden neuron ``k`` of layer ``l`` owns one PolyNet per incoming
    feature (system inputs for the first layer, previous activations
    afterwards), a bias and an OperNet::

        h = sum_i p_ik(x) * in_i + b_k
        a = sum_o f_o(w_ok * h)

    and the output is ``sum_k q_k(x) * a_k`` with one output PolyNet per
    last-layer neuron.

    Parameters
    -----------
    n_inputs: :class:`int`
        Number of system inputs ``n``.
    hidden: Sequence[:class:`int`]
        Neurons per hidden layer.
    unary_set: Sequence[Union[:class:`str`, :class:`UnaryKind`]]
        The unary kinds every OperNet holds, in order.
    """

    def __init__(
        self,
        n_inputs: int,
        hidden: Sequence[int],
        unary_set: Sequence[Union[str, UnaryKind]] = ALL_UNARY,
    ):
        if n_inputs < 1:
            raise StructuralError("A MathONet needs at least one input.")
        hidden = [int(n) for n in hidden]
        if not hidden or any(n < 1 for n in hidden):
            raise StructuralError("Every hidden layer needs at least one neuron.")

        self.n_inputs = int(n_inputs)
        self.hidden = hidden
        self.unary_set = parse_unary_set(unary_set)

        n_weights, n_groups = self._sizes()
        self._bind(np.zeros(n_weights), np.ones(n_weights), np.ones(n_groups))

    def __repr__(self) -> str:
        names = ",".join(k.value for k in self.unary_set)
        return f"<MathONet n_inputs={self.n_inputs} hidden={self.hidden} unary=[{names}]>"

    @property
    def n_features(self) -> int:
        return self.n_inputs

    def _sizes(self) -> Tuple[int, int]:
        slots = self.n_inputs + 1
        n_ops = len(self.unary_set)
        n_weights = n_groups = 0
        n_in = self.n_inputs
        for n_l in self.hidden:
            n_weights += n_l * n_in * slots + n_l + n_l * n_ops
            n_groups += n_l * n_in + n_l
            n_in = n_l
        n_weights += self.hidden[-1] * slots
        n_groups += self.hidden[-1]
        return n_weights, n_groups

    def _bind(self, weights: np.ndarray, mask: np.ndarray, group_mask: np.ndarray) -> None:
        """Points every layer view at the given flat storage.

        A model that embeds this net (the stencil hybrid) passes slices of
        its own arrays here so both see the same memory.
        """
        self.weights = weights
        self.mask = mask
        self.group_mask = group_mask

        slots = self.n_inputs + 1
        n_ops = len(self.unary_set)
        group_of = np.full(weights.shape[0], -1, dtype=int)
        connection = np.ones(weights.shape[0], dtype=bool)

        self.layers: List[_LayerView] = []
        w_at = g_at = 0
        n_in = self.n_inputs

        def take(shape, at):
            size = int(np.prod(shape))
            return slice(at, at + size), at + size

        for n_l in self.hidden:
            view = _LayerView()
            view.n_in = n_in
            view.n_neurons = n_l

            span, w_at = take((n_l, n_in, slots), w_at)
            view.poly_w = weights[span].reshape(n_l, n_in, slots)
            view.poly_mask = mask[span].reshape(n_l, n_in, slots)
            gspan, g_at = take((n_l, n_in), g_at)
            view.poly_group = group_mask[gspan].reshape(n_l, n_in)
            group_of[span] = np.repeat(np.arange(gspan.start, gspan.stop), slots)

            span, w_at = take((n_l,), w_at)
            view.bias = weights[span]
            view.bias_mask = mask[span]
            connection[span] = False

            span, w_at = take((n_l, n_ops), w_at)
            view.oper_w = weights[span].reshape(n_l, n_ops)
            view.oper_mask = mask[span].reshape(n_l, n_ops)
            gspan, g_at = take((n_l,), g_at)
            view.oper_group = group_mask[gspan]
            group_of[span] = np.repeat(np.arange(gspan.start, gspan.stop), n_ops)

            self.layers.append(view)
            n_in = n_l

        n_last = self.hidden[-1]
        span, w_at = take((n_last, slots), w_at)
        self.out_w = weights[span].reshape(n_last, slots)
        self.out_mask = mask[span].reshape(n_last, slots)
        gspan, g_at = take((n_last,), g_at)
        self.out_group = group_mask[gspan]
        group_of[span] = np.repeat(np.arange(gspan.start, gspan.stop), slots)

        if w_at != weights.shape[0] or g_at != group_mask.shape[0]:
            raise StructuralError("Flat storage does not match the layer layout.")

        self.group_of = group_of
        self.connection = connection
        self.prunable = np.ones(weights.shape[0], dtype=bool)
        self.__dict__.pop("_groups", None)

    @classmethod
    def random(
        cls,
        n_inputs: int,
        hidden: Sequence[int],
        unary_set: Sequence[Union[str, UnaryKind]] = ALL_UNARY,
        *,
        rng: np.random.Generator,
        scale: float = 0.5,
    ) -> MathONet:
        """A freshly initialized net: weights ~ U(-scale, scale), biases 0, all masks on."""
        net = cls(n_inputs, hidden, unary_set)
        net.weights[:] = rng.uniform(-scale, scale, size=net.n_weights)
        for layer in net.layers:
            layer.bias[:] = 0.0
        return net

    # block accessors

    def poly(self, layer: int, neuron: int, feature: int) -> PolyNet:
        view = self.layers[layer]
        return PolyNet(
            view.poly_w[neuron, feature].copy(),
            view.poly_mask[neuron, feature].copy(),
            int(view.poly_group[neuron, feature]),
        )

    def oper(self, layer: int, neuron: int) -> OperNet:
        view = self.layers[layer]
        return OperNet(
            view.oper_w[neuron].copy(),
            view.oper_mask[neuron].copy(),
            int(view.oper_group[neuron]),
        )

    def output_poly(self, neuron: int) -> PolyNet:
        return PolyNet(
            self.out_w[neuron].copy(),
            self.out_mask[neuron].copy(),
            int(self.out_group[neuron]),
        )

    def set_poly(self, layer: int, neuron: int, feature: int, poly: PolyNet) -> None:
        view = self.layers[layer]
        view.poly_w[neuron, feature] = poly.weights
        view.poly_mask[neuron, feature] = poly.mask
        view.poly_group[neuron, feature] = poly.group_mask

    def set_oper(self, layer: int, neuron: int, oper: OperNet) -> None:
        view = self.layers[layer]
        view.oper_w[neuron] = oper.weights
        view.oper_mask[neuron] = oper.mask
        view.oper_group[neuron] = oper.group_mask

    def set_output_poly(self, neuron: int, poly: PolyNet) -> None:
        self.out_w[neuron] = poly.weights
        self.out_mask[neuron] = poly.mask
        self.out_group[neuron] = poly.group_mask

    # evaluation

    def _active(self, w: np.ndarray, mask: np.ndarray, group: np.ndarray) -> np.ndarray:
        bits = mask * group[..., None] if group is not None else mask
        return np.where(bits > 0, w, 0.0)

    def evaluate(self, X) -> Tuple[np.ndarray, EvalTrace]:
        """Batched forward pass over the rows of ``X``.

        Returns
        --------
        Tuple[:class:`numpy.ndarray`, :class:`EvalTrace`]
            One prediction per row and the cached intermediates.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_inputs:
            raise StructuralError(
                f"MathONet expects {self.n_inputs} inputs per sample, got shape {X.shape}."
            )
        ones = np.ones((X.shape[0], 1))
        Xa = np.hstack([X, ones])
        trace = EvalTrace(inputs=Xa)

        current = X
        for view in self.layers:
            pw = self._active(view.poly_w, view.poly_mask, view.poly_group)
            polys = np.einsum("bs,kis->bki", Xa, pw)
            bias = np.where(view.bias_mask > 0, view.bias, 0.0)
            h = np.einsum("bki,bi->bk", polys, current) + bias
            oper_bits = view.oper_mask * view.oper_group[:, None]
            ow = np.where(oper_bits > 0, view.oper_w, 0.0)
            z = h[:, :, None] * ow[None, :, :]
            f = np.zeros_like(z)
            for o, kind in enumerate(self.unary_set):
                live = oper_bits[:, o] > 0
                if np.any(live):
                    f[:, live, o] = kind(z[:, live, o])
            a = np.sum(f, axis=2)
            trace.layers.append(LayerTrace(current, polys, h, z, a))
            current = a

        qw = self._active(self.out_w, self.out_mask, self.out_group)
        trace.q = Xa @ qw.T
        trace.output = np.sum(trace.q * current, axis=1)
        if not np.all(np.isfinite(trace.output)):
            logger.error("Non-finite MathONet output for finite inputs.")
            raise StructuralError("MathONet produced a non-finite output.")
        return trace.output, trace

    # serialization

    def to_dict(self) -> Dict[str, Any]:
        layers = []
        for view in self.layers:
            neurons = []
            for k in range(view.n_neurons):
                neurons.append(
                    {
                        "polys": [
                            _block_dict(
                                view.poly_w[k, i], view.poly_mask[k, i], view.poly_group[k, i]
                            )
                            for i in range(view.n_in)
                        ],
                        "bias": float(view.bias[k]),
                        "bias_mask": int(view.bias_mask[k]),
                        "oper": _block_dict(view.oper_w[k], view.oper_mask[k], view.oper_group[k]),
                    }
                )
            layers.append({"neurons": neurons})
        return {
            "n_inputs": self.n_inputs,
            "unary_set": [kind.value for kind in self.unary_set],
            "layers": layers,
            "output_polys": [
                _block_dict(self.out_w[k], self.out_mask[k], self.out_group[k])
                for k in range(self.hidden[-1])
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> MathONet:
        try:
            hidden = [len(layer["neurons"]) for layer in data["layers"]]
            net = cls(int(data["n_inputs"]), hidden, data["unary_set"])
            for view, layer in zip(net.layers, data["layers"]):
                for k, neuron in enumerate(layer["neurons"]):
                    if len(neuron["polys"]) != view.n_in:
                        raise StructuralError(
                            f"Neuron {k} has {len(neuron['polys'])} PolyNets, expected {view.n_in}."
                        )
                    for i, block in enumerate(neuron["polys"]):
                        _load_block(block, view.poly_w[k, i], view.poly_mask[k, i])
                        view.poly_group[k, i] = _group_bit(block)
                    view.bias[k] = float(neuron["bias"])
                    view.bias_mask[k] = int(neuron.get("bias_mask", 1))
                    _load_block(neuron["oper"], view.oper_w[k], view.oper_mask[k])
                    view.oper_group[k] = _group_bit(neuron["oper"])
            if len(data["output_polys"]) != hidden[-1]:
                raise StructuralError("One output PolyNet per last-layer neuron is required.")
            for k, block in enumerate(data["output_polys"]):
                _load_block(block, net.out_w[k], net.out_mask[k])
                net.out_group[k] = _group_bit(block)
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"Malformed MathONet document: {exc!r}") from exc
        return net


def _block_dict(w: np.ndarray, mask: np.ndarray, group: float) -> Dict[str, Any]:
    return {
        "w": [float(v) for v in w],
        "mask": [int(v) for v in mask],
        "group_mask": int(group),
    }


def _load_block(block: Dict[str, Any], w: np.ndarray, mask: np.ndarray) -> None:
    if len(block["w"]) != w.shape[0]:
        raise StructuralError(f"Block has {len(block['w'])} weights, expected {w.shape[0]}.")
    w[:] = [float(v) for v in block["w"]]
    mask[:] = _as_bits(block["mask"], w.shape[0], "Block mask")


def _group_bit(block: Dict[str, Any]) -> int:
    bit = int(block.get("group_mask", 1))
    if bit not in (0, 1):
        raise StructuralError("group_mask must be 0 or 1.")
    return bit


def forward(net: FlatModel, x) -> Tuple[Union[float, np.ndarray], Any]:
    """Evaluates ``net`` at one sample (returns a float) or a batch of rows."""
    x = np.asarray(x, dtype=float)
    output, trace = net.evaluate(x)
    if x.ndim == 1:
        return float(output[0]), trace
    return output, trace


def count_active_connections(net: FlatModel) -> int:
    """Number of live mask bits over PolyNets, OperNets and output PolyNets (biases excluded)."""
    return int(np.sum(net.effective_mask()[net.connection] > 0))


def expression_space_size(n_connections: int) -> int:
    """Number of sub-graphs ``2**n`` a net with ``n`` prunable connections can express."""
    if n_connections < 0:
        raise ValueError("n_connections must be non-negative")
    return 2 ** int(n_connections)
