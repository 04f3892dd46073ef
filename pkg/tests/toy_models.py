from typing import Any, Dict

import numpy as np

from mathoNet.network import FlatModel


class PowerModel(FlatModel):
    """``yhat = w**power * x`` over the first input; one weight in one group."""

    def __init__(self, w: float = 0.0, power: int = 1):
        self.power = power
        self.n_inputs = 1
        self.weights = np.array([float(w)])
        self.mask = np.ones(1)
        self.group_mask = np.ones(1)
        self.group_of = np.array([0])
        self.prunable = np.ones(1, dtype=bool)
        self.connection = np.ones(1, dtype=bool)

    def _w(self) -> float:
        return float(self.weights[0]) if self.effective_mask()[0] > 0 else 0.0

    def evaluate(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._w() ** self.power * X[:, 0], X

    def jacobian(self, X):
        d = self.power * self._w() ** (self.power - 1) * X[:, 0]
        return d[:, None] * self.effective_mask()[None, :]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": float(self.weights[0]),
            "power": self.power,
            "mask": int(self.mask[0]),
            "group_mask": int(self.group_mask[0]),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PowerModel":
        model = cls(data["w"], data["power"])
        model.mask[0] = data["mask"]
        model.group_mask[0] = data["group_mask"]
        return model


def wire(net, neuron_polys, oper=None, out=None, layer=0):
    """Hand-wires a net layer: ``neuron_polys[k][i]`` is the PolyNet weight
    vector of neuron ``k`` on input ``i``. OperNets default to the first
    unary kind with weight 1, output PolyNets to the constant 1."""
    view = net.layers[layer]
    for k, polys in enumerate(neuron_polys):
        for i, w in enumerate(polys):
            view.poly_w[k, i] = w
    if oper is None:
        oper = [[1.0] + [0.0] * (len(net.unary_set) - 1)] * view.n_neurons
    for k, w in enumerate(oper):
        view.oper_w[k] = w
    if out is None:
        out = [[0.0] * net.n_inputs + [1.0]] * net.hidden[-1]
    for k, w in enumerate(out):
        net.out_w[k] = w
    return net
