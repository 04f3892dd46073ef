"""
Symbolic read-out of a pruned model: expression trees, polynomial
simplification through sympy, term counting and canonical printing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from sympy.core.function import AppliedUndef

from .network import FlatModel, MathONet, UnaryKind

__all__ = (
    "Expression",
    "Const",
    "Var",
    "Add",
    "Mul",
    "Unary",
    "make_add",
    "make_mul",
    "make_unary",
    "extract_expression",
    "extract_net",
    "simplify",
    "term_count",
    "to_string",
    "coefficients",
    "default_names",
    "to_prefix",
    "from_prefix",
)

logger = logging.getLogger(__name__)

MAX_SIMPLIFY_PASSES = 4


class Expression:
    """Base class of the expression tree nodes."""

    __slots__ = ()

    def evaluate(self, X) -> np.ndarray:
        """Evaluates the tree on the rows of ``X`` (a single state is one row)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.broadcast_to(self._eval(X), (X.shape[0],)).astype(float)

    def _eval(self, X: np.ndarray):
        raise NotImplementedError("Derived classes need to implement this.")


@dataclass(frozen=True)
class Const(Expression):
    value: float

    def _eval(self, X):
        return np.full(X.shape[0], self.value)


@dataclass(frozen=True)
class Var(Expression):
    index: int

    def _eval(self, X):
        return X[:, self.index]


@dataclass(frozen=True)
class Add(Expression):
    children: Tuple[Expression, ...]

    def _eval(self, X):
        total = np.zeros(X.shape[0])
        for child in self.children:
            total = total + child._eval(X)
        return total


@dataclass(frozen=True)
class Mul(Expression):
    children: Tuple[Expression, ...]

    def _eval(self, X):
        product = np.ones(X.shape[0])
        for child in self.children:
            product = product * child._eval(X)
        return product


@dataclass(frozen=True)
class Unary(Expression):
    kind: UnaryKind
    child: Expression

    def _eval(self, X):
        return self.kind(self.child._eval(X))


ZERO = Const(0.0)


# normalizing constructors


def make_add(terms: Sequence[Expression]) -> Expression:
    flat: List[Expression] = []
    constant = 0.0
    for term in terms:
        parts = term.children if isinstance(term, Add) else (term,)
        for part in parts:
            if isinstance(part, Const):
                constant += part.value
            else:
                flat.append(part)
    if constant != 0.0:
        flat.insert(0, Const(constant))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def make_mul(factors: Sequence[Expression]) -> Expression:
    flat: List[Expression] = []
    constant = 1.0
    for factor in factors:
        parts = factor.children if isinstance(factor, Mul) else (factor,)
        for part in parts:
            if isinstance(part, Const):
                constant *= part.value
            else:
                flat.append(part)
    if constant == 0.0:
        return ZERO
    if constant != 1.0 or not flat:
        flat.insert(0, Const(constant))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def make_unary(kind: UnaryKind, child: Expression) -> Expression:
    if kind is UnaryKind.IDENTITY:
        return child
    if isinstance(child, Const):
        return Const(float(kind(np.float64(child.value))))
    return Unary(kind, child)


# extraction


def _poly_expr(w: np.ndarray, bits: np.ndarray, variables: Sequence[Expression]) -> Expression:
    terms = [
        make_mul([Const(float(w[s])), variables[s]])
        for s in range(len(variables))
        if bits[s] > 0
    ]
    if bits[-1] > 0:
        terms.append(Const(float(w[-1])))
    return make_add(terms)


def extract_net(net: MathONet, variables: Optional[Sequence[Expression]] = None) -> Expression:
    """The exact symbolic mirror of ``net``'s forward pass.

    ``variables`` replaces the system inputs (defaults to ``Var(0..n-1)``).
    """
    if variables is None:
        variables = [Var(i) for i in range(net.n_inputs)]
    current = list(variables)
    for view in net.layers:
        activations = []
        for k in range(view.n_neurons):
            terms = []
            for i in range(view.n_in):
                bits = view.poly_mask[k, i] * view.poly_group[k, i]
                terms.append(make_mul([_poly_expr(view.poly_w[k, i], bits, variables), current[i]]))
            if view.bias_mask[k] > 0:
                terms.append(Const(float(view.bias[k])))
            h = make_add(terms)
            parts = []
            for o, kind in enumerate(net.unary_set):
                if view.oper_mask[k, o] * view.oper_group[k] > 0:
                    parts.append(make_unary(kind, make_mul([Const(float(view.oper_w[k, o])), h])))
            activations.append(make_add(parts))
        current = activations

    out = []
    for k in range(net.hidden[-1]):
        bits = net.out_mask[k] * net.out_group[k]
        out.append(make_mul([_poly_expr(net.out_w[k], bits, variables), current[k]]))
    return make_add(out)


def extract_expression(model: FlatModel) -> Expression:
    """Reads the expression a (pruned) model computes.

    Models other than :class:`~mathoNet.network.MathONet` provide
    ``to_expression()``.
    """
    if isinstance(model, MathONet):
        return extract_net(model)
    return model.to_expression()


# simplification

_SYMPY_FUNCTIONS = {
    UnaryKind.SIN: sympy.Function("Sin"),
    UnaryKind.COS: sympy.Function("Cos"),
    UnaryKind.LOG: sympy.Function("Log"),
    UnaryKind.EXP: sympy.Function("Exp"),
}
_KIND_BY_NAME = {f.__name__: kind for kind, f in _SYMPY_FUNCTIONS.items()}


def _to_sympy(expr: Expression, symbols: Dict[int, sympy.Symbol]):
    if isinstance(expr, Const):
        return sympy.Float(expr.value)
    if isinstance(expr, Var):
        if expr.index not in symbols:
            symbols[expr.index] = sympy.Symbol(f"v{expr.index}")
        return symbols[expr.index]
    if isinstance(expr, Add):
        return sympy.Add(*[_to_sympy(c, symbols) for c in expr.children])
    if isinstance(expr, Mul):
        return sympy.Mul(*[_to_sympy(c, symbols) for c in expr.children])
    return _SYMPY_FUNCTIONS[expr.kind](_to_sympy(expr.child, symbols))


def _from_sympy(e) -> Expression:
    if e.is_Symbol:
        return Var(int(e.name[1:]))
    if e.is_Number:
        return Const(float(e))
    if e.is_Add:
        return make_add([_from_sympy(a) for a in e.args])
    if e.is_Mul:
        return make_mul([_from_sympy(a) for a in e.args])
    if e.is_Pow:
        base, exponent = e.args
        if exponent.is_Integer and int(exponent) > 0:
            return make_mul([_from_sympy(base)] * int(exponent))
        raise ValueError(f"Unexpected power {e} in a MathONet expression")
    if isinstance(e, AppliedUndef):
        return make_unary(_KIND_BY_NAME[e.func.__name__], _from_sympy(e.args[0]))
    raise ValueError(f"Unexpected sympy node {e!r}")


def _split_term(term: Expression) -> Tuple[float, List[Expression]]:
    if isinstance(term, Const):
        return term.value, []
    if isinstance(term, Mul):
        coeff = 1.0
        factors = []
        for child in term.children:
            if isinstance(child, Const):
                coeff *= child.value
            else:
                factors.append(child)
        return coeff, factors
    return 1.0, [term]


def _terms(expr: Expression) -> Tuple[Expression, ...]:
    if isinstance(expr, Const) and expr.value == 0.0:
        return ()
    if isinstance(expr, Add):
        return expr.children
    return (expr,)


def _floor(expr: Expression, coeff_floor: float) -> Expression:
    kept = []
    for term in _terms(expr):
        coeff, factors = _split_term(term)
        if abs(coeff) < coeff_floor or coeff == 0.0:
            continue
        factors = [
            make_unary(f.kind, _floor(f.child, coeff_floor)) if isinstance(f, Unary) else f
            for f in factors
        ]
        kept.append(make_mul([Const(coeff)] + factors))
    return make_add(kept)


def simplify(expr: Expression, coeff_floor: float = 1e-4) -> Expression:
    """Expands products of polynomials, merges like terms and drops small terms.

    Unary nodes are opaque to the expansion: no trigonometric, logarithmic
    or exponential identity is applied, only constant folding. Terms whose
    coefficient magnitude is below ``coeff_floor`` are dropped, inside
    unary arguments too. ``coeff_floor = 0`` keeps the value exactly.
    """
    if coeff_floor < 0:
        raise ValueError("coeff_floor must be non-negative")
    current = _floor(expr, coeff_floor)
    for _ in range(MAX_SIMPLIFY_PASSES):
        expanded = sympy.expand(
            _to_sympy(current, {}),
            deep=True,
            mul=True,
            multinomial=True,
            power_exp=False,
            power_base=False,
            log=False,
        )
        result = _floor(_from_sympy(expanded), coeff_floor)
        if result == current:
            break
        current = result
    else:
        logger.debug("simplify stopped after %d passes without a fixpoint", MAX_SIMPLIFY_PASSES)
    return current


# counting and printing


def term_count(expr: Expression, nested: bool = False) -> int:
    """Number of top-level additive terms; 0 iff the expression is ``0``.

    With ``nested`` the additive terms inside every unary argument are
    counted as well.
    """
    terms = _terms(expr)
    if not nested:
        return len(terms)
    return len(terms) + sum(_nested(term) for term in terms)


def _nested(expr: Expression) -> int:
    if isinstance(expr, Unary):
        return term_count(expr.child, nested=True)
    if isinstance(expr, (Add, Mul)):
        return sum(_nested(child) for child in expr.children)
    return 0


def default_names(n_inputs: int) -> List[str]:
    if n_inputs <= 3:
        return ["x", "y", "z"][:n_inputs]
    return [f"x{i + 1}" for i in range(n_inputs)]


def _max_index(expr: Expression) -> int:
    if isinstance(expr, Var):
        return expr.index
    if isinstance(expr, (Add, Mul)):
        return max((_max_index(c) for c in expr.children), default=-1)
    if isinstance(expr, Unary):
        return _max_index(expr.child)
    return -1


def _resolve_names(expr: Expression, names: Optional[Sequence[str]]) -> List[str]:
    needed = _max_index(expr) + 1
    if names is None:
        return default_names(needed)
    names = list(names)
    if len(names) < needed:
        names += [f"x{i + 1}" for i in range(len(names), needed)]
    return names


def _format_number(value: float, decimals: int) -> str:
    with localcontext() as context:
        context.prec = 64
        quantum = Decimal(1).scaleb(-decimals)
        return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_EVEN))


def _factor_key(factor: Expression, decimals: int, names) -> Tuple:
    if isinstance(factor, Var):
        return (0, factor.index, "")
    if isinstance(factor, Unary):
        return (1, list(UnaryKind).index(factor.kind), to_string(factor.child, decimals, names))
    return (2, 0, to_string(factor, decimals, names))


def _factor_text(factor: Expression, decimals: int, names) -> str:
    if isinstance(factor, Var):
        return names[factor.index]
    if isinstance(factor, Unary):
        return f"{factor.kind.value}({to_string(factor.child, decimals, names)})"
    return f"({to_string(factor, decimals, names)})"


def _monomial(factors: List[Expression], decimals: int, names) -> Tuple[Tuple, str]:
    keyed = sorted(((_factor_key(f, decimals, names), f) for f in factors), key=lambda kf: kf[0])
    pieces: List[str] = []
    i = 0
    while i < len(keyed):
        key, factor = keyed[i]
        power = 1
        while i + power < len(keyed) and keyed[i + power][0] == key:
            power += 1
        text = _factor_text(factor, decimals, names)
        pieces.append(text if power == 1 else f"{text}^{power}")
        i += power
    return tuple(k for k, _ in keyed), "·".join(pieces)


def to_string(
    expr: Expression, decimals: int = 3, names: Optional[Sequence[str]] = None
) -> str:
    """Canonical display string, e.g. ``"-10.000·x + 10.000·y"``.

    Terms are ordered by degree, then by their sorted factor sequence
    (``1`` < ``x`` < ``y`` < ``x·y`` < ``x^2``); a unary factor counts as
    degree 1. Every coefficient is printed, rounded half-to-even.
    """
    if not 1 <= decimals <= 12:
        raise ValueError("decimals must lie in [1, 12]")
    names = _resolve_names(expr, names)
    terms = _terms(expr)
    if not terms:
        return "0"

    rendered = []
    for term in terms:
        coeff, factors = _split_term(term)
        key, text = _monomial(factors, decimals, names)
        rendered.append((key, coeff, text))
    rendered.sort(key=lambda item: (len(item[0]), item[0], item[2]))

    out = []
    for position, (_, coeff, text) in enumerate(rendered):
        number = _format_number(abs(coeff), decimals)
        body = f"{number}·{text}" if text else number
        if position == 0:
            out.append(f"-{body}" if coeff < 0 else body)
        else:
            out.append(f" - {body}" if coeff < 0 else f" + {body}")
    return "".join(out)


def coefficients(
    expr: Expression, decimals: int = 3, names: Optional[Sequence[str]] = None
) -> Dict[str, float]:
    """Maps every term's factor string (``"1"`` for the constant) to its coefficient."""
    names = _resolve_names(expr, names)
    result: Dict[str, float] = {}
    for term in _terms(expr):
        coeff, factors = _split_term(term)
        _, text = _monomial(factors, decimals, names)
        key = text or "1"
        result[key] = result.get(key, 0.0) + coeff
    return result


# prefix JSON


def to_prefix(expr: Expression) -> List[Any]:
    if isinstance(expr, Const):
        return ["const", expr.value]
    if isinstance(expr, Var):
        return ["var", expr.index]
    if isinstance(expr, Add):
        return ["add"] + [to_prefix(c) for c in expr.children]
    if isinstance(expr, Mul):
        return ["mul"] + [to_prefix(c) for c in expr.children]
    return [expr.kind.value, to_prefix(expr.child)]


def from_prefix(data: Sequence[Any]) -> Expression:
    head, *rest = data
    if head == "const":
        return Const(float(rest[0]))
    if head == "var":
        return Var(int(rest[0]))
    if head == "add":
        return Add(tuple(from_prefix(c) for c in rest))
    if head == "mul":
        return Mul(tuple(from_prefix(c) for c in rest))
    return Unary(UnaryKind(head), from_prefix(rest[0]))
