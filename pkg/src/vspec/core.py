"""Core expression language.

Expressions are immutable and use de Bruijn indices for bound variables
(index 0 is the innermost binder), which makes structural equality
alpha-invariant.  Binder names are kept purely for printing.  References to
top-level definitions stay name-based (``TopRef``) until the normaliser
inlines them.

``InputVar`` / ``OutputVar`` are the relational network variables (x_i /
y_j); they only appear after query compilation replaces network
applications with equations.  ``AppRef`` is the query compiler's reference
to a shared network application introduced by common-sub-expression
elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from .rational import render_number
from .types import VType

# Builtin operation tags.
ARITH_OPS = ("add", "sub", "mul", "div", "neg")
CMP_OPS = ("le", "lt", "ge", "gt", "eq")
LOGIC_OPS = ("and", "or", "implies", "not", "if")

OP_SYMBOL = {
    "add": "+",
    "sub": "-",
    "mul": "*",
    "div": "/",
    "le": "<=",
    "lt": "<",
    "ge": ">=",
    "gt": ">",
    "eq": "==",
    "and": "and",
    "or": "or",
    "implies": "=>",
}


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    """Bound variable; de Bruijn index, 0 = innermost binder."""

    index: int


@dataclass(frozen=True)
class TopRef(Expr):
    """Reference to a top-level definition or network name."""

    name: str


@dataclass(frozen=True)
class RatLit(Expr):
    value: Fraction


@dataclass(frozen=True)
class NatLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class TensorLit(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Builtin(Expr):
    """Saturated builtin application.

    ``level`` records the Bool/Prop instantiation chosen by the type checker
    for comparison and logical operations; arithmetic builtins leave it None.
    """

    op: str
    args: tuple[Expr, ...]
    level: str | None = None  # "bool" | "prop" | None


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Lam(Expr):
    binder: str
    binder_type: VType
    body: Expr


@dataclass(frozen=True)
class Quant(Expr):
    kind: str  # "forall" | "exists"
    binder: str
    binder_type: VType
    body: Expr


@dataclass(frozen=True)
class Let(Expr):
    binder: str
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class NetworkApp(Expr):
    """Application of a declared network to its (tensor) argument."""

    network: str
    arg: Expr


@dataclass(frozen=True)
class Index(Expr):
    tensor: Expr
    index: Expr


@dataclass(frozen=True)
class InputVar(Expr):
    """Relational network input variable x<index>."""

    index: int


@dataclass(frozen=True)
class OutputVar(Expr):
    """Relational network output variable y<index>."""

    index: int


@dataclass(frozen=True)
class AppRef(Expr):
    """Reference to the n-th shared network application of a query."""

    index: int


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, TensorLit):
        return e.items
    if isinstance(e, Builtin):
        return e.args
    if isinstance(e, App):
        return (e.fn, e.arg)
    if isinstance(e, (Lam, Quant)):
        return (e.body,)
    if isinstance(e, Let):
        return (e.bound, e.body)
    if isinstance(e, NetworkApp):
        return (e.arg,)
    if isinstance(e, Index):
        return (e.tensor, e.index)
    return ()


def subterms(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of e and all its subterms."""
    yield e
    for c in children(e):
        yield from subterms(c)


def contains(e: Expr, pred: Callable[[Expr], bool]) -> bool:
    return any(pred(s) for s in subterms(e))


def contains_network(e: Expr) -> bool:
    return contains(e, lambda s: isinstance(s, NetworkApp))


def contains_quantifier(e: Expr) -> bool:
    return contains(e, lambda s: isinstance(s, Quant))


def map_children(e: Expr, f: Callable[[Expr], Expr]) -> Expr:
    """Rebuild e with f applied to each immediate child (binder-unaware)."""
    if isinstance(e, TensorLit):
        return TensorLit(tuple(f(x) for x in e.items))
    if isinstance(e, Builtin):
        return Builtin(e.op, tuple(f(a) for a in e.args), e.level)
    if isinstance(e, App):
        return App(f(e.fn), f(e.arg))
    if isinstance(e, Lam):
        return Lam(e.binder, e.binder_type, f(e.body))
    if isinstance(e, Quant):
        return Quant(e.kind, e.binder, e.binder_type, f(e.body))
    if isinstance(e, Let):
        return Let(e.binder, f(e.bound), f(e.body))
    if isinstance(e, NetworkApp):
        return NetworkApp(e.network, f(e.arg))
    if isinstance(e, Index):
        return Index(f(e.tensor), f(e.index))
    return e


def shift(e: Expr, by: int, cutoff: int = 0) -> Expr:
    """Shift free variable indices >= cutoff by ``by``."""
    if by == 0:
        return e
    if isinstance(e, Var):
        return Var(e.index + by) if e.index >= cutoff else e
    if isinstance(e, (Lam, Quant)):
        body = shift(e.body, by, cutoff + 1)
        if isinstance(e, Lam):
            return Lam(e.binder, e.binder_type, body)
        return Quant(e.kind, e.binder, e.binder_type, body)
    if isinstance(e, Let):
        return Let(e.binder, shift(e.bound, by, cutoff), shift(e.body, by, cutoff + 1))
    return map_children(e, lambda c: shift(c, by, cutoff))


def substitute_var(e: Expr, target: int, replacement: Expr) -> Expr:
    """Replace Var(target) by ``replacement`` and lower indices above it.

    ``replacement`` must be closed with respect to local binders (it is
    always an InputVar/OutputVar during user-variable elimination).
    """
    if isinstance(e, Var):
        if e.index == target:
            return replacement
        if e.index > target:
            return Var(e.index - 1)
        return e
    if isinstance(e, (Lam, Quant, Let)):
        raise AssertionError("substitute_var is only used on binder-free atoms")
    return map_children(e, lambda c: substitute_var(c, target, replacement))


# ---------------------------------------------------------------------------
# Printing (surface syntax rendering of core expressions)
# ---------------------------------------------------------------------------

_PREC = {
    "implies": 1,
    "or": 2,
    "and": 3,
    "not": 4,
    "cmp": 5,
    "add": 6,
    "sub": 6,
    "mul": 7,
    "div": 7,
    "neg": 8,
    "index": 9,
    "app": 10,
    "atom": 11,
}


def print_expr(e: Expr, names: list[str] | None = None, prec: int = 0) -> str:
    """Render a core expression in surface syntax.

    ``names`` is the binder-name stack, innermost last.
    """
    names = names if names is not None else []

    def go(e: Expr, prec: int) -> str:
        if isinstance(e, Var):
            if e.index < len(names):
                return names[len(names) - 1 - e.index]
            return f"#{e.index}"
        if isinstance(e, TopRef):
            return e.name
        if isinstance(e, RatLit):
            value = render_number(e.value)
            return f"({value})" if e.value < 0 and prec >= _PREC["app"] else value
        if isinstance(e, NatLit):
            return str(e.value)
        if isinstance(e, BoolLit):
            return "True" if e.value else "False"
        if isinstance(e, InputVar):
            return f"x{e.index}"
        if isinstance(e, OutputVar):
            return f"y{e.index}"
        if isinstance(e, AppRef):
            return f"_app{e.index}"
        if isinstance(e, TensorLit):
            return "[" + ", ".join(go(x, 0) for x in e.items) + "]"
        if isinstance(e, NetworkApp):
            return _paren(f"{e.network} {go(e.arg, _PREC['atom'])}", _PREC["app"], prec)
        if isinstance(e, App):
            return _paren(
                f"{go(e.fn, _PREC['app'])} {go(e.arg, _PREC['atom'])}", _PREC["app"], prec
            )
        if isinstance(e, Index):
            text = f"{go(e.tensor, _PREC['index'])} ! {go(e.index, _PREC['atom'])}"
            return _paren(text, _PREC["index"], prec)
        if isinstance(e, (Lam, Quant)):
            names.append(e.binder)
            body = go(e.body, 0)
            names.pop()
            if isinstance(e, Lam):
                text = f"\\{e.binder} : {e.binder_type} . {body}"
            else:
                text = f"{e.kind} ({e.binder} : {e.binder_type}) . {body}"
            return _paren(text, 0, prec)
        if isinstance(e, Let):
            bound = go(e.bound, 0)
            names.append(e.binder)
            body = go(e.body, 0)
            names.pop()
            return _paren(f"let {e.binder} = {bound} in {body}", 0, prec)
        if isinstance(e, Builtin):
            return builtin_text(e, prec)
        raise AssertionError(e)

    def builtin_text(e: Builtin, prec: int) -> str:
        if e.op == "neg":
            return _paren(f"-{go(e.args[0], _PREC['neg'])}", _PREC["neg"], prec)
        if e.op == "not":
            return _paren(f"not {go(e.args[0], _PREC['not'])}", _PREC["not"], prec)
        if e.op == "if":
            cond, then, els = e.args
            text = f"if {go(cond, 0)} then {go(then, 0)} else {go(els, 0)}"
            return _paren(text, 0, prec)
        lhs, rhs = e.args
        if e.op in CMP_OPS:
            p = _PREC["cmp"]
            text = f"{go(lhs, p + 1)} {OP_SYMBOL[e.op]} {go(rhs, p + 1)}"
            return _paren(text, p, prec)
        p = _PREC[e.op]
        right_assoc = e.op == "implies"
        left = go(lhs, p + (1 if right_assoc else 0))
        right = go(rhs, p + (0 if right_assoc else 1))
        return _paren(f"{left} {OP_SYMBOL[e.op]} {right}", p, prec)

    return go(e, prec)


def _paren(text: str, node_prec: int, ctx_prec: int) -> str:
    return f"({text})" if node_prec < ctx_prec else text
