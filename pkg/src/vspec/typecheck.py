"""Type checker: surface declarations to a typed core program.

Checking runs in three passes per definition:

1. unification-based inference over the surface AST (types of literals and
   unannotated quantifier binders are solved; unconstrained numeric types
   default to Rat),
2. core-AST construction with de Bruijn indices and exact literals,
3. Bool/Prop instantiation resolution for comparison and logical builtins.

For unification, Bool and Prop are collapsed into one formula type; the
distinction is restored in pass 3, where an expression containing a
quantifier or a network application forces the Prop instantiation, an
``if`` condition must resolve to Bool, and a declaration with a declared
Bool (co)domain must not be forced to Prop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import core, surface
from .errors import SourcePos, TypeCheckError
from .types import BOOL, INT, NAT, PROP, RAT, FunT, Scalar, TensorT, VType, is_numeric

_BUILTIN_TYPE_NAMES = {
    "Bool": BOOL,
    "Prop": PROP,
    "Nat": NAT,
    "Int": INT,
    "Rat": RAT,
    "Real": RAT,  # Real is accepted and treated identically to Rat
}


# ---------------------------------------------------------------------------
# Typed program
# ---------------------------------------------------------------------------


@dataclass
class TypedDecl:
    name: str
    kind: str  # "synonym" | "network" | "def"
    signature: surface.SType  # surface form, synonyms unexpanded (for backends)
    vtype: VType  # resolved type (synonym: resolved right-hand side)
    params: tuple[str, ...]
    body: core.Expr | None  # defs: Lam-wrapped core body
    pos: SourcePos


@dataclass
class TypedProgram:
    decls: list[TypedDecl]
    synonyms: dict[str, VType] = field(default_factory=dict)
    networks: dict[str, VType] = field(default_factory=dict)
    definitions: dict[str, core.Expr] = field(default_factory=dict)
    def_types: dict[str, VType] = field(default_factory=dict)

    def properties(self) -> list[TypedDecl]:
        return [d for d in self.decls if d.kind == "def" and d.vtype == PROP]


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


class _UVar:
    __slots__ = ("link", "must_numeric")

    def __init__(self) -> None:
        self.link: object | None = None  # VType | _UVar
        self.must_numeric = False


UType = object  # VType | _UVar


def _resolve(t: UType) -> UType:
    while isinstance(t, _UVar) and t.link is not None:
        t = t.link
    return t


def _canon(t: VType) -> VType:
    """Collapse Bool into Prop for unification purposes."""
    if t == BOOL:
        return PROP
    if isinstance(t, FunT):
        return FunT(_canon(t.dom), _canon(t.cod))
    return t


def _occurs(v: _UVar, t: UType) -> bool:
    t = _resolve(t)
    if t is v:
        return True
    if isinstance(t, FunT):
        return _occurs(v, t.dom) or _occurs(v, t.cod)
    if isinstance(t, TensorT):
        return _occurs(v, t.elem)
    return False


def _type_str(t: UType) -> str:
    t = _resolve(t)
    return "_" if isinstance(t, _UVar) else str(t)


class _Checker:
    def __init__(self, path: str | None):
        self.path = path
        self.lit_types: dict[int, UType] = {}
        self.binder_types: dict[int, list[UType]] = {}

    def error(self, code: str, message: str, pos: SourcePos | None) -> TypeCheckError:
        return TypeCheckError(code, message, path=self.path, pos=pos)

    def unify(self, a: UType, b: UType, pos: SourcePos | None) -> None:
        a, b = _resolve(a), _resolve(b)
        if a is b:
            return
        if isinstance(a, _UVar):
            if _occurs(a, b):
                raise self.error("TypeMismatch", "infinite type", pos)
            if a.must_numeric and not isinstance(b, _UVar) and not is_numeric(b):  # type: ignore[arg-type]
                raise self.error(
                    "TypeMismatch", f"expected a numeric type, found {_type_str(b)}", pos
                )
            if isinstance(b, _UVar):
                b.must_numeric = b.must_numeric or a.must_numeric
            a.link = b
            return
        if isinstance(b, _UVar):
            self.unify(b, a, pos)
            return
        if isinstance(a, Scalar) and isinstance(b, Scalar) and a.kind == b.kind:
            return
        if isinstance(a, TensorT) and isinstance(b, TensorT) and a.dims == b.dims:
            self.unify(a.elem, b.elem, pos)
            return
        if isinstance(a, FunT) and isinstance(b, FunT):
            self.unify(a.dom, b.dom, pos)
            self.unify(a.cod, b.cod, pos)
            return
        raise self.error(
            "TypeMismatch", f"cannot match type {_type_str(a)} with {_type_str(b)}", pos
        )

    def numeric_var(self) -> _UVar:
        v = _UVar()
        v.must_numeric = True
        return v


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def typecheck(decls: list[surface.SurfaceDecl], path: str | None = None) -> TypedProgram:
    """Check declarations and elaborate them into the typed core program."""
    checker = _Checker(path)
    program = TypedProgram(decls=[])
    for decl in decls:
        if isinstance(decl, surface.TypeSynonym):
            vtype = _eval_type(decl.rhs, program, checker, decl.pos)
            program.synonyms[decl.name] = vtype
            program.decls.append(
                TypedDecl(decl.name, "synonym", decl.rhs, vtype, (), None, decl.pos)
            )
        elif isinstance(decl, surface.NetworkDecl):
            vtype = _eval_type(decl.signature, program, checker, decl.pos)
            program.networks[decl.name] = vtype
            program.decls.append(
                TypedDecl(decl.name, "network", decl.signature, vtype, (), None, decl.pos)
            )
        else:
            typed = _check_fundef(decl, program, checker)
            program.decls.append(typed)
            program.definitions[typed.name] = typed.body  # type: ignore[assignment]
            program.def_types[typed.name] = typed.vtype
    return program


def _eval_type(
    t: surface.SType, program: TypedProgram, checker: _Checker, pos: SourcePos
) -> VType:
    if isinstance(t, surface.SName):
        if t.name in _BUILTIN_TYPE_NAMES:
            return _BUILTIN_TYPE_NAMES[t.name]
        if t.name in program.synonyms:
            return program.synonyms[t.name]
        raise checker.error("UnknownIdentifier", f"unknown type name {t.name!r}", pos)
    if isinstance(t, surface.STensor):
        elem = _eval_type(t.elem, program, checker, pos)
        if not is_numeric(elem):
            raise checker.error(
                "TypeMismatch", f"tensor element type must be numeric, found {elem}", pos
            )
        if any(d <= 0 for d in t.dims):
            raise checker.error("TypeMismatch", "tensor dimensions must be positive", pos)
        return TensorT(elem, t.dims)
    if isinstance(t, surface.SFun):
        return FunT(
            _eval_type(t.dom, program, checker, pos),
            _eval_type(t.cod, program, checker, pos),
        )
    raise AssertionError(t)


def _check_fundef(
    decl: surface.FunDef, program: TypedProgram, checker: _Checker
) -> TypedDecl:
    vtype = _eval_type(decl.signature, program, checker, decl.pos)

    # Bind parameters against the signature's arrows.
    param_types: list[VType] = []
    cod: VType = vtype
    for p in decl.params:
        if not isinstance(cod, FunT):
            raise checker.error(
                "TypeMismatch",
                f"definition of {decl.name!r} has more parameters than its signature",
                decl.pos,
            )
        param_types.append(cod.dom)
        cod = cod.cod

    env = [(p, _canon(t)) for p, t in zip(decl.params, param_types)]
    inf = _Infer(checker, program, env)
    body_type = inf.infer(decl.body)
    checker.unify(body_type, _canon(cod), decl.pos)

    body_core = inf.build(decl.body)
    body_core = _resolve_levels(body_core, cod, program, checker, decl)
    for p, t in reversed(list(zip(decl.params, param_types))):
        body_core = core.Lam(p, t, body_core)
    return TypedDecl(
        decl.name, "def", decl.signature, vtype, decl.params, body_core, decl.pos
    )


# ---------------------------------------------------------------------------
# Pass 1+2: inference and core construction
# ---------------------------------------------------------------------------

_CMP_TAG = {"<=": "le", "<": "lt", ">=": "ge", ">": "gt", "==": "eq"}
_LOGIC_TAG = {"and": "and", "or": "or", "=>": "implies"}
_ARITH_TAG = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


class _Infer:
    def __init__(
        self,
        checker: _Checker,
        program: TypedProgram,
        env: list[tuple[str, UType]],
    ):
        self.checker = checker
        self.program = program
        self.env = env  # innermost binder last
        self.types: dict[int, UType] = {}  # id(surface node) -> inferred type

    def fail(self, code: str, message: str, pos: SourcePos) -> TypeCheckError:
        return self.checker.error(code, message, pos)

    def lookup(self, name: str, pos: SourcePos) -> UType:
        for bname, btype in reversed(self.env):
            if bname == name:
                return btype
        if name in self.program.def_types:
            return _canon(self.program.def_types[name])
        if name in self.program.networks:
            return _canon(self.program.networks[name])
        raise self.fail("UnknownIdentifier", f"unknown identifier {name!r}", pos)

    # -- pass 1 ---------------------------------------------------------

    def infer(self, e: surface.SExpr) -> UType:
        t = self._infer(e)
        self.types[id(e)] = t
        return t

    def _infer(self, e: surface.SExpr) -> UType:
        chk = self.checker
        if isinstance(e, surface.SVar):
            return self.lookup(e.name, e.pos)
        if isinstance(e, surface.SNum):
            return chk.numeric_var()
        if isinstance(e, surface.STensorLit):
            if not e.items:
                raise self.fail("TypeMismatch", "empty tensor literal", e.pos)
            elem = self.infer(e.items[0])
            for item in e.items[1:]:
                chk.unify(self.infer(item), elem, e.pos)
            resolved = _resolve(elem)
            n = len(e.items)
            if isinstance(resolved, TensorT):
                return TensorT(resolved.elem, (n,) + resolved.dims)
            return TensorT(elem, (n,))  # type: ignore[arg-type]
        if isinstance(e, surface.SApp):
            fn_type = self.infer(e.fn)
            for arg in e.args:
                fn_type = _resolve(fn_type)
                if not isinstance(fn_type, FunT):
                    raise self.fail(
                        "TypeMismatch",
                        f"applied a value of non-function type {_type_str(fn_type)}",
                        e.pos,
                    )
                chk.unify(self.infer(arg), fn_type.dom, e.pos)
                fn_type = fn_type.cod
            return fn_type
        if isinstance(e, surface.SBinOp):
            if e.op in _ARITH_TAG:
                lhs = self.infer(e.lhs)
                rhs = self.infer(e.rhs)
                chk.unify(lhs, rhs, e.pos)
                chk.unify(lhs, chk.numeric_var(), e.pos)
                if e.op == "/":
                    chk.unify(lhs, RAT, e.pos)
                return lhs
            # and / or / =>
            chk.unify(self.infer(e.lhs), PROP, e.pos)
            chk.unify(self.infer(e.rhs), PROP, e.pos)
            return PROP
        if isinstance(e, surface.SCmp):
            lhs = self.infer(e.lhs)
            rhs = self.infer(e.rhs)
            chk.unify(lhs, rhs, e.pos)
            chk.unify(lhs, chk.numeric_var(), e.pos)
            return PROP
        if isinstance(e, surface.SNot):
            chk.unify(self.infer(e.arg), PROP, e.pos)
            return PROP
        if isinstance(e, surface.SNeg):
            arg = self.infer(e.arg)
            chk.unify(arg, RAT, e.pos)
            return arg
        if isinstance(e, surface.SIf):
            chk.unify(self.infer(e.cond), PROP, e.pos)
            then = self.infer(e.then)
            chk.unify(self.infer(e.els), then, e.pos)
            return then
        if isinstance(e, surface.SQuant):
            binder_types: list[UType] = []
            for _, btype in e.binders:
                if btype is None:
                    binder_types.append(_UVar())
                else:
                    binder_types.append(
                        _eval_type(btype, self.program, self.checker, e.pos)
                    )
            self.checker.binder_types[id(e)] = binder_types
            for (name, _), t in zip(e.binders, binder_types):
                self.env.append((name, t))
            chk.unify(self.infer(e.body), PROP, e.pos)
            del self.env[-len(e.binders) :]
            return PROP
        if isinstance(e, surface.SIndex):
            tensor = _resolve(self.infer(e.tensor))
            if not isinstance(tensor, TensorT):
                raise self.fail(
                    "TypeMismatch",
                    "cannot determine the tensor type of an indexed expression; "
                    "annotate the quantifier binder",
                    e.pos,
                )
            chk.unify(self.infer(e.index), NAT, e.pos)
            if len(tensor.dims) == 1:
                return tensor.elem
            return TensorT(tensor.elem, tensor.dims[1:])
        raise AssertionError(e)

    # -- pass 2 ---------------------------------------------------------

    def final_type(self, e: surface.SExpr) -> VType:
        t = _resolve(self.types[id(e)])
        if isinstance(t, _UVar):
            return RAT  # unconstrained numeric defaults to Rat
        return t  # type: ignore[return-value]

    def build(self, e: surface.SExpr) -> core.Expr:
        if isinstance(e, surface.SVar):
            for i, (bname, _) in enumerate(reversed(self.env)):
                if bname == e.name:
                    return core.Var(i)
            return core.TopRef(e.name)
        if isinstance(e, surface.SNum):
            t = self.final_type(e)
            if t == NAT:
                if e.value.denominator != 1 or e.value < 0:
                    raise self.fail(
                        "TypeMismatch", f"{e.value} is not a natural number", e.pos
                    )
                return core.NatLit(int(e.value))
            return core.RatLit(Fraction(e.value))
        if isinstance(e, surface.STensorLit):
            return core.TensorLit(tuple(self.build(x) for x in e.items))
        if isinstance(e, surface.SApp):
            expr: core.Expr = self.build(e.fn)
            for arg in e.args:
                expr = core.App(expr, self.build(arg))
            return expr
        if isinstance(e, surface.SBinOp):
            op = _ARITH_TAG.get(e.op) or _LOGIC_TAG[e.op]
            return core.Builtin(op, (self.build(e.lhs), self.build(e.rhs)))
        if isinstance(e, surface.SCmp):
            return core.Builtin(_CMP_TAG[e.op], (self.build(e.lhs), self.build(e.rhs)))
        if isinstance(e, surface.SNot):
            return core.Builtin("not", (self.build(e.arg),))
        if isinstance(e, surface.SNeg):
            return core.Builtin("neg", (self.build(e.arg),))
        if isinstance(e, surface.SIf):
            return core.Builtin(
                "if", (self.build(e.cond), self.build(e.then), self.build(e.els))
            )
        if isinstance(e, surface.SQuant):
            binder_types = self.checker.binder_types[id(e)]
            final: list[VType] = []
            for t, (name, _) in zip(binder_types, e.binders):
                r = _resolve(t)
                if isinstance(r, _UVar):
                    r = RAT
                if not (is_numeric(r) or isinstance(r, TensorT)):
                    raise self.fail(
                        "UnsupportedQuantifierType",
                        f"cannot quantify over type {r}",
                        e.pos,
                    )
                final.append(r)  # type: ignore[arg-type]
                self.env.append((name, t))
            body = self.build(e.body)
            del self.env[-len(e.binders) :]
            for (name, _), t in reversed(list(zip(e.binders, final))):
                body = core.Quant(e.kind, name, t, body)
            return body
        if isinstance(e, surface.SIndex):
            return core.Index(self.build(e.tensor), self.build(e.index))
        raise AssertionError(e)


# ---------------------------------------------------------------------------
# Pass 3: Bool/Prop instantiation resolution
# ---------------------------------------------------------------------------


def _is_formula_expr(e: core.Expr, program: TypedProgram) -> bool:
    """Does this core expression denote a Bool/Prop value?"""
    if isinstance(e, core.Builtin):
        return e.op in core.CMP_OPS or e.op in ("and", "or", "implies", "not") or (
            e.op == "if" and _is_formula_expr(e.args[1], program)
        )
    if isinstance(e, core.Quant):
        return True
    if isinstance(e, core.BoolLit):
        return True
    if isinstance(e, core.TopRef):
        t = program.def_types.get(e.name)
        return t in (BOOL, PROP)
    if isinstance(e, core.App):
        head = e
        while isinstance(head, core.App):
            head = head.fn
        if isinstance(head, core.TopRef):
            t = program.def_types.get(head.name) or program.networks.get(head.name)
            while isinstance(t, FunT):
                t = t.cod
            return t in (BOOL, PROP)
    return False


def _forces_prop(e: core.Expr, program: TypedProgram) -> bool:
    """A quantifier or a network application anywhere forces Prop."""
    for sub in core.subterms(e):
        if isinstance(sub, core.Quant):
            return True
        if isinstance(sub, core.NetworkApp):
            return True
        head = sub
        while isinstance(head, core.App):
            head = head.fn
        if isinstance(head, core.TopRef) and head.name in program.networks:
            return True
        if isinstance(head, core.TopRef) and head.name in program.definitions:
            # Definitions are checked in order, so referenced bodies exist.
            if _forces_prop(program.definitions[head.name], program):
                return True
    return False


def _resolve_levels(
    e: core.Expr,
    declared: VType,
    program: TypedProgram,
    checker: _Checker,
    decl: surface.FunDef,
) -> core.Expr:
    """Assign Bool/Prop instantiation tags to comparison and logical builtins."""
    cod = declared
    while isinstance(cod, FunT):
        cod = cod.cod

    def formula(e: core.Expr, want_prop: bool, in_if_condition: bool) -> core.Expr:
        forced = _forces_prop(e, program)
        if forced and in_if_condition:
            raise checker.error(
                "IfConditionNotBool",
                f"the condition of 'if' must have type Bool in {decl.name!r}",
                decl.pos,
            )
        is_prop = want_prop or forced
        if isinstance(e, core.Builtin) and e.op in core.CMP_OPS:
            args = tuple(numeric(a) for a in e.args)
            return core.Builtin(e.op, args, "prop" if is_prop else "bool")
        if isinstance(e, core.Builtin) and e.op in ("and", "or", "implies", "not"):
            args = tuple(formula(a, is_prop, in_if_condition) for a in e.args)
            return core.Builtin(e.op, args, "prop" if is_prop else "bool")
        if isinstance(e, core.Builtin) and e.op == "if":
            cond = formula(e.args[0], False, True)
            then = formula(e.args[1], is_prop, in_if_condition)
            els = formula(e.args[2], is_prop, in_if_condition)
            return core.Builtin("if", (cond, then, els), "prop" if is_prop else "bool")
        if isinstance(e, core.Quant):
            return core.Quant(
                e.kind, e.binder, e.binder_type, formula(e.body, True, False)
            )
        # Atoms: references and applications of formula-valued definitions.
        return core.map_children(e, lambda c: visit(c))

    def numeric(e: core.Expr) -> core.Expr:
        if isinstance(e, core.Builtin) and e.op == "if":
            cond = formula(e.args[0], False, True)
            return core.Builtin("if", (cond, numeric(e.args[1]), numeric(e.args[2])))
        return core.map_children(e, lambda c: visit(c))

    def visit(e: core.Expr) -> core.Expr:
        if _is_formula_expr(e, program):
            return formula(e, True, False)
        return numeric(e)

    if cod in (BOOL, PROP):
        want_prop = cod == PROP
        if not want_prop and _forces_prop(e, program):
            raise checker.error(
                "PropInBoolPosition",
                f"{decl.name!r} is declared Bool but its body can only be Prop",
                decl.pos,
            )
        return formula(e, want_prop, False)
    return numeric(e)
