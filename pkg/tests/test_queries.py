import random
from fractions import Fraction

import pytest

from generators import close_over, random_assignment, random_formula
from oracles import eval_core
from vspec import core
from vspec.errors import QueryError
from vspec.networks import analyze_network_types
from vspec.normalise import prune_non_prop
from vspec.queries import (
    Disjunct,
    LinearConstraint,
    MetaNetwork,
    QVar,
    analyse_quantifiers,
    compile_property,
    cse_network_applications,
    drop_unused_binders,
    eliminate_if,
    eliminate_user_vars,
    nnf,
    relationalise,
    to_dnf,
)
from vspec.surface import parse
from vspec.typecheck import typecheck
from vspec.types import RAT


def compile_props(source, bindings):
    program = typecheck(parse(source))
    analysed, ctx = analyze_network_types(program, bindings)
    return [(name, expr, ctx) for name, expr in prune_non_prop(analysed)]


def q(kind, body, name="v"):
    return core.Quant(kind, name, RAT, body)


def cmp(op, lhs, rhs):
    return core.Builtin(op, (lhs, rhs), "prop")


def lit(x):
    return core.RatLit(Fraction(x))


X = core.Var(0)


# -- quantifier analysis --------------------------------------------------------


def test_forall_only_is_all_forall():
    assert analyse_quantifiers(q("forall", cmp("le", X, lit(1)))) == "AllForall"


def test_exists_only_is_all_exists():
    assert analyse_quantifiers(q("exists", cmp("le", X, lit(1)))) == "AllExists"


def test_quantifier_free_counts_as_all_exists():
    assert analyse_quantifiers(cmp("le", lit(0), lit(1))) == "AllExists"


def test_mixed_quantifiers_error():
    mixed = q("forall", q("exists", cmp("le", X, core.Var(1)), "w"))
    with pytest.raises(QueryError) as err:
        analyse_quantifiers(mixed)
    assert err.value.code == "MixedQuantifiers"


def test_negated_exists_counts_as_forall():
    # not (exists x . P) is a universal property: pushing the negation
    # manually gives forall x . not P.
    negated = core.Builtin("not", (q("exists", cmp("le", X, lit(1))),), "prop")
    assert analyse_quantifiers(negated) == "AllForall"
    pushed = nnf(negated, False)
    assert isinstance(pushed, core.Quant) and pushed.kind == "forall"
    assert analyse_quantifiers(pushed) == "AllForall"


def test_implication_antecedent_flips_polarity():
    prop = core.Builtin(
        "implies",
        (q("exists", cmp("le", X, lit(1))), cmp("le", lit(0), lit(1))),
        "prop",
    )
    assert analyse_quantifiers(prop) == "AllForall"


# -- negation normal form --------------------------------------------------------


def test_negate_forall_implication():
    prop = q("forall", core.Builtin("implies", (cmp("le", X, lit(1)), cmp("le", X, lit(2))), "prop"))
    negated = nnf(prop, True)
    assert isinstance(negated, core.Quant) and negated.kind == "exists"
    body = negated.body
    assert body.op == "and"
    assert body.args[0] == cmp("le", X, lit(1))
    assert body.args[1] == cmp("gt", X, lit(2))


def test_negate_strict_comparison():
    assert nnf(cmp("lt", X, lit("1.25")), True) == cmp("ge", X, lit("1.25"))


def test_negate_equality_splits():
    negated = nnf(cmp("eq", X, lit(0)), True)
    assert negated.op == "or"
    assert negated.args[0].op == "lt"
    assert negated.args[1].op == "gt"


def test_nnf_output_has_no_not_nodes():
    rng = random.Random(5)
    for _ in range(100):
        formula = random_formula(rng, 3, 4)
        for negate in (False, True):
            result = nnf(formula, negate)
            assert not any(
                isinstance(s, core.Builtin) and s.op == "not"
                for s in core.subterms(result)
            )


def test_nnf_semantics():
    rng = random.Random(6)
    for _ in range(60):
        formula = random_formula(rng, 3, 3)
        pos = nnf(formula, False)
        neg = nnf(formula, True)
        for _ in range(40):
            env = random_assignment(rng, 3)
            value = eval_core(formula, env)
            assert eval_core(pos, env) == value
            assert eval_core(neg, env) == (not value)


# -- if elimination ---------------------------------------------------------------


def test_spec_example_numeric_if_lifting():
    # exists x . (if a then x else x + 2) >= 8
    a = core.Builtin("le", (core.Var(0), lit(0)), "bool")
    prop = q(
        "exists",
        cmp(
            "ge",
            core.Builtin("if", (a, X, core.Builtin("add", (X, lit(2))))),
            lit(8),
        ),
        "x",
    )
    result = eliminate_if(prop)
    body = result.body
    assert body.op == "and"
    left, right = body.args
    assert left.op == "implies"
    assert left.args[0] == a
    assert left.args[1] == cmp("ge", X, lit(8))
    assert right.op == "implies"
    assert right.args[0] == core.Builtin("gt", (core.Var(0), lit(0)), "bool")
    assert right.args[1] == cmp("ge", core.Builtin("add", (X, lit(2))), lit(8))


def test_formula_level_if_becomes_implication_pair():
    a = core.Builtin("le", (lit(0), lit(1)), "bool")
    b = cmp("le", X, lit(1))
    c = cmp("ge", X, lit(1))
    result = eliminate_if(core.Builtin("if", (a, b, c), "prop"))
    assert result.op == "and"
    assert result.args[0] == core.Builtin("implies", (a, b), "prop")
    assert result.args[1] == core.Builtin(
        "implies", (core.Builtin("gt", (lit(0), lit(1)), "bool"), c), "prop"
    )


def test_if_free_input_unchanged():
    prop = q("exists", cmp("le", X, lit(1)))
    assert eliminate_if(prop) == prop


def test_if_condition_with_network_is_rejected():
    cond = core.Builtin(
        "le",
        (core.Index(core.NetworkApp("f", core.TensorLit((X,))), core.NatLit(0)), lit(0)),
        "bool",
    )
    prop = q("exists", core.Builtin("if", (cond, cmp("le", X, lit(1)), cmp("ge", X, lit(1))), "prop"))
    with pytest.raises(QueryError) as err:
        eliminate_if(prop)
    assert err.value.code == "IfConditionContainsNetwork"


def test_eliminate_if_semantics():
    rng = random.Random(7)
    for _ in range(60):
        formula = nnf(random_formula(rng, 3, 4), False)
        result = eliminate_if(formula)
        assert not any(
            isinstance(s, core.Builtin) and s.op == "if" for s in core.subterms(result)
        )
        for _ in range(40):
            env = random_assignment(rng, 3)
            assert eval_core(formula, env) == eval_core(result, env)


# -- DNF ---------------------------------------------------------------------------


def test_distribution_example():
    a = cmp("le", X, lit(0))
    b = cmp("ge", X, lit(10))
    c = cmp("eq", X, lit(5))
    prop = q("exists", core.Builtin("and", (core.Builtin("or", (a, b), "prop"), c), "prop"))
    disjuncts = to_dnf(prop)
    assert len(disjuncts) == 2
    assert disjuncts[0].atoms == [a, c]
    assert disjuncts[1].atoms == [b, c]


def test_single_conjunction_single_query():
    a = cmp("le", X, lit(0))
    b = cmp("ge", X, lit(-1))
    prop = q("exists", core.Builtin("and", (a, b), "prop"))
    disjuncts = to_dnf(prop)
    assert len(disjuncts) == 1
    assert disjuncts[0].atoms == [a, b]


def test_dnf_invariants_on_running_example(controller_spec, controller_net):
    [(name, prop, ctx)] = compile_props(
        controller_spec.read_text(), {"controller": str(controller_net)}
    )
    work = eliminate_if(nnf(prop, True))
    disjuncts = to_dnf(work)
    assert len(disjuncts) == 2
    for d in disjuncts:
        assert [b.name for b in d.binders] == ["x_0", "x_1"]
        for atom in d.atoms:
            for sub in core.subterms(atom):
                if isinstance(sub, core.Builtin):
                    assert sub.op not in ("not", "if", "implies")
                assert not isinstance(sub, core.Quant)
    # One disjunct ends E < -1.25 (as -1.25 > E: negation keeps operand
    # order), the other E > 1.25.
    first, second = (d.atoms[-1] for d in disjuncts)
    assert first.op == "gt" and first.args[0] == lit("-1.25")
    assert second.op == "gt" and second.args[1] == lit("1.25")
    assert first.args[1] == second.args[0]  # the same network expression


def test_dnf_semantics_against_truth_tables():
    from generators import disjunction_agrees

    rng = random.Random(8)
    for _ in range(60):
        n_vars = rng.randint(1, 3)
        formula = eliminate_if(nnf(random_formula(rng, n_vars, 3), False))
        disjuncts = to_dnf(close_over(formula, n_vars, kind="exists"))
        assert all(len(d.binders) == n_vars for d in disjuncts)
        assert disjunction_agrees(disjuncts, formula, rng, n_vars, 40, negate=False)


def test_nested_exists_under_and_is_prenexed():
    inner = q("exists", cmp("le", core.Var(0), core.Var(1)), "w")
    prop = q("exists", core.Builtin("and", (cmp("ge", X, lit(0)), inner), "prop"), "v")
    disjuncts = to_dnf(prop)
    assert len(disjuncts) == 1
    d = disjuncts[0]
    assert [b.name for b in d.binders] == ["v", "w"]
    # First atom referenced v (outer); after prenexing it is Var(1).
    assert d.atoms[0] == cmp("ge", core.Var(1), lit(0))
    assert d.atoms[1] == cmp("le", core.Var(0), core.Var(1))


def test_unused_binders_are_dropped():
    # exists v w . v <= 1 with w unused.
    from vspec.queries import Binder

    d = Disjunct([Binder("v", RAT), Binder("w", RAT)], [cmp("le", core.Var(1), lit(1))])
    dropped = drop_unused_binders(d)
    assert [b.name for b in dropped.binders] == ["v"]
    assert dropped.atoms == [cmp("le", core.Var(0), lit(1))]


# -- CSE ---------------------------------------------------------------------------


def napp(name, *args):
    return core.NetworkApp(name, core.TensorLit(tuple(args)))


def test_duplicate_applications_share_one_binding():
    f_a = core.Index(napp("f", core.Var(0)), core.NatLit(0))
    d = Disjunct(
        [__import__("vspec.queries", fromlist=["Binder"]).Binder("a", RAT)],
        [cmp("le", f_a, lit(0)), cmp("ge", f_a, lit(-1))],
    )
    before = sum(
        isinstance(s, core.NetworkApp) for a in d.atoms for s in core.subterms(a)
    )
    cq = cse_network_applications(d)
    after = sum(
        isinstance(s, core.NetworkApp)
        for use in cq.uses
        for s in core.subterms(use.arg)
    ) + len(cq.uses)
    assert before == 2
    assert after == 1
    assert len(cq.uses) == 1
    assert all(
        not isinstance(s, core.NetworkApp) for a in cq.atoms for s in core.subterms(a)
    )


def test_distinct_arguments_get_two_bindings_in_order():
    from vspec.queries import Binder

    f_x1 = core.Index(napp("f", core.Var(1)), core.NatLit(0))
    f_x2 = core.Index(napp("f", core.Var(0)), core.NatLit(0))
    d = Disjunct([Binder("x1", RAT), Binder("x2", RAT)], [cmp("le", f_x1, f_x2)])
    cq = cse_network_applications(d)
    assert len(cq.uses) == 2
    assert cq.uses[0].arg == core.TensorLit((core.Var(1),))
    assert cq.uses[1].arg == core.TensorLit((core.Var(0),))


def test_nested_application_binds_inner_first():
    from vspec.queries import Binder

    inner = core.Index(napp("g", core.Var(0)), core.NatLit(0))
    outer = core.Index(napp("f", inner), core.NatLit(0))
    d = Disjunct([Binder("v", RAT)], [cmp("le", outer, lit(0))])
    cq = cse_network_applications(d)
    assert [u.network for u in cq.uses] == ["g", "f"]
    assert cq.uses[1].arg == core.TensorLit((core.Index(core.AppRef(0), core.NatLit(0)),))


def test_no_applications_unchanged():
    from vspec.queries import Binder

    d = Disjunct([Binder("v", RAT)], [cmp("le", X, lit(0))])
    cq = cse_network_applications(d)
    assert cq.uses == []
    assert cq.atoms == d.atoms


def _eval_with_network(e, env, model, use_values):
    from vspec.networks import evaluate

    def go(e):
        if isinstance(e, core.NetworkApp):
            return tuple(evaluate(model, list(go(e.arg))))
        if isinstance(e, core.AppRef):
            return use_values[e.index]
        if isinstance(e, core.Var):
            return env[len(env) - 1 - e.index]
        if isinstance(e, core.RatLit):
            return e.value
        if isinstance(e, core.NatLit):
            return Fraction(e.value)
        if isinstance(e, core.TensorLit):
            return tuple(go(x) for x in e.items)
        if isinstance(e, core.Index):
            return go(e.tensor)[int(go(e.index))]
        if isinstance(e, core.Builtin):
            args = [go(a) for a in e.args]
            table = {
                "add": lambda a, b: a + b,
                "sub": lambda a, b: a - b,
                "mul": lambda a, b: a * b,
                "neg": lambda a: -a,
                "le": lambda a, b: a <= b,
                "lt": lambda a, b: a < b,
                "ge": lambda a, b: a >= b,
                "gt": lambda a, b: a > b,
                "eq": lambda a, b: a == b,
                "and": lambda a, b: a and b,
                "or": lambda a, b: a or b,
            }
            return table[e.op](*args)
        raise AssertionError(e)

    return go(e)


def test_cse_is_sound_under_network_evaluation():
    # Evaluating a disjunct before and after sharing, on random inputs with
    # a random small network, yields identical truth values; sharing never
    # increases the application count.
    from vspec.networks import Affine, NetworkModel, Relu
    from vspec.queries import Binder

    rng = random.Random(21)
    for _ in range(40):
        hidden = rng.randint(1, 3)
        w1 = tuple((Fraction(rng.randint(-2, 2)),) for _ in range(hidden))
        b1 = tuple(Fraction(rng.randint(-2, 2)) for _ in range(hidden))
        w2 = (tuple(Fraction(rng.randint(-2, 2)) for _ in range(hidden)),)
        model = NetworkModel(
            "f", 1, 1, (Affine(w1, b1), Relu(hidden), Affine(w2, (Fraction(0),)))
        )

        def app(arg):
            return core.Index(napp("f", arg), core.NatLit(0))

        arg_a = core.Var(0)
        arg_b = core.Builtin("add", (core.Var(0), lit(1)))
        atoms = [
            cmp("le", app(arg_a), lit(rng.randint(-3, 3))),
            cmp("ge", core.Builtin("add", (app(arg_a), app(arg_b))), lit(0)),
            cmp("lt", app(arg_b), core.Builtin("mul", (lit(2), core.Var(0)))),
        ]
        d = Disjunct([Binder("v", RAT)], atoms)
        cq = cse_network_applications(d)

        count_before = sum(
            isinstance(s, core.NetworkApp) for a in d.atoms for s in core.subterms(a)
        )
        count_after = len(cq.uses) + sum(
            isinstance(s, core.NetworkApp)
            for chunk in (cq.atoms, [u.arg for u in cq.uses])
            for a in chunk
            for s in core.subterms(a)
        )
        assert count_after <= count_before
        assert count_after == 2  # f v and f (v + 1), shared

        for _ in range(25):
            env = [Fraction(rng.randint(-6, 6), rng.choice((1, 2)))]
            use_values = []
            for use in cq.uses:
                use_values.append(
                    _eval_with_network(
                        core.NetworkApp(use.network, use.arg), env, model, use_values
                    )
                )
            before = all(_eval_with_network(a, env, model, None) for a in d.atoms)
            after = all(
                _eval_with_network(a, env, model, use_values) for a in cq.atoms
            )
            assert before == after


# -- metanetwork --------------------------------------------------------------------


def test_meta_network_offsets_match_fig3_labelling():
    meta = MetaNetwork((("f", 2, 1), ("f", 2, 1), ("g", 3, 2)))
    assert meta.input_offsets == (0, 2, 4)
    assert meta.output_offsets == (0, 1, 2)
    assert meta.total_inputs == 7
    assert meta.total_outputs == 4


def test_meta_network_offsets_are_contiguous():
    meta = MetaNetwork((("a", 3, 2), ("b", 1, 4), ("c", 5, 1)))
    for i in range(len(meta.applications) - 1):
        assert meta.input_offsets[i] + meta.applications[i][1] == meta.input_offsets[i + 1]
        assert (
            meta.output_offsets[i] + meta.applications[i][2] == meta.output_offsets[i + 1]
        )
    assert meta.total_inputs == sum(m for _, m, _ in meta.applications)
    assert meta.total_outputs == sum(n for _, _, n in meta.applications)


def test_empty_meta_network():
    meta = MetaNetwork(())
    assert meta.total_inputs == 0
    assert meta.total_outputs == 0


# -- relationalisation ---------------------------------------------------------------


def test_box_rule_by_hand():
    # let y = f [a, b] in y ! 0 >= 0   becomes
    # a == x0 and b == x1 and y0 >= 0
    from vspec.queries import Binder, CseQuery, NetworkUse

    cq = CseQuery(
        [Binder("a", RAT), Binder("b", RAT)],
        [NetworkUse("f", core.TensorLit((core.Var(1), core.Var(0))))],
        [cmp("ge", core.Index(core.AppRef(0), core.NatLit(0)), lit(0))],
    )
    meta = MetaNetwork((("f", 2, 1),))
    rel = relationalise(cq, meta)
    assert rel.atoms[0] == core.Builtin("eq", (core.Var(1), core.InputVar(0)), "prop")
    assert rel.atoms[1] == core.Builtin("eq", (core.Var(0), core.InputVar(1)), "prop")
    assert rel.atoms[2] == cmp("ge", core.OutputVar(0), lit(0))


def test_no_uses_unchanged():
    from vspec.queries import Binder, CseQuery

    cq = CseQuery([Binder("v", RAT)], [], [cmp("le", X, lit(0))])
    rel = relationalise(cq, MetaNetwork(()))
    assert rel.atoms == cq.atoms


# -- user-variable elimination ---------------------------------------------------------


def test_direct_equations_are_substituted():
    from vspec.queries import Binder, RelationalQuery

    meta = MetaNetwork((("f", 2, 1),))
    rel = RelationalQuery(
        [Binder("p0", RAT), Binder("p1", RAT)],
        [
            core.Builtin("eq", (core.Var(1), core.InputVar(0)), "prop"),
            core.Builtin("eq", (core.Var(0), core.InputVar(1)), "prop"),
            cmp("le", core.Var(1), lit("3.25")),
            cmp("lt", core.OutputVar(0), core.Var(0)),
        ],
        meta,
    )
    lq = eliminate_user_vars(rel)
    assert lq is not None
    assert lq.constraints[0] == LinearConstraint(
        ((QVar("x", 0), Fraction(1)),), "<=", Fraction(13, 4)
    )
    assert lq.constraints[1] == LinearConstraint(
        ((QVar("y", 0), Fraction(1)), (QVar("x", 1), Fraction(-1))), "<", Fraction(0)
    )


def test_nonlinear_atom():
    from vspec.queries import Binder, RelationalQuery

    rel = RelationalQuery(
        [Binder("v", RAT)],
        [
            core.Builtin("eq", (core.Var(0), core.InputVar(0)), "prop"),
            cmp("le", core.OutputVar(0), core.Builtin("mul", (core.Var(0), core.Var(0)))),
        ],
        MetaNetwork((("f", 1, 1),)),
    )
    with pytest.raises(QueryError) as err:
        eliminate_user_vars(rel)
    assert err.value.code == "NonLinearAtom"


def test_constant_false_atom_drops_disjunct():
    from vspec.queries import Binder, RelationalQuery

    rel = RelationalQuery(
        [Binder("v", RAT)],
        [
            core.Builtin("eq", (core.Var(0), core.InputVar(0)), "prop"),
            cmp("lt", core.Var(0), core.Var(0)),  # v < v is constant false
        ],
        MetaNetwork((("f", 1, 1),)),
    )
    assert eliminate_user_vars(rel) is None


def test_constant_true_atom_is_dropped():
    from vspec.queries import Binder, RelationalQuery

    rel = RelationalQuery(
        [Binder("v", RAT)],
        [
            core.Builtin("eq", (core.Var(0), core.InputVar(0)), "prop"),
            cmp("le", lit(1), lit(2)),
        ],
        MetaNetwork((("f", 1, 1),)),
    )
    lq = eliminate_user_vars(rel)
    assert lq is not None
    assert lq.constraints == []


# -- full pipeline ----------------------------------------------------------------------


def one_input_net(tmp_path):
    path = tmp_path / "one.vnet"
    path.write_text("vnet 1\ninput 1\naffine 1 1\n1\n0\n")
    return str(path)


def test_unresolvable_user_variable_full_pipeline(tmp_path):
    source = "network f : Rat -> Rat\n\np : Prop\np = exists v . f (v + 2) <= 0"
    program = typecheck(parse(source))
    analysed, ctx = analyze_network_types(program, {"f": one_input_net(tmp_path)})
    [(name, prop)] = prune_non_prop(analysed)
    with pytest.raises(QueryError) as err:
        compile_property(name, prop, ctx)
    assert err.value.code == "UnresolvableUserVariable"


def test_running_example_compiles_to_two_queries(controller_spec, controller_net):
    [(name, prop, ctx)] = compile_props(
        controller_spec.read_text(), {"controller": str(controller_net)}
    )
    plan = compile_property(name, prop, ctx)
    assert plan.polarity == "AllForall"
    assert plan.negated
    assert len(plan.queries) == 2
    bound = Fraction(13, 4)
    expected_box = [
        LinearConstraint(((QVar("x", 0), Fraction(1)),), ">=", -bound),
        LinearConstraint(((QVar("x", 0), Fraction(1)),), "<=", bound),
        LinearConstraint(((QVar("x", 1), Fraction(1)),), ">=", -bound),
        LinearConstraint(((QVar("x", 1), Fraction(1)),), "<=", bound),
    ]
    mixed = (
        (QVar("y", 0), Fraction(1)),
        (QVar("x", 0), Fraction(2)),
        (QVar("x", 1), Fraction(-1)),
    )
    q1, q2 = plan.queries
    assert q1.constraints[:4] == expected_box
    assert q1.constraints[4] == LinearConstraint(mixed, "<", Fraction(-5, 4))
    assert q2.constraints[:4] == expected_box
    assert q2.constraints[4] == LinearConstraint(mixed, ">", Fraction(5, 4))
    assert q1.meta.applications == (("controller", 2, 1),)


def test_monotonicity_property_compiles_with_two_applications(tmp_path):
    path = tmp_path / "mono.vnet"
    path.write_text("vnet 1\ninput 1\naffine 1 1\n1\n0\n")
    source = (
        "network f : Tensor Rat [1] -> Tensor Rat [1]\n\n"
        "mono : Prop\nmono = forall x1 x2 . x1 <= x2 => f [x1] ! 0 <= f [x2] ! 0"
    )
    program = typecheck(parse(source))
    analysed, ctx = analyze_network_types(program, {"f": str(path)})
    [(name, prop)] = prune_non_prop(analysed)
    plan = compile_property(name, prop, ctx)
    assert len(plan.queries) == 1
    query = plan.queries[0]
    assert query.meta.applications == (("f", 1, 1), ("f", 1, 1))
    assert query.constraints == [
        LinearConstraint(
            ((QVar("x", 0), Fraction(1)), (QVar("x", 1), Fraction(-1))), "<=", Fraction(0)
        ),
        LinearConstraint(
            ((QVar("y", 0), Fraction(1)), (QVar("y", 1), Fraction(-1))), ">", Fraction(0)
        ),
    ]


def test_semantic_preservation_of_negated_pipeline():
    from generators import disjunction_agrees, tractable_formula

    rng = random.Random(11)
    for _ in range(60):
        n_vars = rng.randint(1, 4)
        matrix, prepared = tractable_formula(rng, n_vars, 4, cap=1500, negate=True)
        disjuncts = to_dnf(close_over(prepared, n_vars, kind="exists"))
        assert disjunction_agrees(disjuncts, matrix, rng, n_vars, 40, negate=True)


def test_compiled_evaluator_agrees_with_direct_oracle():
    from oracles import compile_eval

    rng = random.Random(12)
    for _ in range(80):
        n_vars = rng.randint(1, 4)
        formula = random_formula(rng, n_vars, 3)
        fn = compile_eval(formula, n_vars)
        for _ in range(20):
            env = random_assignment(rng, n_vars)
            assert fn(env) == eval_core(formula, env)
