import random
from fractions import Fraction

from oracles import fm_feasible
from vspec.verifier.lp import LPConstraint, LPProblem, feasible


def c(terms, rel, rhs):
    return LPConstraint(tuple((v, Fraction(k)) for v, k in terms.items()), rel, Fraction(rhs))


def holds(constraint: LPConstraint, witness) -> bool:
    total = sum(k * witness[v] for v, k in constraint.terms)
    return {
        "<=": total <= constraint.rhs,
        "<": total < constraint.rhs,
        ">=": total >= constraint.rhs,
        ">": total > constraint.rhs,
        "=": total == constraint.rhs,
    }[constraint.relation]


def test_contradictory_bounds_unsat():
    problem = LPProblem(1, [c({0: 1}, ">=", 1), c({0: 1}, "<=", 0)])
    assert feasible(problem) is None


def test_strict_interval_sat_with_exact_witness():
    problem = LPProblem(1, [c({0: 1}, ">=", 1), c({0: 1}, "<", 2)])
    witness = feasible(problem)
    assert witness is not None
    assert witness[0] >= 1
    assert witness[0] < 2


def test_empty_open_interval_unsat():
    problem = LPProblem(1, [c({0: 1}, "<", 1), c({0: 1}, ">", 1)])
    assert feasible(problem) is None


def test_boundary_only_feasible_point_with_strict_constraint_is_unsat():
    # x >= 1 and x <= 1 force x = 1; x < 1 is then unsatisfiable even
    # though the non-strict relaxation is feasible.
    problem = LPProblem(1, [c({0: 1}, ">=", 1), c({0: 1}, "<=", 1), c({0: 1}, "<", 1)])
    assert feasible(problem) is None


def test_equalities_and_free_variables():
    # x + y = 1, x - y = 3  =>  x = 2, y = -1
    problem = LPProblem(2, [c({0: 1, 1: 1}, "=", 1), c({0: 1, 1: -1}, "=", 3)])
    witness = feasible(problem)
    assert witness == [Fraction(2), Fraction(-1)]


def test_negative_rhs_rows():
    problem = LPProblem(1, [c({0: 1}, "<=", -5), c({0: 1}, ">=", -10)])
    witness = feasible(problem)
    assert witness is not None
    assert -10 <= witness[0] <= -5


def test_unconstrained_problem_is_feasible():
    assert feasible(LPProblem(3, [])) == [Fraction(0)] * 3


def test_determinism():
    problem = LPProblem(
        3,
        [
            c({0: 1, 1: 2}, "<=", 4),
            c({1: 1, 2: -1}, ">=", -2),
            c({0: 1, 2: 1}, "=", 1),
            c({0: 1}, ">", -3),
        ],
    )
    first = feasible(problem)
    second = feasible(problem)
    assert first == second


def random_problem(rng: random.Random):
    n = rng.randint(1, 4)
    m = rng.randint(1, 6)
    constraints = []
    for _ in range(m):
        terms = {}
        for v in range(n):
            coeff = rng.randint(-3, 3)
            if coeff:
                terms[v] = Fraction(coeff)
        if not terms:
            terms[rng.randrange(n)] = Fraction(1)
        rel = rng.choice(["<=", "<", ">=", ">", "="])
        constraints.append(
            LPConstraint(tuple(terms.items()), rel, Fraction(rng.randint(-6, 6)))
        )
    return LPProblem(n, constraints)


def test_agreement_with_fourier_motzkin_oracle():
    rng = random.Random(20260101)
    disagreements = 0
    for _ in range(400):
        problem = random_problem(rng)
        witness = feasible(problem)
        oracle = fm_feasible(
            problem.num_vars,
            [(dict(c.terms), c.relation, c.rhs) for c in problem.constraints],
        )
        if (witness is not None) != oracle:
            disagreements += 1
        if witness is not None:
            assert all(holds(c, witness) for c in problem.constraints)
    assert disagreements == 0


def test_witnesses_satisfy_every_relation_kind():
    rng = random.Random(77)
    for _ in range(200):
        problem = random_problem(rng)
        witness = feasible(problem)
        if witness is not None:
            for constraint in problem.constraints:
                assert holds(constraint, witness)
