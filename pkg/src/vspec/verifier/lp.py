"""Exact rational LP feasibility via two-phase primal simplex.

Decides feasibility of a system of linear constraints over free rational
variables, with mixed strict and non-strict relations, exactly:

* free variables split into nonnegative pairs,
* each strict constraint ``a.v < c`` becomes ``a.v + eps <= c`` and the
  phase-2 objective maximises ``eps`` (capped at 1),
* optimum ``eps > 0`` means strictly feasible (witness extracted from the
  basis); optimum 0 with strict rows present, or phase-1 infeasibility,
  means infeasible.

Pivoting uses Bland's rule (smallest eligible column; ties in the ratio
test broken by smallest basic variable), which guarantees termination and
makes witnesses deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class LPConstraint:
    """sum(terms[v] * v) REL rhs over variable ids 0..n-1."""

    terms: tuple[tuple[int, Fraction], ...]
    relation: str  # "<=", "<", ">=", ">", "="
    rhs: Fraction


@dataclass
class LPProblem:
    """Feasibility problem: named rational variables and mixed constraints."""

    num_vars: int
    constraints: list[LPConstraint]


def feasible(problem: LPProblem) -> list[Fraction] | None:
    """Return an exact witness (one value per variable) or None."""
    n = problem.num_vars
    rows: list[tuple[list[Fraction], str, Fraction, bool]] = []
    any_strict = False
    for c in problem.constraints:
        coeffs = [ZERO] * n
        for v, k in c.terms:
            coeffs[v] += k
        rel, rhs = c.relation, c.rhs
        if rel in (">=", ">"):
            coeffs = [-k for k in coeffs]
            rhs = -rhs
            rel = "<=" if rel == ">=" else "<"
        strict = rel == "<"
        any_strict = any_strict or strict
        rows.append((coeffs, "=" if rel == "=" else "<=", rhs, strict))

    ns = 2 * n + (1 if any_strict else 0)  # structural columns
    eps_col = 2 * n if any_strict else None

    # Build equality-form rows (structural coefficients, relation, rhs).
    table_rows: list[list[Fraction]] = []
    rels: list[str] = []
    rhss: list[Fraction] = []
    for coeffs, rel, rhs, strict in rows:
        struct = [ZERO] * ns
        for v, k in enumerate(coeffs):
            if k:
                struct[2 * v] = k
                struct[2 * v + 1] = -k
        if strict:
            struct[eps_col] = ONE  # type: ignore[index]
        table_rows.append(struct)
        rels.append(rel)
        rhss.append(rhs)
    if any_strict:
        cap = [ZERO] * ns
        cap[eps_col] = ONE  # type: ignore[index]
        table_rows.append(cap)
        rels.append("<=")
        rhss.append(ONE)

    m = len(table_rows)
    # Assign slack columns for <= rows, then artificials where needed.
    slack_col: list[int | None] = [None] * m
    col = ns
    for i in range(m):
        if rels[i] == "<=":
            slack_col[i] = col
            col += 1
    art_start = col
    art_col: list[int | None] = [None] * m
    for i in range(m):
        negate = rhss[i] < 0
        if negate:
            table_rows[i] = [-k for k in table_rows[i]]
            rhss[i] = -rhss[i]
        needs_artificial = rels[i] == "=" or negate
        if needs_artificial:
            art_col[i] = col
            col += 1
    n_cols = col

    tableau = []
    basis: list[int] = []
    for i in range(m):
        row = table_rows[i] + [ZERO] * (n_cols - ns) + [rhss[i]]
        sc = slack_col[i]
        if sc is not None:
            # A sign-normalised (negated) <= row carries slack coefficient -1.
            row[sc] = -ONE if art_col[i] is not None else ONE
        ac = art_col[i]
        if ac is not None:
            row[ac] = ONE
            basis.append(ac)
        else:
            assert sc is not None
            basis.append(sc)
        tableau.append(row)

    artificials = set(range(art_start, n_cols))

    # Phase 1: maximise -(sum of artificials); optimum must be 0.
    if artificials:
        cost1 = [ZERO] * n_cols
        for a in artificials:
            cost1[a] = -ONE
        _simplex(tableau, basis, cost1, n_cols)
        if any(tableau[i][n_cols] != 0 for i in range(m) if basis[i] in artificials):
            return None
        _drive_out_artificials(tableau, basis, artificials, n_cols)

    if eps_col is not None:
        cost2 = [ZERO] * n_cols
        cost2[eps_col] = ONE
        _simplex(tableau, basis, cost2, n_cols, banned=artificials)
        eps_value = _basic_value(tableau, basis, eps_col, n_cols)
        if eps_value <= 0:
            return None

    witness = []
    for v in range(n):
        pos = _basic_value(tableau, basis, 2 * v, n_cols)
        neg = _basic_value(tableau, basis, 2 * v + 1, n_cols)
        witness.append(pos - neg)
    return witness


def _basic_value(tableau, basis, column, n_cols) -> Fraction:
    for i, b in enumerate(basis):
        if b == column:
            return tableau[i][n_cols]
    return ZERO


def _simplex(tableau, basis, cost, n_cols, banned: set[int] | None = None) -> None:
    """Primal simplex (maximisation) with Bland's rule; mutates in place."""
    banned = banned or set()
    m = len(tableau)
    while True:
        # Reduced costs: c_j - c_B . T[:, j]
        entering = -1
        for j in range(n_cols):
            if j in banned or j in basis:
                continue
            reduced = cost[j]
            for i in range(m):
                cb = cost[basis[i]]
                if cb:
                    reduced -= cb * tableau[i][j]
            if reduced > 0:
                entering = j
                break
        if entering == -1:
            return
        leaving = -1
        best: Fraction | None = None
        for i in range(m):
            a = tableau[i][entering]
            if a > 0:
                ratio = tableau[i][n_cols] / a
                if best is None or ratio < best or (
                    ratio == best and basis[i] < basis[leaving]
                ):
                    best = ratio
                    leaving = i
        if leaving == -1:
            raise AssertionError("LP objective is unbounded; the eps cap is missing")
        _pivot(tableau, basis, leaving, entering, n_cols)


def _pivot(tableau, basis, row, col, n_cols) -> None:
    pivot = tableau[row][col]
    inv = ONE / pivot
    tableau[row] = [k * inv for k in tableau[row]]
    for i in range(len(tableau)):
        if i == row:
            continue
        factor = tableau[i][col]
        if factor:
            pr = tableau[row]
            tableau[i] = [a - factor * b for a, b in zip(tableau[i], pr)]
    basis[row] = col


def _drive_out_artificials(tableau, basis, artificials, n_cols) -> None:
    """Pivot basic artificials (at value 0) out, or drop redundant rows."""
    i = 0
    while i < len(tableau):
        if basis[i] in artificials:
            pivot_col = next(
                (
                    j
                    for j in range(n_cols)
                    if j not in artificials and tableau[i][j] != 0
                ),
                None,
            )
            if pivot_col is None:
                del tableau[i]
                del basis[i]
                continue
            _pivot(tableau, basis, i, pivot_col, n_cols)
        i += 1
