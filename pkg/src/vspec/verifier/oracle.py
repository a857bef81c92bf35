"""One-sided grid-search oracle for linear queries.

Evaluates the exact networks on every point of a rational grid over the
query's input box and reports the first point satisfying every constraint;
it never reports unsatisfiability.  Used as an independent check on the
complete decision procedure.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from ..errors import VerifyError
from ..networks import NetworkContext, evaluate
from ..queries import LinearConstraint, LinearQuery, QVar
from ..verdicts import Sat

ZERO = Fraction(0)


def constraint_holds(c: LinearConstraint, values: dict[QVar, Fraction]) -> bool:
    total = sum((k * values[v] for v, k in c.terms), start=ZERO)
    return {
        "<=": total <= c.constant,
        "<": total < c.constant,
        ">=": total >= c.constant,
        ">": total > c.constant,
        "=": total == c.constant,
    }[c.relation]


def query_box(query: LinearQuery) -> list[tuple[Fraction, Fraction]]:
    """Closed per-input bounds from the query's single-variable constraints;
    raises when any input is unbounded on either side."""
    bounds: dict[int, tuple[Fraction | None, Fraction | None]] = {
        i: (None, None) for i in range(query.meta.total_inputs)
    }
    for c in query.constraints:
        if len(c.terms) != 1:
            continue
        (var, coeff), = c.terms
        if var.kind != "x":
            continue
        value = c.constant / coeff
        rel = c.relation
        if coeff < 0:
            rel = {"<=": ">=", "<": ">", ">=": "<=", ">": "<", "=": "="}[rel]
        lo, hi = bounds[var.index]
        if rel in ("<=", "<"):
            hi = value if hi is None else min(hi, value)
        elif rel in (">=", ">"):
            lo = value if lo is None else max(lo, value)
        else:
            lo, hi = value, value
        bounds[var.index] = (lo, hi)
    box = []
    for i in range(query.meta.total_inputs):
        lo, hi = bounds[i]
        if lo is None or hi is None:
            raise VerifyError(
                "UnboundedInput", f"input x{i} has no finite box bounds in the query"
            )
        box.append((lo, hi))
    return box


def evaluate_networks(
    query: LinearQuery, ctx: NetworkContext, inputs: list[Fraction]
) -> dict[QVar, Fraction]:
    """Assignment for all relational variables given metanetwork inputs."""
    values: dict[QVar, Fraction] = {
        QVar("x", i): v for i, v in enumerate(inputs)
    }
    in_off = query.meta.input_offsets
    out_off = query.meta.output_offsets
    for a, (name, m, n) in enumerate(query.meta.applications):
        outs = evaluate(ctx[name].model, inputs[in_off[a] : in_off[a] + m])
        for t in range(n):
            values[QVar("y", out_off[a] + t)] = outs[t]
    return values


def grid_oracle(
    query: LinearQuery, ctx: NetworkContext, resolution: int = 8
) -> Sat | None:
    """SAT with the first satisfying grid point, or None (unknown)."""
    box = query_box(query)
    axes = []
    for lo, hi in box:
        if lo == hi:
            axes.append([lo])
        else:
            step = (hi - lo) / resolution
            axes.append([lo + step * k for k in range(resolution + 1)])
    for point in itertools.product(*axes):
        values = evaluate_networks(query, ctx, list(point))
        if all(constraint_holds(c, values) for c in query.constraints):
            return Sat(tuple(sorted(values.items())))
    return None
