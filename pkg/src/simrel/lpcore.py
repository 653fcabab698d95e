"""Exact rational LP feasibility via phase-1 simplex with Bland's rule."""

from __future__ import annotations

from collections.abc import Hashable, Mapping
from fractions import Fraction

from .stats import Stats

__all__ = ["LpProblem", "feasible"]

_RELATIONS = ("<=", "=", ">=")


class LpProblem:
    """Named variables with optional bounds and sparse linear constraints."""

    def __init__(self) -> None:
        self.variables: dict[Hashable, tuple[Fraction | None, Fraction | None]] = {}
        self.constraints: list[tuple[dict[Hashable, Fraction], str, Fraction]] = []

    def add_variable(self, name: Hashable, lo: Fraction | int | None = 0,
                     hi: Fraction | int | None = None) -> Hashable:
        if name in self.variables:
            raise ValueError(f"variable {name!r} declared twice")
        lo = None if lo is None else Fraction(lo)
        hi = None if hi is None else Fraction(hi)
        self.variables[name] = (lo, hi)
        return name

    def add_constraint(self, coeffs: Mapping[Hashable, Fraction | int], relation: str,
                       rhs: Fraction | int) -> None:
        if relation not in _RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        row = {}
        for name, a in coeffs.items():
            if name not in self.variables:
                raise ValueError(f"constraint references undeclared variable {name!r}")
            a = Fraction(a)
            if a:
                row[name] = row.get(name, 0) + a
        self.constraints.append((row, relation, Fraction(rhs)))

    def satisfied_by(self, assignment: Mapping[Hashable, Fraction]) -> bool:
        for name, (lo, hi) in self.variables.items():
            x = assignment[name]
            if (lo is not None and x < lo) or (hi is not None and x > hi):
                return False
        for row, relation, rhs in self.constraints:
            lhs = sum((a * assignment[name] for name, a in row.items()), Fraction(0))
            if relation == "<=" and lhs > rhs:
                return False
            if relation == ">=" and lhs < rhs:
                return False
            if relation == "=" and lhs != rhs:
                return False
        return True

    def __repr__(self) -> str:
        return f"LpProblem({len(self.variables)} variables, {len(self.constraints)} constraints)"


def feasible(lp: LpProblem, stats: Stats | None = None) -> dict[Hashable, Fraction] | None:
    """Return an assignment satisfying every constraint exactly, or None."""
    # Substitute x = offset + sum(sign * column) with nonnegative columns.
    columns = 0
    expansion: dict[Hashable, tuple[Fraction, list[tuple[int, int]]]] = {}
    rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
    for name, (lo, hi) in lp.variables.items():
        if lo is not None:
            expansion[name] = (lo, [(columns, 1)])
            if hi is not None:
                rows.append(({columns: Fraction(1)}, "<=", hi - lo))
            columns += 1
        elif hi is not None:
            expansion[name] = (hi, [(columns, -1)])
            columns += 1
        else:
            expansion[name] = (Fraction(0), [(columns, 1), (columns + 1, -1)])
            columns += 2
    for coeffs, relation, rhs in lp.constraints:
        row: dict[int, Fraction] = {}
        for name, a in coeffs.items():
            offset, cols = expansion[name]
            rhs -= a * offset
            for col, sign in cols:
                row[col] = row.get(col, 0) + sign * a
        rows.append(({c: v for c, v in row.items() if v}, relation, rhs))

    # Slack columns, then artificial columns where no slack can start basic.
    tableau: list[dict[int, Fraction]] = []
    rhs_col: list[Fraction] = []
    basis: list[int] = []
    pending: list[int] = []
    for row, relation, rhs in rows:
        row = dict(row)
        slack = None
        if relation != "=":
            slack = columns
            row[slack] = Fraction(1 if relation == "<=" else -1)
            columns += 1
        if rhs < 0:
            row = {c: -v for c, v in row.items()}
            rhs = -rhs
        tableau.append(row)
        rhs_col.append(rhs)
        if slack is not None and row[slack] == 1:
            basis.append(slack)
        else:
            basis.append(-1)
            pending.append(len(tableau) - 1)
    first_artificial = columns
    for i in pending:
        tableau[i][columns] = Fraction(1)
        basis[i] = columns
        columns += 1

    # Reduced costs of w = sum of artificials, written over nonbasic columns.
    cost: dict[int, Fraction] = {}
    value = Fraction(0)
    for i in pending:
        value += rhs_col[i]
        for c, a in tableau[i].items():
            if c < first_artificial:
                cost[c] = cost.get(c, 0) - a

    pivots = 0
    while value > 0:
        entering = min((c for c, d in cost.items() if d < 0), default=None)
        if entering is None:
            break
        leave_row = -1
        best = None
        for i, row in enumerate(tableau):
            a = row.get(entering, 0)
            if a > 0:
                ratio = rhs_col[i] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave_row]):
                    best, leave_row = ratio, i
        # Phase 1 is bounded below by zero, so some row always qualifies.
        pivot_row = tableau[leave_row]
        a = pivot_row[entering]
        if a != 1:
            pivot_row = {c: v / a for c, v in pivot_row.items()}
            tableau[leave_row] = pivot_row
            rhs_col[leave_row] /= a
        prhs = rhs_col[leave_row]
        for i, row in enumerate(tableau):
            if i == leave_row:
                continue
            factor = row.get(entering)
            if factor:
                for c, v in pivot_row.items():
                    nv = row.get(c, 0) - factor * v
                    if nv:
                        row[c] = nv
                    else:
                        row.pop(c, None)
                rhs_col[i] -= factor * prhs
        factor = cost.get(entering)
        if factor:
            for c, v in pivot_row.items():
                nv = cost.get(c, 0) - factor * v
                if nv:
                    cost[c] = nv
                else:
                    cost.pop(c, None)
            value += factor * prhs
        leaving = basis[leave_row]
        basis[leave_row] = entering
        if leaving >= first_artificial:
            # A nonbasic artificial never needs to re-enter.
            cost.pop(leaving, None)
            for row in tableau:
                row.pop(leaving, None)
        pivots += 1

    if stats is not None:
        stats.bump("lp_count")
        stats.bump("lp_pivots", pivots)
        stats.raise_to("lp_max_constraints", len(lp.constraints))
    if value > 0:
        return None

    x = [Fraction(0)] * columns
    for i, col in enumerate(basis):
        x[col] = rhs_col[i]
    assignment = {
        name: offset + sum((sign * x[col] for col, sign in cols), Fraction(0))
        for name, (offset, cols) in expansion.items()
    }
    assert lp.satisfied_by(assignment), "simplex returned an assignment violating a constraint"
    return assignment
