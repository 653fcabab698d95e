"""Strong probabilistic simulation of PAs and CPAs by LP feasibility.

A transition of s1 must be matched by a convex combination of the
same-action transitions of s2 (for CPAs: only those sharing one exit rate).
"""

from __future__ import annotations

from fractions import Fraction

from .lpcore import LpProblem, feasible
from .models import BOT, Distribution, Kind, Model, ModelError, RateFunction, Relation
from .stats import Stats
from .strongsim import initial_relation, parallel_map

__all__ = [
    "build_lp_cpa",
    "build_lp_pa",
    "combined_match",
    "exit_rate_classes",
    "simrel_cpa_prob",
    "simrel_pa_prob",
    "simrel_prob",
]

ONE = Fraction(1)


def _coupling(lp: LpProblem, left: dict[int, Fraction], right_support: list[int],
              rel: Relation) -> dict[int, list[tuple[int, int]]]:
    """Add f_(s,t) variables for related pairs; return them grouped by t."""
    by_target: dict[int, list[tuple[int, int]]] = {t: [] for t in right_support}
    for s in sorted(left):
        row = {}
        for t in right_support:
            if s == BOT or (t != BOT and (s, t) in rel):
                name = ("f", s, t)
                lp.add_variable(name, 0, 1)
                row[name] = ONE
                by_target[t].append((s, t))
        lp.add_constraint(row, "=", left[s])
    return by_target


def _coefficients(lp: LpProblem, k: int) -> list[tuple]:
    names = [("c", i) for i in range(k)]
    for name in names:
        lp.add_variable(name, 0, 1)
    lp.add_constraint({name: ONE for name in names}, "=", 1)
    return names


def build_lp_pa(model: Model, s1: int, alpha: str, mu: Distribution, s2: int, rel: Relation) -> LpProblem:
    """LP whose feasibility means mu is matched by a combined alpha-transition of s2."""
    candidates = model.steps_of(s2, alpha)
    if not candidates:
        raise ValueError(f"state {s2} has no {alpha!r} transitions")
    lp = LpProblem()
    c = _coefficients(lp, len(candidates))
    right = sorted(set().union(*(d.with_bot() for d in candidates)))
    by_target = _coupling(lp, mu.with_bot(), right, rel)
    for t in right:
        row = {("f", s, t): ONE for s, _ in by_target[t]}
        for name, d in zip(c, candidates):
            weight = d.deficit if t == BOT else d(t)
            if weight:
                row[name] = row.get(name, 0) - weight
        lp.add_constraint(row, "=", 0)
    return lp


def exit_rate_classes(model: Model, s: int, alpha: str) -> list[Fraction]:
    """Distinct exit rates among the alpha rate functions of s, ascending."""
    return sorted({r.exit_rate for r in model.steps_of(s, alpha)})


def build_lp_cpa(model: Model, s1: int, alpha: str, r: RateFunction, s2: int, E: Fraction,
                 rel: Relation) -> LpProblem:
    """LP matching rate function r against combinations of s2's alpha functions with exit rate E."""
    candidates = [q for q in model.steps_of(s2, alpha) if q.exit_rate == E]
    if not candidates:
        raise ValueError(f"state {s2} has no {alpha!r} rate function with exit rate {E}")
    total = r.exit_rate
    assert E >= total > 0
    lp = LpProblem()
    c = _coefficients(lp, len(candidates))
    right = sorted(set().union(*(set(q) for q in candidates)))
    left = {s: v / total for s, v in r.items()}
    by_target = _coupling(lp, left, right, rel)
    for t in right:
        row = {("f", s, t): E for s, _ in by_target[t]}
        for name, q in zip(c, candidates):
            if q(t):
                row[name] = row.get(name, 0) - q(t)
        lp.add_constraint(row, "=", 0)
    return lp


def combined_match(model: Model, s1: int, alpha: str, index: int, s2: int, rel: Relation,
                   stats: Stats | None = None) -> dict | None:
    """Witness assignment for one transition of s1, or None when unmatched."""
    if model.kind is Kind.PA:
        if not model.steps_of(s2, alpha):
            return None
        mu = model.steps_of(s1, alpha)[index]
        return feasible(build_lp_pa(model, s1, alpha, mu, s2, rel), stats)
    r = model.steps_of(s1, alpha)[index]
    if r.exit_rate == 0:
        return {}
    for E in exit_rate_classes(model, s2, alpha):
        if E < r.exit_rate:
            continue
        witness = feasible(build_lp_cpa(model, s1, alpha, r, s2, E, rel), stats)
        if witness is not None:
            return {**witness, "E": E}
    return None


def _simulates(model: Model, s1: int, s2: int, rel: Relation, stats: Stats | None) -> bool:
    for alpha in sorted(model.actions[s1]):
        for index in range(len(model.steps_of(s1, alpha))):
            if combined_match(model, s1, alpha, index, s2, rel, stats) is None:
                return False
    return True


def _fixpoint(model: Model, stats: Stats | None, workers: int) -> Relation:
    rel = initial_relation(model)
    while True:
        if stats is not None:
            stats.bump("iterations")
        current = rel
        pairs = list(current)
        verdicts = parallel_map(lambda p: _simulates(model, p[0], p[1], current, stats), pairs, workers)
        rel = Relation(p for p, ok in zip(pairs, verdicts) if ok)
        if rel == current:
            return rel


def simrel_pa_prob(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    """Strong probabilistic simulation preorder of a PA."""
    if model.kind is not Kind.PA:
        raise ModelError(f"expected a PA, got {model.kind.value}")
    return _fixpoint(model, stats, workers)


def simrel_cpa_prob(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    """Strong probabilistic simulation preorder of a CPA."""
    if model.kind is not Kind.CPA:
        raise ModelError(f"expected a CPA, got {model.kind.value}")
    return _fixpoint(model, stats, workers)


def simrel_prob(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    if model.kind is Kind.PA:
        return simrel_pa_prob(model, stats, workers)
    return simrel_cpa_prob(model, stats, workers)
