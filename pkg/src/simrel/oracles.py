"""Reference implementations built only on LP feasibility.

Nothing here touches the flow machinery or the engines; the model types and
``lpcore`` are the only shared code, so agreement with the engines is a
meaningful check.
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Mapping
from fractions import Fraction

from .lpcore import LpProblem, feasible
from .models import Kind, Model, Relation, embedded_dtmc

__all__ = [
    "MAX_STATES",
    "SizeBoundError",
    "naive_simrel",
    "valid_gamma_oracle",
    "weak_up_to",
    "weight_oracle",
    "weight_witness",
]

MAX_STATES = 16

_BOT = ("bot",)


class SizeBoundError(ValueError):
    """The model is too large for the brute-force oracles."""


def _with_deficit(mu: Mapping[int, Fraction]) -> dict[Hashable, Fraction]:
    out: dict[Hashable, Fraction] = {s: Fraction(p) for s, p in mu.items() if p}
    deficit = 1 - sum(out.values(), Fraction(0))
    if deficit:
        out[_BOT] = deficit
    return out


def _related(s: Hashable, t: Hashable, pairs: frozenset) -> bool:
    return s == _BOT or (t != _BOT and (s, t) in pairs)


def _coupling_lp(left: Mapping[Hashable, Fraction], right: Mapping[Hashable, object],
                 pairs: frozenset) -> tuple[LpProblem, dict[Hashable, dict]]:
    """Delta variables on related pairs with fixed row sums; column rows returned for the caller."""
    lp = LpProblem()
    columns: dict[Hashable, dict] = {t: {} for t in right}
    for s, mass in left.items():
        row = {}
        for t in right:
            if _related(s, t, pairs):
                name = ("delta", s, t)
                lp.add_variable(name, 0, 1)
                row[name] = 1
                columns[t][name] = 1
        lp.add_constraint(row, "=", mass)
    return lp, columns


def weight_witness(mu1: Mapping[int, Fraction], mu2: Mapping[int, Fraction],
                   rel: Iterable[tuple[int, int]]) -> dict | None:
    """A weight function for (mu1, mu2) w.r.t. ``rel`` as {(s, t): mass}, or None.

    Deficits appear under the key ``("bot",)``.
    """
    pairs = frozenset(rel)
    left, right = _with_deficit(mu1), _with_deficit(mu2)
    lp, columns = _coupling_lp(left, right, pairs)
    for t, mass in right.items():
        lp.add_constraint(columns[t], "=", mass)
    solution = feasible(lp)
    if solution is None:
        return None
    return {(s, t): v for (_, s, t), v in solution.items() if v}


def weight_oracle(mu1: Mapping[int, Fraction], mu2: Mapping[int, Fraction],
                  rel: Iterable[tuple[int, int]]) -> bool:
    """Whether a weight function exists, decided by one LP over the couplings."""
    return weight_witness(mu1, mu2, rel) is not None


def _combined_lp(left: Mapping[Hashable, Fraction], candidates: list[Mapping[Hashable, Fraction]],
                 pairs: frozenset, scale: Fraction = Fraction(1)) -> dict | None:
    """Couple ``left`` with sum_i c_i * candidate_i / scale for some convex c."""
    right: set[Hashable] = set()
    for cand in candidates:
        right |= set(cand)
    lp, columns = _coupling_lp(left, {t: None for t in sorted(right, key=repr)}, pairs)
    coeffs = [lp.add_variable(("c", i), 0, 1) for i in range(len(candidates))]
    lp.add_constraint({c: 1 for c in coeffs}, "=", 1)
    for t, row in columns.items():
        row = dict(row)
        for c, cand in zip(coeffs, candidates):
            if cand.get(t):
                row[c] = -cand[t] / scale
        lp.add_constraint(row, "=", 0)
    return feasible(lp)


def _prob_match_pa(mu: Mapping[int, Fraction], candidates, pairs: frozenset) -> bool:
    return _combined_lp(_with_deficit(mu), [_with_deficit(d) for d in candidates], pairs) is not None


def _prob_match_cpa(r: Mapping[int, Fraction], candidates, pairs: frozenset) -> bool:
    total = sum(r.values(), Fraction(0))
    if total == 0:
        return True
    left = {s: v / total for s, v in r.items()}
    rates = sorted({sum(q.values(), Fraction(0)) for q in candidates})
    for E in rates:
        if E < total:
            continue
        group = [dict(q) for q in candidates if sum(q.values(), Fraction(0)) == E]
        if _combined_lp(left, group, pairs, E) is not None:
            return True
    return False


def _flow_gamma_lp(p1: Mapping, p2: Mapping, edges: Iterable[tuple], mu1: Iterable, mu2: Iterable,
                   bound: Fraction | None = None, fixed: Fraction | None = None) -> Fraction | None:
    """Joint LP over inner flows and gamma; returns a feasible gamma or None."""
    mu1, mu2 = set(mu1), set(mu2)
    lp = LpProblem()
    gamma = lp.add_variable("gamma", 0, bound)
    if fixed is not None:
        lp.add_constraint({gamma: 1}, "=", fixed)
    out_rows: dict = {s: {} for s in p1}
    in_rows: dict = {t: {} for t in p2}
    for k, (s, t) in enumerate(edges):
        name = ("f", k)
        lp.add_variable(name, 0)
        out_rows[s][name] = 1
        in_rows[t][name] = 1
    for s, cap in p1.items():
        lp.add_constraint(out_rows[s], "=" if s in mu1 else "<=", cap)
    for t, base in p2.items():
        row = {**in_rows[t], gamma: -Fraction(base)}
        lp.add_constraint(row, "=" if t in mu2 else "<=", 0)
    solution = feasible(lp)
    return None if solution is None else solution[gamma]


def valid_gamma_oracle(pn, bound: Fraction | None = None, fixed: Fraction | None = None) -> Fraction | None:
    """Some gamma admitting a flow that saturates every mandatory edge, or None.

    ``pn`` needs ``source_caps``, ``sink_base``, ``edges``, ``mu1`` and ``mu2``.
    """
    return _flow_gamma_lp(pn.source_caps, pn.sink_base, pn.edges, pn.mu1, pn.mu2, bound, fixed)


def _successors(row: Mapping[int, Fraction]) -> set[int]:
    return {t for t, p in row.items() if p}


def weak_up_to(model: Model, s1: int, s2: int, rel: Iterable[tuple[int, int]]) -> bool:
    """Whether s2 weakly simulates s1 up to ``rel``, read off the definition."""
    pairs = frozenset(rel)
    ctmc = model.kind is Kind.CTMC
    rows = embedded_dtmc(model).rows if ctmc else model.rows
    p1, p2 = dict(rows[s1]), dict(rows[s2])
    # Stutter steps must stay related, which forces these fragments to be visible.
    must1 = {u for u in _successors(p1) if (u, s2) not in pairs}
    must2 = {u for u in _successors(p2) if (s1, u) not in pairs}
    if not must1:
        return True
    if not ctmc and not must2:
        # No visible step from s2: only the reachability condition remains.
        frontier, seen = [s2], {s2}
        while frontier:
            w = frontier.pop()
            for x in _successors(rows[w]):
                if (s1, x) in pairs and x not in seen:
                    seen.add(x)
                    frontier.append(x)
        hits = set()
        for w in seen:
            hits |= _successors(rows[w])
        if all(any((u, x) in pairs for x in hits) for u in must1):
            return True
    edges = [(u, v) for u in p1 for v in p2 if (u, v) in pairs]
    bound = None
    if ctmc:
        bound = model.rows[s2].exit_rate / model.rows[s1].exit_rate
    return _flow_gamma_lp(p1, p2, edges, must1, must2, bound) is not None


def _strong_rows(model: Model):
    if model.kind is Kind.CTMC:
        return embedded_dtmc(model).rows
    return model.rows


def _restrict(pairs: frozenset, left: Iterable[int], right: Iterable[int]) -> frozenset:
    left, right = set(left), set(right)
    return frozenset((a, b) for a, b in pairs if a in left and b in right)


def naive_simrel(model: Model, kind: str = "strong") -> Relation:
    """Greatest fixpoint of the one-step check, with every check an LP.

    ``kind`` is "strong", "strong-prob" or "weak".
    """
    if model.n > MAX_STATES:
        raise SizeBoundError(f"oracle engines accept at most {MAX_STATES} states, got {model.n}")
    n = model.n
    pairs = {(a, b) for a in range(n) for b in range(n) if model.labels[a] == model.labels[b]}
    automaton = model.kind.is_automaton

    if kind == "weak":
        if model.kind not in (Kind.DTMC, Kind.CTMC):
            raise ValueError("weak simulation needs a DTMC or CTMC")

        def check(s1: int, s2: int, current: frozenset) -> bool:
            return weak_up_to(model, s1, s2, current)

    elif kind == "strong" and not automaton:
        rows = _strong_rows(model)
        if model.kind is Kind.CTMC:
            pairs = {(a, b) for a, b in pairs if model.rows[a].exit_rate <= model.rows[b].exit_rate}
        cache: dict = {}

        def check(s1: int, s2: int, current: frozenset) -> bool:
            key = (s1, s2, _restrict(current, rows[s1], rows[s2]))
            if key not in cache:
                cache[key] = weight_oracle(rows[s1], rows[s2], key[2])
            return cache[key]

    elif automaton and kind in ("strong", "strong-prob"):
        pairs = {(a, b) for a, b in pairs if model.actions[a] <= model.actions[b]}
        cpa = model.kind is Kind.CPA

        def one(step, action: str, s2: int, current: frozenset) -> bool:
            candidates = model.steps_of(s2, action)
            if kind == "strong-prob":
                if cpa:
                    return _prob_match_cpa(step, candidates, current)
                return _prob_match_pa(step, candidates, current)
            if not cpa:
                return any(weight_oracle(step, d, current) for d in candidates)
            total = sum(step.values(), Fraction(0))
            if total == 0:
                return True
            left = {s: v / total for s, v in step.items()}
            for q in candidates:
                rate = sum(q.values(), Fraction(0))
                if rate >= total and weight_oracle(left, {t: v / rate for t, v in q.items()}, current):
                    return True
            return False

        def check(s1: int, s2: int, current: frozenset) -> bool:
            return all(
                one(step, action, s2, current)
                for action in sorted(model.actions[s1])
                for step in model.steps_of(s1, action)
            )

    else:
        raise ValueError(f"relation {kind!r} is not defined for {model.kind.value} models")

    current = frozenset(pairs)
    while True:
        kept = frozenset(p for p in current if check(p[0], p[1], current))
        if kept == current:
            return Relation(current)
        current = kept
