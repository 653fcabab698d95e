"""Weak simulation of DTMCs and CTMCs via parametric maximum flows.

For a pair (s1, s2) the successors split into mandatory states (MU, which
must be matched visibly) and optional ones (PV, which may be stuttered
through).  The one-step check then asks whether some scaling gamma of s2's
row admits a flow that saturates every mandatory edge.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction

from .flownet import (
    GammaClass,
    ParametricNetwork,
    breakpoints,
    classify_gamma,
    find_valid_breakpoint,
    max_cost_max_flow,
    valid_interval,
)
from .models import Kind, Model, ModelError, Relation, embedded_dtmc, label_equal_pairs
from .stats import Stats
from .strongsim import parallel_map

__all__ = [
    "IterationSchedule",
    "WeakCheckContext",
    "a_classes",
    "incomplete_iteration_schedule",
    "parametric_network",
    "simrel_w",
    "weak_witness",
    "ws_check",
    "ws_check_ctmc",
    "ws_improved_check",
]


@dataclass
class WeakCheckContext:
    s1: int
    s2: int
    mu1: frozenset[int]
    pv1: frozenset[int]
    mu2: frozenset[int]
    pv2: frozenset[int]
    network: ParametricNetwork


def _partition(dtmc: Model, s1: int, s2: int, rel: Relation):
    post1, post2 = dtmc.post(s1), dtmc.post(s2)
    pv1 = post1 & rel.preimage(s2)
    pv2 = post2 & rel.image(s1)
    return post1 - pv1, pv1, post2 - pv2, pv2


def parametric_network(dtmc: Model, s1: int, s2: int, rel: Relation) -> WeakCheckContext:
    """N(gamma) for the pair with its mandatory/optional partition."""
    mu1, pv1, mu2, pv2 = _partition(dtmc, s1, s2, rel)
    p1, p2 = dtmc.rows[s1], dtmc.rows[s2]
    edges = [(u, v) for u in p1 for v in p2 if (u, v) in rel]
    pn = ParametricNetwork(dict(p1), dict(p2), edges, mu1, mu2)
    return WeakCheckContext(s1, s2, mu1, pv1, mu2, pv2, pn)


def _reaches_match(dtmc: Model, s1: int, s2: int, rel: Relation, pending: Iterable[int]) -> bool:
    """Every pending u1 has an R-partner after a path from s2 through R(s1)-states."""
    inside = rel.image(s1)
    seen = {s2}
    stack = [s2]
    while stack:
        for t in dtmc.post(stack.pop()):
            if t in inside and t not in seen:
                seen.add(t)
                stack.append(t)
    ends = set().union(*(dtmc.post(w) for w in seen))
    return all(rel.image(u1) & ends for u1 in pending)


def a_classes(dtmc: Model, s1: int, s2: int, rel: Relation) -> list[frozenset[int]]:
    """Classes of the equivalence generated by R restricted to the two one-step neighbourhoods.

    The class holding s1 and s2 comes last.
    """
    left = dtmc.post(s1) | {s1}
    right = dtmc.post(s2) | {s2}
    parent: dict[int, int] = {}

    def find(x: int) -> int:
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in sorted(left):
        for b in sorted(rel.image(a) & right):
            parent[find(a)] = find(b)
    groups: dict[int, set[int]] = {}
    for x in list(parent):
        groups.setdefault(find(x), set()).add(x)
    classes = sorted((frozenset(g) for g in groups.values()), key=min)
    last = [c for c in classes if s1 in c]
    assert last and s2 in last[0], "s1 and s2 must share a class"
    return [c for c in classes if c is not last[0]] + last


def _gamma_of_classes(dtmc: Model, s1: int, s2: int, classes: list[frozenset[int]]) -> Fraction | None:
    """Common ratio P(s1, A)/P(s2, A) over the classes before the last; None if they conflict."""
    p1, p2 = dtmc.rows[s1], dtmc.rows[s2]
    common = None
    for cls in classes[:-1]:
        a = sum((p1(x) for x in cls), Fraction(0))
        b = sum((p2(x) for x in cls), Fraction(0))
        if a == 0 and b == 0:
            raise AssertionError(f"class {sorted(cls)} carries no probability from either state")
        if a == 0 or b == 0:
            return None
        ratio = a / b
        if common is None:
            common = ratio
        elif ratio != common:
            return None
    return common


def ws_improved_check(dtmc: Model, s1: int, s2: int, rel: Relation, stats: Stats | None = None,
                      bound: Fraction | None = None, context: WeakCheckContext | None = None,
                      classes: list[frozenset[int]] | None = None) -> bool:
    """Branch (c) when more than one class exists: only one gamma can be valid."""
    if classes is None:
        classes = a_classes(dtmc, s1, s2, rel)
    assert len(classes) > 1, "needs at least two classes"
    gamma = _gamma_of_classes(dtmc, s1, s2, classes)
    if gamma is None or (bound is not None and gamma > bound):
        return False
    if context is None:
        context = parametric_network(dtmc, s1, s2, rel)
    return classify_gamma(context.network, gamma, stats) is GammaClass.VALID


def _branch_c(dtmc: Model, s1: int, s2: int, rel: Relation, improved: bool, stats: Stats | None,
              bound: Fraction | None) -> bool:
    if stats is not None:
        stats.bump("branch_c")
    context = parametric_network(dtmc, s1, s2, rel)
    if improved:
        classes = a_classes(dtmc, s1, s2, rel)
        if len(classes) > 1:
            return ws_improved_check(dtmc, s1, s2, rel, stats, bound, context, classes)
    pn = context.network
    points = breakpoints(pn, stats)
    if find_valid_breakpoint(pn, bound=bound, minimal=bound is not None, points=points, stats=stats) is not None:
        return True
    # A valid interval can lie strictly between two breakpoints; its ends are exact.
    interval = valid_interval(pn)
    if interval is None or (bound is not None and interval[0] > bound):
        return False
    assert classify_gamma(pn, interval[0]) is GammaClass.VALID
    if stats is not None:
        stats.bump("interval_fallbacks")
    return True


def ws_check(dtmc: Model, s1: int, s2: int, rel: Relation, improved: bool = False,
             stats: Stats | None = None) -> bool:
    """Whether s1 is weakly simulated by s2 up to ``rel`` in a DTMC."""
    mu1, _, mu2, _ = _partition(dtmc, s1, s2, rel)
    if not mu1:
        if stats is not None:
            stats.bump("branch_a")
        return True
    if not mu2:
        if stats is not None:
            stats.bump("branch_b")
        return _reaches_match(dtmc, s1, s2, rel, mu1)
    return _branch_c(dtmc, s1, s2, rel, improved, stats, None)


def ws_check_ctmc(ctmc: Model, s1: int, s2: int, rel: Relation, improved: bool = False,
                  stats: Stats | None = None, embedded: Model | None = None) -> bool:
    """Whether s1 is weakly simulated by s2 up to ``rel`` in a CTMC."""
    dtmc = embedded if embedded is not None else embedded_dtmc(ctmc)
    mu1, _, _, _ = _partition(dtmc, s1, s2, rel)
    if not mu1:
        if stats is not None:
            stats.bump("branch_a")
        return True
    bound = ctmc.rows[s2].exit_rate / ctmc.rows[s1].exit_rate
    return _branch_c(dtmc, s1, s2, rel, improved, stats, bound)


def weak_witness(model: Model, s1: int, s2: int, rel: Relation) -> dict | None:
    """How s2 weakly simulates s1 up to ``rel``: the branch taken and, for (c), a valid gamma and flow."""
    ctmc = model.kind is Kind.CTMC
    dtmc = embedded_dtmc(model) if ctmc else model
    check = ws_check_ctmc(model, s1, s2, rel) if ctmc else ws_check(dtmc, s1, s2, rel)
    if not check:
        return None
    context = parametric_network(dtmc, s1, s2, rel)
    if not context.mu1:
        return {"branch": "a"}
    if not context.mu2 and not ctmc:
        return {"branch": "b"}
    pn = context.network
    bound = model.rows[s2].exit_rate / model.rows[s1].exit_rate if ctmc else None
    gamma = find_valid_breakpoint(pn, bound=bound, minimal=bound is not None)
    if gamma is None:
        gamma = valid_interval(pn)[0]
    pn.set_gamma(gamma)
    flow = max_cost_max_flow(pn)
    return {"branch": "c", "gamma": gamma, "flow": flow.weight_function(), "network": flow}


class IterationSchedule:
    """Decides which refinement iterations may skip single-class pairs.

    A skipping iteration keeps single-class pairs unchecked.  Once such an
    iteration changes nothing, the next one is complete; the loop only stops
    after a complete iteration changes nothing, so the fixpoint is unchanged.
    """

    def __init__(self, incomplete: bool | Iterable[int] = False):
        if isinstance(incomplete, bool):
            self.all_incomplete = incomplete
            self.iterations: frozenset[int] = frozenset()
        else:
            self.all_incomplete = False
            self.iterations = frozenset(incomplete)

    def is_complete(self, iteration: int, forced: bool) -> bool:
        if forced:
            return True
        return not (self.all_incomplete or iteration in self.iterations)


def incomplete_iteration_schedule(flagged: bool | Iterable[int] = False) -> IterationSchedule:
    """``True`` skips in every iteration until stable; an iterable names the skipping iterations."""
    return IterationSchedule(flagged)


def simrel_w(model: Model, improved: bool = False, stats: Stats | None = None,
             schedule: IterationSchedule | None = None, workers: int = 1) -> Relation:
    """Weak simulation preorder of a DTMC or CTMC."""
    if model.kind not in (Kind.DTMC, Kind.CTMC):
        raise ModelError(f"weak simulation needs a DTMC or CTMC, got {model.kind.value}")
    ctmc = model.kind is Kind.CTMC
    dtmc = embedded_dtmc(model) if ctmc else model
    if schedule is None:
        schedule = IterationSchedule()
    rel = label_equal_pairs(model)
    iteration = 0
    forced = False
    while True:
        iteration += 1
        if stats is not None:
            stats.bump("iterations")
        current = rel
        complete = schedule.is_complete(iteration, forced)

        def keep(pair: tuple[int, int]) -> bool:
            s1, s2 = pair
            if not complete and improved and _partition(dtmc, s1, s2, current)[0]:
                if len(a_classes(dtmc, s1, s2, current)) == 1:
                    return True
            if ctmc:
                return ws_check_ctmc(model, s1, s2, current, improved, stats, dtmc)
            return ws_check(dtmc, s1, s2, current, improved, stats)

        pairs = list(current)
        verdicts = parallel_map(keep, pairs, workers)
        removed = [p for p, ok in zip(pairs, verdicts) if not ok]
        if stats is not None:
            for p in removed:
                stats.event(iteration, "removed", p)
        rel = current.without(removed)
        if rel == current:
            if complete:
                return rel
            forced = True
        else:
            forced = False
