"""Strong simulation by iterated refinement with maximum flows.

``simrel_basic`` builds a fresh network per pair and iteration.
``simrel_fps`` and ``simrel_pa`` keep one network per pair (per transition
for automata) and only delete the edges of pairs that dropped out of the
relation in the previous iteration.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .flownet import BipartiteNetwork, build_network, smf_update
from .models import (
    Distribution,
    Kind,
    Model,
    ModelError,
    Relation,
    embedded_dtmc,
    induced_distribution,
    label_equal_pairs,
)
from .stats import Stats

__all__ = [
    "ArcState",
    "PairState",
    "act_smf",
    "initial_relation",
    "simrel_basic",
    "simrel_fps",
    "simrel_pa",
    "simrel_strong",
    "strong_rows",
]

ONE = Fraction(1)


def parallel_map(fn: Callable, items: list, workers: int = 1) -> list:
    """``map`` that optionally fans out over a thread pool, preserving order."""
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def strong_rows(model: Model) -> tuple[Distribution, ...]:
    """Probability rows checked by strong simulation (embedded rows for a CTMC)."""
    if model.kind is Kind.CTMC:
        return embedded_dtmc(model).rows
    if model.kind in (Kind.FPS, Kind.DTMC):
        return model.rows
    raise ModelError(f"{model.kind.value} models have no probability rows")


def initial_relation(model: Model) -> Relation:
    """Label-equal pairs, narrowed by exit rates (CTMC) or action sets (PA/CPA)."""
    base = label_equal_pairs(model)
    if model.kind is Kind.CTMC:
        rate = [r.exit_rate for r in model.rows]
        return Relation((a, b) for a, b in base if rate[a] <= rate[b])
    if model.kind.is_automaton:
        acts = model.actions
        return Relation((a, b) for a, b in base if acts[a] <= acts[b])
    return base


def _account(stats: Stats | None, bn: BipartiteNetwork, before: tuple[int, int, int]) -> None:
    if stats is not None:
        net = bn.net
        stats.bump("pushes", net.pushes - before[0])
        stats.bump("relabels", net.relabels - before[1])
        stats.bump("label_repairs", net.label_repairs - before[2])


def _counters(bn: BipartiteNetwork) -> tuple[int, int, int]:
    return bn.net.pushes, bn.net.relabels, bn.net.label_repairs


def _fresh(mu1: Distribution, mu2: Distribution, rel: Relation, stats: Stats | None) -> BipartiteNetwork:
    bn = build_network(mu1, mu2, rel)
    bn.max_flow()
    if stats is not None:
        stats.bump("fresh_networks")
    _account(stats, bn, (0, 0, 0))
    return bn


def _refine(model: Model, rel: Relation, keep: Callable[[tuple[int, int]], bool],
            iteration: int, stats: Stats | None, workers: int) -> Relation:
    pairs = list(rel)
    verdicts = parallel_map(keep, pairs, workers)
    removed = [p for p, ok in zip(pairs, verdicts) if not ok]
    if stats is not None:
        for p in removed:
            stats.event(iteration, "removed", p)
    return rel.without(removed)


def simrel_basic(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    """Strong simulation preorder, recomputing every flow from scratch."""
    rows = strong_rows(model)
    rel = initial_relation(model)
    iteration = 0
    while True:
        iteration += 1
        if stats is not None:
            stats.bump("iterations")
        current = rel

        def keep(pair: tuple[int, int]) -> bool:
            s1, s2 = pair
            if stats is not None:
                stats.event(iteration, "fresh", pair)
            return _fresh(rows[s1], rows[s2], current, stats).value == ONE

        rel = _refine(model, current, keep, iteration, stats, workers)
        if rel == current:
            return rel


@dataclass
class PairState:
    """Persistent network of one pair plus the deletions queued for it."""

    network: BipartiteNetwork | None = None
    pending: set = field(default_factory=set)


def _listeners(model: Model, rel: Relation) -> dict[tuple[int, int], list[tuple[int, int]]]:
    """Pairs whose networks contain the edge of (s1, s2): label-equal predecessor pairs."""
    labels = model.labels
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for s1, s2 in rel:
        out[(s1, s2)] = [
            (u1, u2)
            for u1 in sorted(model.pre(s1))
            for u2 in sorted(model.pre(s2))
            if labels[u1] == labels[u2]
        ]
    return out


def simrel_fps(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    """Strong simulation preorder with incremental flow updates."""
    rows = strong_rows(model)
    rel = initial_relation(model)
    listeners = _listeners(model, rel)
    states = {pair: PairState() for pair in rel}
    iteration = 0
    previous = rel
    while True:
        iteration += 1
        if stats is not None:
            stats.bump("iterations")
        current = rel
        if iteration > 1:
            # Stage the deletions found last iteration, in the frozen order.
            for dropped in previous.pairs - current.pairs:
                for pair in listeners[dropped]:
                    if pair in current and dropped[0] in rows[pair[0]] and dropped[1] in rows[pair[1]]:
                        states[pair].pending.add(dropped)

        def keep(pair: tuple[int, int]) -> bool:
            state = states[pair]
            if state.network is None:
                if stats is not None:
                    stats.event(iteration, "fresh", pair)
                state.network = _fresh(rows[pair[0]], rows[pair[1]], current, stats)
            else:
                before = _counters(state.network)
                smf_update(state.network, state.pending)
                state.pending = set()
                if stats is not None:
                    stats.bump("smf_updates")
                    stats.event(iteration, "update", pair)
                _account(stats, state.network, before)
            return state.network.value == ONE

        rel = _refine(model, current, keep, iteration, stats, workers)
        for dropped in current.pairs - rel.pairs:
            states.pop(dropped)
        if rel == current:
            return rel
        previous = current


@dataclass
class ArcState:
    """Matching state of one transition s1 -a-> mu1 against the candidates of s2.

    ``candidates`` lists the remaining indices into ``Steps_a(s2)``; the head
    candidate owns ``network``.
    """

    mu1: Distribution
    targets: tuple[Distribution, ...]
    candidates: list[int]
    network: BipartiteNetwork | None = None
    pending: set = field(default_factory=set)


def act_smf(arc: ArcState, rel: Relation, stats: Stats | None = None,
            iteration: int = 0, pair=None) -> bool:
    """Whether some remaining candidate matches mu1 under ``rel``.

    The head candidate's network is updated incrementally; failed candidates
    are dropped for good and successors get fresh networks.
    """
    if arc.network is not None:
        before = _counters(arc.network)
        smf_update(arc.network, arc.pending)
        if stats is not None:
            stats.bump("smf_updates")
            stats.event(iteration, "update", pair)
        _account(stats, arc.network, before)
        if arc.network.value == ONE:
            arc.pending = set()
            return True
        arc.candidates.pop(0)
        arc.network = None
    arc.pending = set()
    while arc.candidates:
        if stats is not None:
            stats.event(iteration, "fresh", pair)
        arc.network = _fresh(arc.mu1, arc.targets[arc.candidates[0]], rel, stats)
        if arc.network.value == ONE:
            return True
        arc.candidates.pop(0)
        arc.network = None
    return False


def _automaton_targets(model: Model) -> Callable:
    """Per-state step lookup yielding the distributions the networks compare."""
    if model.kind is Kind.CPA:
        induced = {key: tuple(induced_distribution(r) for r in group) for key, group in model.steps.items()}
        return lambda s, a: induced.get((s, a), ())
    return lambda s, a: model.steps_of(s, a)


def simrel_pa(model: Model, stats: Stats | None = None, workers: int = 1) -> Relation:
    """Strong simulation preorder of a PA or CPA."""
    if not model.kind.is_automaton:
        raise ModelError(f"expected a PA or CPA, got {model.kind.value}")
    targets = _automaton_targets(model)
    rel = initial_relation(model)

    arcs: dict[tuple[int, int], list[ArcState]] = {}
    # Listener entries: (s1, s2) -> arcs of predecessor pairs whose mu1/mu2 reach them.
    listeners: dict[tuple[int, int], list[tuple[tuple[int, int], int, int]]] = {}
    for u1, u2 in rel:
        arc_list = []
        for action in sorted(model.actions[u1]):
            own = targets(u1, action)
            theirs = targets(u2, action)
            raw1 = model.steps_of(u1, action)
            raw2 = model.steps_of(u2, action)
            for i, mu1 in enumerate(own):
                if model.kind is Kind.CPA:
                    keep = [j for j, r2 in enumerate(raw2) if raw1[i].exit_rate <= r2.exit_rate]
                else:
                    keep = list(range(len(theirs)))
                arc_list.append(ArcState(mu1, theirs, keep))
        arcs[(u1, u2)] = arc_list
        for k, arc in enumerate(arc_list):
            for j in arc.candidates:
                for s1 in arc.mu1:
                    for s2 in arc.targets[j]:
                        if model.labels[s1] == model.labels[s2]:
                            listeners.setdefault((s1, s2), []).append(((u1, u2), k, j))

    iteration = 0
    previous = rel
    while True:
        iteration += 1
        if stats is not None:
            stats.bump("iterations")
        current = rel
        if iteration > 1:
            for dropped in previous.pairs - current.pairs:
                for pair, k, j in listeners.get(dropped, ()):
                    if pair in current:
                        arc = arcs[pair][k]
                        if arc.network is not None and arc.candidates and arc.candidates[0] == j:
                            arc.pending.add(dropped)

        def keep(pair: tuple[int, int]) -> bool:
            # Every arc is advanced so that no deletion is left pending.
            results = [act_smf(arc, current, stats, iteration, pair) for arc in arcs[pair]]
            return all(results)

        rel = _refine(model, current, keep, iteration, stats, workers)
        for dropped in current.pairs - rel.pairs:
            arcs.pop(dropped)
        if rel == current:
            return rel
        previous = current


def simrel_strong(model: Model, engine: str = "parametric", stats: Stats | None = None,
                  workers: int = 1) -> Relation:
    """Dispatch on model kind: incremental or basic engine."""
    if model.kind.is_automaton:
        return simrel_pa(model, stats, workers)
    if engine == "basic":
        return simrel_basic(model, stats, workers)
    return simrel_fps(model, stats, workers)


def pairs_of(rel: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    return sorted(rel)
