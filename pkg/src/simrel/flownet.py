"""Maximum-flow machinery over exact rationals.

The kernel is a push-relabel solver with highest-label selection.  A network
keeps its preflow and distance labels between calls, so later calls resume
from the previous state (after edge deletions or capacity changes) instead of
starting over.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction

from .models import BOT, Distribution, Relation
from .stats import Stats

__all__ = [
    "INF",
    "BipartiteNetwork",
    "BreakpointList",
    "FlowNetwork",
    "GammaClass",
    "ParametricNetwork",
    "breakpoints",
    "build_network",
    "classify_gamma",
    "feasible_flow",
    "find_valid_breakpoint",
    "lower_bound_transform",
    "max_cost_max_flow",
    "max_flow",
    "set_gamma",
    "smf_update",
    "to_dot",
    "valid_interval",
]

INF = math.inf
"""Infinite capacity.  Flows stay finite Fractions; only capacities use it."""

ZERO = Fraction(0)


class FlowNetwork:
    """Directed network with paired residual edges.

    Edge ``e`` and its reverse ``e ^ 1`` are stored together; ``flow[e ^ 1]``
    is always ``-flow[e]``.  Even edge ids are the original edges.
    """

    SOURCE = 0
    SINK = 1

    def __init__(self) -> None:
        self.names: list[str] = ["source", "sink"]
        self.head: list[int] = []
        self.cap: list[Fraction | float] = []
        self.flow: list[Fraction] = []
        self.alive: list[bool] = []
        self.adj: list[list[int]] = [[], []]
        self.excess: list[Fraction] = [ZERO, ZERO]
        self.label: list[int] = [0, 0]
        self.started = False
        self.pushes = 0
        self.relabels = 0
        self.label_repairs = 0

    @property
    def n(self) -> int:
        return len(self.adj)

    def add_vertex(self, name: str = "") -> int:
        self.names.append(name)
        self.adj.append([])
        self.excess.append(ZERO)
        self.label.append(0)
        return len(self.adj) - 1

    def add_edge(self, u: int, v: int, cap: Fraction | float) -> int:
        e = len(self.head)
        self.head += [v, u]
        self.cap += [cap, ZERO]
        self.flow += [ZERO, ZERO]
        self.alive += [True, True]
        self.adj[u].append(e)
        self.adj[v].append(e ^ 1)
        return e

    def tail(self, e: int) -> int:
        return self.head[e ^ 1]

    def residual(self, e: int) -> Fraction | float:
        return self.cap[e] - self.flow[e]

    def edges(self) -> Iterable[int]:
        """Alive original edges."""
        return (e for e in range(0, len(self.head), 2) if self.alive[e])

    @property
    def value(self) -> Fraction:
        return self.excess[self.SINK]

    def _move(self, e: int, delta: Fraction) -> None:
        self.flow[e] += delta
        self.flow[e ^ 1] -= delta
        self.excess[self.tail(e)] -= delta
        self.excess[self.head[e]] += delta

    def delete_edge(self, e: int) -> None:
        assert self.alive[e], f"edge {e} already deleted"
        assert self.flow[e] == 0, "only flow-free edges can be removed"
        self.alive[e] = self.alive[e ^ 1] = False
        self.adj[self.tail(e)].remove(e)
        self.adj[self.head[e]].remove(e ^ 1)

    def set_flow(self, flows: Mapping[int, Fraction]) -> None:
        """Replace the flow by a given (conserving) flow and relabel exactly."""
        self.flow = [ZERO] * len(self.head)
        self.excess = [ZERO] * self.n
        for e, f in flows.items():
            if f:
                self._move(e, f)
        self.started = True
        self.label[self.SOURCE] = self.n
        self._global_relabel()

    # -- push-relabel --------------------------------------------------

    def _saturate_source(self) -> None:
        for e in self.adj[self.SOURCE]:
            r = self.residual(e)
            if r > 0:
                assert r != INF, "source edges need finite capacity"
                self._move(e, r)

    def valid_labeling(self) -> bool:
        lab = self.label
        if lab[self.SOURCE] != self.n or lab[self.SINK] != 0:
            return False
        for v, edges in enumerate(self.adj):
            for e in edges:
                if self.residual(e) > 0 and lab[v] > lab[self.head[e]] + 1:
                    return False
        return True

    def _global_relabel(self) -> None:
        """Exact residual distances to the sink, else n + distance to the source."""
        n = self.n
        label = [2 * n] * n
        for root, base in ((self.SINK, 0), (self.SOURCE, n)):
            label[root] = base
            queue = deque([root])
            while queue:
                w = queue.popleft()
                for e in self.adj[w]:
                    x = self.head[e]
                    if label[x] == 2 * n and x != self.SOURCE and self.residual(e ^ 1) > 0:
                        label[x] = label[w] + 1
                        queue.append(x)
        label[self.SOURCE] = n
        self.label = label

    def _repair(self) -> None:
        self._saturate_source()
        self._global_relabel()
        self.label_repairs += 1

    def max_flow(self) -> Fraction:
        """Run push-relabel to completion from the stored preflow."""
        s, t = self.SOURCE, self.SINK
        if not self.started:
            self.label = [0] * self.n
            self.label[s] = self.n
            self._saturate_source()
            self.started = True
        elif not self.valid_labeling():
            self._repair()
        for edges in self.adj:
            edges.sort(key=lambda e: (self.head[e], e))
        current = [0] * self.n
        active = {v for v in range(2, self.n) if self.excess[v] > 0}
        label, excess, adj = self.label, self.excess, self.adj
        while active:
            v = max(active, key=lambda u: (label[u], -u))
            edges = adj[v]
            while excess[v] > 0:
                if current[v] == len(edges):
                    label[v] = min(label[self.head[e]] for e in edges if self.residual(e) > 0) + 1
                    self.relabels += 1
                    current[v] = 0
                    continue
                e = edges[current[v]]
                w = self.head[e]
                r = self.residual(e)
                if r > 0 and label[v] == label[w] + 1:
                    self._move(e, min(excess[v], r))
                    self.pushes += 1
                    if w != s and w != t:
                        active.add(w)
                else:
                    current[v] += 1
            active.discard(v)
        return excess[t]

    def source_side(self) -> set[int]:
        """Vertices reachable from the source in the residual network."""
        seen = {self.SOURCE}
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for e in self.adj[v]:
                w = self.head[e]
                if w not in seen and self.residual(e) > 0:
                    seen.add(w)
                    queue.append(w)
        return seen

    def check_flow(self) -> None:
        """Assert capacity, antisymmetry and conservation (excess >= 0 off the terminals)."""
        for e in range(len(self.head)):
            assert self.flow[e] == -self.flow[e ^ 1]
            if self.alive[e]:
                assert self.flow[e] <= self.cap[e]
            else:
                assert self.flow[e] == 0
        for v in range(self.n):
            inflow = sum((-self.flow[e] for e in self.adj[v]), ZERO)
            assert inflow == self.excess[v]
            if v not in (self.SOURCE, self.SINK):
                assert self.excess[v] >= 0


class BipartiteNetwork:
    """Network with left vertices (sources of mass) and right vertices (targets).

    ``left``/``right`` map state indices (``BOT`` allowed) to vertices;
    ``inner`` maps state pairs to edge ids.
    """

    def __init__(self, source_caps: Mapping[int, Fraction], sink_caps: Mapping[int, Fraction],
                 edges: Iterable[tuple[int, int]]):
        net = self.net = FlowNetwork()
        self.left: dict[int, int] = {}
        self.right: dict[int, int] = {}
        self.source_edge: dict[int, int] = {}
        self.sink_edge: dict[int, int] = {}
        self.inner: dict[tuple[int, int], int] = {}
        for s in sorted(source_caps):
            self.left[s] = net.add_vertex(_state_name(s))
        for t in sorted(sink_caps):
            self.right[t] = net.add_vertex(_state_name(t) + "'")
        for s in sorted(source_caps):
            self.source_edge[s] = net.add_edge(net.SOURCE, self.left[s], source_caps[s])
        for s, t in sorted(edges):
            if s in self.left and t in self.right:
                self.inner[(s, t)] = net.add_edge(self.left[s], self.right[t], INF)
        for t in sorted(sink_caps):
            self.sink_edge[t] = net.add_edge(self.right[t], net.SINK, sink_caps[t])

    def max_flow(self) -> Fraction:
        return self.net.max_flow()

    @property
    def value(self) -> Fraction:
        return self.net.value

    def flow_on(self, s: int, t: int) -> Fraction:
        e = self.inner.get((s, t))
        return self.net.flow[e] if e is not None else ZERO

    def weight_function(self) -> dict[tuple[int, int], Fraction]:
        """Positive inner-edge flows, keyed by state pair."""
        return {pair: self.net.flow[e] for pair, e in self.inner.items() if self.net.flow[e] > 0}


def _state_name(s: int) -> str:
    return "bot" if s == BOT else str(s)


def build_network(mu1: Distribution, mu2: Distribution, rel: Relation) -> BipartiteNetwork:
    """Network N(mu1, mu2, R) with the bottom state below everything."""
    left = mu1.with_bot()
    right = mu2.with_bot()
    edges = [
        (s, t)
        for s in left
        for t in right
        if s == BOT or (t != BOT and (s, t) in rel)
    ]
    return BipartiteNetwork(left, right, edges)


def max_flow(net: FlowNetwork | BipartiteNetwork) -> Fraction:
    return net.max_flow()


def smf_update(bn: BipartiteNetwork, deleted: Iterable[tuple[int, int]]) -> Fraction:
    """Delete inner edges from a network holding a maximum flow and re-maximise.

    Flow on each deleted edge is cancelled at the sink side, leaving it as
    excess at the left endpoint; push-relabel then resumes from the old labels.
    """
    net = bn.net
    for s, t in sorted(deleted):
        e = bn.inner.pop((s, t), None)
        assert e is not None, f"edge ({s}, {t}) is not in the network"
        f = net.flow[e]
        if f:
            sink = bn.sink_edge[t]
            net.flow[sink] -= f
            net.flow[sink ^ 1] += f
            net.excess[net.SINK] -= f
            net.flow[e] = ZERO
            net.flow[e ^ 1] = ZERO
            net.excess[bn.left[s]] += f
        net.delete_edge(e)
    return net.max_flow()


def to_dot(bn: BipartiteNetwork, title: str = "network", names=None) -> str:
    """Graphviz rendering with capacity/flow labels."""
    net = bn.net

    def vertex(v: int) -> str:
        return f"v{v}"

    def shown(v: int) -> str:
        if v == net.SOURCE:
            return "source"
        if v == net.SINK:
            return "sink"
        for side, suffix in ((bn.left, ""), (bn.right, "'")):
            for s, w in side.items():
                if w == v:
                    text = "bot" if s == BOT else (names(s) if names else str(s))
                    return text + suffix
        return net.names[v]

    def amount(x) -> str:
        return "inf" if x == INF else str(x)

    lines = [f'digraph "{title}" {{', "  rankdir=LR;"]
    for v in range(net.n):
        lines.append(f'  {vertex(v)} [label="{shown(v)}"];')
    for e in net.edges():
        lines.append(
            f'  {vertex(net.tail(e))} -> {vertex(net.head[e])} '
            f'[label="{amount(net.flow[e])}/{amount(net.cap[e])}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- lower bounds ------------------------------------------------------


def lower_bound_transform(net: FlowNetwork, lower: Mapping[int, Fraction], min_value: Fraction = ZERO):
    """Circulation form of a lower-bounded flow problem.

    Returns ``(transformed, required, edge_map)``: a fresh network with a
    super source and sink, the total supply that must be routed, and the map
    from original edges to their copies.
    """
    t_net = FlowNetwork()
    vmap = [t_net.add_vertex(name) for name in net.names]
    balance = [ZERO] * net.n
    edge_map: dict[int, int] = {}
    for e in net.edges():
        lo = Fraction(lower.get(e, ZERO))
        assert 0 <= lo <= net.cap[e], f"lower bound {lo} outside [0, cap] on edge {e}"
        u, v = net.tail(e), net.head[e]
        edge_map[e] = t_net.add_edge(vmap[u], vmap[v], net.cap[e] - lo)
        balance[v] += lo
        balance[u] -= lo
    t_net.add_edge(vmap[net.SINK], vmap[net.SOURCE], INF)
    balance[net.SOURCE] += min_value
    balance[net.SINK] -= min_value
    required = ZERO
    for v, b in enumerate(balance):
        if b > 0:
            t_net.add_edge(t_net.SOURCE, vmap[v], b)
            required += b
        elif b < 0:
            t_net.add_edge(vmap[v], t_net.SINK, -b)
    return t_net, required, edge_map


def feasible_flow(net: FlowNetwork, lower: Mapping[int, Fraction],
                  min_value: Fraction = ZERO) -> dict[int, Fraction] | None:
    """A flow with f(e) >= lower(e) and value >= min_value, or None."""
    t_net, required, edge_map = lower_bound_transform(net, lower, min_value)
    if t_net.max_flow() < required:
        return None
    return {e: Fraction(lower.get(e, ZERO)) + t_net.flow[c] for e, c in edge_map.items()}


# -- parametric networks -----------------------------------------------


class ParametricNetwork(BipartiteNetwork):
    """Bipartite network whose sink capacities are gamma times a base vector.

    ``mu1``/``mu2`` are the left/right states whose source/sink edges are
    mandatory (must saturate); the rest are optional.
    """

    def __init__(self, source_caps: Mapping[int, Fraction], sink_base: Mapping[int, Fraction],
                 edges: Iterable[tuple[int, int]], mu1: Iterable[int] = (), mu2: Iterable[int] = (),
                 gamma: Fraction = Fraction(1)):
        self.source_caps = dict(source_caps)
        self.sink_base = dict(sink_base)
        self.edges = sorted((s, t) for s, t in set(edges) if s in self.source_caps and t in self.sink_base)
        self.mu1 = frozenset(mu1)
        self.mu2 = frozenset(mu2)
        assert self.mu1 <= self.source_caps.keys() and self.mu2 <= self.sink_base.keys()
        self.gamma = Fraction(gamma)
        super().__init__(self.source_caps, {t: self.gamma * p for t, p in self.sink_base.items()}, self.edges)

    def set_gamma(self, gamma: Fraction) -> None:
        set_gamma(self, gamma)

    def kappa(self, gamma: Fraction) -> Fraction:
        """Minimum cut capacity at gamma."""
        self.set_gamma(gamma)
        return self.max_flow()

    def cut_line(self) -> tuple[Fraction, Fraction]:
        """(slope, intercept) of the source-minimal minimum cut of the current flow."""
        side = self.net.source_side()
        intercept = sum((c for s, c in self.source_caps.items() if self.left[s] not in side), ZERO)
        slope = sum((p for t, p in self.sink_base.items() if self.right[t] in side), ZERO)
        return slope, intercept


def set_gamma(pn: ParametricNetwork, gamma: Fraction) -> None:
    """Rescale sink capacities; clamp sink flows that exceed the new capacity."""
    gamma = Fraction(gamma)
    assert gamma >= 0, "gamma must be nonnegative"
    if gamma == pn.gamma:
        return
    net = pn.net
    for t, e in pn.sink_edge.items():
        cap = gamma * pn.sink_base[t]
        net.cap[e] = cap
        over = net.flow[e] - cap
        if over > 0:
            net.flow[e] = cap
            net.flow[e ^ 1] = -cap
            net.excess[net.SINK] -= over
            net.excess[pn.right[t]] += over
    pn.gamma = gamma


@dataclass(frozen=True)
class BreakpointList:
    """Breakpoints of kappa and its segments.

    ``segments[i]`` is the ``(slope, intercept)`` of kappa left of
    ``points[i]``; the last segment extends to infinity.
    """

    points: tuple[Fraction, ...]
    segments: tuple[tuple[Fraction, Fraction], ...]

    def kappa(self, gamma: Fraction) -> Fraction:
        i = sum(1 for p in self.points if p < gamma)
        slope, intercept = self.segments[i]
        return slope * gamma + intercept

    def __len__(self) -> int:
        return len(self.points)


def breakpoints(pn: ParametricNetwork, stats: Stats | None = None) -> BreakpointList:
    """All slope changes of kappa, by recursive intersection of cut lines."""
    if stats is not None:
        stats.bump("breakpoint_computations")
    pn.kappa(ZERO)
    first = pn.cut_line()
    connected = {s for s, _ in pn.edges}
    last = (ZERO, sum((c for s, c in pn.source_caps.items() if s in connected), ZERO))

    def between(l1, l2) -> list[tuple[Fraction, Fraction]]:
        """Lines of kappa from l1 to l2, both included."""
        if l1 == l2:
            return [l1]
        (a1, b1), (a2, b2) = l1, l2
        assert a1 > a2, "cut lines must have decreasing slopes"
        meet = (b2 - b1) / (a1 - a2)
        value = pn.kappa(meet)
        if value == a1 * meet + b1:
            return [l1, l2]
        mid = pn.cut_line()
        assert mid[0] * meet + mid[1] == value
        return between(l1, mid)[:-1] + between(mid, l2)

    lines = between(first, last)
    points = []
    for (a1, b1), (a2, b2) in zip(lines, lines[1:]):
        points.append((b2 - b1) / (a1 - a2))
    assert all(p > 0 for p in points) and points == sorted(set(points))
    return BreakpointList(tuple(points), tuple(lines))


def valid_interval(pn: ParametricNetwork) -> tuple[Fraction, Fraction | float] | None:
    """The closed interval of valid gammas, or None when it is empty.

    The mandatory sources saturate exactly from the last breakpoint of the
    network without optional sources; the mandatory sinks saturate exactly up
    to the first breakpoint of the network without optional sinks.  Valid
    gammas are where both hold.  The upper end may be infinite.
    """
    need = sum((pn.source_caps[s] for s in pn.mu1), ZERO)
    lower: Fraction = ZERO
    if pn.mu1:
        sources = ParametricNetwork({s: pn.source_caps[s] for s in pn.mu1}, pn.sink_base, pn.edges)
        kappa = breakpoints(sources)
        if kappa.segments[-1] != (ZERO, need):
            return None
        lower = kappa.points[-1]
    upper: Fraction | float = INF
    if pn.mu2:
        sinks = ParametricNetwork(pn.source_caps, {t: pn.sink_base[t] for t in pn.mu2}, pn.edges)
        kappa = breakpoints(sinks)
        if kappa.segments[0][0] != sum((pn.sink_base[t] for t in pn.mu2), ZERO):
            upper = ZERO
        elif kappa.points:
            upper = kappa.points[0]
    if lower > upper or (pn.mu1 and lower == 0):
        return None
    return lower, upper


def _restricted_max_flow(pn: ParametricNetwork, only_left=None, only_right=None) -> BipartiteNetwork:
    left = {s: c for s, c in pn.source_caps.items() if only_left is None or s in only_left}
    right = {t: pn.gamma * p for t, p in pn.sink_base.items() if only_right is None or t in only_right}
    bn = BipartiteNetwork(left, right, pn.edges)
    bn.max_flow()
    return bn


def max_cost_max_flow(pn: ParametricNetwork) -> BipartiteNetwork:
    """A maximum flow at the current gamma maximising f(source, MU1) + f(MU2, sink).

    Both terms are maximised separately (mandatory sources alone, mandatory
    sinks alone); a flow reaching both maxima and the maximum value always
    exists, and is found as a lower-bounded feasible flow.
    """
    value = pn.max_flow()
    from_mu1 = _restricted_max_flow(pn, only_left=pn.mu1)
    into_mu2 = _restricted_max_flow(pn, only_right=pn.mu2)
    lower = {pn.source_edge[s]: from_mu1.net.flow[from_mu1.source_edge[s]] for s in pn.mu1}
    lower.update({pn.sink_edge[t]: into_mu2.net.flow[into_mu2.sink_edge[t]] for t in pn.mu2})
    flows = feasible_flow(pn.net, lower, min_value=value)
    assert flows is not None, "a maximum flow of maximum cost always exists"
    result = BipartiteNetwork(pn.source_caps, {t: pn.gamma * p for t, p in pn.sink_base.items()}, pn.edges)
    # Same construction order, so edge ids carry over.
    result.net.set_flow(flows)
    return result


def flow_cost(pn: ParametricNetwork, flow: BipartiteNetwork) -> Fraction:
    """Mandatory throughput f(source, MU1) + f(MU2, sink) of a flow on pn's shape."""
    net = flow.net
    return (sum((net.flow[flow.source_edge[s]] for s in pn.mu1), ZERO)
            + sum((net.flow[flow.sink_edge[t]] for t in pn.mu2), ZERO))


class GammaClass(enum.Enum):
    VALID = "Valid"
    TOO_SMALL = "TooSmall"
    TOO_LARGE = "TooLarge"
    NO_VALID = "NoValidExists"


def classify_gamma(pn: ParametricNetwork, gamma: Fraction, stats: Stats | None = None) -> GammaClass:
    """Where valid gammas lie relative to gamma, from a maximum-cost maximum flow."""
    if stats is not None:
        stats.bump("classify_calls")
    pn.set_gamma(gamma)
    best = max_cost_max_flow(pn)
    net = best.net
    sources_full = all(net.residual(best.source_edge[s]) == 0 for s in pn.mu1)
    sinks_full = all(net.residual(best.sink_edge[t]) == 0 for t in pn.mu2)
    if sources_full and sinks_full:
        return GammaClass.VALID
    if sinks_full:
        return GammaClass.TOO_SMALL
    if sources_full:
        return GammaClass.TOO_LARGE
    return GammaClass.NO_VALID


def find_valid_breakpoint(pn: ParametricNetwork, bound: Fraction | None = None, minimal: bool = False,
                          points: BreakpointList | None = None,
                          stats: Stats | None = None) -> Fraction | None:
    """Binary search for a valid breakpoint.

    With ``minimal`` the search continues leftwards after a hit.  With
    ``bound`` only breakpoints up to it are searched, and ``bound`` itself is
    returned when no such breakpoint is valid but ``bound`` is.
    """
    if points is None:
        points = breakpoints(pn, stats)
    candidates = [p for p in points.points if bound is None or p <= bound]
    if not points.points:
        # Constant kappa: a single segment, probed at an interior point.
        probe = bound if bound is not None and bound > 0 else Fraction(1)
        return probe if classify_gamma(pn, probe, stats) is GammaClass.VALID else None
    found = None
    lo, hi = 0, len(candidates) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        verdict = classify_gamma(pn, candidates[mid], stats)
        if verdict is GammaClass.VALID:
            found = candidates[mid]
            if not minimal:
                break
            hi = mid - 1
        elif verdict is GammaClass.TOO_SMALL:
            lo = mid + 1
        elif verdict is GammaClass.TOO_LARGE:
            hi = mid - 1
        else:
            break
    if found is None and bound is not None and classify_gamma(pn, bound, stats) is GammaClass.VALID:
        return bound
    return found
