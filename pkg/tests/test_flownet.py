import itertools
import random
from fractions import Fraction

import pytest
from augmenting import edmonds_karp
from generators import bipartite_networks, parametric_networks, random_distribution
from hypothesis import given
from hypothesis import strategies as st
from samples import COUNTEREXAMPLE, CTMC_EXAMPLE, load, max_cost_network, three_breakpoint_network, weak_pair_network

from simrel.flownet import (
    INF,
    BipartiteNetwork,
    FlowNetwork,
    GammaClass,
    ParametricNetwork,
    breakpoints,
    build_network,
    classify_gamma,
    feasible_flow,
    find_valid_breakpoint,
    flow_cost,
    lower_bound_transform,
    max_cost_max_flow,
    smf_update,
    to_dot,
    valid_interval,
)
from simrel.models import BOT, Distribution, Relation, embedded_dtmc, label_equal_pairs
from simrel.oracles import valid_gamma_oracle, weight_oracle

F = Fraction


def _ctmc_pair_network():
    model = load(CTMC_EXAMPLE)
    emb = embedded_dtmc(model)
    s1, s2 = model.state("s1"), model.state("s2")
    rel = label_equal_pairs(model)
    return model, build_network(emb.P[s1], emb.P[s2], rel)


def test_ctmc_pair_network() -> None:
    model, bn = _ctmc_pair_network()
    inner = {pair for pair in bn.inner if BOT not in pair}
    assert len(inner) == 4
    assert bn.max_flow() == 1
    u2, u4 = model.state("u2"), model.state("u4")
    assert smf_update(bn, [(u2, u4)]) == 1
    bn.net.check_flow()
    assert bn.net.valid_labeling()


def test_deleting_flow_free_edge_does_no_pushes() -> None:
    bn = BipartiteNetwork({0: F(1)}, {0: F(1), 1: F(1)}, [(0, 0), (0, 1)])
    bn.max_flow()
    idle = (0, 1) if bn.flow_on(0, 1) == 0 else (0, 0)
    pushes = bn.net.pushes
    assert smf_update(bn, [idle]) == 1
    assert bn.net.pushes == pushes


def test_deleting_everything_leaves_zero() -> None:
    bn = BipartiteNetwork({0: F(1, 2), 1: F(1, 2)}, {0: F(1)}, [(0, 0), (1, 0)])
    assert bn.max_flow() == 1
    assert smf_update(bn, [(0, 0), (1, 0)]) == 0
    bn.net.check_flow()


def test_bottom_is_below_everything() -> None:
    mu1 = Distribution({0: F(1, 2)})
    mu2 = Distribution({1: F(1)})
    assert build_network(mu1, mu2, Relation()).max_flow() == F(1, 2)
    assert build_network(mu1, mu2, Relation([(0, 1)])).max_flow() == 1
    assert build_network(mu2, mu1, Relation([(1, 0)])).max_flow() == F(1, 2)


def test_feasible_flow_with_lower_bounds() -> None:
    pn = weak_pair_network()
    lower = {pn.source_edge[s]: pn.source_caps[s] for s in pn.mu1}
    pn.set_gamma(F(2))
    lower.update({pn.sink_edge[t]: 2 * pn.sink_base[t] for t in pn.mu2})
    flows = feasible_flow(pn.net, lower)
    assert flows is not None
    assert all(flows[e] >= lo for e, lo in lower.items())
    pn.set_gamma(F(1))
    lower = {pn.source_edge[s]: pn.source_caps[s] for s in pn.mu1}
    lower.update({pn.sink_edge[t]: pn.sink_base[t] for t in pn.mu2})
    assert feasible_flow(pn.net, lower) is None


def test_feasible_flow_without_lower_bounds_is_zero_flow() -> None:
    net = FlowNetwork()
    a = net.add_vertex("a")
    net.add_edge(net.SOURCE, a, F(1))
    net.add_edge(a, net.SINK, F(1, 2))
    assert set(feasible_flow(net, {}).values()) == {0}
    assert feasible_flow(net, {}, min_value=F(1, 2)) is not None
    assert feasible_flow(net, {}, min_value=F(3, 4)) is None


def test_set_gamma_same_value_keeps_flow() -> None:
    pn = weak_pair_network()
    pn.set_gamma(F(2))
    value = pn.max_flow()
    flows = list(pn.net.flow)
    pn.set_gamma(F(2))
    assert pn.net.flow == flows and pn.value == value


def test_gamma_zero_has_zero_flow() -> None:
    assert weak_pair_network().kappa(F(0)) == 0


def test_single_edge_breakpoint() -> None:
    pn = ParametricNetwork({0: F(1, 3)}, {0: F(1, 2)}, [(0, 0)])
    bp = breakpoints(pn)
    assert bp.points == (F(2, 3),)
    assert bp.segments == ((F(1, 2), F(0)), (F(0), F(1, 3)))


def test_no_edges_no_breakpoints() -> None:
    pn = ParametricNetwork({0: F(1)}, {0: F(1)}, [])
    assert breakpoints(pn).points == ()
    assert pn.kappa(F(5)) == 0


def test_max_cost_flow_prefers_mandatory_edges() -> None:
    pn = max_cost_network()
    pn.set_gamma(F(1))
    best = max_cost_max_flow(pn)
    assert best.value == F(1, 2)
    assert best.flow_on("u1", "u2") == F(1, 2)
    assert flow_cost(pn, best) == 1
    assert classify_gamma(pn, F(1)) is GammaClass.VALID
    assert classify_gamma(pn, F(1, 4)) is GammaClass.TOO_SMALL
    assert classify_gamma(pn, F(2)) is GammaClass.TOO_LARGE
    assert valid_interval(pn) == (F(1, 2), F(1))


def test_three_breakpoint_interval_and_classes() -> None:
    pn = three_breakpoint_network()
    assert valid_interval(pn) == (F(1, 2), F(1))
    assert classify_gamma(pn, F(1, 4)) is GammaClass.TOO_SMALL
    assert classify_gamma(pn, F(2)) is GammaClass.TOO_LARGE
    assert find_valid_breakpoint(pn) in (F(1, 2), F(1))


def test_dot_rendering() -> None:
    _, bn = _ctmc_pair_network()
    bn.max_flow()
    text = to_dot(bn, "pair")
    assert text.startswith("digraph") and "source" in text and "sink" in text


def _counterexample() -> ParametricNetwork:
    c = COUNTEREXAMPLE
    return ParametricNetwork(c["source"], c["sink"], c["edges"], c["mu1"], c["mu2"])


def test_valid_gamma_strictly_between_breakpoints() -> None:
    pn = _counterexample()
    assert breakpoints(pn).points == (F(7, 10), F(7, 5))
    assert find_valid_breakpoint(pn) is None
    assert valid_interval(pn) == (F(49, 60), F(21, 20))
    for gamma in (F(49, 60), F(9, 10), F(21, 20)):
        assert classify_gamma(pn, gamma) is GammaClass.VALID
    assert classify_gamma(pn, F(7, 10)) is GammaClass.TOO_SMALL
    assert classify_gamma(pn, F(7, 5)) is GammaClass.TOO_LARGE
    assert valid_gamma_oracle(pn, fixed=F(48, 60)) is None
    assert valid_gamma_oracle(pn, fixed=F(22, 20)) is None


def _network(data) -> ParametricNetwork:
    source, sink, edges, mu1, mu2 = data
    return ParametricNetwork(source, sink, edges, mu1, mu2)


@given(bipartite_networks())
def test_push_relabel_matches_augmenting_paths(data) -> None:
    source, sink, edges = data
    bn = BipartiteNetwork(source, sink, edges)
    assert bn.max_flow() == edmonds_karp(source, sink, edges)
    bn.net.check_flow()
    assert bn.net.valid_labeling()


@given(bipartite_networks(), st.randoms(use_true_random=False))
def test_incremental_deletion_matches_fresh(data, rng) -> None:
    source, sink, edges = data
    bn = BipartiteNetwork(source, sink, edges)
    bn.max_flow()
    remaining = list(edges)
    rng.shuffle(remaining)
    while remaining:
        k = rng.randint(1, len(remaining))
        batch, remaining = remaining[:k], remaining[k:]
        value = smf_update(bn, batch)
        bn.net.check_flow()
        assert value == edmonds_karp(source, sink, remaining)


@given(parametric_networks(), st.lists(st.fractions(0, 20), min_size=3, max_size=3, unique=True))
def test_kappa_concave_and_matches_segments(data, gammas) -> None:
    pn = _network(data)
    bp = breakpoints(pn)
    g1, g2, g3 = sorted(gammas)
    k1, k2, k3 = (pn.kappa(g) for g in (g1, g2, g3))
    assert k2 >= k1 + (k3 - k1) * (g2 - g1) / (g3 - g1)
    for g, k in ((g1, k1), (g2, k2), (g3, k3)):
        assert bp.kappa(g) == k
        assert k <= min(sum(pn.source_caps.values()), g * sum(pn.sink_base.values()))


@given(parametric_networks())
def test_valid_interval_matches_lp(data) -> None:
    pn = _network(data)
    interval = valid_interval(pn)
    some = valid_gamma_oracle(pn)
    assert (interval is None) == (some is None)
    if interval is None:
        return
    lo, hi = interval
    assert valid_gamma_oracle(pn, fixed=lo) is not None
    if lo > 0:
        assert valid_gamma_oracle(pn, fixed=lo * F(99, 100)) is None
    if hi != INF:
        assert valid_gamma_oracle(pn, fixed=hi) is not None
        assert valid_gamma_oracle(pn, fixed=hi * F(101, 100) + F(1, 1000)) is None


@given(parametric_networks(), st.fractions(F(1, 100), 10))
def test_classification_matches_lp(data, gamma) -> None:
    pn = _network(data)
    verdict = classify_gamma(pn, gamma)
    assert (verdict is GammaClass.VALID) == (valid_gamma_oracle(pn, fixed=gamma) is not None)
    interval = valid_interval(pn)
    if verdict is GammaClass.TOO_SMALL and interval:
        assert interval[0] > gamma
    if verdict is GammaClass.TOO_LARGE and interval:
        assert interval[1] < gamma
    if verdict is GammaClass.NO_VALID:
        assert interval is None


@given(parametric_networks())
def test_found_breakpoint_is_valid(data) -> None:
    pn = _network(data)
    found = find_valid_breakpoint(pn)
    if found is not None:
        assert valid_gamma_oracle(pn, fixed=found) is not None
    minimal = find_valid_breakpoint(pn, minimal=True)
    assert (minimal is None) == (found is None)
    if minimal is not None:
        assert minimal <= found


@given(parametric_networks(), st.fractions(F(1, 100), 10))
def test_max_cost_flow_is_maximum(data, gamma) -> None:
    pn = _network(data)
    pn.set_gamma(gamma)
    best = max_cost_max_flow(pn)
    best.net.check_flow()
    assert best.value == pn.kappa(gamma)
    assert flow_cost(pn, best) >= flow_cost(pn, pn)


@given(st.integers(0, 2**32 - 1))
def test_flow_decision_matches_weight_lp(seed) -> None:
    rng = random.Random(seed)
    n = rng.randint(1, 5)
    mu1 = random_distribution(rng, n, 3, rng.random() < 0.5)
    mu2 = random_distribution(rng, n, 3, rng.random() < 0.5)
    pairs = [(s, t) for s, t in itertools.product(mu1, mu2) if rng.random() < 0.5]
    flow = build_network(Distribution(mu1), Distribution(mu2), Relation(pairs)).max_flow() == 1
    assert flow == weight_oracle(mu1, mu2, pairs)


def test_negative_gamma_rejected() -> None:
    with pytest.raises(AssertionError):
        weak_pair_network().set_gamma(F(-1))



def test_pair_network_capacities() -> None:
    model, bn = _ctmc_pair_network()
    half = F(1, 2)
    for s in ("u1", "u2"):
        assert bn.net.cap[bn.source_edge[model.state(s)]] == half
    for t in ("u3", "u4"):
        assert bn.net.cap[bn.sink_edge[model.state(t)]] == half


def test_point_mass_single_path() -> None:
    bn = build_network(Distribution({3: F(1)}), Distribution({3: F(1)}), Relation([(3, 3)]))
    assert set(bn.inner) == {(3, 3)}
    assert bn.max_flow() == 1


def test_no_inner_edges_falls_short() -> None:
    mu = Distribution({0: F(1, 2)})
    assert build_network(mu, Distribution({1: F(1, 2)}), Relation()).max_flow() == F(1, 2)


def test_lower_bound_transform_value() -> None:
    pn = weak_pair_network()
    pn.set_gamma(F(2))
    lower = {pn.source_edge[s]: pn.source_caps[s] for s in pn.mu1}
    lower.update({pn.sink_edge[t]: 2 * pn.sink_base[t] for t in pn.mu2})
    transformed, required, _ = lower_bound_transform(pn.net, lower)
    assert required == F(11, 8)
    assert transformed.max_flow() == F(11, 8)


def test_rescaling_sink_capacities() -> None:
    pn = weak_pair_network()
    pn.kappa(F(2))
    pn.set_gamma(F(6, 7))
    for t, e in pn.sink_edge.items():
        assert pn.net.cap[e] == F(6, 7) * pn.sink_base[t]
    pn.net.check_flow()
    assert pn.max_flow() == F(6, 7)


def test_weak_pair_kappa_segments() -> None:
    pn = weak_pair_network()
    bp = breakpoints(pn)
    assert bp.segments == ((F(1), F(0)), (F(1, 8), F(3, 4)), (F(0), F(1)))
    assert find_valid_breakpoint(pn) == 2
    assert classify_gamma(pn, F(0)) in (GammaClass.TOO_SMALL, GammaClass.NO_VALID)


def test_empty_mandatory_sets_have_zero_cost() -> None:
    pn = ParametricNetwork({0: F(1)}, {0: F(1)}, [(0, 0)])
    assert flow_cost(pn, max_cost_max_flow(pn)) == 0


def test_no_breakpoints_and_nothing_valid() -> None:
    pn = ParametricNetwork({0: F(1)}, {1: F(1)}, [], mu1={0})
    assert breakpoints(pn).points == ()
    assert find_valid_breakpoint(pn) is None
