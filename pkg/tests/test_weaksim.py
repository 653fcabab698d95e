from fractions import Fraction

import pytest
from generators import chains
from hypothesis import given, settings
from samples import (
    COUNTEREXAMPLE,
    FPS_EXAMPLE,
    WEAK_EXAMPLE,
    WEAK_PAIR,
    WEAK_PAIR_RELATION,
    load,
    named,
    relation,
    weak_pair_ctmc,
)

from simrel.flownet import GammaClass, classify_gamma
from simrel.models import Kind, Model, ModelError, Relation, embedded_dtmc
from simrel.oracles import weak_up_to
from simrel.stats import Stats
from simrel.weaksim import (
    a_classes,
    incomplete_iteration_schedule,
    parametric_network,
    simrel_w,
    weak_witness,
    ws_check,
    ws_check_ctmc,
    ws_improved_check,
)

F = Fraction


def test_dtmc_example_exclusions() -> None:
    model = load(WEAK_EXAMPLE)
    weak = named(model, simrel_w(model))
    assert ("v1", "u2") not in weak
    assert ("s2", "s3") not in weak
    assert ("s1", "s3") in weak
    rel = simrel_w(model)
    s2, s3 = model.state("s2"), model.state("s3")
    widened = Relation(set(rel) | {(s2, s3)})
    assert not ws_check(model, s2, s3, widened)
    assert not weak_up_to(model, s2, s3, widened)


def test_weak_pair_classes_and_improved_check() -> None:
    model = load(WEAK_PAIR)
    rel = relation(model, WEAK_PAIR_RELATION)
    s1, s2 = model.state("s1"), model.state("s2")
    classes = [{model.name(x) for x in c} for c in a_classes(model, s1, s2, rel)]
    assert classes == [{"u1", "u2"}, {"s1", "s2", "o1", "o2", "o3", "v1", "v2"}]
    assert ws_improved_check(model, s1, s2, rel)
    assert ws_check(model, s1, s2, rel)
    assert ws_check(model, s1, s2, rel, improved=True)
    context = parametric_network(model, s1, s2, rel)
    assert {model.name(x) for x in context.mu1} == {"u1", "o1"}
    assert {model.name(x) for x in context.pv2} == {"v2"}


def _two_classes() -> tuple[Model, Relation]:
    # States: s1 s2 a1 b1 a2 b2; the two classes want gamma 2 and 2/3.
    model = Model(
        Kind.DTMC, 6, labels=[(), (), {"x"}, {"y"}, {"x"}, {"y"}],
        rows={0: {2: F(1, 2), 3: F(1, 2)}, 1: {4: F(1, 4), 5: F(3, 4)}},
    )
    return model, Relation([(0, 1), (2, 4), (3, 5)])


def test_conflicting_class_ratios() -> None:
    model, rel = _two_classes()
    assert len(a_classes(model, 0, 1, rel)) == 3
    assert not ws_improved_check(model, 0, 1, rel)
    assert not ws_check(model, 0, 1, rel)
    assert not weak_up_to(model, 0, 1, rel)


def test_improved_check_needs_two_classes() -> None:
    model = load(WEAK_EXAMPLE)
    rel = Relation([(0, 0)])
    with pytest.raises(AssertionError):
        ws_improved_check(model, 0, 0, rel, classes=a_classes(model, 0, 0, rel))


@pytest.mark.parametrize("ratio, expected", [(3, True), (2, True), (1, False)])
def test_ctmc_rate_bound(ratio: int, expected: bool) -> None:
    model = load(weak_pair_ctmc(ratio))
    rel = relation(model, WEAK_PAIR_RELATION)
    s1, s2 = model.state("s1"), model.state("s2")
    assert ws_check_ctmc(model, s1, s2, rel) is expected
    assert ws_check_ctmc(model, s1, s2, rel, improved=True) is expected
    assert weak_up_to(model, s1, s2, rel) is expected


def test_absorbing_left_state() -> None:
    model = load(WEAK_EXAMPLE)
    stats = Stats()
    q1, s1 = model.state("q1"), model.state("s1")
    assert ws_check(model, q1, s1, Relation(), stats=stats)
    assert stats.branch_a == 1


def _stutter_model() -> Model:
    # States: s1 s2 w u1 u2; s2 reaches its match through the stutter state w.
    return Model(Kind.DTMC, 5, labels={3: {"g"}, 4: {"g"}}, rows={0: {3: 1}, 1: {2: 1}, 2: {4: 1}})


def test_reachability_through_stutter_states() -> None:
    model = _stutter_model()
    stats = Stats()
    rel = Relation([(0, 1), (0, 2), (3, 4)])
    assert ws_check(model, 0, 1, rel, stats=stats)
    assert stats.branch_b == 1
    assert weak_up_to(model, 0, 1, rel)
    assert not ws_check(model, 0, 1, Relation([(0, 1), (3, 4)]))
    assert not weak_up_to(model, 0, 1, Relation([(0, 1), (3, 4)]))
    assert (0, 1) in simrel_w(model)


def _interval_only_model() -> tuple[Model, Relation]:
    """DTMC pair whose parametric network is the flownet counterexample."""
    c = COUNTEREXAMPLE
    xs = {i: 2 + i for i in c["source"]}
    ys = {j: 7 + j for j in c["sink"]}
    rows = {0: {xs[i]: p for i, p in c["source"].items()}, 1: {ys[j]: p for j, p in c["sink"].items()}}
    model = Model(Kind.DTMC, 11, rows=rows)
    pairs = [(0, 1)] + [(xs[i], ys[j]) for i, j in c["edges"]]
    pairs += [(xs[i], 1) for i in c["source"] if i not in c["mu1"]]
    pairs += [(0, ys[j]) for j in c["sink"] if j not in c["mu2"]]
    return model, Relation(pairs)


def test_valid_gamma_between_breakpoints() -> None:
    model, rel = _interval_only_model()
    stats = Stats()
    assert ws_check(model, 0, 1, rel, stats=stats)
    assert stats.interval_fallbacks == 1
    assert weak_up_to(model, 0, 1, rel)
    witness = weak_witness(model, 0, 1, rel)
    assert witness["branch"] == "c" and witness["gamma"] == F(49, 60)


def test_schedules_reach_same_fixpoint() -> None:
    model = load(WEAK_EXAMPLE)
    expected = simrel_w(model)
    for flagged in (True, [1, 2], False):
        schedule = incomplete_iteration_schedule(flagged)
        assert simrel_w(model, improved=True, schedule=schedule) == expected


def test_rejects_other_kinds() -> None:
    with pytest.raises(ModelError):
        simrel_w(load(FPS_EXAMPLE))


def _check_witness(model: Model, s1: int, s2: int, rel: Relation) -> None:
    witness = weak_witness(model, s1, s2, rel)
    assert witness is not None
    if witness["branch"] != "c":
        return
    dtmc = embedded_dtmc(model) if model.kind is Kind.CTMC else model
    context = parametric_network(dtmc, s1, s2, rel)
    gamma, flow = witness["gamma"], witness["flow"]
    p1, p2 = dtmc.rows[s1], dtmc.rows[s2]
    assert all((u, v) in rel for u, v in flow)
    out = {u: sum((f for (a, _), f in flow.items() if a == u), F(0)) for u in p1}
    into = {v: sum((f for (_, b), f in flow.items() if b == v), F(0)) for v in p2}
    for u, total in out.items():
        assert total == p1(u) if u in context.mu1 else total <= p1(u)
    for v, total in into.items():
        assert total == gamma * p2(v) if v in context.mu2 else total <= gamma * p2(v)
    if model.kind is Kind.CTMC:
        assert gamma <= model.rows[s2].exit_rate / model.rows[s1].exit_rate
    assert classify_gamma(context.network, gamma) is GammaClass.VALID


def test_witness_examples() -> None:
    model = load(WEAK_PAIR)
    rel = relation(model, WEAK_PAIR_RELATION)
    _check_witness(model, model.state("s1"), model.state("s2"), rel)
    ctmc = load(weak_pair_ctmc(3))
    _check_witness(ctmc, ctmc.state("s1"), ctmc.state("s2"), relation(ctmc, WEAK_PAIR_RELATION))
    model, rel = _interval_only_model()
    _check_witness(model, 0, 1, rel)
    assert weak_witness(model, 1, 0, Relation()) is None


@settings(max_examples=60)
@given(chains(kinds=("DTMC", "CTMC")))
def test_fixpoint_properties(model: Model) -> None:
    rel = simrel_w(model)
    assert all((s, s) in rel for s in range(model.n))
    assert simrel_w(model, improved=True) == rel
    assert simrel_w(model, improved=True, schedule=incomplete_iteration_schedule(True)) == rel
    for s1, s2 in rel:
        assert weak_up_to(model, s1, s2, rel)
        _check_witness(model, s1, s2, rel)
