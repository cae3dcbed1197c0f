import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfscope.engine import PathExplosion, brute_force_rf, frontiers, propagate
from rfscope.graph import LayerKind, LayerNode, validate

from randgraphs import random_dag


def conv(vid, k, s=1, preds=()):
    return LayerNode(id=vid, kind=LayerKind.CONV, kernel=(k, k), stride=(s, s),
                     predecessors=preds)


def test_chain_recursion():
    # r grows by (k-1) times the product of the strides of earlier layers:
    # 3; 3+2*1=5; 5+2*2=9.
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        conv("c1", 3, 1, ("in",)),
        conv("c2", 3, 2, ("c1",)),
        conv("c3", 3, 1, ("c2",)),
    ])
    rf = propagate(g)
    assert [rf[v].r_min for v in ("c1", "c2", "c3")] == [(3, 3), (5, 5), (9, 9)]
    assert [rf[v].r_max for v in ("c1", "c2", "c3")] == [(3, 3), (5, 5), (9, 9)]


def test_first_layer_equals_kernel():
    g = validate([LayerNode(id="in", kind=LayerKind.INPUT), conv("c", 7, 2, ("in",))])
    rf = propagate(g)
    assert rf["c"].r_min == rf["c"].r_max == (7, 7)


def test_residual_block_min_and_max_paths():
    # Skip path keeps r at 1, conv path reaches 5; both survive the merge.
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        conv("c1", 3, 1, ("in",)),
        conv("c2", 3, 1, ("c1",)),
        LayerNode(id="add", kind=LayerKind.ADD, predecessors=("in", "c2")),
    ])
    rf = propagate(g)
    assert rf["add"].r_min == (1, 1)
    assert rf["add"].r_max == (5, 5)
    assert brute_force_rf(g, "add") == ((1, 1), (5, 5))


def test_growth_factors_tracked_per_path():
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        conv("a", 3, 4, ("in",)),
        conv("b", 3, 1, ("in",)),
        LayerNode(id="m", kind=LayerKind.ADD, predecessors=("a", "b")),
    ])
    rf = propagate(g)
    assert rf["m"].g_min == (Fraction(1), Fraction(1))
    assert rf["m"].g_max == (Fraction(4), Fraction(4))


def test_upsample_divides_growth():
    nodes = [
        LayerNode(id="in", kind=LayerKind.INPUT),
        conv("down", 3, 2, ("in",)),
        LayerNode(id="up", kind=LayerKind.CONV, kernel=(2, 2), stride=(2, 2),
                  predecessors=("down",), upsample=True),
        conv("c", 3, 1, ("up",)),
    ]
    rf = propagate(validate(nodes))
    # down: r=3 g=2; up: r=3+1*2=5, g back to 1; c: r=5+2*1=7.
    assert rf["up"].r_min == (5, 5)
    assert rf["up"].g_min == (Fraction(1), Fraction(1))
    assert rf["c"].r_min == (7, 7)


def test_rectangular_kernels_propagate_per_axis():
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        LayerNode(id="c1", kind=LayerKind.CONV, kernel=(1, 7), predecessors=("in",)),
        LayerNode(id="c2", kind=LayerKind.CONV, kernel=(7, 1), predecessors=("c1",)),
    ])
    rf = propagate(g)
    assert rf["c1"].r_min == (1, 7)
    assert rf["c2"].r_min == (7, 7)


def test_dilation_expands_kernel():
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        LayerNode(id="c", kind=LayerKind.CONV, kernel=(3, 3), dilation=(2, 2),
                  predecessors=("in",)),
    ])
    assert propagate(g)["c"].r_min == (5, 5)


def test_brute_force_single_path_equals_propagate():
    g = validate([
        LayerNode(id="in", kind=LayerKind.INPUT),
        conv("c1", 5, 2, ("in",)),
        conv("c2", 3, 1, ("c1",)),
    ])
    rf = propagate(g)
    for v in g.order:
        assert brute_force_rf(g, v) == (rf[v].r_min, rf[v].r_max)


def test_brute_force_path_cap():
    # A ladder of n two-way merges has 2^n paths.
    nodes = [LayerNode(id="in", kind=LayerKind.INPUT)]
    prev = "in"
    for i in range(12):
        nodes.append(conv(f"a{i}", 3, 1, (prev,)))
        nodes.append(conv(f"b{i}", 3, 1, (prev,)))
        nodes.append(LayerNode(id=f"m{i}", kind=LayerKind.ADD,
                               predecessors=(f"a{i}", f"b{i}")))
        prev = f"m{i}"
    g = validate(nodes)
    with pytest.raises(PathExplosion):
        brute_force_rf(g, prev, cap=1000)
    lo, hi = brute_force_rf(g, prev)  # default cap admits 4096 paths
    assert lo == hi == (25, 25)


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_oracle_equivalence_random_dags(rng):
    g = random_dag(rng, square=False)
    rf = propagate(g)
    for v in g.order:
        lo, hi = brute_force_rf(g, v)
        assert rf[v].r_min == lo
        assert rf[v].r_max == hi


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_neutral_insertion_is_invisible(rng):
    g = random_dag(rng)
    before = propagate(g)
    victim = rng.choice([v for v in g.order if g.nodes[v].predecessors])
    pred = g.nodes[victim].predecessors[0]
    nodes = []
    for n in g:
        if n.id == victim:
            preds = tuple("spacer" if p == pred else p for p in n.predecessors)
            nodes.append(LayerNode(id=n.id, kind=n.kind, kernel=n.kernel,
                                   stride=n.stride, predecessors=preds))
            continue
        nodes.append(n)
    nodes.append(LayerNode(id="spacer", kind=LayerKind.NEUTRAL, predecessors=(pred,)))
    after = propagate(validate(nodes))
    for v in g.order:
        assert before[v].r_min == after[v].r_min
        assert before[v].r_max == after[v].r_max


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_stride_decrease_is_monotone(rng):
    g = random_dag(rng)
    strided = [v for v in g.order if g.nodes[v].stride > (1, 1)]
    if not strided:
        return
    before = propagate(g)
    victim = rng.choice(strided)
    nodes = [
        LayerNode(id=n.id, kind=n.kind, kernel=n.kernel, stride=(1, 1),
                  predecessors=n.predecessors) if n.id == victim else n
        for n in g
    ]
    after = propagate(validate(nodes))
    for v in g.order:
        for a in (0, 1):
            assert after[v].r_min[a] <= before[v].r_min[a]
            assert after[v].r_max[a] <= before[v].r_max[a]


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_frontier_size_bounded_by_distinct_growth_values(rng):
    g = random_dag(rng)
    for vid, frontier in frontiers(g).items():
        assert len(frontier.states) <= max(1, len({s.g for s in frontier.states}))
        rs = [s.r for s in frontier.states]
        assert len(set(frontier.states)) == len(frontier.states)
        assert min(r[0] for r in rs) >= 1


def test_propagation_deterministic():
    rng = random.Random(123)
    for _ in range(20):
        g = random_dag(rng)
        assert propagate(g) == propagate(g)
