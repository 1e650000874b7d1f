import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadic.grid import (DyadicTree, LeafNode, TopLevel, Window, WindowMismatch,
                         bit_length, children, parent, sibling, tree_distance)

from conftest import random_tree


def chain(q):
    """q and all its ancestors, finest first."""
    out = [q]
    while not out[-1].is_top:
        out.append(out[-1].parent())
    return out


def distance_by_walk(q, r):
    cq, cr = chain(q), chain(r)
    for i, a in enumerate(cq):
        if a in cr:
            return i + cr.index(a)
    raise AssertionError("no common ancestor")


def test_window_basics():
    w = Window(2, 5)
    assert w.n_leaves == 32
    assert w.leaf_level == -3
    assert w.length == 4.0
    assert w.root().is_top
    assert len(list(w.nodes())) == 2 ** 6 - 1
    with pytest.raises(ValueError):
        Window(0, 0)


def test_node_geometry():
    w = Window(0, 3)
    q = w.node(-2, 1)
    assert (q.start, q.end, q.length) == (0.25, 0.5, 0.25)
    assert q.depth == 2 and not q.is_left
    a, b = children(q)
    assert a.start == q.start and b.end == q.end and a.end == b.start
    assert parent(a) == q and sibling(a) == b
    assert q.ancestor(2) == w.root()
    assert w.root().contains(q) and not a.contains(q)


def test_boundary_errors():
    w = Window(0, 2)
    with pytest.raises(TopLevel):
        parent(w.root())
    with pytest.raises(TopLevel):
        sibling(w.root())
    with pytest.raises(LeafNode):
        children(w.node(-2, 0))
    with pytest.raises(ValueError):
        w.node(-3, 0)
    with pytest.raises(WindowMismatch):
        tree_distance(w.root(), Window(1, 2).root())


def test_distance_examples():
    w = Window(0, 4)
    q = w.node(-3, 5)
    assert tree_distance(q, q) == 0
    assert tree_distance(q, q.sibling()) == 2
    assert tree_distance(q, q.parent().parent()) == 2


@pytest.mark.parametrize("J,D", [(0, 3), (1, 3), (-2, 4)])
def test_distance_is_a_metric_exhaustive(J, D):
    nodes = list(Window(J, D).nodes())
    dist = {(a, b): tree_distance(a, b) for a in nodes for b in nodes}
    for (a, b), d in dist.items():
        assert d == distance_by_walk(a, b)
        assert d == dist[b, a]
        assert (d == 0) == (a == b)
    for a, b, c in itertools.product(nodes, repeat=3):
        assert dist[a, c] <= dist[a, b] + dist[b, c]


@given(st.integers(1, 12), st.data())
def test_parent_of_sibling(D, data):
    w = Window(0, D)
    d = data.draw(st.integers(1, D))
    o = data.draw(st.integers(0, 2 ** d - 1))
    q = w.node(-d, o)
    assert parent(sibling(q)) == parent(q)
    assert sibling(sibling(q)) == q
    a, b = children(parent(q))
    assert {a, b} == {q, sibling(q)}


@given(st.lists(st.integers(0, 2 ** 52), min_size=1, max_size=50))
def test_bit_length_matches_python(xs):
    assert list(bit_length(np.array(xs))) == [x.bit_length() for x in xs]


def test_full_tree_layout():
    t = DyadicTree.full(Window(0, 3))
    assert t.n_leaves == 8 and t.n_nodes == 15 and t.is_full
    assert np.all(t.leaf_hi - t.leaf_lo == 2 ** (3 - t.depth))
    for i in range(1, t.n_nodes):
        p = t.parent[i]
        assert t.left[p] == i or t.right[p] == i
        assert t.sibling[t.sibling[i]] == i
    assert t.index(t.node_id(9)) == 9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_tree_reductions_against_loops(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, D=6)
    x = rng.standard_normal(t.n_leaves)
    node_vals = rng.standard_normal(t.n_nodes)
    up = t.up_sum(x)
    for i in range(t.n_nodes):
        assert np.isclose(up[i], x[t.leaf_lo[i]:t.leaf_hi[i]].sum())
    # every interior node is the union of its two children
    for i in t.internal:
        assert t.leaf_lo[t.left[i]] == t.leaf_lo[i]
        assert t.leaf_hi[t.left[i]] == t.leaf_lo[t.right[i]]
        assert t.leaf_hi[t.right[i]] == t.leaf_hi[i]
    ps = t.path_sum(node_vals)
    ds = t.down_sum(node_vals)
    for j, leaf in enumerate(t.leaves):
        anc, i = [], leaf
        while i >= 0:
            anc.append(i)
            i = t.parent[i]
        assert np.isclose(ps[leaf], node_vals[anc].sum())
        assert np.isclose(ds[j], node_vals[anc].sum())


def test_find_reports_missing_nodes(rng):
    t = DyadicTree.from_leaves(Window(0, 3), [(1, 0), (2, 2), (2, 3)])
    assert t.n_leaves == 3
    assert t.find(1, 0) >= 0
    assert t.find(2, 0) == -1
    assert t.find(2, 3) >= 0


def test_bad_partitions_rejected():
    w = Window(0, 2)
    with pytest.raises(ValueError):
        DyadicTree.from_leaves(w, [(1, 0)])
    with pytest.raises(ValueError):
        DyadicTree.from_leaves(w, [(1, 0), (1, 1), (2, 0)])
    with pytest.raises(ValueError):
        DyadicTree.from_leaves(w, [(3, 0)])
