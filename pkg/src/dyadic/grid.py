"""Dyadic windows, node addressing, and finite resolved trees.

A window is the interval [0, 2^J) cut down to depth D, so the finest
intervals have side 2^(J-D). Nodes are addressed by (level, offset) and
denote [offset * 2^level, (offset + 1) * 2^level).

`DyadicTree` is the set of nodes that are actually resolved. Its leaves
partition the window and may sit at different depths. The full tree,
with all 2^D leaves, is one instance of it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MAX_DEPTH = 60


class TopLevel(ValueError):
    """The top node of a window has no parent and no sibling."""


class WindowMismatch(ValueError):
    """Objects living on different windows or trees were combined."""


class LeafNode(ValueError):
    """An operation that needs children was called on a leaf."""


@dataclass(frozen=True)
class Window:
    """The dyadic window [0, 2^top) resolved down to `depth` levels."""

    top: int
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.depth > MAX_DEPTH:
            raise ValueError(f"depth must be <= {MAX_DEPTH}, got {self.depth}")

    @property
    def leaf_level(self) -> int:
        return self.top - self.depth

    @property
    def n_leaves(self) -> int:
        return 2 ** self.depth

    @property
    def length(self) -> float:
        return 2.0 ** self.top

    def contains(self, level: int, offset: int) -> bool:
        return self.leaf_level <= level <= self.top and 0 <= offset < 2 ** (self.top - level)

    def node(self, level: int, offset: int) -> "NodeId":
        if not self.contains(level, offset):
            raise ValueError(f"node ({level}, {offset}) lies outside {self}")
        return NodeId(int(level), int(offset), self)

    def root(self) -> "NodeId":
        return NodeId(self.top, 0, self)

    def nodes(self) -> Iterator["NodeId"]:
        """All nodes of the full window, coarse to fine."""
        for level in range(self.top, self.leaf_level - 1, -1):
            for m in range(2 ** (self.top - level)):
                yield NodeId(level, m, self)


@dataclass(frozen=True)
class NodeId:
    """The dyadic interval [offset * 2^level, (offset + 1) * 2^level) of a window."""

    level: int
    offset: int
    window: Window

    @property
    def depth(self) -> int:
        return self.window.top - self.level

    @property
    def start(self) -> float:
        return self.offset * 2.0 ** self.level

    @property
    def end(self) -> float:
        return (self.offset + 1) * 2.0 ** self.level

    @property
    def length(self) -> float:
        return 2.0 ** self.level

    @property
    def is_top(self) -> bool:
        return self.level == self.window.top

    @property
    def is_leaf(self) -> bool:
        """True at the finest level of the window."""
        return self.level == self.window.leaf_level

    @property
    def is_left(self) -> bool:
        return self.offset % 2 == 0

    def parent(self) -> "NodeId":
        return parent(self)

    def sibling(self) -> "NodeId":
        return sibling(self)

    def children(self) -> tuple["NodeId", "NodeId"]:
        return children(self)

    def ancestor(self, k: int) -> "NodeId":
        """The k-fold parent Q^(k)."""
        if self.level + k > self.window.top:
            raise TopLevel(f"{self} has no ancestor {k} levels up")
        return NodeId(self.level + k, self.offset >> k, self.window)

    def contains(self, other: "NodeId") -> bool:
        if other.window != self.window or other.level > self.level:
            return False
        return other.offset >> (self.level - other.level) == self.offset

    def __repr__(self) -> str:
        return f"NodeId(level={self.level}, offset={self.offset})"


def parent(q: NodeId) -> NodeId:
    """The dyadic parent of q."""
    if q.is_top:
        raise TopLevel(f"{q} is at the top of its window")
    return NodeId(q.level + 1, q.offset // 2, q.window)


def sibling(q: NodeId) -> NodeId:
    """The other child of parent(q)."""
    if q.is_top:
        raise TopLevel(f"{q} is at the top of its window")
    return NodeId(q.level, q.offset ^ 1, q.window)


def children(q: NodeId) -> tuple[NodeId, NodeId]:
    """Left and right children of q."""
    if q.is_leaf:
        raise LeafNode(f"{q} is a leaf of its window")
    return (NodeId(q.level - 1, 2 * q.offset, q.window),
            NodeId(q.level - 1, 2 * q.offset + 1, q.window))


def tree_distance(q: NodeId, r: NodeId) -> int:
    """Number of edges on the tree path from q to r through their common ancestor."""
    if q.window != r.window:
        raise WindowMismatch("nodes belong to different windows")
    top = max(q.level, r.level)
    a = q.offset >> (top - q.level)
    b = r.offset >> (top - r.level)
    lca = top + (a ^ b).bit_length()
    return (lca - q.level) + (lca - r.level)


def bit_length(x: np.ndarray) -> np.ndarray:
    """Vectorized int.bit_length for non-negative integers below 2^53."""
    x = np.asarray(x, dtype=np.int64)
    _, e = np.frexp(x.astype(np.float64))
    return np.where(x > 0, e, 0).astype(np.int64)


class DyadicTree:
    """A finite binary tree of dyadic intervals whose leaves partition a window.

    Nodes are numbered breadth first: all nodes of depth 0, then depth 1,
    and so on, each depth sorted by offset. Depth counts levels below the
    top, so a node of depth d has level window.top - d.

    Attributes are flat numpy arrays indexed by node number: `depth`,
    `offset`, `parent`, `left`, `right`, `sibling` (-1 where absent), and
    `leaf_lo`, `leaf_hi` giving the contiguous range of leaves (in left to
    right order) under each node. `leaves` lists the leaf node numbers from
    left to right.
    """

    def __init__(self, window: Window, leaf_depth: Iterable[int], leaf_offset: Iterable[int]):
        self.window = window
        D = window.depth
        ld = np.asarray(leaf_depth, dtype=np.int64)
        lo = np.asarray(leaf_offset, dtype=np.int64)
        if ld.shape != lo.shape or ld.ndim != 1 or ld.size == 0:
            raise ValueError("leaf depth and offset arrays must be 1-d and of equal length")
        if ld.min() < 0 or ld.max() > D:
            raise ValueError("leaf depths must lie in [0, D]")
        if np.any(lo < 0) or np.any(lo >= (np.int64(1) << ld)):
            raise ValueError("leaf offsets out of range for their depth")
        starts = lo << (D - ld)
        order = np.argsort(starts, kind="stable")
        starts = starts[order]
        sizes = np.int64(1) << (D - ld[order])
        if starts[0] != 0 or np.any(starts[1:] != starts[:-1] + sizes[:-1]) or \
                starts[-1] + sizes[-1] != (np.int64(1) << D):
            raise ValueError("leaves do not partition the window")

        max_depth = int(ld.max())
        per_depth: list[np.ndarray] = [np.empty(0, np.int64)] * (max_depth + 1)
        below = np.empty(0, np.int64)
        for d in range(max_depth, -1, -1):
            here = np.concatenate([lo[ld == d], below >> 1])
            per_depth[d] = np.unique(here)
            below = per_depth[d]
        if per_depth[0].tolist() != [0]:
            raise ValueError("leaves do not form a single rooted tree")

        counts = np.array([a.size for a in per_depth], dtype=np.int64)
        self.level_start = np.concatenate([[0], np.cumsum(counts)])
        n = int(self.level_start[-1])
        self.n_nodes = n
        self.max_depth = max_depth
        self.offset = np.concatenate(per_depth)
        self.depth = np.repeat(np.arange(max_depth + 1, dtype=np.int64), counts)
        self._per_depth = per_depth

        self.parent = np.full(n, -1, np.int64)
        self.left = np.full(n, -1, np.int64)
        self.right = np.full(n, -1, np.int64)
        self.sibling = np.full(n, -1, np.int64)
        for d in range(1, max_depth + 1):
            s, e = self.level_start[d], self.level_start[d + 1]
            offs = per_depth[d]
            self.parent[s:e] = self.level_start[d - 1] + np.searchsorted(per_depth[d - 1], offs >> 1)
            sib = self._find_at(d, offs ^ 1)
            if np.any(sib < 0):
                raise ValueError("a resolved node is missing its sibling")
            self.sibling[s:e] = sib
        for d in range(max_depth):
            s, e = self.level_start[d], self.level_start[d + 1]
            child = self._find_at(d + 1, per_depth[d] * 2)
            has = child >= 0
            self.left[s:e] = np.where(has, child, -1)
            self.right[s:e] = np.where(has, child + 1, -1)

        self.is_leaf = self.left < 0
        leaf_nodes = np.flatnonzero(self.is_leaf)
        lstarts = self.offset[leaf_nodes] << (D - self.depth[leaf_nodes])
        lorder = np.argsort(lstarts, kind="stable")
        self.leaves = leaf_nodes[lorder]
        self.leaf_start = lstarts[lorder]
        self.n_leaves = self.leaves.size
        self.leaf_pos = np.full(n, -1, np.int64)
        self.leaf_pos[self.leaves] = np.arange(self.n_leaves)
        node_start = self.offset << (D - self.depth)
        node_end = (self.offset + 1) << (D - self.depth)
        self.leaf_lo = np.searchsorted(self.leaf_start, node_start)
        self.leaf_hi = np.searchsorted(self.leaf_start, node_end)
        self.leaf_depth = self.depth[self.leaves]
        # leaf lengths in units of the finest cell
        self.leaf_size = np.int64(1) << (D - self.leaf_depth)

        self.nodes_at = [np.arange(self.level_start[d], self.level_start[d + 1]) for d in range(max_depth + 1)]
        self.internal_at = [a[~self.is_leaf[a]] for a in self.nodes_at]
        self.internal = np.flatnonzero(~self.is_leaf)

    # construction -----------------------------------------------------------

    @classmethod
    def full(cls, window: Window) -> "DyadicTree":
        """The tree with every node of the window resolved."""
        D = window.depth
        return cls(window, np.full(2 ** D, D), np.arange(2 ** D))

    @classmethod
    def from_leaves(cls, window: Window, leaves: Iterable[tuple[int, int]]) -> "DyadicTree":
        """Build from (depth, offset) pairs that partition the window."""
        arr = np.asarray(list(leaves), dtype=np.int64).reshape(-1, 2)
        return cls(window, arr[:, 0], arr[:, 1])

    # lookup -------------------------------------------------------------------

    def _find_at(self, d: int, offsets: np.ndarray) -> np.ndarray:
        offs = np.asarray(offsets, dtype=np.int64)
        if d < 0 or d > self.max_depth:
            return np.full(offs.shape, -1, np.int64)
        row = self._per_depth[d]
        pos = np.searchsorted(row, offs)
        ok = pos < row.size
        ok[ok] = row[pos[ok]] == offs[ok]
        return np.where(ok, self.level_start[d] + pos, -1)

    def find(self, depth, offset) -> np.ndarray:
        """Node numbers for (depth, offset) pairs, -1 where not resolved."""
        depth = np.asarray(depth, dtype=np.int64)
        offset = np.asarray(offset, dtype=np.int64)
        depth, offset = np.broadcast_arrays(depth, offset)
        out = np.full(depth.shape, -1, np.int64)
        for d in np.unique(depth):
            sel = depth == d
            out[sel] = self._find_at(int(d), offset[sel])
        return out

    def index(self, q: NodeId) -> int:
        """Node number of q; raises KeyError if q is not resolved."""
        if q.window != self.window:
            raise WindowMismatch("node belongs to another window")
        i = int(self._find_at(q.depth, np.array([q.offset]))[0])
        if i < 0:
            raise KeyError(f"{q} is not resolved in this tree")
        return i

    def node_id(self, i: int) -> NodeId:
        return NodeId(self.window.top - int(self.depth[i]), int(self.offset[i]), self.window)

    def node_ids(self, idx: Iterable[int]) -> list[NodeId]:
        return [self.node_id(int(i)) for i in idx]

    @property
    def root(self) -> int:
        return 0

    @property
    def is_full(self) -> bool:
        return self.n_leaves == 2 ** self.window.depth

    def leaf_ancestor(self, d: int) -> np.ndarray:
        """For each leaf, its ancestor at depth d (-1 if the leaf is shallower)."""
        ok = self.leaf_depth >= d
        offs = np.where(ok, self.offset[self.leaves] >> np.maximum(self.leaf_depth - d, 0), 0)
        anc = self._find_at(d, offs)
        return np.where(ok, anc, -1)

    def descendants_at(self, i: int, k: int) -> np.ndarray:
        """Resolved descendants of node i exactly k levels below it."""
        d = int(self.depth[i]) + k
        if d > self.max_depth:
            return np.empty(0, np.int64)
        lo = int(self.offset[i]) << k
        row = self._per_depth[d]
        a, b = np.searchsorted(row, [lo, lo + (1 << k)])
        return self.level_start[d] + np.arange(a, b)

    def same_as(self, other: "DyadicTree") -> bool:
        if other is self:
            return True
        return (other.window == self.window and other.n_nodes == self.n_nodes
                and np.array_equal(other.depth, self.depth) and np.array_equal(other.offset, self.offset))

    def check_same(self, other: "DyadicTree") -> None:
        if not self.same_as(other):
            raise WindowMismatch("objects live on different trees")

    # reductions ---------------------------------------------------------------

    def up_sum(self, leaf_values: np.ndarray) -> np.ndarray:
        """Node sums of leaf values, built bottom up so sums are exactly additive."""
        leaf_values = np.asarray(leaf_values, dtype=np.float64)
        out = np.zeros((self.n_nodes,) + leaf_values.shape[1:])
        out[self.leaves] = leaf_values
        for d in range(self.max_depth - 1, -1, -1):
            ids = self.internal_at[d]
            out[ids] = out[self.left[ids]] + out[self.right[ids]]
        return out

    def subtree_sum(self, node_values: np.ndarray) -> np.ndarray:
        """For each node Q, the sum of node_values over all nodes contained in Q."""
        out = np.array(node_values, dtype=np.float64, copy=True)
        for d in range(self.max_depth - 1, -1, -1):
            ids = self.internal_at[d]
            out[ids] += out[self.left[ids]] + out[self.right[ids]]
        return out

    def subtree_max(self, node_values: np.ndarray) -> np.ndarray:
        out = np.array(node_values, dtype=np.float64, copy=True)
        for d in range(self.max_depth - 1, -1, -1):
            ids = self.internal_at[d]
            out[ids] = np.maximum(out[ids], np.maximum(out[self.left[ids]], out[self.right[ids]]))
        return out

    def path_sum(self, node_values: np.ndarray) -> np.ndarray:
        """For each node Q, the sum of node_values over Q and all its ancestors."""
        out = np.array(node_values, dtype=np.float64, copy=True)
        for d in range(1, self.max_depth + 1):
            ids = self.nodes_at[d]
            out[ids] += out[self.parent[ids]]
        return out

    def path_max(self, node_values: np.ndarray) -> np.ndarray:
        """For each node Q, the max of node_values over Q and all its ancestors."""
        out = np.array(node_values, dtype=np.float64, copy=True)
        for d in range(1, self.max_depth + 1):
            ids = self.nodes_at[d]
            out[ids] = np.maximum(out[ids], out[self.parent[ids]])
        return out

    def down_sum(self, node_values: np.ndarray) -> np.ndarray:
        """Leaf values of sum over containing nodes of node_values."""
        return self.path_sum(node_values)[self.leaves]

    def spread(self, node_values: np.ndarray, nodes: np.ndarray | None = None) -> np.ndarray:
        """Leaf array equal to node_values[Q] on every leaf of Q, for disjoint nodes."""
        out = np.zeros((self.n_leaves,) + np.shape(node_values)[1:])
        ids = np.arange(self.n_nodes) if nodes is None else np.asarray(nodes)
        vals = np.asarray(node_values)
        for i, v in zip(ids, vals if nodes is not None else vals[ids]):
            out[self.leaf_lo[i]:self.leaf_hi[i]] = v
        return out

    def __repr__(self) -> str:
        return (f"DyadicTree(top={self.window.top}, depth={self.window.depth}, "
                f"nodes={self.n_nodes}, leaves={self.n_leaves})")
