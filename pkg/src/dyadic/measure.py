"""Positive measures on a dyadic tree and the three example measures.

A measure is stored as one positive mass per leaf. Node masses are sums
built from the leaves upward, so additivity holds bit for bit. Leaves
are modelled as cells of uniform density, so a node strictly inside a
leaf would have the same mass profile as Lebesgue measure.

The structured builders place their masses on unit cells [n-1, n),
numbered n = 1, 2, ... from the left end of the window.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import DyadicTree, LeafNode, NodeId, Window

FULL_TREE_LIMIT = 22
MAX_RESOLUTION = 200


class UnresolvableNode(ValueError):
    """A quantity needs structure finer than the tree resolves."""


class MeasureTree:
    """Leaf masses on a DyadicTree together with node masses and m(Q).

    Parameters
    ----------
    tree : DyadicTree
    leaf_mass : array of positive floats, one per leaf in left to right order
    kind : label of the builder ("lebesgue", "lsmp", "twist", "file", ...)
    resolution : number of levels resolved below unit scale, for the
        structured builders
    tail : boolean mask over leaves marking leaves that carry collapsed,
        unresolved structure
    """

    def __init__(self, tree: DyadicTree, leaf_mass, kind: str = "custom",
                 resolution: int | None = None, tail=None):
        leaf_mass = np.asarray(leaf_mass, dtype=np.float64)
        if leaf_mass.shape != (tree.n_leaves,):
            raise ValueError(f"expected {tree.n_leaves} leaf masses, got {leaf_mass.shape}")
        if not np.all(np.isfinite(leaf_mass)) or np.any(leaf_mass <= 0):
            raise ValueError("leaf masses must be finite and strictly positive")
        self.tree = tree
        self.leaf_mass = leaf_mass
        self.kind = kind
        self.resolution = resolution
        self.tail = np.zeros(tree.n_leaves, bool) if tail is None else np.asarray(tail, bool)
        self.node_mass = tree.up_sum(leaf_mass)
        m = np.full(tree.n_nodes, np.nan)
        ids = tree.internal
        left = self.node_mass[tree.left[ids]]
        right = self.node_mass[tree.right[ids]]
        m[ids] = left * right / self.node_mass[ids]
        self.m = m

    @property
    def window(self) -> Window:
        return self.tree.window

    @property
    def total(self) -> float:
        return float(self.node_mass[0])

    def mass(self, q: NodeId) -> float:
        return float(self.node_mass[self.tree.index(q)])

    def m_extended(self) -> np.ndarray:
        """m(Q) for every node, with leaves treated as uniform cells (m = mass / 4).

        Leaves flagged as tails hold unresolved structure; their entry is nan.
        """
        out = self.m.copy()
        leaves = self.tree.leaves
        out[leaves] = np.where(self.tail, np.nan, self.node_mass[leaves] / 4.0)
        return out

    def __repr__(self) -> str:
        return f"MeasureTree(kind={self.kind!r}, {self.tree!r}, total={self.total:.6g})"


def m_value(mu: MeasureTree, q: NodeId) -> float:
    """m(Q) = mu(Q-) mu(Q+) / mu(Q)."""
    i = mu.tree.index(q)
    if mu.tree.is_leaf[i]:
        raise LeafNode(f"{q} is a leaf, m(Q) needs both children")
    return float(mu.m[i])


# builders ---------------------------------------------------------------------

def _from_pieces(window: Window, depth, offset, mass, compact: bool, kind: str,
                 resolution=None, tail=None) -> MeasureTree:
    """Measure with uniform density on each of the given dyadic pieces.

    The pieces must partition the window. In full mode every piece is cut
    into leaves at the finest level. In compact mode each piece is split
    once, so the tree resolves every piece and its two halves.
    """
    depth = np.asarray(depth, np.int64)
    offset = np.asarray(offset, np.int64)
    mass = np.asarray(mass, np.float64)
    tail = np.zeros(depth.size, bool) if tail is None else np.asarray(tail, bool)
    D = window.depth
    if compact:
        split = depth < D
        d_leaf = np.concatenate([depth[~split], np.repeat(depth[split] + 1, 2)])
        o_leaf = np.concatenate([offset[~split], np.stack([2 * offset[split], 2 * offset[split] + 1], 1).ravel()])
        m_leaf = np.concatenate([mass[~split], np.repeat(mass[split] / 2, 2)])
        t_leaf = np.concatenate([tail[~split], np.repeat(tail[split], 2)])
        tree = DyadicTree(window, d_leaf, o_leaf)
        order = np.argsort(o_leaf << (D - d_leaf), kind="stable")
        return MeasureTree(tree, m_leaf[order], kind, resolution, t_leaf[order])
    if D > FULL_TREE_LIMIT:
        raise ValueError(f"full tree of depth {D} is too large; build with compact=True")
    tree = DyadicTree.full(window)
    leaf_mass = np.empty(2 ** D)
    leaf_tail = np.zeros(2 ** D, bool)
    for d, o, w, t in zip(depth, offset, mass, tail):
        k = D - int(d)
        lo = int(o) << k
        leaf_mass[lo:lo + (1 << k)] = w / 2.0 ** k
        leaf_tail[lo:lo + (1 << k)] = t
    return MeasureTree(tree, leaf_mass, kind, resolution, leaf_tail)


def build_lebesgue(window: Window, compact: bool = False) -> MeasureTree:
    """Lebesgue measure: every finest cell has mass 2^(J-D)."""
    return _from_pieces(window, [0], [0], [window.length], compact, "lebesgue")


def build_perturbed_lebesgue(window: Window, eps: float = 0.3, seed: int = 0) -> MeasureTree:
    """Lebesgue measure with leaf masses scaled by independent factors in [1-eps, 1+eps]."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    base = build_lebesgue(window)
    rng = np.random.default_rng(seed)
    scale = rng.uniform(1 - eps, 1 + eps, base.tree.n_leaves)
    return MeasureTree(base.tree, base.leaf_mass * scale, "perturbed-lebesgue")


def _unit_resolution(window: Window) -> int:
    if window.top < 0:
        raise ValueError("structured measures need a window of at least one unit cell (J >= 0)")
    r = window.depth - window.top
    if r < 1:
        raise ValueError("window must resolve at least one level below unit scale")
    if r > MAX_RESOLUTION:
        raise ValueError(f"resolution below unit scale is capped at {MAX_RESOLUTION}")
    return r


def lsmp_masses(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form masses (mu(I_k), mu(I_k^b)) for k = 1..r of the unit-cell LSMP measure."""
    k = np.arange(1, r + 1, dtype=np.float64)
    mi = 1.0 / (2 * k)
    mb = np.where(k == 1, 0.5, 1.0 / (2 * k * np.maximum(k - 1, 1)))
    return mi, mb


def build_lsmp(window: Window, compact: bool = False) -> MeasureTree:
    """The non-doubling measure built from mu(I_k) = 1/(2k) on the first unit cell.

    Inside [0, 1): I_k = [0, 2^-k) has mass 1/(2k) and its sibling
    I_k^b = [2^-k, 2^-k+1) has mass 1/(2k(k-1)) (1/2 for k = 1), spread
    uniformly. The finest interval [0, 2^-r) carries the whole tail mass
    1/(2r). Every other unit cell of the window has unit density.
    """
    r = _unit_resolution(window)
    J = window.top
    _, mb = lsmp_masses(r)
    k = np.arange(1, r + 1)
    depth = list(J + k) + [J + r]
    offset = list(np.ones(r, np.int64)) + [0]
    mass = list(mb) + [1.0 / (2 * r)]
    tail = [False] * r + [True]
    cells = 2 ** J
    depth += [J] * (cells - 1)
    offset += list(range(1, cells))
    mass += [1.0] * (cells - 1)
    tail += [False] * (cells - 1)
    return _from_pieces(window, depth, offset, mass, compact, "lsmp", r, tail)


def twist_a(k):
    k = np.asarray(k, dtype=np.float64)
    return np.where(k == 1, 0.5, 1.0 / np.sqrt(np.maximum(k, 1)))


def twist_b(k):
    return 1.0 - twist_a(k)


def twist_log_prefix_a(r: int) -> np.ndarray:
    """log prod_{i<=k} a_i for k = 0..r (entry 0 is the empty product)."""
    return np.concatenate([[0.0], np.cumsum(np.log(twist_a(np.arange(1, r + 1))))])


def twist_cell_pieces(r: int):
    """Pieces of one unit cell of the twisted measure at resolution r.

    Returns arrays (depth, offset, mass, tail) relative to the cell, where
    depth counts levels below unit scale.
    """
    la = twist_log_prefix_a(r)
    depth, offset, mass, tail = [], [], [], []
    for k in range(1, r + 1):
        log_pk = la[k - 1] + np.log(twist_b(k))
        if k == r:
            depth.append(r); offset.append(1); mass.append(np.exp(log_pk)); tail.append(False)
            continue
        jj = np.arange(1, r - k + 1)
        # log prod_{i<j} c_ki, with c_ki = 1 - 1/(k+i)
        logc = np.log1p(-1.0 / (k + jj))
        prefix = np.concatenate([[0.0], np.cumsum(logc)])
        log_piece = log_pk + prefix[:-1] + np.log(1.0 / (k + jj))
        depth.extend(k + jj); offset.extend((np.int64(1) << jj) + 1); mass.extend(np.exp(log_piece))
        tail.extend([False] * jj.size)
        # the unresolved I_{k, r-k} next to 2^-k
        depth.append(r); offset.append(np.int64(1) << (r - k)); mass.append(np.exp(log_pk + prefix[-1]))
        tail.append(True)
    depth.append(r); offset.append(0); mass.append(np.exp(la[r])); tail.append(True)
    return (np.asarray(depth, np.int64), np.asarray(offset, np.int64),
            np.asarray(mass), np.asarray(tail, bool))


def build_twist(window: Window, compact: bool = False) -> MeasureTree:
    """The sibling balanced but unbalanced measure, repeated on every unit cell.

    With a_1 = 1/2, a_k = k^(-1/2), b_k = 1 - a_k, c_kj = 1 - 1/(k+j) and
    d_kj = 1/(k+j), the interval I_kj^b has mass
    (prod_{i<k} a_i) b_k (prod_{i<j} c_ki) d_kj, spread uniformly.
    Unresolved tails are collapsed into the finest leaf that contains
    them, so every resolved node has its exact mass.
    """
    r = _unit_resolution(window)
    J = window.top
    d, o, w, t = twist_cell_pieces(r)
    cells = 2 ** J
    cell = np.repeat(np.arange(cells, dtype=np.int64), d.size)
    depth = np.tile(d, cells) + J
    offset = (cell << np.tile(d, cells)) + np.tile(o, cells)
    return _from_pieces(window, depth, offset, np.tile(w, cells), compact, "twist", r, np.tile(t, cells))


def twist_m_Ik(k: int) -> float:
    """Closed form m(I_k) = (prod_{i<=k} a_i) a_{k+1} b_{k+1} for the twisted measure."""
    return float(np.exp(twist_log_prefix_a(k)[k]) * twist_a(k + 1) * twist_b(k + 1))


def twist_m_Ikj(k: int, j: int) -> float:
    """Closed form m(I_kj) = mu(I_kj) c_{k,j+1} d_{k,j+1}, with
    mu(I_kj) = (prod_{i<k} a_i) b_k prod_{i<=j} c_ki."""
    s = k + np.arange(1, j + 1)
    log_mu = twist_log_prefix_a(k)[k - 1] + np.log(twist_b(k)) + np.sum(np.log1p(-1.0 / s))
    n = k + j + 1
    return float(np.exp(log_mu) * (1 - 1.0 / n) / n)


def twist_m_Ikjb(k: int, j: int) -> float:
    """Closed form m(I_kj^b) = mu(I_kj^b) / 4 (uniform density on I_kj^b)."""
    s = k + np.arange(1, j)
    log_mu = (twist_log_prefix_a(k)[k - 1] + np.log(twist_b(k)) + np.sum(np.log1p(-1.0 / s))
              - np.log(k + j))
    return float(np.exp(log_mu) / 4)


def build_named(name: str, window: Window, compact: bool = False) -> MeasureTree:
    """Build a measure from a spec string: lebesgue, lsmp, twist or file:PATH."""
    if name.startswith("file:"):
        return load_measure_csv(name[5:])
    builders = {"lebesgue": build_lebesgue, "lsmp": build_lsmp, "twist": build_twist}
    if name not in builders:
        raise ValueError(f"unknown measure {name!r}")
    return builders[name](window, compact=compact)


# structured intervals ------------------------------------------------------------

def interval_I(window: Window, k: int, cell: int = 1) -> NodeId:
    """I_k = [0, 2^-k) translated to unit cell `cell` = [cell-1, cell)."""
    return window.node(-k, (cell - 1) << k)


def interval_Ib(window: Window, k: int, cell: int = 1) -> NodeId:
    """I_k^b = [2^-k, 2^-k+1) in unit cell `cell`."""
    return window.node(-k, ((cell - 1) << k) + 1)


def interval_Ikj(window: Window, k: int, j: int, cell: int = 1) -> NodeId:
    """I_kj = [2^-k, 2^-k + 2^-k-j) in unit cell `cell`."""
    return window.node(-(k + j), ((cell - 1) << (k + j)) + (1 << j))


def interval_Ikjb(window: Window, k: int, j: int, cell: int = 1) -> NodeId:
    """I_kj^b, the right sibling of I_kj."""
    return window.node(-(k + j), ((cell - 1) << (k + j)) + (1 << j) + 1)


# diagnostics ----------------------------------------------------------------------

@dataclass
class BalanceReport:
    """Suprema of the doubling, balance, sibling and standardness ratios.

    Only nodes whose needed relatives are resolved enter each supremum.
    `tail_leaves` counts leaves flagged as collapsed tails.
    """

    doublingConst: float
    balancedConst: float
    siblingConst: float
    standardnessConst: float
    tail_leaves: int = 0


def balance_report(mu: MeasureTree) -> BalanceReport:
    t = mu.tree
    nm, m = mu.node_mass, mu.m
    nonroot = np.arange(1, t.n_nodes)
    doubling = float(np.max(nm[t.parent[nonroot]] / nm[nonroot])) if nonroot.size else 1.0

    inner = t.internal[t.internal > 0]
    if inner.size:
        r = m[inner] / m[t.parent[inner]]
        balanced = float(np.max(np.maximum(r, 1 / r)))
        sib = inner[~t.is_leaf[t.sibling[inner]]]
        sibling = float(np.max(m[sib] / m[t.sibling[sib]])) if sib.size else 1.0
    else:
        balanced = sibling = 1.0
    ids = t.internal
    small = np.minimum(nm[t.left[ids]], nm[t.right[ids]])
    # ||h_Q||_1 ||h_Q||_inf = 2 sqrt(m) * sqrt(m) / min child mass
    standard = float(np.max(2 * m[ids] / small)) if ids.size else 1.0
    return BalanceReport(doubling, balanced, sibling, standard, int(mu.tail.sum()))


# file format ------------------------------------------------------------------------

def save_measure_csv(mu: MeasureTree, path) -> None:
    t = mu.tree
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "offset", "mass"])
        for i, mass in zip(t.leaves, mu.leaf_mass):
            w.writerow([t.window.top - int(t.depth[i]), int(t.offset[i]), repr(float(mass))])


def load_measure_csv(path) -> MeasureTree:
    """Load leaf masses written as `level,offset,mass` rows."""
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["level", "offset", "mass"]:
            raise ValueError("measure file must have header level,offset,mass")
        for row in reader:
            rows.append((int(row["level"]), int(row["offset"]), float(row["mass"])))
    if not rows:
        raise ValueError("measure file has no rows")
    level = np.array([r[0] for r in rows], np.int64)
    offset = np.array([r[1] for r in rows], np.int64)
    mass = np.array([r[2] for r in rows])
    if np.any(mass <= 0):
        raise ValueError("measure file contains non-positive masses")
    total = float(np.sum(2.0 ** level))
    top = int(round(np.log2(total)))
    if 2.0 ** top != total:
        raise ValueError("leaves do not cover a dyadic window")
    if level.min() >= top:
        raise ValueError("a single leaf does not resolve any dyadic window")
    window = Window(top, top - int(level.min()))
    tree = DyadicTree(window, top - level, offset)
    order = np.argsort(offset << (window.depth - (top - level)), kind="stable")
    return MeasureTree(tree, mass[order], "file")
