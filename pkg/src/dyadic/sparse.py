"""Sparse families: the constructive stopping-time algorithm, sparsity checks and sparse forms."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .func import TreeFunction, _check, node_averages
from .grid import NodeId, bit_length
from .measure import MeasureTree, UnresolvableNode
from .ops import Operator, PathPartials


class SupportViolation(ValueError):
    """The function is not supported in the root cube."""


class CalibrationFailed(RuntimeError):
    """The stopping constant exceeded its cap without meeting the mass budget."""


CALIBRATION_START = 8.0
CALIBRATION_CAP = 2.0 ** 16
BRUTE_FORCE_LIMIT = 20


@dataclass
class SparseFamily:
    """A stopping family with generations, stopping reasons and witness masses.

    nodes are tree node numbers; the witness of Q is Q minus the union of
    the selected cubes of the next generation inside Q.
    """

    mu: MeasureTree
    root: int
    nodes: np.ndarray
    generation: np.ndarray
    reason: list
    witness_mass: np.ndarray
    c1: float
    c2: float

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def node_ids(self) -> list[NodeId]:
        return self.mu.tree.node_ids(self.nodes)

    @property
    def n_generations(self) -> int:
        return int(self.generation.max()) + 1 if len(self.nodes) else 0

    def mask(self) -> np.ndarray:
        out = np.zeros(self.mu.tree.n_nodes, dtype=bool)
        out[self.nodes] = True
        return out

    def with_nodes(self, extra) -> "SparseFamily":
        """A family with extra nodes added (generation -1, reason 'added'); witnesses recomputed."""
        extra = np.setdiff1d(np.asarray(extra, dtype=np.int64), self.nodes)
        nodes = np.concatenate([self.nodes, extra])
        gen = np.concatenate([self.generation, np.full(extra.size, -1)])
        reason = list(self.reason) + ["added"] * extra.size
        return SparseFamily(self.mu, self.root, nodes, gen, reason,
                            _witness_masses(self.mu, nodes), self.c1, self.c2)


def _witness_masses(mu: MeasureTree, nodes: np.ndarray) -> np.ndarray:
    """mu(Q) minus the mass of the maximal family members strictly inside Q."""
    t = mu.tree
    inS = np.zeros(t.n_nodes, dtype=bool)
    inS[nodes] = True
    covered = np.zeros(t.n_nodes)
    for q in nodes:
        if q == 0:
            continue
        a = t.parent[q]
        while not inS[a]:
            a = t.parent[a]
        covered[a] += mu.node_mass[q]
    return mu.node_mass[nodes] - covered[nodes]


def _range_min(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """min of values[lo_i:hi_i] for disjoint, increasing, nonempty ranges."""
    if lo.size == 0:
        return np.empty(0)
    padded = np.append(values, np.inf)
    idx = np.empty(2 * lo.size, dtype=np.int64)
    idx[0::2] = lo
    idx[1::2] = hi
    return np.minimum.reduceat(padded, idx)[0::2]


def _stop_once(op, mu, pp, absavg, cubes, c1, c2):
    """Maximal stopping cubes strictly inside each cube of one generation.

    Returns (selected nodes, reasons, owner index into cubes).
    """
    t = mu.tree
    owner_leaf = np.full(t.n_leaves, -1)
    depth_leaf = np.zeros(t.n_leaves, dtype=np.int64)
    for k, P in enumerate(cubes):
        owner_leaf[t.leaf_lo[P]:t.leaf_hi[P]] = k
        depth_leaf[t.leaf_lo[P]:t.leaf_hi[P]] = t.depth[P]
    cubes = np.asarray(cubes)
    aP = absavg[cubes]
    base = pp.prefix(depth_leaf - 1) if pp is not None else None

    owner = owner_leaf[t.leaf_lo]
    valid = owner >= 0
    valid[valid] &= t.depth[valid] > t.depth[cubes[owner[valid]]]
    level = np.where(valid, aP[np.maximum(owner, 0)], np.inf)
    mass = valid & (absavg > c1 * level)
    trunc = np.zeros(t.n_nodes, dtype=bool)
    if pp is not None:
        for d in range(1, t.max_depth + 1):
            ids = t.nodes_at[d]
            ids = ids[valid[ids]]
            if ids.size == 0:
                continue
            part = np.abs(pp.prefix(d - 1) - base)
            lowest = _range_min(part, t.leaf_lo[ids], t.leaf_hi[ids])
            trunc[ids] = lowest > c2 * level[ids]
    cand = mass | trunc
    first = cand & (t.path_sum(cand.astype(float)) == 1)
    sel = np.flatnonzero(first)
    reasons = ["mass" if mass[i] else "truncation" for i in sel]
    return sel, reasons, owner[sel]


def build_sparse(op: Operator | None, f: TreeFunction, mu: MeasureTree, q0: NodeId | None = None,
                 c1: float = CALIBRATION_START, c2: float = CALIBRATION_START,
                 autoCalibrate: bool = True) -> SparseFamily:
    """Run the stopping-time construction from q0 (default: the top node).

    A cube Q_j strictly inside a selected cube P stops when
    <|f|>_{Q_j} > C1 <|f|>_P, or when the partial sum of T_Q f over
    Q_j < Q <= P exceeds C2 <|f|>_P in absolute value at every point of Q_j.
    The maximal stopping cubes form the next generation. With
    autoCalibrate, C1 = C2 starts at 8 and doubles until every cube
    spends at most half its mass on the next generation.
    With op=None only the mass condition is used.
    """
    _check(f, mu)
    t = mu.tree
    i0 = 0 if q0 is None else t.index(q0)
    lo, hi = t.leaf_lo[i0], t.leaf_hi[i0]
    if np.any(f.values[:lo] != 0) or np.any(f.values[hi:] != 0):
        raise SupportViolation("f must vanish outside the root cube")
    absavg = node_averages(np.abs(f.values), mu)
    pp = PathPartials(op, f.values, mu) if op is not None else None

    c_1, c_2 = (CALIBRATION_START, CALIBRATION_START) if autoCalibrate else (float(c1), float(c2))
    while True:
        nodes, gens, reasons = [i0], [0], ["root"]
        current = [i0]
        g = 0
        ok = True
        while current:
            sel, why, own = _stop_once(op, mu, pp, absavg, current, c_1, c_2)
            if autoCalibrate and sel.size:
                spent = np.bincount(own, weights=mu.node_mass[sel], minlength=len(current))
                if np.any(spent > 0.5 * mu.node_mass[np.asarray(current)] * (1 + 1e-12)):
                    ok = False
                    break
            g += 1
            nodes.extend(sel.tolist())
            gens.extend([g] * sel.size)
            reasons.extend(why)
            current = sel.tolist()
        if ok or not autoCalibrate:
            break
        c_1 *= 2
        c_2 *= 2
        if c_1 > CALIBRATION_CAP:
            raise CalibrationFailed(f"no calibration up to {CALIBRATION_CAP:g}")
    nodes = np.asarray(nodes, dtype=np.int64)
    return SparseFamily(mu, i0, nodes, np.asarray(gens), reasons, _witness_masses(mu, nodes), c_1, c_2)


# verification ----------------------------------------------------------------------

@dataclass
class SparsityReport:
    eta: float
    carlesonPacking: float
    carlesonExact: float | None


def carleson_exact(mu: MeasureTree, nodes) -> float:
    """max over subcollections of sum mu(Q) / mu(union Q), by enumeration."""
    t = mu.tree
    nodes = np.asarray(nodes, dtype=np.int64)
    n = nodes.size
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} cubes")
    if n == 0:
        return 0.0
    # atoms: leaves grouped by the set of members containing them
    code = np.zeros(t.n_leaves, dtype=np.int64)
    for b, q in enumerate(nodes):
        code[t.leaf_lo[q]:t.leaf_hi[q]] |= np.int64(1) << b
    keys, inv = np.unique(code, return_inverse=True)
    atom_mass = np.bincount(inv, weights=mu.leaf_mass)
    keep = keys != 0
    keys, atom_mass = keys[keep], atom_mass[keep]
    masses = mu.node_mass[nodes]
    best = 0.0
    chunk = 1 << 14
    for start in range(1, 1 << n, chunk):
        subs = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = (subs[:, None] >> np.arange(n)) & 1
        total = bits @ masses
        union = ((subs[:, None] & keys[None, :]) != 0) @ atom_mass
        best = max(best, float(np.max(total / union)))
    return best


def verify_sparsity(s: SparseFamily, mu: MeasureTree) -> SparsityReport:
    """eta from witnesses, the packing constant, and the exact Carleson constant when |S| <= 20."""
    if len(s) == 0:
        return SparsityReport(1.0, 0.0, 0.0)
    t = mu.tree
    eta = float(np.min(s.witness_mass / mu.node_mass[s.nodes]))
    vals = np.zeros(t.n_nodes)
    vals[s.nodes] = mu.node_mass[s.nodes]
    with np.errstate(divide="ignore", invalid="ignore"):
        pack = t.subtree_sum(vals) / mu.node_mass
    packing = float(np.nanmax(np.where(mu.node_mass > 0, pack, 0.0)))
    exact = carleson_exact(mu, s.nodes) if len(s) <= BRUTE_FORCE_LIMIT else None
    return SparsityReport(eta, packing, exact)


# sparse forms --------------------------------------------------------------------

def _nodes_of(s) -> np.ndarray:
    return s.nodes if isinstance(s, SparseFamily) else np.asarray(s, dtype=np.int64)


def _positive(f: TreeFunction) -> np.ndarray:
    if np.any(f.values < 0):
        raise ValueError("sparse forms act on non-negative functions")
    return f.values


def _m_checked(mu: MeasureTree, idx: np.ndarray) -> np.ndarray:
    m = mu.m_extended()[idx]
    if np.any(np.isnan(m)):
        raise UnresolvableNode("m(Q) is needed for a node whose children are not resolved")
    return m


def sparse_op(s, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
    """A_S f = sum_{Q in S} <f>_Q 1_Q."""
    _check(f, mu)
    t = mu.tree
    nodes = _nodes_of(s)
    avg = node_averages(_positive(f), mu)
    terms = np.zeros(t.n_nodes)
    terms[nodes] = avg[nodes]
    return TreeFunction(t, t.down_sum(terms))


def pair_distances(mu: MeasureTree, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tree distance between nodes a_i and b_i (number of edges on the path)."""
    t = mu.tree
    da, db = t.depth[a], t.depth[b]
    d = np.minimum(da, db)
    oa = t.offset[a] >> (da - d)
    ob = t.offset[b] >> (db - d)
    up = bit_length(oa ^ ob)
    return da + db - 2 * (d - up)


def sparse_op_N(s, f: TreeFunction, mu: MeasureTree, N: int) -> TreeFunction:
    """A_S^N f = A_S f + sum over J, K in S with dist(J, K) <= N + 2 of
    <f>_J sqrt(m(J) m(K)) 1_K / mu(K). Pairs with J = K are included."""
    _check(f, mu)
    t = mu.tree
    nodes = _nodes_of(s)
    base = sparse_op(nodes, f, mu).values
    avg = node_averages(_positive(f), mu)
    terms = np.zeros(t.n_nodes)
    for start in range(0, nodes.size, 512):
        J = nodes[start:start + 512]
        jj, kk = np.meshgrid(J, nodes, indexing="ij")
        jj, kk = jj.ravel(), kk.ravel()
        close = pair_distances(mu, jj, kk) <= N + 2
        jj, kk = jj[close], kk[close]
        if jj.size == 0:
            continue
        w = avg[jj] * np.sqrt(_m_checked(mu, jj) * _m_checked(mu, kk)) / mu.node_mass[kk]
        np.add.at(terms, kk, w)
    return TreeFunction(t, base + t.down_sum(terms))


def sibling_terms(s, f: TreeFunction, mu: MeasureTree) -> tuple[np.ndarray, np.ndarray]:
    """Node coefficients (on R) of the two cross sums in E_S.

    First: Q, R in S with parent(Q) = sibling(parent(R)), weight
    <f>_Q sqrt(m(parent Q) m(parent R)) / mu(R).
    Second: Q, R in S with Q = sibling(parent(R)), weight
    <f>_Q sqrt(m(Q) m(parent R)) / mu(R).
    """
    t = mu.tree
    nodes = _nodes_of(s)
    inS = np.zeros(t.n_nodes, dtype=bool)
    inS[nodes] = True
    avg = node_averages(_positive(f), mu)
    e1 = np.zeros(t.n_nodes)
    e2 = np.zeros(t.n_nodes)
    R = nodes[t.depth[nodes] >= 2]
    if R.size == 0:
        return e1, e2
    P = t.parent[R]
    U = t.sibling[P]
    mP = _m_checked(mu, P)
    # second sum: Q = U itself
    hit = inS[U]
    if np.any(hit):
        e2[R[hit]] = avg[U[hit]] * np.sqrt(_m_checked(mu, U[hit]) * mP[hit]) / mu.node_mass[R[hit]]
    # first sum: Q a child of U (exists only when U is internal)
    inner = ~t.is_leaf[U]
    for side in (t.left, t.right):
        Q = np.where(inner, side[U], -1)
        hit = inner & inS[np.maximum(Q, 0)]
        if np.any(hit):
            e1[R[hit]] += avg[Q[hit]] * np.sqrt(mu.m[U[hit]] * mP[hit]) / mu.node_mass[R[hit]]
    return e1, e2


def sparse_op_H(s, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
    """E_S f = A_S f plus the two sibling cross sums."""
    _check(f, mu)
    t = mu.tree
    e1, e2 = sibling_terms(s, f, mu)
    return TreeFunction(t, sparse_op(s, f, mu).values + t.down_sum(e1 + e2))


def check_domination(lhs: TreeFunction, rhs: TreeFunction, rel_tol: float = 1e-14) -> float:
    """Smallest C with |lhs| <= C rhs at every leaf (inf if impossible).

    Entries of lhs below rel_tol times its maximum are treated as zero.
    """
    a = np.abs(np.asarray(lhs.values if isinstance(lhs, TreeFunction) else lhs, dtype=float))
    r = np.asarray(rhs.values if isinstance(rhs, TreeFunction) else rhs, dtype=float)
    if np.any(r < 0):
        raise ValueError("the dominating function must be non-negative")
    if a.size == 0 or a.max() == 0:
        return 0.0
    live = a > rel_tol * a.max()
    if np.any(live & (r == 0)):
        return float("inf")
    return float(np.max(a[live] / r[live]))


def save_sparse_csv(s: SparseFamily, path) -> None:
    """Dump as generation,level,offset,reason,witness_mass."""
    t = s.mu.tree
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "level", "offset", "reason", "witness_mass"])
        for i, g, why, wm in zip(s.nodes, s.generation, s.reason, s.witness_mass):
            q = t.node_id(int(i))
            w.writerow([int(g), q.level, q.offset, why, repr(float(wm))])
