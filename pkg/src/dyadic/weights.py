"""Weights, A_p-type characteristics and weighted norm ratio tables."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .func import BadExponent, TreeFunction, _check, load_function_csv, node_averages
from .grid import NodeId
from .measure import MeasureTree
from .ops import Operator


CLASSES = ("dyadic", "hat", "N", "b", "sib")


class Weight:
    """A strictly positive leaf-constant weight w with its p-dual sigma = w^(1 - p')."""

    def __init__(self, base: TreeFunction):
        if np.any(~(base.values > 0)) or not np.all(np.isfinite(base.values)):
            raise ValueError("weights must be finite and strictly positive")
        self.base = base
        self._sigma: dict = {}

    @property
    def tree(self):
        return self.base.tree

    @property
    def values(self) -> np.ndarray:
        return self.base.values

    def sigma(self, p: float) -> TreeFunction:
        _exponent(p)
        if p not in self._sigma:
            self._sigma[p] = TreeFunction(self.tree, self.base.values ** (1 - p / (p - 1)))
        return self._sigma[p]

    @classmethod
    def one(cls, tree) -> "Weight":
        return cls(TreeFunction.constant(tree, 1.0))


def _exponent(p: float) -> None:
    if not 1 < p < np.inf:
        raise BadExponent("p must lie in (1, inf)")


@dataclass
class Characteristic:
    """Supremum value, the attaining (Q, R) pair and the number of skipped configurations."""

    value: float
    witness: tuple
    skipped: int = 0

    def __iter__(self):
        yield self.value
        yield self.witness


def _ancestor(t, idx: np.ndarray, k: int) -> np.ndarray:
    out = idx.copy()
    for _ in range(k):
        out = np.where(out > 0, t.parent[np.maximum(out, 0)], -1)
    return out


def neighbour_pairs(mu: MeasureTree, max_dist: int) -> tuple[np.ndarray, np.ndarray, int]:
    """All (Q, R) with tree distance at most max_dist, each pair once (ordered).

    Also returns the number of (Q, k) with k <= max_dist for which the k-th
    ancestor of Q lies outside the window.
    """
    t = mu.tree
    allq = np.arange(t.n_nodes)
    Qs, Rs = [], []
    skipped = 0
    for a in range(max_dist + 1):
        A = _ancestor(t, allq, a)
        ok = A >= 0
        skipped += int(np.count_nonzero(~ok))
        q, A = allq[ok], A[ok]
        for b in range(max_dist - a + 1):
            span = np.arange(1 << b, dtype=np.int64)
            off = (t.offset[A][:, None] << b) + span[None, :]
            dep = np.repeat(t.depth[A] + b, span.size)
            R = t.find(dep, off.ravel())
            qq = np.repeat(q, span.size)
            keep = R >= 0
            if a > 0 and b > 0:
                # the path must turn at A, not pass below it
                qa = t.offset[qq] >> np.maximum(t.depth[qq] - t.depth[A].repeat(span.size) - 1, 0)
                ra = off.ravel() >> (b - 1)
                keep &= qa != ra
            Qs.append(qq[keep])
            Rs.append(R[keep])
    return np.concatenate(Qs), np.concatenate(Rs), skipped


def _c_b(mu: MeasureTree, Q: np.ndarray, R: np.ndarray, p: float) -> np.ndarray:
    """1 on the diagonal, m(Q)^(p/2) m(R)^(p/2) / (mu(R) mu(Q)^(p-1)) otherwise."""
    m = mu.m_extended()
    nm = mu.node_mass
    c = (m[Q] * m[R]) ** (p / 2) / (nm[R] * nm[Q] ** (p - 1))
    return np.where(Q == R, 1.0, c)


def _sup(mu, Q, R, coef, wa, sa, p, skipped) -> Characteristic:
    vals = coef * wa[Q] * sa[R] ** (p - 1)
    bad = np.isnan(vals)
    skipped += int(np.count_nonzero(bad))
    vals = np.where(bad, -np.inf, vals)
    if vals.size == 0 or not np.isfinite(vals.max()):
        return Characteristic(float("nan"), (None, None), skipped)
    j = int(np.argmax(vals))
    t = mu.tree
    return Characteristic(float(vals[j]), (t.node_id(int(Q[j])), t.node_id(int(R[j]))), skipped)


def characteristic(w: Weight, mu: MeasureTree, p: float, cls: str = "dyadic", N: int = 1) -> Characteristic:
    """Supremum of c(Q, R) <w>_Q <sigma>_R^(p-1) over the pairs of a weight class.

    dyadic  Q = R
    hat     R in {parent Q, Q, children of Q}, coefficient 1
    N       tree distance(Q, R) <= N + 2, coefficient c^b
    b       R a child of parent(Q) or of the grandparent of Q, or Q a child
            of the grandparent of R, coefficient c^b
    sib     Q = R (1), parent(Q) = sibling(parent R), or Q = sibling(parent R),
            with the sibling coefficients
    Pairs whose relatives fall outside the window, or that need m of an
    unresolved node, are skipped and counted.
    """
    _exponent(p)
    _check(w.base, mu)
    t = mu.tree
    wa = node_averages(w.values, mu)
    sa = node_averages(w.sigma(p).values, mu)
    allq = np.arange(t.n_nodes)
    if cls == "dyadic":
        return _sup(mu, allq, allq, np.ones(t.n_nodes), wa, sa, p, 0)
    if cls == "hat":
        Q = [allq, allq[1:]]
        R = [allq, t.parent[1:]]
        inner = t.internal
        Q += [inner, inner]
        R += [t.left[inner], t.right[inner]]
        Q, R = np.concatenate(Q), np.concatenate(R)
        return _sup(mu, Q, R, np.ones(Q.size), wa, sa, p, 1)
    if cls == "N":
        if N < 0:
            raise ValueError("N must be non-negative")
        Q, R, skipped = neighbour_pairs(mu, N + 2)
        return _sup(mu, Q, R, _c_b(mu, Q, R, p), wa, sa, p, skipped)
    if cls == "b":
        Q, R, skipped = _b_pairs(t)
        return _sup(mu, Q, R, _c_b(mu, Q, R, p), wa, sa, p, skipped)
    if cls == "sib":
        Q, R, coef, skipped = _sib_pairs(mu, p)
        return _sup(mu, Q, R, coef, wa, sa, p, skipped)
    raise ValueError(f"unknown weight class {cls!r}; expected one of {CLASSES}")


def _children_of(t, nodes: np.ndarray) -> np.ndarray:
    inner = nodes[(nodes >= 0) & ~t.is_leaf[np.maximum(nodes, 0)]]
    return inner, t.left[inner], t.right[inner]


def _b_pairs(t):
    allq = np.arange(t.n_nodes)
    Qs, Rs = [], []
    skipped = 0
    for k in (1, 2):
        A = _ancestor(t, allq, k)
        ok = A >= 0
        skipped += int(np.count_nonzero(~ok))
        q, A = allq[ok], A[ok]
        # R in ch(Q^(k)) for the first two configurations
        Qs += [q, q]
        Rs += [t.left[A], t.right[A]]
    # Q in ch(R^(2)): R's grandparent has Q as a child
    A = _ancestor(t, allq, 2)
    ok = A >= 0
    r, A = allq[ok], A[ok]
    Qs += [t.left[A], t.right[A]]
    Rs += [r, r]
    Q, R = np.concatenate(Qs), np.concatenate(Rs)
    key = np.unique(np.stack([Q, R], 1), axis=0)
    return key[:, 0], key[:, 1], skipped


def _sib_pairs(mu: MeasureTree, p: float):
    t = mu.tree
    m = mu.m_extended()
    nm = mu.node_mass
    allq = np.arange(t.n_nodes)
    Qs, Rs, Cs = [allq], [allq], [np.ones(t.n_nodes)]
    R = allq[t.depth >= 2]
    skipped = int(np.count_nonzero(t.depth < 2))
    P = t.parent[R]
    U = t.sibling[P]
    mP = m[P]
    # Q = sibling of parent(R)
    Qs.append(U)
    Rs.append(R)
    Cs.append((m[U] / nm[U]) ** (p - 1) * mP / nm[R])
    # parent(Q) = sibling of parent(R): Q a child of U
    inner = ~t.is_leaf[U]
    for side in (t.left, t.right):
        Qs.append(side[U[inner]])
        Rs.append(R[inner])
        Cs.append((m[U[inner]] / nm[R[inner]]) ** (p - 1) * mP[inner] / nm[R[inner]])
    return np.concatenate(Qs), np.concatenate(Rs), np.concatenate(Cs), skipped


@dataclass
class WeightReport:
    apDyadic: Characteristic
    apHat: Characteristic
    apN: dict
    apB: Characteristic
    apSib: Characteristic


def weight_report(w: Weight, mu: MeasureTree, p: float, N_list=(0, 1, 2)) -> WeightReport:
    return WeightReport(characteristic(w, mu, p, "dyadic"), characteristic(w, mu, p, "hat"),
                        {N: characteristic(w, mu, p, "N", N) for N in N_list},
                        characteristic(w, mu, p, "b"), characteristic(w, mu, p, "sib"))


def weighted_norm(f: TreeFunction, w: Weight | None, mu: MeasureTree, p: float) -> float:
    """(sum over leaves of |f|^p w mu)^(1/p)."""
    if not 1 <= p < np.inf:
        raise BadExponent("p must lie in [1, inf)")
    _check(f, mu)
    wv = 1.0 if w is None else w.values
    return float(np.sum(np.abs(f.values) ** p * wv * mu.leaf_mass) ** (1 / p))


# test weights ---------------------------------------------------------------------------

def log_profile(mu: MeasureTree) -> np.ndarray:
    """b0 = -log(x + leaf length), with x the position of the leaf inside its unit cell."""
    t = mu.tree
    x = t.window.length * (t.leaf_start.astype(float) / (1 << t.window.depth)) % 1.0
    length = t.window.length * t.leaf_size / float(1 << t.window.depth)
    return -np.log(x + length)


def exp_weight(mu: MeasureTree, s: float) -> Weight:
    """w = exp(s b0) for the logarithmic profile b0."""
    return Weight(TreeFunction(mu.tree, np.exp(s * log_profile(mu))))


def parse_weight(spec: str, mu: MeasureTree) -> Weight:
    """one | expb:S | file:PATH."""
    if spec == "one":
        return Weight.one(mu.tree)
    if spec.startswith("expb:"):
        return exp_weight(mu, float(spec[5:]))
    if spec.startswith("file:"):
        return Weight(load_function_csv(spec[5:], mu.tree))
    raise ValueError(f"unknown weight {spec!r}")


# ratio experiments -------------------------------------------------------------------

SHAPES = ("dyadic", "commutator", "shift")


def shape_value(w: Weight, mu: MeasureTree, p: float, shape: str, N: int = 1) -> float:
    """The characteristic expression that the weighted bounds are stated in.

    dyadic      [w]_D^max(1, 1/(p-1))
    shift       [w]_D^(1 + 1/(p-1) - 2/p) [w]_N^(1/p)
    commutator  [w]_D^(1 + 1/(p-1) - 2/p + max(1, 1/(p-1))) [w]_sib^(1/p)
    """
    ad = characteristic(w, mu, p, "dyadic").value
    mx = max(1.0, 1.0 / (p - 1))
    if shape == "dyadic":
        return ad ** mx
    base = 1 + 1 / (p - 1) - 2 / p
    if shape == "shift":
        return ad ** base * characteristic(w, mu, p, "N", N).value ** (1 / p)
    if shape == "commutator":
        return ad ** (base + mx) * characteristic(w, mu, p, "sib").value ** (1 / p)
    raise ValueError(f"unknown shape {shape!r}")


@dataclass
class RatioRow:
    label: str
    p: float
    empirical: float
    shape: float
    ratio: float
    extra: dict = field(default_factory=dict)


def weighted_ratio_experiment(op: Operator, w: Weight, mu: MeasureTree, p: float, trials: int = 16,
                              seed: int = 0, shape: str = "dyadic", scale: float = 1.0,
                              label: str = "", ascent: bool = True) -> RatioRow:
    """Largest observed ||op f||_{L^p(w)} / ||f||_{L^p(w)} against a characteristic shape.

    The empirical value is the best of `trials` seeded random functions and,
    when `ascent` is set, the nonlinear power method on L^p(w mu). `scale`
    multiplies the shape (for example by ||b||_BMO). No sharpness is claimed.
    """
    from .normest import lp_ascent

    _exponent(p)
    rng = np.random.default_rng(seed)
    best = 0.0
    n = mu.tree.n_leaves
    for _ in range(trials):
        f = TreeFunction(mu.tree, rng.standard_normal(n))
        den = weighted_norm(f, w, mu, p)
        if den > 0:
            best = max(best, weighted_norm(op.apply(f, mu), w, mu, p) / den)
    if ascent:
        best = max(best, lp_ascent(op, mu, p, restarts=2, seed=seed, max_iter=60, w=w.values).lowerBound)
    sh = scale * shape_value(w, mu, p, shape)
    return RatioRow(label, p, best, sh, best / sh if sh > 0 else float("inf"))
