"""Leaf-constant functions, Haar analysis, BMO-type norms and the example symbols."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import DyadicTree, LeafNode, NodeId, WindowMismatch, bit_length
from .measure import MeasureTree, twist_a, twist_b


class WrongMeasure(ValueError):
    """A symbol builder was given a measure of the wrong kind."""


class BadExponent(ValueError):
    """An exponent is outside its admissible range."""


class TreeFunction:
    """A real function constant on each leaf of a DyadicTree."""

    def __init__(self, tree: DyadicTree, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[:1] != (tree.n_leaves,):
            raise ValueError(f"expected {tree.n_leaves} leaf values, got shape {values.shape}")
        self.tree = tree
        self.values = values

    @classmethod
    def constant(cls, tree: DyadicTree, c: float) -> "TreeFunction":
        return cls(tree, np.full(tree.n_leaves, float(c)))

    @classmethod
    def indicator(cls, tree: DyadicTree, q) -> "TreeFunction":
        i = q if isinstance(q, (int, np.integer)) else tree.index(q)
        v = np.zeros(tree.n_leaves)
        v[tree.leaf_lo[i]:tree.leaf_hi[i]] = 1.0
        return cls(tree, v)

    def _other(self, other):
        if isinstance(other, TreeFunction):
            self.tree.check_same(other.tree)
            return other.values
        return other

    def __add__(self, other): return TreeFunction(self.tree, self.values + self._other(other))
    __radd__ = __add__
    def __sub__(self, other): return TreeFunction(self.tree, self.values - self._other(other))
    def __rsub__(self, other): return TreeFunction(self.tree, self._other(other) - self.values)
    def __mul__(self, other): return TreeFunction(self.tree, self.values * self._other(other))
    __rmul__ = __mul__
    def __truediv__(self, other): return TreeFunction(self.tree, self.values / self._other(other))
    def __neg__(self): return TreeFunction(self.tree, -self.values)
    def __abs__(self): return TreeFunction(self.tree, np.abs(self.values))
    def __pow__(self, p): return TreeFunction(self.tree, self.values ** p)

    def __repr__(self) -> str:
        return f"TreeFunction({self.tree!r})"


def _check(f: TreeFunction, mu: MeasureTree) -> None:
    if not f.tree.same_as(mu.tree):
        raise WindowMismatch("function and measure live on different trees")


def _col(a: np.ndarray, ndim: int) -> np.ndarray:
    return a.reshape(a.shape[:1] + (1,) * (ndim - 1))


# raw array kernels (values may carry trailing batch axes) ---------------------------

def node_averages(values: np.ndarray, mu: MeasureTree) -> np.ndarray:
    """<f>_Q for every node Q, computed from leaf values."""
    w = _col(mu.leaf_mass, values.ndim)
    return mu.tree.up_sum(values * w) / _col(mu.node_mass, values.ndim)


def child_increments(avg: np.ndarray, tree: DyadicTree) -> np.ndarray:
    """<f>_R - <f>_{parent R} for every non-root R (0 at the root)."""
    out = np.zeros_like(avg)
    out[1:] = avg[1:] - avg[tree.parent[1:]]
    return out


def haar_coefficients(values: np.ndarray, mu: MeasureTree, avg: np.ndarray | None = None) -> np.ndarray:
    """<f, h_Q> for every internal Q (0 at leaves)."""
    t = mu.tree
    avg = node_averages(values, mu) if avg is None else avg
    out = np.zeros_like(avg)
    ids = t.internal
    sq = _col(np.sqrt(mu.m[ids]), avg.ndim)
    out[ids] = sq * (avg[t.right[ids]] - avg[t.left[ids]])
    return out


def haar_values(mu: MeasureTree) -> np.ndarray:
    """For every non-root R, the value of h_{parent R} on R."""
    t = mu.tree
    out = np.zeros(t.n_nodes)
    R = np.arange(1, t.n_nodes)
    P = t.parent[R]
    sign = np.where(t.offset[R] % 2 == 1, 1.0, -1.0)
    out[R] = sign * np.sqrt(mu.m[P]) / mu.node_mass[R]
    return out


def synthesize(coeffs: np.ndarray, mu: MeasureTree) -> np.ndarray:
    """Leaf values of sum over internal Q of coeffs[Q] h_Q."""
    t = mu.tree
    hv = haar_values(mu)
    terms = np.zeros_like(coeffs)
    R = np.arange(1, t.n_nodes)
    terms[R] = coeffs[t.parent[R]] * _col(hv[R], coeffs.ndim)
    return t.down_sum(terms)


# public API -------------------------------------------------------------------------

def averages(f: TreeFunction, mu: MeasureTree) -> np.ndarray:
    _check(f, mu)
    return node_averages(f.values, mu)


def average(f: TreeFunction, mu: MeasureTree, q: NodeId) -> float:
    """<f>_Q = (1/mu(Q)) integral over Q of f dmu."""
    _check(f, mu)
    i = mu.tree.index(q)
    lo, hi = mu.tree.leaf_lo[i], mu.tree.leaf_hi[i]
    return float(np.dot(f.values[lo:hi], mu.leaf_mass[lo:hi]) / mu.node_mass[i])


def integral(f: TreeFunction, mu: MeasureTree) -> float:
    _check(f, mu)
    return float(np.dot(f.values, mu.leaf_mass))


def inner(f: TreeFunction, g: TreeFunction, mu: MeasureTree) -> float:
    """<f, g> in L^2(mu)."""
    _check(f, mu)
    _check(g, mu)
    return float(np.sum(f.values * g.values * mu.leaf_mass))


def lp_norm(f: TreeFunction, mu: MeasureTree, p: float = 2.0) -> float:
    _check(f, mu)
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    return float(np.sum(np.abs(f.values) ** p * mu.leaf_mass) ** (1.0 / p))


def _internal_index(mu: MeasureTree, q: NodeId) -> int:
    i = mu.tree.index(q)
    if mu.tree.is_leaf[i]:
        raise LeafNode(f"{q} is a leaf of the tree")
    return i


def haar_function(mu: MeasureTree, q: NodeId) -> TreeFunction:
    """h_Q = sqrt(m(Q)) (1_{Q+}/mu(Q+) - 1_{Q-}/mu(Q-))."""
    t = mu.tree
    i = _internal_index(mu, q)
    L, R = t.left[i], t.right[i]
    v = np.zeros(t.n_leaves)
    s = np.sqrt(mu.m[i])
    v[t.leaf_lo[L]:t.leaf_hi[L]] = -s / mu.node_mass[L]
    v[t.leaf_lo[R]:t.leaf_hi[R]] = s / mu.node_mass[R]
    return TreeFunction(t, v)


def haar_coeff(f: TreeFunction, mu: MeasureTree, q: NodeId) -> float:
    """<f, h_Q> in L^2(mu)."""
    _check(f, mu)
    t = mu.tree
    i = _internal_index(mu, q)
    L, R = t.left[i], t.right[i]
    aL = average(f, mu, t.node_id(L))
    aR = average(f, mu, t.node_id(R))
    return float(np.sqrt(mu.m[i]) * (aR - aL))


def martingale_diff(f: TreeFunction, mu: MeasureTree, q: NodeId) -> TreeFunction:
    """Delta_Q f = sum over children R of (<f>_R - <f>_Q) 1_R."""
    _check(f, mu)
    t = mu.tree
    i = _internal_index(mu, q)
    v = np.zeros(t.n_leaves)
    aQ = average(f, mu, q)
    for c in (t.left[i], t.right[i]):
        v[t.leaf_lo[c]:t.leaf_hi[c]] = average(f, mu, t.node_id(c)) - aQ
    return TreeFunction(t, v)


def maximal_fn(f: TreeFunction, mu: MeasureTree, q_exponent: float = 1.0) -> TreeFunction:
    """M^q f(x) = sup over nodes Q containing x of <|f|^q>_Q^(1/q)."""
    _check(f, mu)
    if q_exponent < 1:
        raise BadExponent("maximal function exponent must be >= 1")
    avg = node_averages(np.abs(f.values) ** q_exponent, mu)
    return TreeFunction(mu.tree, mu.tree.path_max(avg)[mu.tree.leaves] ** (1.0 / q_exponent))


def square_fn(f: TreeFunction, mu: MeasureTree) -> TreeFunction:
    """Sf(x) = (sum over Q of |Delta_Q f(x)|^2)^(1/2)."""
    _check(f, mu)
    inc = child_increments(node_averages(f.values, mu), mu.tree)
    return TreeFunction(mu.tree, np.sqrt(mu.tree.down_sum(inc ** 2)))


# norms ---------------------------------------------------------------------------

def _oscillation(values: np.ndarray, mu: MeasureTree, centre: np.ndarray, p: float,
                 nodes_mask: np.ndarray) -> np.ndarray:
    """For each node Q, (1/mu(Q)) integral over Q of |f - centre[Q]|^p."""
    t = mu.tree
    out = np.zeros(t.n_nodes)
    for d in range(t.max_depth + 1):
        anc = t.leaf_ancestor(d)
        ok = anc >= 0
        if not np.any(ok):
            continue
        a = anc[ok]
        contrib = np.abs(values[ok] - centre[a]) ** p * mu.leaf_mass[ok]
        out += np.bincount(a, weights=contrib, minlength=t.n_nodes)
    out /= mu.node_mass
    out[~nodes_mask] = 0.0
    return out


def bmo_norm(b: TreeFunction, mu: MeasureTree, p: float = 2.0) -> float:
    """sup over all Q of (<|b - <b>_Q|^p>_Q)^(1/p)."""
    _check(b, mu)
    avg = node_averages(b.values, mu)
    osc = _oscillation(b.values, mu, avg, p, np.ones(mu.tree.n_nodes, bool))
    return float(np.max(osc) ** (1 / p))


def BMO_norm(b: TreeFunction, mu: MeasureTree, p: float = 2.0) -> float:
    """sup over non-top Q of (<|b - <b>_{parent Q}|^p>_Q)^(1/p)."""
    _check(b, mu)
    t = mu.tree
    avg = node_averages(b.values, mu)
    centre = np.zeros(t.n_nodes)
    centre[1:] = avg[t.parent[1:]]
    mask = np.ones(t.n_nodes, bool)
    mask[0] = False
    osc = _oscillation(b.values, mu, centre, p, mask)
    return float(np.max(osc) ** (1 / p)) if t.n_nodes > 1 else 0.0


def difference_energy(b: TreeFunction, mu: MeasureTree) -> tuple[np.ndarray, np.ndarray]:
    """Per internal node: (||Delta_Q b||_2^2, ||Delta_Q b||_inf)."""
    t = mu.tree
    avg = node_averages(b.values, mu)
    inc = child_increments(avg, t)
    l2 = np.zeros(t.n_nodes)
    linf = np.zeros(t.n_nodes)
    ids = t.internal
    L, R = t.left[ids], t.right[ids]
    l2[ids] = mu.node_mass[L] * inc[L] ** 2 + mu.node_mass[R] * inc[R] ** 2
    linf[ids] = np.maximum(np.abs(inc[L]), np.abs(inc[R]))
    return l2, linf


def carleson_packing(b: TreeFunction, mu: MeasureTree) -> np.ndarray:
    """For each Q, (1/mu(Q)) sum over R inside Q of ||Delta_R b||_2^2."""
    l2, _ = difference_energy(b, mu)
    return mu.tree.subtree_sum(l2) / mu.node_mass


def lacey_packing(b: TreeFunction, mu: MeasureTree) -> np.ndarray:
    """For each Q, (1/mu(Q)) sum over R inside Q of ||Delta_R b||_inf^2 mu(R)."""
    _, linf = difference_energy(b, mu)
    return mu.tree.subtree_sum(linf ** 2 * mu.node_mass) / mu.node_mass


def carleson_norm(b: TreeFunction, mu: MeasureTree) -> float:
    return float(np.sqrt(np.max(carleson_packing(b, mu))))


def c_coefficients(b: TreeFunction, mu: MeasureTree) -> tuple[np.ndarray, np.ndarray]:
    """c_Q = <b, h_Q^2> for internal Q, computed two ways.

    The first integrates b against h_Q^2 leaf by leaf. The second uses
    c_Q = (<b>_{Q+} - <b>_{Q-})(mu(Q-) - mu(Q+))/mu(Q) + <b>_Q.
    Leaves hold nan.
    """
    _check(b, mu)
    t = mu.tree
    ids = t.internal
    L, R = t.left[ids], t.right[ids]
    mL, mR, mQ = mu.node_mass[L], mu.node_mass[R], mu.node_mass[ids]
    integral_b = t.up_sum(b.values * mu.leaf_mass)
    c_int = np.full(t.n_nodes, np.nan)
    c_int[ids] = mu.m[ids] * (integral_b[R] / mR ** 2 + integral_b[L] / mL ** 2)
    avg = integral_b / mu.node_mass
    c_rew = np.full(t.n_nodes, np.nan)
    c_rew[ids] = (avg[R] - avg[L]) * (mL - mR) / mQ + avg[ids]
    return c_int, c_rew


def beta_sequence(b: TreeFunction, mu: MeasureTree, c: np.ndarray | None = None) -> np.ndarray:
    """beta_Q = c_Q - c_{Q^s} for non-top internal Q with internal sibling (nan elsewhere)."""
    t = mu.tree
    if c is None:
        c = c_coefficients(b, mu)[1]
    out = np.full(t.n_nodes, np.nan)
    ids = t.internal[t.internal > 0]
    ids = ids[~t.is_leaf[t.sibling[ids]]]
    out[ids] = c[ids] - c[t.sibling[ids]]
    return out


@dataclass
class SymbolReport:
    """BMO-type norms of a symbol on a finite tree.

    `carlesonNorm` is the square root of the Carleson packing supremum and
    `laceyPacking` the supremum of the L-infinity packing sums.
    """

    bmoNorm: dict
    BMONorm: dict
    carlesonNorm: float
    laceyPacking: float
    deltaSup: float
    betaSup: float
    beta: np.ndarray = field(repr=False)
    cGap: float = 0.0


def symbol_report(b: TreeFunction, mu: MeasureTree, p_list=(1.5, 2.0, 3.0)) -> SymbolReport:
    _check(b, mu)
    for p in p_list:
        if p < 1:
            raise BadExponent(f"exponent {p} < 1")
    bmo = {float(p): bmo_norm(b, mu, p) for p in p_list}
    BMO = {float(p): BMO_norm(b, mu, p) for p in p_list}
    _, linf = difference_energy(b, mu)
    c_int, c_rew = c_coefficients(b, mu)
    ids = mu.tree.internal
    gap = float(np.max(np.abs(c_int[ids] - c_rew[ids]))) if ids.size else 0.0
    beta = beta_sequence(b, mu, c_rew)
    finite = beta[np.isfinite(beta)]
    return SymbolReport(
        bmoNorm=bmo, BMONorm=BMO,
        carlesonNorm=carleson_norm(b, mu),
        laceyPacking=float(np.max(lacey_packing(b, mu))),
        deltaSup=float(np.max(linf)),
        betaSup=float(np.max(np.abs(finite))) if finite.size else 0.0,
        beta=beta, cGap=gap)


# example symbols ---------------------------------------------------------------------

def _require(mu: MeasureTree, kind: str) -> int:
    if mu.kind != kind or mu.resolution is None:
        raise WrongMeasure(f"expected a {kind} measure, got {mu.kind!r}")
    return mu.resolution


def symbol_alpha(mu: MeasureTree) -> TreeFunction:
    """b = sum over k of alpha_k h_{I_k} with alpha_k = k^(-1/2) mu(I_k)^(1/2) = 1/(k sqrt 2).

    The sum runs over the resolved I_k of the first unit cell (k < r).
    """
    r = _require(mu, "lsmp")
    t = mu.tree
    coeffs = np.zeros(t.n_nodes)
    for k in range(1, r):
        i = t.index(t.window.node(-k, 0))
        coeffs[i] = np.sqrt(mu.node_mass[i] / k)
    return TreeFunction(t, synthesize(coeffs, mu))


def symbol_fp(mu: MeasureTree, p: float, n_max: int | None = None) -> TreeFunction:
    """f_p = (n+2)^(1/p) on the sibling of I_{(n+1)1} in cell n, zero elsewhere.

    The support interval in cell n is [n-1 + 3 * 2^-(n+2), n-1 + 2^-n).
    Cells whose support interval is not resolved, or with n > n_max,
    carry zero.
    """
    r = _require(mu, "twist")
    if not p > 1 or not np.isfinite(p):
        raise BadExponent("f_p needs 1 < p < infinity")
    t = mu.tree
    J = t.window.top
    values = np.zeros(t.n_leaves)
    cells = 2 ** J
    last = cells if n_max is None else min(cells, n_max)
    for n in range(1, last + 1):
        k = n + 1
        if k + 1 > r:
            break
        i = t.index(t.window.node(-(k + 1), ((n - 1) << (k + 1)) + 3))
        values[t.leaf_lo[i]:t.leaf_hi[i]] = (n + 2) ** (1.0 / p)
    return TreeFunction(t, values)


def q_sequences(r: int) -> tuple[np.ndarray, np.ndarray]:
    """(u_k, v_k) for k = 0..r, with entry 0 unused.

    v_1 = 1, v_k = v_{k-1} + b_k (-1)^k log k; u_1 = 0, u_k = v_{k-1} - a_k (-1)^k log k.
    """
    u = np.zeros(r + 1)
    v = np.zeros(r + 1)
    if r >= 1:
        v[1] = 1.0
    for k in range(2, r + 1):
        s = (-1) ** k * np.log(k)
        v[k] = v[k - 1] + float(twist_b(k)) * s
        u[k] = v[k - 1] - float(twist_a(k)) * s
    return u, v


def symbol_q(mu: MeasureTree) -> TreeFunction:
    """q = u_k on every I_k^b, in every unit cell; the tail leaf near each integer takes v_r."""
    r = _require(mu, "twist")
    t = mu.tree
    u, v = q_sequences(r)
    # in-cell start of each leaf, in units of 2^-r; I_k^b covers [2^(r-k), 2^(r-k+1))
    s = t.leaf_start & ((np.int64(1) << r) - 1)
    tail = s == 0
    k = r + 1 - bit_length(s)
    values = np.where(tail, v[r], u[np.clip(k, 1, r)])
    return TreeFunction(t, values)


def parse_symbol(spec: str, mu: MeasureTree) -> TreeFunction:
    """Build a symbol from alpha, fp:P, q or file:PATH."""
    if spec == "alpha":
        return symbol_alpha(mu)
    if spec == "q":
        return symbol_q(mu)
    if spec.startswith("fp:"):
        return symbol_fp(mu, float(spec[3:]))
    if spec.startswith("file:"):
        return load_function_csv(spec[5:], mu.tree)
    raise ValueError(f"unknown symbol {spec!r}")


# file format ---------------------------------------------------------------------------

def save_function_csv(f: TreeFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["offset", "value"])
        for pos, val in enumerate(f.values):
            w.writerow([pos, repr(float(val))])


def load_function_csv(path, tree: DyadicTree) -> TreeFunction:
    """Load leaf values written as `offset,value` rows (offset = leaf position)."""
    values = np.full(tree.n_leaves, np.nan)
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["offset", "value"]:
            raise ValueError("function file must have header offset,value")
        for row in reader:
            values[int(row["offset"])] = float(row["value"])
    if np.any(np.isnan(values)):
        raise ValueError("function file does not cover every leaf")
    return TreeFunction(tree, values)
