"""Operator norm estimates on L^2(mu), L^p(mu), L^p(w mu) and weak (1,1) ratios.

Every estimate carries the witness function that realizes its lower bound,
so the bound can be re-checked by applying the operator once more.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .func import BadExponent, TreeFunction, haar_function
from .measure import MeasureTree
from .ops import Operator


class DimensionTooLarge(ValueError):
    """The dense computation would need more than DENSE_LIMIT leaves."""


DENSE_LIMIT = 2 ** 14


@dataclass
class NormEstimate:
    """lowerBound is certified by `witness`; estimate is the best value found."""

    lowerBound: float
    estimate: float
    method: str
    iterations: int = 0
    tolerance: float = 0.0
    witness: TreeFunction | None = None
    history: list = field(default_factory=list)


def _apply_batch(op: Operator, cols: np.ndarray, mu: MeasureTree) -> np.ndarray:
    """Apply op to every column of a (n_leaves, k) array."""
    if getattr(op, "linear", True):
        out = []
        for s in range(0, cols.shape[1], 1024):
            out.append(op.apply_values(cols[:, s:s + 1024], mu))
        return np.concatenate(out, axis=1) if out else np.zeros_like(cols)
    return np.stack([op.apply_values(cols[:, j], mu) for j in range(cols.shape[1])], axis=1)


def dense_matrix(op: Operator, mu: MeasureTree) -> np.ndarray:
    """Matrix of op acting on leaf values (column j = op applied to the j-th leaf indicator)."""
    n = mu.tree.n_leaves
    if n > DENSE_LIMIT:
        raise DimensionTooLarge(f"{n} leaves exceed the dense limit {DENSE_LIMIT}")
    if not getattr(op, "linear", True):
        raise ValueError("dense matrices need a linear operator")
    return _apply_batch(op, np.eye(n), mu)


def _norm(values: np.ndarray, mass: np.ndarray, p: float, axis=0) -> np.ndarray:
    return np.sum(np.abs(values) ** p * (mass if values.ndim == 1 else mass[:, None]), axis=axis) ** (1 / p)


def ratio(op: Operator, f: TreeFunction, mu: MeasureTree, p: float, w: np.ndarray | None = None) -> float:
    """||op f||_p / ||f||_p in L^p(w mu)."""
    mass = mu.leaf_mass if w is None else mu.leaf_mass * w
    den = _norm(f.values, mass, p)
    if den == 0:
        return 0.0
    return float(_norm(op.apply_values(f.values, mu), mass, p) / den)


def l2_norm(op: Operator, mu: MeasureTree, tol: float = 1e-8, max_iter: int = 10_000,
            seed: int = 0) -> NormEstimate:
    """Power iteration for T*T on L^2(mu), with T* the mu-adjoint.

    The start vector is the best of the indicator and Haar witnesses
    plus a random perturbation, so every direction is reachable.
    """
    A = dense_matrix(op, mu)
    mass = mu.leaf_mass
    sq = np.sqrt(mass)
    B = sq[:, None] * A / sq[None, :]
    start = lp_lower(op, mu, 2.0)
    x = sq * start.witness.values if start.witness is not None else np.ones(mu.tree.n_leaves)
    x = x + 1e-3 * np.linalg.norm(x) * np.random.default_rng(seed).standard_normal(x.size) / np.sqrt(x.size)
    x /= np.linalg.norm(x)
    lam = 0.0
    it = 0
    hist = []
    for it in range(1, max_iter + 1):
        y = B.T @ (B @ x)
        new = float(np.linalg.norm(y))
        if new == 0:
            break
        x = y / new
        hist.append(np.sqrt(new))
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    wit = TreeFunction(mu.tree, x / sq)
    lb = ratio(op, wit, mu, 2.0)
    if start.lowerBound > lb:
        lb, wit = start.lowerBound, start.witness
    return NormEstimate(lb, max(lb, float(np.sqrt(lam))), "power", it, tol, wit, hist)


WITNESS_NODE_CAP = 2048


def _node_sample(nodes: np.ndarray, rng) -> np.ndarray:
    if nodes.size <= WITNESS_NODE_CAP:
        return nodes
    return np.sort(rng.choice(nodes, WITNESS_NODE_CAP, replace=False))


def default_witnesses(mu: MeasureTree, seed: int = 0, n_random: int = 8) -> np.ndarray:
    """Columns: node indicators, Haar functions and random sign vectors.

    On large trees the nodes are a seeded sample of WITNESS_NODE_CAP.
    """
    t = mu.tree
    n = t.n_leaves
    rng = np.random.default_rng(seed)
    nodes = _node_sample(np.arange(t.n_nodes), rng)
    cols = []
    ind = np.zeros((n, nodes.size))
    for j, i in enumerate(nodes):
        ind[t.leaf_lo[i]:t.leaf_hi[i], j] = 1.0
    cols.append(ind)
    internal = _node_sample(t.internal, rng)
    if internal.size:
        cols.append(np.stack([haar_function(mu, t.node_id(i)).values for i in internal], axis=1))
    cols.append(rng.choice([-1.0, 1.0], size=(n, n_random)))
    return np.concatenate(cols, axis=1)


def lp_lower(op: Operator, mu: MeasureTree, p: float, witnessSet=None,
             w: np.ndarray | None = None, seed: int = 0) -> NormEstimate:
    """max over witnesses of ||T f||_p / ||f||_p in L^p(w mu)."""
    if not 1 <= p < np.inf:
        raise BadExponent("p must lie in [1, inf)")
    if witnessSet is None:
        cols = default_witnesses(mu, seed)
    else:
        cols = np.stack([f.values if isinstance(f, TreeFunction) else np.asarray(f, float)
                         for f in witnessSet], axis=1)
    mass = mu.leaf_mass if w is None else mu.leaf_mass * w
    num = _norm(_apply_batch(op, cols, mu), mass, p)
    den = _norm(cols, mass, p)
    r = np.where(den > 0, num / np.where(den > 0, den, 1), 0.0)
    j = int(np.argmax(r))
    wit = TreeFunction(mu.tree, cols[:, j].copy())
    return NormEstimate(float(r[j]), float(r[j]), "witness", cols.shape[1], 0.0, wit, [])


def _dual(x: np.ndarray, p: float) -> np.ndarray:
    return np.sign(x) * np.abs(x) ** (p - 1)


def lp_ascent(op: Operator, mu: MeasureTree, p: float, restarts: int = 4, seed: int = 0,
              max_iter: int = 200, tol: float = 1e-10, w: np.ndarray | None = None) -> NormEstimate:
    """Nonlinear power method for max ||T f||_p / ||f||_p on L^p(w mu).

    Each step maps f to psi_{p'}(T* psi_p(T f)) with T* the adjoint for w mu
    and psi_r(x) = sign(x)|x|^(r-1); a step is kept only if it improves the
    quotient, so the recorded history is nondecreasing. The result is a
    lower bound, never a certified norm.
    """
    if not 1 < p < np.inf:
        raise BadExponent("p must lie in (1, inf)")
    A = dense_matrix(op, mu)
    nu = mu.leaf_mass if w is None else mu.leaf_mass * w
    q = p / (p - 1)
    adj = (A * nu[:, None]).T / nu[:, None]

    def value(x):
        d = _norm(x, nu, p)
        return float(_norm(A @ x, nu, p) / d) if d > 0 else 0.0

    start = lp_lower(op, mu, p, w=w, seed=seed)
    rng = np.random.default_rng(seed)
    best_x, best = start.witness.values.copy(), start.lowerBound
    history = [best]
    its = 0
    for r in range(restarts):
        x = best_x.copy() if r == 0 else rng.standard_normal(mu.tree.n_leaves)
        cur = value(x)
        for _ in range(max_iter):
            its += 1
            z = adj @ _dual(A @ x, p)
            cand = _dual(z, q)
            scale = np.max(np.abs(cand))
            if not scale > 0 or not np.isfinite(scale):
                break
            cand = cand / scale
            new = value(cand)
            if not new > cur * (1 + tol):
                break
            x, cur = cand, new
            if cur > best:
                best, best_x = cur, x.copy()
                history.append(best)
    wit = TreeFunction(mu.tree, best_x / max(np.max(np.abs(best_x)), 1e-300))
    lb = ratio(op, wit, mu, p, w)
    return NormEstimate(lb, max(lb, best), "ascent", its, tol, wit, history)


def weak_ratio(values: np.ndarray, tf: np.ndarray, mass: np.ndarray) -> float:
    """sup over lambda of lambda mu{|Tf| > lambda} / ||f||_1, exact over level sets."""
    l1 = float(np.sum(np.abs(values) * mass))
    if l1 == 0:
        return 0.0
    a = np.abs(tf)
    order = np.argsort(-a, kind="stable")
    cum = np.cumsum(mass[order])
    v = a[order]
    # mu{|Tf| >= v} for the last occurrence of each value
    last = np.r_[v[1:] != v[:-1], True]
    return float(np.max(v[last] * cum[last]) / l1)


def weak11_estimate(op: Operator, mu: MeasureTree, trialSet=None, seed: int = 0,
                    n_random: int = 16) -> NormEstimate:
    """Largest weak (1,1) ratio over trial functions.

    The default trials are leaf indicators, normalized node spikes
    1_Q / mu(Q) and random non-negative functions.
    """
    t = mu.tree
    if trialSet is None:
        n = t.n_leaves
        cols = [np.eye(n)]
        spikes = np.zeros((n, t.n_nodes))
        for i in range(t.n_nodes):
            spikes[t.leaf_lo[i]:t.leaf_hi[i], i] = 1.0 / mu.node_mass[i]
        cols.append(spikes)
        cols.append(np.random.default_rng(seed).exponential(size=(n, n_random)) ** 3)
        cols = np.concatenate(cols, axis=1)
    else:
        cols = np.stack([f.values if isinstance(f, TreeFunction) else np.asarray(f, float)
                         for f in trialSet], axis=1)
    out = _apply_batch(op, cols, mu)
    best, j_best = 0.0, 0
    for j in range(cols.shape[1]):
        r = weak_ratio(cols[:, j], out[:, j], mu.leaf_mass)
        if r > best:
            best, j_best = r, j
    wit = TreeFunction(t, cols[:, j_best].copy())
    return NormEstimate(best, best, "weak11", cols.shape[1], 0.0, wit, [])
