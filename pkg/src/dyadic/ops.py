"""Dyadic operators on leaf-constant functions.

Every linear operator here is a sum T = sum_Q T_Q over nodes. Internally
an operator reports its action as node terms: a value on node R that is
added at every leaf under R, owned by the node `lag` levels above R.
Paraproduct terms sit on the children of their owner (lag 1), the
adjoint paraproduct is constant on its owner (lag 0), and the Hilbert
transform, grouped by the common parent of Q and its sibling, acts on
grandchildren (lag 2). Applying T sums the terms down each root-to-leaf
path. Maximal truncations and the sparse stopping rule read partial
sums of the same terms.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .func import (TreeFunction, _check, _col, c_coefficients, child_increments,
                   haar_coefficients, haar_values, maximal_fn, node_averages)
from .grid import DyadicTree, NodeId
from .measure import MeasureTree


class CoefficientOutOfRange(ValueError):
    """A Haar shift coefficient exceeds 1 in absolute value, or a sign is not in {-1, 0, 1}."""


class Operator:
    """Base class for dyadic operators acting on TreeFunctions."""

    name = "operator"
    linear = True

    def components(self, values: np.ndarray, mu: MeasureTree) -> list[tuple[np.ndarray, int]]:
        """Node terms and their lags; see the module docstring."""
        raise NotImplementedError(f"{self.name} does not expose a node decomposition")

    def coarse(self, values: np.ndarray, mu: MeasureTree):
        """Part of the operator not owned by any node (a constant on the window)."""
        return 0.0

    def apply_values(self, values: np.ndarray, mu: MeasureTree) -> np.ndarray:
        out = np.zeros(values.shape)
        for terms, _ in self.components(values, mu):
            out += mu.tree.down_sum(terms)
        return out + self.coarse(values, mu)

    def apply(self, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
        _check(f, mu)
        return TreeFunction(mu.tree, self.apply_values(f.values, mu))

    def __call__(self, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
        return self.apply(f, mu)

    def __add__(self, other: "Operator") -> "Sum":
        return Sum([self, other])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"


def apply(op, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
    """Apply an Operator, or any callable (f, mu) -> TreeFunction."""
    if isinstance(op, Operator):
        return op.apply(f, mu)
    return op(f, mu)


class Identity(Operator):
    name = "identity"

    def apply_values(self, values, mu):
        return np.array(values, dtype=np.float64, copy=True)


class Zero(Operator):
    name = "zero"

    def components(self, values, mu):
        return []


class Paraproduct(Operator):
    """One of the five paraproduct-type operators with symbol b.

    pi       sum_Q E_Q f Delta_Q b
    pistar   sum_Q E_Q(Delta_Q b Delta_Q f)
    delta    sum_Q Delta_Q b Delta_Q f
    lambda0  sum_Q E_Q b Delta_Q f
    lambda   sum_Q Delta_Q(b Delta_Q f) = sum_Q c_Q <f, h_Q> h_Q
    """

    KINDS = ("pi", "pistar", "delta", "lambda", "lambda0")

    def __init__(self, kind: str, b: TreeFunction):
        if kind not in self.KINDS:
            raise ValueError(f"unknown paraproduct {kind!r}; expected one of {self.KINDS}")
        self.kind = kind
        self.b = b
        self.name = kind

    def components(self, values, mu):
        _check(self.b, mu)
        t = mu.tree
        nd = values.ndim
        R = np.arange(1, t.n_nodes)
        P = t.parent[R]
        ab = node_averages(self.b.values, mu)
        db = child_increments(ab, t)
        af = node_averages(values, mu)
        terms = np.zeros(af.shape)
        if self.kind == "pi":
            terms[R] = af[P] * _col(db[R], nd)
        elif self.kind == "delta":
            terms[R] = _col(db[R], nd) * child_increments(af, t)[R]
        elif self.kind == "lambda0":
            terms[R] = _col(ab[P], nd) * child_increments(af, t)[R]
        elif self.kind == "pistar":
            prod = _col(mu.node_mass * db, nd) * child_increments(af, t)
            ids = t.internal
            terms[ids] = (prod[t.left[ids]] + prod[t.right[ids]]) / _col(mu.node_mass[ids], nd)
            return [(terms, 0)]
        else:
            c = c_coefficients(self.b, mu)[1]
            hc = haar_coefficients(values, mu, af)
            terms[R] = _col(c[P] * haar_values(mu)[R], nd) * hc[P]
        return [(terms, 1)]


def coarse_product(b: TreeFunction, values: np.ndarray, mu: MeasureTree) -> np.ndarray:
    """<b>_top <f>_top on the whole window."""
    ab = float(np.dot(b.values, mu.leaf_mass) / mu.total)
    af = np.tensordot(mu.leaf_mass, values, axes=(0, 0)) / mu.total
    return np.broadcast_to(ab * af, values.shape).copy()


class Hilbert(Operator):
    """The dyadic Hilbert transform h_Q -> sign(Q) h_{Q^s}, sign(Q) = +1 for left children.

    Only nodes below the top whose sibling is also internal take part.
    """

    name = "hilbert"

    @staticmethod
    def paired(tree: DyadicTree) -> np.ndarray:
        ids = tree.internal[tree.internal > 0]
        return ids[~tree.is_leaf[tree.sibling[ids]]]

    def output_coefficients(self, values, mu):
        t = mu.tree
        hc = haar_coefficients(values, mu)
        out = np.zeros(hc.shape)
        ids = self.paired(t)
        sign = np.where(t.offset[ids] % 2 == 0, 1.0, -1.0)
        out[t.sibling[ids]] = _col(sign, hc.ndim) * hc[ids]
        return out

    def components(self, values, mu):
        t = mu.tree
        out = self.output_coefficients(values, mu)
        R = np.arange(1, t.n_nodes)
        terms = np.zeros(out.shape)
        terms[R] = out[t.parent[R]] * _col(haar_values(mu)[R], out.ndim)
        return [(terms, 2)]


class MartingaleTransform(Operator):
    """sum_Q eps_Q Delta_Q f with eps_Q in {-1, 0, 1}.

    `signs` is an array over tree nodes or a callable NodeId -> sign.
    """

    name = "martingale"

    def __init__(self, signs):
        self.signs = signs

    def _eps(self, tree: DyadicTree) -> np.ndarray:
        if callable(self.signs):
            eps = np.array([self.signs(tree.node_id(i)) for i in range(tree.n_nodes)], dtype=float)
        else:
            eps = np.asarray(self.signs, dtype=float)
        if eps.shape != (tree.n_nodes,) or not np.all(np.isin(eps, (-1.0, 0.0, 1.0))):
            raise CoefficientOutOfRange("martingale signs must be one of -1, 0, 1 per node")
        return eps

    def components(self, values, mu):
        t = mu.tree
        eps = self._eps(t)
        inc = child_increments(node_averages(values, mu), t)
        terms = np.zeros(inc.shape)
        R = np.arange(1, t.n_nodes)
        terms[R] = _col(eps[t.parent[R]], inc.ndim) * inc[R]
        return [(terms, 1)]


class HaarShift(Operator):
    """Generalized Haar shift of complexity (s, t).

    T f = sum_Q sum_{J in D_s(Q), K in D_t(Q)} c^Q_{J,K} <f, h_J> h_K.

    `coeffs` may be "uniform" (every coefficient equal to `value`),
    "hilbert" (c = sign(J) when K is the sibling of J, needs s = t = 1),
    "random" (uniform in [-1, 1] from `seed`), a dict keyed by
    (Q, J, K) NodeId triples, or a callable (Q, J, K) -> float. Triples
    whose J or K is not an internal node of the tree are skipped.

    With `l1_normalized`, each T_Q is rescaled so that its kernel obeys
    sup |K_Q| <= kappa / mu(Q).
    """

    def __init__(self, s: int, t: int, coeffs="uniform", value: float = 1.0, seed: int = 0,
                 l1_normalized: bool = False, kappa: float = 1.0):
        if s < 0 or t < 0:
            raise ValueError("complexity must be non-negative")
        if coeffs == "hilbert" and (s, t) != (1, 1):
            raise ValueError("the hilbert preset has complexity (1, 1)")
        if coeffs == "uniform" and abs(value) > 1:
            raise CoefficientOutOfRange("shift coefficients must satisfy |c| <= 1")
        self.s, self.t = s, t
        self.coeffs = coeffs
        self.value = value
        self.seed = seed
        self.l1_normalized = l1_normalized
        self.kappa = kappa
        self.name = f"shift({s},{t})"
        self._cache: dict = {}

    def triples(self, mu: MeasureTree) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Arrays (Q, J, K, c) of node numbers and coefficients."""
        key = id(mu)
        if key in self._cache:
            return self._cache[key]
        tr = mu.tree
        qs, js, ks = [], [], []
        for q in tr.internal:
            J = tr.descendants_at(q, self.s)
            K = tr.descendants_at(q, self.t)
            J = J[~tr.is_leaf[J]]
            K = K[~tr.is_leaf[K]]
            if J.size == 0 or K.size == 0:
                continue
            jj, kk = np.meshgrid(J, K, indexing="ij")
            qs.append(np.full(jj.size, q))
            js.append(jj.ravel())
            ks.append(kk.ravel())
        if qs:
            Q, Jn, Kn = np.concatenate(qs), np.concatenate(js), np.concatenate(ks)
        else:
            Q = Jn = Kn = np.empty(0, np.int64)
        c = self._coefficients(tr, Q, Jn, Kn)
        if np.any(np.abs(c) > 1 + 1e-15):
            raise CoefficientOutOfRange("shift coefficients must satisfy |c| <= 1")
        if self.l1_normalized and Q.size:
            c = c * self._l1_factors(mu, Q, Jn, Kn, c)
        out = (Q, Jn, Kn, c)
        self._cache[key] = out
        return out

    def _coefficients(self, tr, Q, Jn, Kn) -> np.ndarray:
        if isinstance(self.coeffs, str):
            if self.coeffs == "uniform":
                return np.full(Q.size, float(self.value))
            if self.coeffs == "hilbert":
                sign = np.where(tr.offset[Jn] % 2 == 0, 1.0, -1.0)
                return np.where(tr.sibling[Jn] == Kn, sign, 0.0)
            if self.coeffs == "random":
                return np.random.default_rng(self.seed).uniform(-1, 1, Q.size)
            raise ValueError(f"unknown coefficient preset {self.coeffs!r}")
        ids = [(tr.node_id(q), tr.node_id(j), tr.node_id(k)) for q, j, k in zip(Q, Jn, Kn)]
        if isinstance(self.coeffs, dict):
            return np.array([float(self.coeffs.get(x, 0.0)) for x in ids])
        return np.array([float(self.coeffs(*x)) for x in ids])

    def _l1_factors(self, mu, Q, Jn, Kn, c) -> np.ndarray:
        tr = mu.tree
        nm = mu.node_mass
        hmax = np.sqrt(mu.m) / np.minimum(nm[np.maximum(tr.left, 0)], nm[np.maximum(tr.right, 0)])
        size = np.abs(c) * hmax[Jn] * hmax[Kn]
        sup = np.zeros(tr.n_nodes)
        np.maximum.at(sup, Q, size)
        with np.errstate(divide="ignore"):
            factor = np.where(sup > 0, np.minimum(1.0, self.kappa / (nm * sup)), 1.0)
        return factor[Q]

    def components(self, values, mu):
        tr = mu.tree
        Q, Jn, Kn, c = self.triples(mu)
        hc = haar_coefficients(values, mu)
        out = np.zeros(hc.shape)
        np.add.at(out, Kn, _col(c, hc.ndim) * hc[Jn])
        R = np.arange(1, tr.n_nodes)
        terms = np.zeros(out.shape)
        terms[R] = out[tr.parent[R]] * _col(haar_values(mu)[R], out.ndim)
        return [(terms, self.t + 1)]

    def kernel_sup(self, mu: MeasureTree) -> np.ndarray:
        """sup |K_Q| times mu(Q), per node (0 where T_Q vanishes)."""
        tr = mu.tree
        Q, Jn, Kn, c = self.triples(mu)
        nm = mu.node_mass
        hmax = np.sqrt(mu.m) / np.minimum(nm[np.maximum(tr.left, 0)], nm[np.maximum(tr.right, 0)])
        sup = np.zeros(tr.n_nodes)
        np.maximum.at(sup, Q, np.abs(c) * hmax[Jn] * hmax[Kn])
        return sup * nm

    def nondegenerate(self, mu: MeasureTree) -> bool:
        """Diagnostic: whether inf |c| > 0 over the enumerated triples."""
        c = self.triples(mu)[3]
        return bool(c.size and np.min(np.abs(c)) > 0)


class Sum(Operator):
    """Sum of operators."""

    def __init__(self, ops: Sequence[Operator]):
        self.ops = list(ops)
        self.name = "+".join(op.name for op in self.ops)

    def components(self, values, mu):
        out = []
        for op in self.ops:
            out.extend(op.components(values, mu))
        return out

    def coarse(self, values, mu):
        return sum((op.coarse(values, mu) for op in self.ops), 0.0)

    def apply_values(self, values, mu):
        return sum(op.apply_values(values, mu) for op in self.ops)


class Commutator(Operator):
    """[T, b] f = T(b f) - b T(f)."""

    def __init__(self, inner: Operator, b: TreeFunction):
        self.inner = inner
        self.b = b
        self.name = f"[{inner.name},b]"

    def apply_values(self, values, mu):
        bcol = _col(self.b.values, values.ndim)
        return self.inner.apply_values(bcol * values, mu) - bcol * self.inner.apply_values(values, mu)


class Maximal(Operator):
    """The dyadic maximal operator M^q as an (sublinear) operator."""

    linear = False

    def __init__(self, q: float = 1.0):
        self.q = q
        self.name = "maximal"

    def apply_values(self, values, mu):
        return maximal_fn(TreeFunction(mu.tree, values), mu, self.q).values


class Truncation(Operator):
    """The maximal truncation T# of a decomposable operator."""

    linear = False

    def __init__(self, inner: Operator):
        self.inner = inner
        self.name = f"{inner.name}#"

    def apply_values(self, values, mu):
        return maximal_truncation(self.inner, TreeFunction(mu.tree, values), mu).values


# partial sums ------------------------------------------------------------------------

class PathPartials:
    """Partial sums of sum_Q T_Q f along each root-to-leaf path.

    prefix(d) is, at each leaf x, the sum of T_Q f(x) over nodes Q
    containing x with depth(Q) <= d.
    """

    def __init__(self, op: Operator, values: np.ndarray, mu: MeasureTree):
        t = mu.tree
        self.tree = t
        self.parts = [(t.path_sum(terms), lag) for terms, lag in op.components(values, mu)]
        anc = []
        for d in range(t.max_depth + 1):
            a = t.leaf_ancestor(d)
            anc.append(np.where(a >= 0, a, t.leaves))
        self._anc = np.stack(anc)

    def prefix(self, d) -> np.ndarray:
        """d may be an int or an array over leaves."""
        t = self.tree
        d = np.broadcast_to(np.asarray(d, np.int64), (t.n_leaves,))
        out = np.zeros(t.n_leaves)
        rows = np.arange(t.n_leaves)
        for acc, lag in self.parts:
            e = d + lag
            ok = e >= 0
            idx = self._anc[np.clip(e, 0, t.max_depth), rows]
            out += np.where(ok, acc[idx], 0.0)
        return out


def maximal_truncation(op: Operator, f: TreeFunction, mu: MeasureTree) -> TreeFunction:
    """T# f(x) = sup over nodes Q0 containing x of |sum over Q strictly containing Q0 of T_Q f(x)|."""
    _check(f, mu)
    t = mu.tree
    pp = PathPartials(op, f.values, mu)
    best = np.zeros(t.n_leaves)
    for d0 in range(t.max_depth + 1):
        ok = t.leaf_depth >= d0
        best = np.where(ok, np.maximum(best, np.abs(pp.prefix(d0 - 1))), best)
    return TreeFunction(t, best)


# product decompositions and commutators -------------------------------------------------

@dataclass
class ProductDecomposition:
    """The pieces of b f = coarse + pi + pistar + lambda = coarse + pi + delta + lambda0."""

    coarse: TreeFunction
    pi: TreeFunction
    pistar: TreeFunction
    lam: TreeFunction
    delta: TreeFunction
    lam0: TreeFunction
    residual_first: float
    residual_second: float


def decompose_product(b: TreeFunction, f: TreeFunction, mu: MeasureTree) -> ProductDecomposition:
    _check(b, mu)
    _check(f, mu)
    pieces = {k: Paraproduct(k, b).apply(f, mu) for k in Paraproduct.KINDS}
    coarse = TreeFunction(mu.tree, coarse_product(b, f.values, mu))
    bf = b.values * f.values
    r1 = bf - (coarse.values + pieces["pi"].values + pieces["pistar"].values + pieces["lambda"].values)
    r2 = bf - (coarse.values + pieces["pi"].values + pieces["delta"].values + pieces["lambda0"].values)
    return ProductDecomposition(coarse, pieces["pi"], pieces["pistar"], pieces["lambda"],
                                pieces["delta"], pieces["lambda0"],
                                float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))


class _CoarseOp(Operator):
    def __init__(self, b):
        self.b = b
        self.name = "coarse"

    def apply_values(self, values, mu):
        return coarse_product(self.b, values, mu)


@dataclass
class CommutatorResult:
    """[T, b] f and its split [T, coarse] + [T, Pi_b] + [T, Delta_b] + [T, Lambda0_b]."""

    value: TreeFunction
    terms: dict = field(default_factory=dict)


def commutator(op: Operator, b: TreeFunction, f: TreeFunction, mu: MeasureTree) -> CommutatorResult:
    _check(f, mu)
    value = Commutator(op, b).apply(f, mu)
    terms = {}
    for name, piece in (("coarse", _CoarseOp(b)), ("pi", Paraproduct("pi", b)),
                        ("delta", Paraproduct("delta", b)), ("lambda0", Paraproduct("lambda0", b))):
        terms[name] = op.apply(piece.apply(f, mu), mu) - piece.apply(op.apply(f, mu), mu)
    return CommutatorResult(value, terms)


# Calderon-Zygmund decomposition ---------------------------------------------------------------

@dataclass
class CZDecomposition:
    """f = good + sum of bad parts b_k = f 1_{Q_k} - <f 1_{Q_k}>_{parent Q_k} 1_{parent Q_k}."""

    good: TreeFunction
    bad: list
    height: float

    @property
    def cubes(self) -> list[NodeId]:
        return [q for q, _ in self.bad]


def cz_decompose(f: TreeFunction, mu: MeasureTree, lam: float, q0: NodeId | None = None) -> CZDecomposition:
    """Split f at height lam over the maximal nodes of D(q0) with <|f|> > lam.

    Candidates must have a parent in the window; if q0 is the top node and
    itself exceeds the height, the search starts at its children.
    """
    _check(f, mu)
    if lam <= 0:
        raise ValueError("height must be positive")
    t = mu.tree
    i0 = 0 if q0 is None else t.index(q0)
    lo, hi = t.leaf_lo[i0], t.leaf_hi[i0]
    if np.any(f.values[:lo] != 0) or np.any(f.values[hi:] != 0):
        raise ValueError("f must be supported in q0")
    avg = node_averages(np.abs(f.values), mu)
    inside = (t.leaf_lo >= lo) & (t.leaf_hi <= hi)
    cand = inside & (avg > lam)
    cand[0] = False
    first = cand & (t.path_sum(cand.astype(float)) == 1)
    integral_f = t.up_sum(f.values * mu.leaf_mass)
    good = f.values.copy()
    bad = []
    for i in np.flatnonzero(first):
        p = t.parent[i]
        v = np.zeros(t.n_leaves)
        v[t.leaf_lo[i]:t.leaf_hi[i]] = f.values[t.leaf_lo[i]:t.leaf_hi[i]]
        v[t.leaf_lo[p]:t.leaf_hi[p]] -= integral_f[i] / mu.node_mass[p]
        bad.append((t.node_id(i), TreeFunction(t, v)))
        good -= v
    return CZDecomposition(TreeFunction(t, good), bad, float(lam))


def parse_operator(name: str, b: TreeFunction | None = None) -> Operator:
    """Operator from a short name: pi, pistar, delta, lambda, lambda0, hilbert,
    identity, commutator (uses b with the Hilbert transform), shift11."""
    if name in Paraproduct.KINDS:
        if b is None:
            raise ValueError(f"operator {name} needs a symbol")
        return Paraproduct(name, b)
    if name == "hilbert":
        return Hilbert()
    if name == "identity":
        return Identity()
    if name == "commutator":
        if b is None:
            raise ValueError("commutator needs a symbol")
        return Commutator(Hilbert(), b)
    if name == "shift11":
        return HaarShift(1, 1, "uniform")
    raise ValueError(f"unknown operator {name!r}")


def load_shift_csv(path, window) -> dict:
    """Shift coefficients from rows q_level,q_offset,j_level,j_offset,k_level,k_offset,coeff."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = ["q_level", "q_offset", "j_level", "j_offset", "k_level", "k_offset", "coeff"]
        if reader.fieldnames != cols:
            raise ValueError("shift file must have header " + ",".join(cols))
        for row in reader:
            c = float(row["coeff"])
            if abs(c) > 1:
                raise CoefficientOutOfRange(f"coefficient {c} exceeds 1 in absolute value")
            key = tuple(window.node(int(row[f"{x}_level"]), int(row[f"{x}_offset"])) for x in "qjk")
            out[key] = c
    return out


def save_shift_csv(shift: HaarShift, mu: MeasureTree, path) -> None:
    t = mu.tree
    Q, Jn, Kn, c = shift.triples(mu)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q_level", "q_offset", "j_level", "j_offset", "k_level", "k_offset", "coeff"])
        for q, j, k, v in zip(Q, Jn, Kn, c):
            ids = [t.node_id(int(x)) for x in (q, j, k)]
            w.writerow([x for n in ids for x in (n.level, n.offset)] + [repr(float(v))])
