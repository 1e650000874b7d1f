import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadic.func import (BMO_norm, TreeFunction, average, haar_coeff, haar_function, inner,
                         lp_norm, martingale_diff)
from dyadic.grid import Window
from dyadic.measure import build_lebesgue
from dyadic.ops import (CoefficientOutOfRange, Commutator, HaarShift, Hilbert, Identity, Maximal,
                        MartingaleTransform, Paraproduct, Sum, Truncation, Zero, commutator,
                        cz_decompose, decompose_product, load_shift_csv, maximal_truncation,
                        parse_operator, save_shift_csv)

from conftest import random_measure

seeds = st.integers(0, 2 ** 32 - 1)


def setup(seed, D=5, p_split=0.75):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, D=D, p_split=p_split)
    n = mu.tree.n_leaves
    b = TreeFunction(mu.tree, rng.standard_normal(n))
    f = TreeFunction(mu.tree, rng.standard_normal(n))
    g = TreeFunction(mu.tree, rng.standard_normal(n))
    return rng, mu, b, f, g


def internal_nodes(mu):
    return [mu.tree.node_id(i) for i in mu.tree.internal]


def indicator(mu, q):
    return TreeFunction.indicator(mu.tree, q).values


def brute_paraproduct(kind, b, f, mu):
    """Direct node-by-node sums of the five paraproduct forms."""
    out = np.zeros(mu.tree.n_leaves)
    for q in internal_nodes(mu):
        db = martingale_diff(b, mu, q).values
        df = martingale_diff(f, mu, q).values
        one = indicator(mu, q)
        if kind == "pi":
            out += average(f, mu, q) * db
        elif kind == "pistar":
            out += average(TreeFunction(mu.tree, db * df), mu, q) * one
        elif kind == "delta":
            out += db * df
        elif kind == "lambda0":
            out += average(b, mu, q) * df
        else:
            out += martingale_diff(TreeFunction(mu.tree, b.values * df), mu, q).values
    return out


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(Paraproduct.KINDS))
def test_paraproducts_match_direct_sums(seed, kind):
    _, mu, b, f, _ = setup(seed)
    got = Paraproduct(kind, b)(f, mu).values
    assert np.allclose(got, brute_paraproduct(kind, b, f, mu), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_product_decompositions(seed):
    _, mu, b, f, _ = setup(seed, D=7)
    dec = decompose_product(b, f, mu)
    assert dec.residual_first <= 1e-10
    assert dec.residual_second <= 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_adjoint_identities(seed):
    _, mu, b, f, g = setup(seed, D=7)
    pi, pis = Paraproduct("pi", b), Paraproduct("pistar", b)
    assert inner(pi(f, mu), g, mu) == pytest.approx(inner(f, pis(g, mu), mu), rel=1e-12, abs=1e-12)
    # Lambda and Lambda0 are diagonal in the Haar basis, hence symmetric
    for k in ("lambda", "lambda0"):
        op = Paraproduct(k, b)
        assert inner(op(f, mu), g, mu) == pytest.approx(inner(f, op(g, mu), mu), rel=1e-12, abs=1e-12)
    H = Hilbert()
    assert inner(H(f, mu), g, mu) == pytest.approx(-inner(f, H(g, mu), mu), rel=1e-12, abs=1e-12)


def brute_hilbert(f, mu):
    t = mu.tree
    out = np.zeros(t.n_leaves)
    for i in t.internal:
        if i == 0 or t.is_leaf[t.sibling[i]]:
            continue
        q = t.node_id(i)
        sign = 1.0 if q.is_left else -1.0
        out += sign * haar_coeff(f, mu, q) * haar_function(mu, q.sibling()).values
    return out


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_hilbert_definition_and_square(seed):
    _, mu, _, f, _ = setup(seed)
    H = Hilbert()
    hf = H(f, mu)
    assert np.allclose(hf.values, brute_hilbert(f, mu), atol=1e-10)
    # H^2 = -Id on the span of the paired Haar functions
    t = mu.tree
    paired = Hilbert.paired(t)
    if paired.size:
        coeffs = np.random.default_rng(seed).standard_normal(paired.size)
        v = sum(c * haar_function(mu, t.node_id(i)).values for c, i in zip(coeffs, paired))
        v = TreeFunction(t, v)
        assert np.allclose(H(H(v, mu), mu).values, -v.values, atol=1e-12 * max(1, np.abs(v.values).max()))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_hilbert_as_shift(seed):
    _, mu, _, f, _ = setup(seed)
    a = Hilbert()(f, mu).values
    b = HaarShift(1, 1, "hilbert")(f, mu).values
    assert np.allclose(a, b, atol=1e-12 * max(1, np.abs(a).max()))


def brute_shift(s, t_, coeff, f, mu):
    out = np.zeros(mu.tree.n_leaves)
    for q in internal_nodes(mu):
        Js = [x for x in internal_nodes(mu) if q.contains(x) and x.depth == q.depth + s]
        Ks = [x for x in internal_nodes(mu) if q.contains(x) and x.depth == q.depth + t_]
        for J in Js:
            for K in Ks:
                out += coeff(q, J, K) * haar_coeff(f, mu, J) * haar_function(mu, K).values
    return out


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_shift_matches_direct_sum(seed, s, t_):
    _, mu, _, f, _ = setup(seed, D=5)

    def coeff(q, j, k):
        return np.cos(q.offset + 3 * j.offset - k.offset + q.level)

    got = HaarShift(s, t_, coeff)(f, mu).values
    assert np.allclose(got, brute_shift(s, t_, coeff, f, mu), atol=1e-10)


def test_shift_coefficient_checks(tmp_path):
    mu = build_lebesgue(Window(0, 5))
    with pytest.raises(CoefficientOutOfRange):
        HaarShift(1, 1, "uniform", value=1.5)
    with pytest.raises(CoefficientOutOfRange):
        HaarShift(1, 0, lambda q, j, k: 2.0).triples(mu)
    with pytest.raises(ValueError):
        HaarShift(1, 2, "hilbert")
    T = HaarShift(1, 1, "random", seed=4)
    assert np.max(np.abs(T.triples(mu)[3])) <= 1
    p = tmp_path / "shift.csv"
    save_shift_csv(T, mu, p)
    table = load_shift_csv(p, mu.window)
    f = TreeFunction(mu.tree, np.random.default_rng(0).standard_normal(mu.tree.n_leaves))
    assert np.allclose(HaarShift(1, 1, table)(f, mu).values, T(f, mu).values, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(0.1, 5.0))
def test_l1_normalized_kernel_bound(seed, kappa):
    _, mu, _, _, _ = setup(seed)
    T = HaarShift(1, 1, "uniform", l1_normalized=True, kappa=kappa)
    assert np.all(T.kernel_sup(mu) <= kappa * (1 + 1e-12))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_martingale_transform(seed):
    rng, mu, _, f, _ = setup(seed)
    eps = rng.choice([-1.0, 0.0, 1.0], mu.tree.n_nodes)
    got = MartingaleTransform(eps)(f, mu).values
    want = sum(eps[i] * martingale_diff(f, mu, mu.tree.node_id(i)).values for i in mu.tree.internal)
    assert np.allclose(got, want, atol=1e-10)
    with pytest.raises(CoefficientOutOfRange):
        MartingaleTransform(np.full(mu.tree.n_nodes, 0.5))(f, mu)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_difference_bounds(seed):
    _, mu, b, f, _ = setup(seed)
    bmo = BMO_norm(b, mu, 1.0)
    absf = TreeFunction(mu.tree, np.abs(f.values))
    for q in internal_nodes(mu):
        df = martingale_diff(f, mu, q)
        one = indicator(mu, q)
        assert lp_norm(df, mu, 1.0) <= 2 * np.sum(np.abs(f.values) * one * mu.leaf_mass) * (1 + 1e-12)
        db = martingale_diff(b, mu, q)
        lhs = abs(average(db * df, mu, q))
        assert lhs <= 2 * bmo * average(absf, mu, q) * (1 + 1e-12) + 1e-15


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from(Paraproduct.KINDS))
def test_paraproduct_locality(seed, kind):
    rng, mu, b, f, _ = setup(seed, D=6)
    t = mu.tree
    i0 = int(rng.choice(np.arange(1, t.n_nodes)))
    q0 = t.node_id(i0)
    g = TreeFunction(t, f.values * indicator(mu, q0))
    out = Paraproduct(kind, b)(g, mu).values
    # outside q0 the output is constant on each sibling of an ancestor of q0
    q = q0
    while not q.is_top:
        s = q.sibling()
        j = t.find(s.depth, s.offset)
        if j >= 0:
            vals = out[t.leaf_lo[j]:t.leaf_hi[j]]
            assert np.allclose(vals, vals[0], atol=1e-12)
        q = q.parent()


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_commutator_split(seed):
    _, mu, b, f, _ = setup(seed)
    for op in (Hilbert(), HaarShift(1, 1, "uniform", value=0.5), Paraproduct("pi", b)):
        res = commutator(op, b, f, mu)
        total = sum(x.values for x in res.terms.values())
        assert np.allclose(total, res.value.values, atol=1e-10)
        direct = op(b * f, mu) - b * op(f, mu)
        assert np.allclose(res.value.values, direct.values, atol=1e-12)


def brute_truncation(kind, b, f, mu):
    """sup over Q0 containing x of |sum over Q strictly containing Q0 of T_Q f(x)|."""
    t = mu.tree
    out = np.zeros(t.n_leaves)
    for j, leaf in enumerate(t.leaves):
        x = t.node_id(leaf)
        chain = [x]
        while not chain[-1].is_top:
            chain.append(chain[-1].parent())
        for d, q0 in enumerate(chain):
            total = 0.0
            for q in chain[d + 1:]:
                db = martingale_diff(b, mu, q).values[j]
                if kind == "pi":
                    total += average(f, mu, q) * db
                else:
                    total += db * martingale_diff(f, mu, q).values[j]
            out[j] = max(out[j], abs(total))
    return out


@settings(max_examples=15, deadline=None)
@given(seeds, st.sampled_from(["pi", "delta"]))
def test_maximal_truncation_brute_force(seed, kind):
    _, mu, b, f, _ = setup(seed)
    got = maximal_truncation(Paraproduct(kind, b), f, mu).values
    assert np.allclose(got, brute_truncation(kind, b, f, mu), atol=1e-10)
    assert np.allclose(Truncation(Paraproduct(kind, b))(f, mu).values, got)


def brute_cz_cubes(f, mu, lam):
    t = mu.tree
    absf = TreeFunction(t, np.abs(f.values))
    cand = [t.node_id(i) for i in range(1, t.n_nodes) if average(absf, mu, t.node_id(i)) > lam]
    return sorted([q for q in cand if not any(r != q and r.contains(q) for r in cand)],
                  key=lambda q: q.start)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.1, 5.0))
def test_cz_decomposition(seed, lam):
    rng, mu, _, f, _ = setup(seed, D=6)
    f = TreeFunction(mu.tree, f.values * rng.lognormal(0, 1, mu.tree.n_leaves))
    cz = cz_decompose(f, mu, lam)
    assert sorted(cz.cubes, key=lambda q: q.start) == brute_cz_cubes(f, mu, lam)
    total = cz.good.values + sum((bk.values for _, bk in cz.bad), np.zeros(mu.tree.n_leaves))
    assert np.allclose(total, f.values, atol=1e-12)
    absf = np.abs(f.values)
    for q, bk in cz.bad:
        one = indicator(mu, q)
        assert abs(average(bk, mu, q.parent())) <= 1e-12 * max(1, np.abs(bk.values).max())
        assert lp_norm(bk, mu, 1.0) <= 2 * np.sum(absf * one * mu.leaf_mass) * (1 + 1e-12)
    for a in cz.cubes:
        for c in cz.cubes:
            assert a == c or not (a.contains(c) or c.contains(a))
    assert sum(mu.mass(q) for q in cz.cubes) <= lp_norm(f, mu, 1.0) / lam * (1 + 1e-12)


def test_cz_lebesgue_spike():
    mu = build_lebesgue(Window(0, 8))
    for k in range(3, 8):
        f = TreeFunction(mu.tree, 2.0 ** k * indicator(mu, mu.window.node(-k, 0)))
        cz = cz_decompose(f, mu, 2.0)
        assert cz.cubes == brute_cz_cubes(f, mu, 2.0)
    with pytest.raises(ValueError):
        cz_decompose(f, mu, 0.0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_batch_apply_and_simple_ops(seed):
    rng, mu, b, f, _ = setup(seed)
    X = rng.standard_normal((mu.tree.n_leaves, 3))
    for op in (Paraproduct("lambda", b), Hilbert(), HaarShift(2, 1, "random", seed=1),
               Commutator(Hilbert(), b), Sum([Hilbert(), Identity()])):
        batch = op.apply_values(X, mu)
        for j in range(3):
            assert np.allclose(batch[:, j], op.apply_values(X[:, j], mu), atol=1e-12)
    assert np.array_equal(Identity()(f, mu).values, f.values)
    assert np.all(Zero()(f, mu).values == 0)
    s = (Hilbert() + Identity())(f, mu).values
    assert np.allclose(s, Hilbert()(f, mu).values + f.values)
    assert np.all(Maximal()(f, mu).values >= np.abs(f.values) - 1e-12)


def test_parse_operator():
    mu = build_lebesgue(Window(0, 3))
    b = TreeFunction.constant(mu.tree, 1.0)
    assert isinstance(parse_operator("pi", b), Paraproduct)
    assert isinstance(parse_operator("hilbert"), Hilbert)
    assert isinstance(parse_operator("commutator", b), Commutator)
    with pytest.raises(ValueError):
        parse_operator("pi")
    with pytest.raises(ValueError):
        parse_operator("nope")
