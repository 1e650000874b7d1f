import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyadic.func import haar_function
from dyadic.grid import Window
from dyadic.measure import (MeasureTree, balance_report, build_lebesgue, build_lsmp,
                            build_named, build_perturbed_lebesgue, build_twist,
                            interval_I, interval_Ib, interval_Ikj, interval_Ikjb,
                            load_measure_csv, m_value, save_measure_csv, twist_m_Ik,
                            twist_m_Ikj, twist_m_Ikjb)

from conftest import random_measure


def a(k):
    return 0.5 if k == 1 else k ** -0.5


def twist_mu_Ik(k):
    return math.prod(a(i) for i in range(1, k + 1))


def twist_mu_Ikj(k, j):
    return math.prod(a(i) for i in range(1, k)) * (1 - a(k)) * math.prod(1 - 1 / (k + i) for i in range(1, j + 1))


def twist_mu_Ikjb(k, j):
    return (math.prod(a(i) for i in range(1, k)) * (1 - a(k))
            * math.prod(1 - 1 / (k + i) for i in range(1, j)) / (k + j))


def test_lebesgue_masses_and_constants():
    mu = build_lebesgue(Window(1, 6))
    assert mu.total == 2.0
    assert np.allclose(mu.leaf_mass, 2.0 / 64)
    rep = balance_report(mu)
    assert rep.doublingConst == 2.0
    # m(Q) = |Q| / 4, so parent and child differ by exactly 2 and siblings agree
    assert rep.balancedConst == 2.0 and rep.siblingConst == 1.0
    assert rep.standardnessConst == 1.0


@pytest.mark.parametrize("J,D", [(0, 8), (1, 9), (2, 12)])
def test_lsmp_closed_forms(J, D):
    w = Window(J, D)
    mu = build_lsmp(w)
    r = D - J
    for k in range(1, r + 1):
        assert mu.mass(interval_I(w, k)) == pytest.approx(1 / (2 * k), rel=1e-12)
        mb = 0.5 if k == 1 else 1 / (2 * k * (k - 1))
        assert mu.mass(interval_Ib(w, k)) == pytest.approx(mb, rel=1e-12)
    assert mu.total == pytest.approx(2 ** J, rel=1e-12)


@pytest.mark.parametrize("compact", [False, True])
def test_twist_closed_forms(compact):
    D = 14 if not compact else 40
    w = Window(0, D)
    mu = build_twist(w, compact=compact)
    assert mu.total == pytest.approx(1.0, rel=1e-12)
    for k in range(1, D):
        assert mu.mass(interval_I(w, k)) == pytest.approx(twist_mu_Ik(k), rel=1e-12)
    for k in range(1, D):
        for j in range(1, D - k):
            assert mu.mass(interval_Ikj(w, k, j)) == pytest.approx(twist_mu_Ikj(k, j), rel=1e-12)
            assert mu.mass(interval_Ikjb(w, k, j)) == pytest.approx(twist_mu_Ikjb(k, j), rel=1e-12)


def test_twist_m_closed_forms_match_tree():
    w = Window(0, 40)
    mu = build_twist(w, compact=True)
    for k in range(1, 38):
        assert twist_m_Ik(k) == pytest.approx(m_value(mu, interval_I(w, k)), rel=1e-12)
        m = twist_mu_Ik(k + 1) * (twist_mu_Ik(k) - twist_mu_Ik(k + 1)) / twist_mu_Ik(k)
        assert twist_m_Ik(k) == pytest.approx(m, rel=1e-12)
    for k, j in [(2, 3), (5, 10), (20, 15)]:
        assert twist_m_Ikj(k, j) == pytest.approx(m_value(mu, interval_Ikj(w, k, j)), rel=1e-12)
        assert twist_m_Ikjb(k, j) == pytest.approx(twist_mu_Ikjb(k, j) / 4, rel=1e-12)


def test_twist_is_sibling_balanced_but_ratio_decreases():
    w = Window(0, 40)
    mu = build_twist(w, compact=True)
    rep = balance_report(mu)
    assert rep.siblingConst < 10
    ratios = [twist_m_Ik(k) / twist_m_Ik(k - 1) for k in range(5, 41)]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert twist_m_Ikj(30, 30) / twist_m_Ikjb(30, 30) == pytest.approx(4, abs=0.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_additivity_and_m_bounds(seed):
    mu = random_measure(np.random.default_rng(seed), D=7)
    t = mu.tree
    ids = t.internal
    # bit-for-bit additivity
    assert np.array_equal(mu.node_mass[ids], mu.node_mass[t.left[ids]] + mu.node_mass[t.right[ids]])
    small = np.minimum(mu.node_mass[t.left[ids]], mu.node_mass[t.right[ids]])
    assert np.all(mu.m[ids] <= small * (1 + 1e-14))
    assert np.all(mu.m[ids] >= small / 2 * (1 - 1e-14))
    rep = balance_report(mu)
    assert rep.siblingConst <= rep.balancedConst ** 2 * (1 + 1e-12)
    assert min(rep.doublingConst, rep.balancedConst, rep.siblingConst) >= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_haar_l1_norm_squared_is_4m(seed):
    mu = random_measure(np.random.default_rng(seed), D=5)
    for i in mu.tree.internal:
        q = mu.tree.node_id(i)
        h = haar_function(mu, q)
        l1 = float(np.sum(np.abs(h.values) * mu.leaf_mass))
        assert l1 ** 2 == pytest.approx(4 * m_value(mu, q), rel=1e-12)


def test_perturbed_lebesgue_is_seeded():
    w = Window(0, 6)
    a1 = build_perturbed_lebesgue(w, 0.3, seed=3).leaf_mass
    a2 = build_perturbed_lebesgue(w, 0.3, seed=3).leaf_mass
    assert np.array_equal(a1, a2)
    assert np.all((a1 >= 0.7 / 64) & (a1 <= 1.3 / 64))


def test_bad_inputs():
    with pytest.raises(ValueError):
        build_lsmp(Window(2, 2))
    with pytest.raises(ValueError):
        build_named("nope", Window(0, 3))
    t = build_lebesgue(Window(0, 2)).tree
    with pytest.raises(ValueError):
        MeasureTree(t, [1, 1, 0, 1])


def test_csv_roundtrip(tmp_path, rng):
    mu = random_measure(rng, J=1, D=6)
    p = tmp_path / "m.csv"
    save_measure_csv(mu, p)
    back = load_measure_csv(p)
    assert back.tree.same_as(mu.tree)
    assert np.array_equal(back.leaf_mass, mu.leaf_mass)
    assert build_named(f"file:{p}", Window(0, 1)).total == pytest.approx(mu.total)


def test_csv_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("level,offset,mass\n0,0,1.0\n")
    with pytest.raises(ValueError):
        load_measure_csv(p)
    p.write_text("level,offset,mass\n-1,0,1.0\n-1,1,-2\n")
    with pytest.raises(ValueError):
        load_measure_csv(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_measure_csv(p)
    p.write_text("level,offset,mass\n-1,0,1.0\n-2,2,1.0\n")
    with pytest.raises(ValueError):
        load_measure_csv(p)
