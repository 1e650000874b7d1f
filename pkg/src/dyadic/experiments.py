"""The registered reproduction experiments E1 to E8.

Each experiment returns an ExperimentResult holding CSV tables, named
checks and a JSON-ready summary. Randomness comes from per-trial seeds
derived from the configured seed, so equal configs give equal files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from . import func, measure, normest, ops, sparse, weights
from .func import TreeFunction
from .grid import Window


class UnknownExperiment(KeyError):
    """The experiment id is not registered."""


@dataclass
class ExperimentConfig:
    experiment: str
    J: int | None = None
    D: int | None = None
    measure: str | None = None
    symbol: str | None = None
    p: tuple = (1.5, 2.0, 3.0)
    weight: str = "one"
    seed: int = 0
    out: str = "out"
    trials: int | None = None


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ExperimentResult:
    tables: dict = field(default_factory=dict)        # file stem -> (header, rows)
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)     # column -> exact | derived | monte-carlo

    def check(self, name: str, passed, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def trial_rngs(seed: int, n: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _pick(value, default):
    return default if value is None else value


def make_measure(name: str, J: int, D: int, seed: int = 0) -> measure.MeasureTree:
    """Build a named measure, switching to the compact tree for deep windows."""
    w = Window(J, D)
    if name == "perturbed":
        return measure.build_perturbed_lebesgue(w, seed=seed)
    return measure.build_named(name, w, compact=D > 16)


TRIAL_DENSITY = 0.1


def positive_trial(rng, n: int) -> np.ndarray:
    """Indicator of a random set of leaves with density TRIAL_DENSITY.

    Sparse 0/1 data produces genuine stopping cubes, and the worst patterns
    on the few heavy leaves recur often enough for the maximum to settle.
    """
    v = (rng.random(n) < TRIAL_DENSITY).astype(np.float64)
    if not v.any():
        v[rng.integers(n)] = 1.0
    return v


# E1 -----------------------------------------------------------------------------------

def lsmp_carleson_closed(k0, K=None) -> float:
    """k0 sum_{k0 <= k <= K} k^-2; K = None means the infinite sum k0 psi_1(k0)."""
    if K is None:
        return float(k0 * polygamma(1, k0))
    k = np.arange(k0, K + 1, dtype=np.float64)
    return float(k0 * np.sum(1.0 / k ** 2))


def lacey_closed(K: int) -> float:
    """H_K / 2."""
    return float(np.sum(1.0 / np.arange(1, K + 1)) / 2)


def e1(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    Ks = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]
    rows = []
    for K in Ks:
        sup = max(lsmp_carleson_closed(k0, K) for k0 in range(1, K + 1))
        rows.append((K, sup, lacey_closed(K)))
    res.tables["E1"] = (["K", "carleson_sup", "lacey_partial"], rows)
    res.provenance = {"carleson_sup": "exact", "lacey_partial": "exact"}
    res.check("carleson_sup <= 2", all(r[1] <= 2 for r in rows))
    res.check("carleson at k0=1 equals pi^2/6", abs(lsmp_carleson_closed(1) - math.pi ** 2 / 6) <= 1e-9)
    res.check("lacey_partial >= 0.5 ln K", all(r[2] >= 0.5 * math.log(r[0]) for r in rows))
    res.check("lacey_partial > 3.4 at K=1000", rows[-1][2] > 3.4)

    # cross-check against a resolved tree
    D = min(_pick(cfg.D, 20), 20)
    mu = make_measure("lsmp", 0, D)
    b = func.symbol_alpha(mu)
    t = mu.tree
    pack = func.carleson_packing(b, mu)
    _, linf = func.difference_energy(b, mu)
    r = D
    err_pack = max(abs(pack[t.index(measure.interval_I(t.window, k0))] - lsmp_carleson_closed(k0, r - 1))
                   for k0 in range(1, r))
    err_delta = max(abs(linf[t.index(measure.interval_I(t.window, k))] - 1.0) for k in range(1, r))
    err_lacey = abs(func.lacey_packing(b, mu)[0] - lacey_closed(r - 1))
    res.check("tree packing matches closed form", err_pack <= 1e-9, f"{err_pack:.3g}")
    res.check("||Delta_Ik b||_inf = 1", err_delta <= 1e-9, f"{err_delta:.3g}")
    res.check("tree Lacey sum matches H_K/2", err_lacey <= 1e-9, f"{err_lacey:.3g}")
    res.summary = {"tree_depth": D, "carleson_k0_1": lsmp_carleson_closed(1),
                   "lacey_1000": rows[-1][2], "tree_packing_error": err_pack}
    return res


# E2 -----------------------------------------------------------------------------------

def e2(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = _pick(cfg.D, 40)
    mu = make_measure("twist", 0, D)
    t = mu.tree
    rep = measure.balance_report(mu)
    rows = []
    for k in range(2, D + 1):
        closed = measure.twist_m_Ik(k) / measure.twist_m_Ik(k - 1)
        i = int(t.find(k, 0))
        tree_val = mu.m[i] / mu.m[t.parent[i]] if i >= 0 and not t.is_leaf[i] else float("nan")
        rows.append((k, closed, tree_val))
    res.tables["E2"] = (["k", "m_ratio", "m_ratio_tree"], rows)
    kj = []
    for k in range(1, D):
        for j in range(1, D - k + 1):
            kj.append((k, j, measure.twist_m_Ikj(k, j) / measure.twist_m_Ikjb(k, j)))
    res.tables["E2_kj"] = (["k", "j", "m_kj_ratio"], kj)
    res.provenance = {"m_ratio": "exact", "m_ratio_tree": "exact", "m_kj_ratio": "exact"}
    res.check("total mass of [0,1) is 1", abs(mu.total - 1) <= 1e-12, f"{mu.total!r}")
    res.check("sibling ratios within [1/10, 10]", rep.siblingConst <= 10, f"{rep.siblingConst:.4g}")
    far = [r[2] for r in kj if r[0] >= 20 and r[1] >= 20]
    res.check("m(I_kj)/m(I_kj^b) within 0.5 of 4 for k, j >= 20",
              all(abs(x - 4) <= 0.5 for x in far), f"{len(far)} pairs")
    tail = [r[1] for r in rows if r[0] >= 5]
    res.check("m(I_k)/m(parent) decreasing for k >= 5", all(np.diff(tail) < 0))
    tree_err = max((abs(r[1] - r[2]) for r in rows if np.isfinite(r[2])), default=0.0)
    res.check("tree ratios match closed form", tree_err <= 1e-9, f"{tree_err:.3g}")
    res.summary = {"depth": D, "balance": rep.__dict__, "m_ratio_at_D": rows[-1][1],
                   "inverse_m_ratio_at_D": 1.0 / rows[-1][1]}
    return res


# E3 -----------------------------------------------------------------------------------

def _random_haar_span(mu, rng) -> np.ndarray:
    """Random element of the span of h_Q over nodes paired by the Hilbert transform."""
    t = mu.tree
    coeffs = np.zeros(t.n_nodes)
    ids = ops.Hilbert.paired(t)
    coeffs[ids] = rng.standard_normal(ids.size)
    return func.synthesize(coeffs, mu)


def e3(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = min(_pick(cfg.D, 8), 10)
    n = _pick(cfg.trials, 200)
    names = ["lebesgue", "lsmp", "twist"]
    rows = []
    worst = dict(first=0.0, second=0.0, hsq=0.0, adj_pi=0.0, adj_h=0.0, c_gap=0.0)
    H = ops.Hilbert()
    for trial, rng in enumerate(trial_rngs(cfg.seed, n)):
        name = names[trial % 3]
        J = int(rng.integers(0, 2))
        mu = make_measure(name, J, int(rng.integers(max(3, J + 1), D + 1)))
        t = mu.tree
        b = TreeFunction(t, rng.standard_normal(t.n_leaves))
        f = TreeFunction(t, rng.standard_normal(t.n_leaves))
        g = TreeFunction(t, rng.standard_normal(t.n_leaves))
        dec = ops.decompose_product(b, f, mu)
        span = _random_haar_span(mu, rng)
        hsq = float(np.max(np.abs(H.apply_values(H.apply_values(span, mu), mu) + span), initial=0.0))
        adj_pi = abs(func.inner(ops.Paraproduct("pi", b)(f, mu), g, mu)
                     - func.inner(f, ops.Paraproduct("pistar", b)(g, mu), mu))
        adj_h = abs(func.inner(H(f, mu), g, mu) + func.inner(f, H(g, mu), mu))
        c_int, c_rew = func.c_coefficients(b, mu)
        ids = t.internal
        gap = float(np.max(np.abs(c_int[ids] - c_rew[ids]))) if ids.size else 0.0
        vals = dict(first=dec.residual_first, second=dec.residual_second, hsq=hsq,
                    adj_pi=adj_pi, adj_h=adj_h, c_gap=gap)
        for k, v in vals.items():
            worst[k] = max(worst[k], v)
        rows.append((trial, name, t.window.depth, dec.residual_first, dec.residual_second, hsq,
                     adj_pi, adj_h, gap))
    res.tables["E3"] = (["trial", "measure", "depth", "res_first", "res_second", "hilbert_sq",
                         "adj_pi", "adj_hilbert", "c_gap"], rows)
    res.provenance = {k: "monte-carlo" for k in res.tables["E3"][0][3:]}
    res.check("b f = coarse + pi + pistar + lambda", worst["first"] <= 1e-10, f"{worst['first']:.3g}")
    res.check("b f = coarse + pi + delta + lambda0", worst["second"] <= 1e-10, f"{worst['second']:.3g}")
    res.check("H^2 = -Id on the paired Haar span", worst["hsq"] <= 1e-12, f"{worst['hsq']:.3g}")
    res.check("<pi f, g> = <f, pistar g>", worst["adj_pi"] <= 1e-10, f"{worst['adj_pi']:.3g}")
    res.check("<H f, g> = -<f, H g>", worst["adj_h"] <= 1e-10, f"{worst['adj_h']:.3g}")
    res.check("two c_Q formulas agree", worst["c_gap"] <= 1e-10, f"{worst['c_gap']:.3g}")
    res.summary = {"trials": n, "worst": worst}
    return res


# E4 -----------------------------------------------------------------------------------

def e4(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = _pick(cfg.D, 10)
    mu = make_measure("lsmp", 0, D)
    b = func.symbol_alpha(mu)
    bmo = func.BMO_norm(b, mu)
    n = _pick(cfg.trials, 20)
    q = 1.5
    rows = []
    excess = 0.0
    ratios = {"delta": 0.0, "pistar": 0.0}
    for trial, rng in enumerate(trial_rngs(cfg.seed, n)):
        f = TreeFunction(mu.tree, rng.standard_normal(mu.tree.n_leaves))
        pi = ops.Paraproduct("pi", b)
        sharp = ops.maximal_truncation(pi, f, mu).values
        cot = func.maximal_fn(pi(f, mu), mu).values
        ex = float(np.max(sharp - cot))
        excess = max(excess, ex)
        row = [trial, ex]
        Mq_S = func.maximal_fn(func.square_fn(f, mu), mu, q).values
        for kind in ("delta", "pistar"):
            T = ops.Paraproduct(kind, b)
            lhs = ops.maximal_truncation(T, f, mu).values - func.maximal_fn(T(f, mu), mu).values
            c = float(np.max(np.maximum(lhs, 0) / (bmo * Mq_S)))
            ratios[kind] = max(ratios[kind], c)
            row.append(c)
        rows.append(tuple(row))
    res.tables["E4"] = (["trial", "pi_cotlar_excess", "delta_cq", "pistar_cq"], rows)
    res.provenance = {"pi_cotlar_excess": "monte-carlo", "delta_cq": "monte-carlo", "pistar_cq": "monte-carlo"}
    res.check("pi# <= M(pi f) at every leaf", excess <= 1e-12 * max(1.0, bmo), f"{excess:.3g}")
    res.check("Cotlar constants finite", all(np.isfinite(v) for v in ratios.values()))
    weak = normest.weak11_estimate(ops.Truncation(ops.Paraproduct("pi", b)), mu, seed=cfg.seed)
    res.check("weak (1,1) ratio of pi# finite", np.isfinite(weak.estimate))
    res.summary = {"bmo": bmo, "q": q, "cotlar_constants": ratios, "pi_sharp_weak11": weak.estimate,
                   "pi_sharp_weak11_over_bmo": weak.estimate / bmo}
    return res


# E5 -----------------------------------------------------------------------------------

def sparse_trials(op, mu, form, seed: int, n: int, scale: float = 1.0):
    """Rows (trial, eta, domC) for n seeded non-negative functions."""
    rows = []
    for trial, rng in enumerate(trial_rngs(seed, n)):
        f = TreeFunction(mu.tree, positive_trial(rng, mu.tree.n_leaves))
        fam = sparse.build_sparse(op, f, mu)
        eta = sparse.verify_sparsity(fam, mu).eta
        dom = sparse.check_domination(op(f, mu), scale * form(fam, f, mu))
        rows.append((trial, eta, dom))
    return rows


def e5(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = _pick(cfg.D, 12)
    mu = make_measure("lsmp", _pick(cfg.J, 0), D)
    b = func.symbol_alpha(mu)
    bmo = func.BMO_norm(b, mu)
    n = _pick(cfg.trials, 100)
    maxima = {}
    for kind in ("pi", "pistar", "delta"):
        rows = sparse_trials(ops.Paraproduct(kind, b), mu, sparse.sparse_op, cfg.seed, n, bmo)
        res.tables[f"E5_{kind}"] = (["trial", "eta", "domC"], rows)
        etas = [r[1] for r in rows]
        doms = [r[2] for r in rows]
        maxima[kind] = max(doms)
        res.check(f"{kind}: eta >= 1/2", min(etas) >= 0.5, f"min {min(etas):.4g}")
        res.check(f"{kind}: domination constant finite", all(np.isfinite(doms)), f"max {max(doms):.4g}")
    res.provenance = {"eta": "derived", "domC": "monte-carlo"}
    res.summary = {"bmo": bmo, "trials": n, "max_domC": maxima}
    return res


# E6 -----------------------------------------------------------------------------------

def e6(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = _pick(cfg.D, 10)
    n = _pick(cfg.trials, 100)
    tw = make_measure("twist", 0, D)
    rows = sparse_trials(ops.Hilbert(), tw, sparse.sparse_op_H, cfg.seed, n)
    res.tables["E6_hilbert"] = (["trial", "eta", "domC"], rows)
    pl = make_measure("perturbed", 0, D, seed=cfg.seed)
    shift = ops.HaarShift(1, 1, "uniform")
    rows_s = sparse_trials(shift, pl, lambda s, f, mu: sparse.sparse_op_N(s, f, mu, 1), cfg.seed, n)
    res.tables["E6_shift"] = (["trial", "eta", "domC"], rows_s)
    l1 = ops.HaarShift(1, 1, "random", seed=cfg.seed, l1_normalized=True)
    lsmp = make_measure("lsmp", 0, D)
    rows_l = sparse_trials(l1, lsmp, sparse.sparse_op, cfg.seed, max(1, n // 4))
    res.tables["E6_shift_l1"] = (["trial", "eta", "domC"], rows_l)
    res.provenance = {"eta": "derived", "domC": "monte-carlo"}
    for name, rr in (("hilbert vs E_S", rows), ("shift(1,1) vs A_S^1", rows_s), ("L1 shift vs A_S", rows_l)):
        res.check(f"{name}: eta >= 1/2", min(r[1] for r in rr) >= 0.5)
        res.check(f"{name}: domination constant finite", all(np.isfinite(r[2]) for r in rr),
                  f"max {max(r[2] for r in rr):.4g}")
    bal = measure.balance_report(pl)
    res.summary = {"trials": n, "max_domC": {"hilbert": max(r[2] for r in rows),
                                             "shift11": max(r[2] for r in rows_s),
                                             "shift11_l1": max(r[2] for r in rows_l)},
                   "perturbed_balancedConst": bal.balancedConst,
                   "twist_siblingConst": measure.balance_report(tw).siblingConst}
    return res


# E7 -----------------------------------------------------------------------------------

def fp_support_index(mu, n: int) -> int:
    t = mu.tree
    return t.index(t.window.node(-(n + 2), ((n - 1) << (n + 2)) + 3))


def e7(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    J = _pick(cfg.J, 5)
    D = _pick(cfg.D, 45)
    r = D - J
    n_max = min(30, 2 ** J, r - 3)
    mu = make_measure("twist", J, D)
    mu5 = make_measure("twist", J, D + 5)
    fp_rows = []
    bmo_rows = []
    beta_err = 0.0
    drift = 0.0
    for p in cfg.p:
        f = func.symbol_fp(mu, p, n_max)
        beta = func.beta_sequence(f, mu)
        for n in range(1, n_max + 1):
            got = beta[fp_support_index(mu, n)]
            want = (n + 2) ** (1 / p)
            beta_err = max(beta_err, abs(got - want))
            fp_rows.append((p, n, got, want))
        s1 = func.bmo_norm(f, mu, p)
        s2 = func.bmo_norm(func.symbol_fp(mu5, p, n_max), mu5, p)
        drift = max(drift, abs(s2 - s1) / s1)
        bmo_rows.append((p, s1, s2))
    res.tables["E7_fp"] = (["p", "n", "beta", "expected"], fp_rows)
    res.tables["E7_fp_bmo"] = (["p", "bmo_D", "bmo_D_plus_5"], bmo_rows)
    res.check("f_p: beta on S_n = (n+2)^(1/p)", beta_err <= 1e-8, f"{beta_err:.3g}")
    res.check("f_p: bmo_p stable under D -> D+5", drift < 0.01, f"{drift:.3g}")

    q = func.symbol_q(mu)
    u, v = func.q_sequences(r)
    avg = func.averages(q, mu)
    beta = func.beta_sequence(q, mu)
    t = mu.tree
    rows = []
    avg_err = gap_err = 0.0
    for k in range(1, r):
        i = t.index(measure.interval_I(t.window, k))
        ib = t.index(measure.interval_Ib(t.window, k))
        gap = abs(avg[i] - avg[ib])
        avg_err = max(avg_err, abs(avg[i] - v[k]))
        if k >= 2:
            gap_err = max(gap_err, abs(gap - math.log(k)))
        rows.append((k, avg[i], v[k], gap, math.log(k), beta[i]))
    res.tables["E7"] = (["k", "avg_Ik", "v_k", "avg_gap", "log_k", "beta_k"], rows)
    betas = np.array([abs(x[5]) for x in rows if np.isfinite(x[5])])
    late = np.array([abs(x[5]) for x in rows if x[0] >= 10 and np.isfinite(x[5])])
    res.check("q: <q>_{I_k} = v_k", avg_err <= 1e-8, f"{avg_err:.3g}")
    res.check("q: avg gap = log k", gap_err <= 1e-8, f"{gap_err:.3g}")
    res.check("q: |beta_k| <= 2", betas.max() <= 2, f"{betas.max():.4g}")
    res.check("q: |beta_k| nonincreasing for k >= 10", np.all(np.diff(late) <= 1e-12))
    res.provenance = {"beta": "exact", "expected": "exact", "bmo_D": "exact", "bmo_D_plus_5": "exact",
                      "avg_Ik": "exact", "v_k": "exact", "avg_gap": "exact", "log_k": "exact",
                      "beta_k": "exact"}
    res.summary = {"J": J, "D": D, "n_max": n_max, "fp_bmo": {str(p): s for p, s, _ in bmo_rows},
                   "q_beta_sup": float(betas.max()), "q_gap_at_last_k": rows[-1][3]}
    return res


# E8 -----------------------------------------------------------------------------------

LADDER = (0.0, 0.25, 0.5, 0.75)


def e8(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    D = _pick(cfg.D, 8)
    n = _pick(cfg.trials, 8)
    rows = []
    lsmp = make_measure("lsmp", 0, D)
    b = func.symbol_alpha(lsmp)
    bmo = func.BMO_norm(b, lsmp)
    tw = make_measure("twist", 0, D)
    qsym = func.symbol_q(tw)
    cases = [("pi_alpha_lsmp", ops.Paraproduct("pi", b), lsmp, "dyadic", bmo),
             ("comm_H_q_twist", ops.Commutator(ops.Hilbert(), qsym), tw, "commutator", 1.0)]
    for label, op, mu, shape, scale in cases:
        for p in cfg.p:
            for s in LADDER:
                w = weights.exp_weight(mu, s)
                row = weights.weighted_ratio_experiment(op, w, mu, p, trials=n, seed=cfg.seed,
                                                        shape=shape, scale=scale, label=label)
                ad = weights.characteristic(w, mu, p, "dyadic").value
                sib = weights.characteristic(w, mu, p, "sib").value
                rows.append((label, p, s, ad, sib, row.empirical, row.shape, row.ratio))
    res.tables["E8"] = (["op", "p", "s", "ap_dyadic", "ap_sib", "empirical", "shape", "ratio"], rows)
    res.provenance = {"ap_dyadic": "exact", "ap_sib": "exact", "empirical": "monte-carlo",
                      "shape": "exact", "ratio": "monte-carlo"}
    res.check("all ratios finite", all(np.isfinite(r[7]) for r in rows))
    res.check("Jensen floor for ladder weights", all(r[3] >= 1 - 1e-12 for r in rows))
    res.summary = {"max_ratio": {lab: max(r[7] for r in rows if r[0] == lab) for lab, *_ in cases}}
    return res


REGISTRY = {
    "E1": dict(fn=e1, cites="BMO versus Lacey packing: a BMO symbol with unbounded L-infinity packing on the LSMP measure",
               knobs="--depth (tree cross-check, capped at 20)",
               asserts="carleson_sup <= 2; carleson(k0=1) = pi^2/6; lacey_partial >= 0.5 ln K; tree agrees",
               runtime="under a second", files=["E1"]),
    "E2": dict(fn=e2, cites="the twisted measure is sibling balanced but not balanced",
               knobs="--depth (resolution below unit scale, default 40)",
               asserts="unit mass; sibling ratios in [1/10, 10]; m(I_kj)/m(I_kj^b) near 4; m(I_k)/m(parent) decreasing",
               runtime="about a second", files=["E2", "E2_kj"]),
    "E3": dict(fn=e3, cites="exact product decompositions, adjoint identities and the c_Q rewriting",
               knobs="--depth (<= 10), --trials (default 200), --seed",
               asserts="all identities to 1e-10 (H^2 = -Id to 1e-12)", runtime="a few seconds", files=["E3"]),
    "E4": dict(fn=e4, cites="maximal truncations of paraproducts: Cotlar inequalities and weak (1,1) behaviour",
               knobs="--depth, --trials, --seed", asserts="pi# <= M(pi f); finite constants",
               runtime="a few seconds", files=["E4"]),
    "E5": dict(fn=e5, cites="sparse domination of the paraproducts pi, pistar and delta",
               knobs="--depth, --window-J, --trials (default 100), --seed",
               asserts="eta >= 1/2 and finite domination constants for pi, pistar, delta",
               runtime="a few seconds", files=["E5_pi", "E5_pistar", "E5_delta"]),
    "E6": dict(fn=e6, cites="modified sparse forms: A_S^N for Haar shifts and E_S for the dyadic Hilbert transform",
               knobs="--depth, --trials, --seed", asserts="eta >= 1/2 and finite domination constants",
               runtime="several seconds", files=["E6_hilbert", "E6_shift", "E6_shift_l1"]),
    "E7": dict(fn=e7, cites="commutator characterization: the symbols f_p and q on the twisted measure",
               knobs="--window-J (default 5), --depth (default 45), --p",
               asserts="beta(f_p) = (n+2)^(1/p); bmo_p stable; <q>_{I_k} = v_k; gap = log k; |beta_k(q)| <= 2",
               runtime="a few seconds", files=["E7", "E7_fp", "E7_fp_bmo"]),
    "E8": dict(fn=e8, cites="weighted bounds for paraproducts and Hilbert commutators against their characteristic shapes",
               knobs="--depth (default 8), --p, --trials, --seed", asserts="finite ratios; Jensen floor",
               runtime="tens of seconds", files=["E8"]),
}


def get(experiment: str) -> dict:
    key = experiment.upper()
    if key not in REGISTRY:
        raise UnknownExperiment(experiment)
    return REGISTRY[key]


def describe(experiment: str) -> str:
    e = get(experiment)
    key = experiment.upper()
    files = ", ".join(f"{f}.csv" for f in e["files"])
    return (f"{key}: {e['cites']}\n"
            f"  knobs:    {e['knobs']}\n"
            f"  asserts:  {e['asserts']}\n"
            f"  outputs:  {files}, {key}_summary.json\n"
            f"  runtime:  {e['runtime']}")
