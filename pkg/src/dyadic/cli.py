"""Command line interface: measures, symbols, operators, sparse families, weights, norms and experiments."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, experiments, func, measure, normest, ops, sparse, weights
from .func import TreeFunction
from .grid import Window


class ConfigError(ValueError):
    """The configuration file or flags are invalid."""


class AssertionFailed(RuntimeError):
    """At least one registered check of an experiment failed."""


KEYS = {"window-J": int, "depth": int, "measure": str, "symbol": str, "p": str, "weight": str,
        "seed": int, "out": str, "trials": int, "op": str}


def read_config(path) -> dict:
    """Flat key=value file; blank lines and lines starting with # are ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{n}: bad value for {key}: {value!r}") from exc
    return out


def _p_list(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(float(x) for x in value)
    return tuple(float(x) for x in str(value).split(",") if x.strip())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _dump(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


# shared flags ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags given on the command line win")
    p.add_argument("--window-J", dest="window_J", type=int, help="window [0, 2^J)")
    p.add_argument("--depth", type=int, help="tree depth below the window top")
    p.add_argument("--measure", help="lebesgue | lsmp | twist | perturbed | file:PATH")
    p.add_argument("--symbol", help="alpha | fp:P | q | file:PATH")
    p.add_argument("--p", help="exponent or comma separated exponents")
    p.add_argument("--weight", help="one | expb:S | file:PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--trials", type=int)


def _settings(args, defaults: dict) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    s = dict(defaults)
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            s[k.replace("-", "_").replace("window_J", "J")] = v
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "func"):
            s["J" if k == "window_J" else k] = v
    return s


def _measure_of(s: dict) -> measure.MeasureTree:
    name = s.get("measure", "lebesgue")
    if name.startswith("file:"):
        return measure.load_measure_csv(name[5:])
    try:
        return experiments.make_measure(name, s.get("J", 0), s.get("depth", 8), s.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _symbol_of(s: dict, mu) -> TreeFunction | None:
    spec = s.get("symbol")
    return None if spec is None else func.parse_symbol(spec, mu)


# subcommands ----------------------------------------------------------------------------

def cmd_measure(args) -> int:
    s = _settings(args, {"measure": "lebesgue", "J": 0, "depth": 8})
    mu = _measure_of(s)
    if s.get("out"):
        measure.save_measure_csv(mu, s["out"])
    _dump({"measure": mu.kind, "window": [mu.window.top, mu.window.depth], "leaves": mu.tree.n_leaves,
           "total": mu.total, "balance": asdict(measure.balance_report(mu))})
    return 0


def cmd_symbol_report(args) -> int:
    s = _settings(args, {"measure": "lsmp", "J": 0, "depth": 10, "symbol": "alpha", "p": "1.5,2,3"})
    mu = _measure_of(s)
    b = _symbol_of(s, mu)
    rep = func.symbol_report(b, mu, _p_list(s["p"]))
    d = asdict(rep)
    d.pop("beta")
    _dump(d)
    return 0


def _operator(s: dict, mu) -> ops.Operator:
    name = s.get("op", "hilbert")
    b = _symbol_of(s, mu)
    if name == "maximal":
        return ops.Maximal()
    if name.endswith("#"):
        return ops.Truncation(ops.parse_operator(name[:-1], b))
    return ops.parse_operator(name, b)


def _input(s: dict, mu) -> TreeFunction:
    spec = s.get("input", "random")
    if spec.startswith("file:"):
        return func.load_function_csv(spec[5:], mu.tree)
    rng = np.random.default_rng(s.get("seed", 0))
    if spec == "random":
        return TreeFunction(mu.tree, rng.standard_normal(mu.tree.n_leaves))
    if spec == "positive":
        return TreeFunction(mu.tree, experiments.positive_trial(rng, mu.tree.n_leaves))
    raise ConfigError(f"unknown input {spec!r}")


def cmd_apply(args) -> int:
    s = _settings(args, {"measure": "lebesgue", "J": 0, "depth": 8, "op": "hilbert"})
    mu = _measure_of(s)
    op = _operator(s, mu)
    f = _input(s, mu)
    g = op.apply(f, mu)
    if s.get("out"):
        out = Path(s["out"])
        if out.is_dir() or s["out"].endswith(("/", "\\")):
            # a directory gets apply.csv inside it
            out.mkdir(parents=True, exist_ok=True)
            out = out / "apply.csv"
        func.save_function_csv(g, out)
    _dump({"op": op.name, "leaves": mu.tree.n_leaves, "l2_in": func.lp_norm(f, mu, 2),
           "l2_out": func.lp_norm(g, mu, 2), "sup_out": float(np.max(np.abs(g.values)))})
    return 0


def cmd_sparse(args) -> int:
    s = _settings(args, {"measure": "lsmp", "J": 0, "depth": 10, "symbol": "alpha", "op": "pi"})
    mu = _measure_of(s)
    op = _operator(s, mu)
    f = _input({**s, "input": s.get("input", "positive")}, mu)
    fam = sparse.build_sparse(op, f, mu)
    if s.get("out"):
        sparse.save_sparse_csv(fam, s["out"])
    rep = sparse.verify_sparsity(fam, mu)
    form = sparse.sparse_op_H(fam, f, mu) if op.name == "hilbert" else sparse.sparse_op(fam, f, mu)
    _dump({"op": op.name, "cubes": len(fam), "generations": fam.n_generations, "c1": fam.c1,
           "eta": rep.eta, "carlesonPacking": rep.carlesonPacking, "carlesonExact": rep.carlesonExact,
           "domC": sparse.check_domination(op(f, mu), form)})
    return 0


def cmd_weights(args) -> int:
    s = _settings(args, {"measure": "lebesgue", "J": 0, "depth": 6, "weight": "expb:0.5", "p": "2"})
    mu = _measure_of(s)
    w = weights.parse_weight(s["weight"], mu)
    out = {}
    for p in _p_list(s["p"]):
        r = weights.weight_report(w, mu, p)
        out[str(p)] = {"apDyadic": r.apDyadic.value, "apHat": r.apHat.value, "apB": r.apB.value,
                       "apSib": r.apSib.value, "apN": {str(k): v.value for k, v in r.apN.items()}}
    _dump(out)
    return 0


def cmd_norm(args) -> int:
    s = _settings(args, {"measure": "lebesgue", "J": 0, "depth": 6, "op": "hilbert", "p": "2"})
    mu = _measure_of(s)
    op = _operator(s, mu)
    out = {"op": op.name}
    try:
        if op.linear:
            out["l2"] = normest.l2_norm(op, mu).estimate
            for p in _p_list(s["p"]):
                if p != 2:
                    out[f"lp_{p}"] = normest.lp_ascent(op, mu, p, seed=s.get("seed", 0)).lowerBound
        out["weak11"] = normest.weak11_estimate(op, mu, seed=s.get("seed", 0)).estimate
    except normest.DimensionTooLarge as exc:
        raise ConfigError(str(exc)) from exc
    _dump(out)
    return 0


def run(cfg: experiments.ExperimentConfig) -> experiments.ExperimentResult:
    """Run one experiment and write its CSV tables and JSON summary into cfg.out."""
    entry = experiments.get(cfg.experiment)
    result = entry["fn"](cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, (header, rows) in result.tables.items():
        write_table(out / f"{stem}.csv", header, rows)
    key = cfg.experiment.upper()
    # index and parameter columns are known exactly
    for header, rows in result.tables.values():
        for j, col in enumerate(header):
            if col not in result.provenance and rows and all(
                    isinstance(r[j], (int, float, np.integer, np.floating)) for r in rows):
                result.provenance[col] = "exact"
    summary = {"experiment": key, "about": entry["cites"], "seed": cfg.seed,
               "config": {k: v for k, v in asdict(cfg).items() if k != "experiment"},
               "passed": result.passed,
               "checks": [asdict(c) for c in result.checks],
               "provenance": result.provenance, "summary": result.summary}
    (out / f"{key}_summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return result


def cmd_run(args) -> int:
    s = _settings(args, {"seed": 0, "out": "out", "p": "1.5,2,3"})
    cfg = experiments.ExperimentConfig(
        experiment=args.experiment, J=s.get("J"), D=s.get("depth"), measure=s.get("measure"),
        symbol=s.get("symbol"), p=_p_list(s["p"]), weight=s.get("weight", "one"),
        seed=s["seed"], out=s["out"], trials=s.get("trials"))
    result = run(cfg)
    for c in result.checks:
        print(f"[{'pass' if c.passed else 'FAIL'}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
    if not result.passed:
        failed = [c.name for c in result.checks if not c.passed]
        print(f"{cfg.experiment.upper()}: {len(failed)} check(s) failed: " + "; ".join(failed), file=sys.stderr)
        return 1
    return 0


def cmd_describe(args) -> int:
    print(experiments.describe(args.experiment))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadic", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, helptext, extra=()):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        for flag, kw in extra:
            p.add_argument(flag, **kw)
        p.set_defaults(func=fn)
        return p

    op_flag = ("--op", dict(help="pi | pistar | delta | lambda | lambda0 | hilbert | commutator | "
                                 "shift11 | identity | maximal; append # for the maximal truncation"))
    in_flag = ("--input", dict(help="random | positive | file:PATH"))
    add("measure", cmd_measure, "build a measure and print its balance diagnostics")
    add("symbol-report", cmd_symbol_report, "BMO-type norms of a symbol")
    add("apply", cmd_apply, "apply an operator to a function", [op_flag, in_flag])
    add("sparse", cmd_sparse, "build a sparse family for one function", [op_flag, in_flag])
    add("weights", cmd_weights, "weight characteristics")
    add("norm", cmd_norm, "operator norm estimates", [op_flag])
    p = add("run", cmd_run, "run a registered experiment")
    p.add_argument("experiment", help="E1 ... E8")
    p = sub.add_parser("describe", help="describe a registered experiment")
    p.add_argument("experiment")
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except experiments.UnknownExperiment as exc:
        print(f"unknown experiment {exc.args[0]!r}; registered: {', '.join(experiments.REGISTRY)}",
              file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
