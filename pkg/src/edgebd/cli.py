"""Command-line experiments: generate data, run samplers, exact oracle, error tables.

    edgebd generate --nodes fig1 --card 4 --rows 50 --seed 7 --out data/
    edgebd run bd --data data/data.csv --jumps 100000 --seed 1 --out runs/bd
    edgebd run mh --data data/data.csv --steps 2000000 --seed 1 --out runs/mh
    edgebd exact --data data/data.csv --stationarity --out exact/
    edgebd compare --exact exact/exact_marginals.csv --estimate runs/bd/edge_probs.csv --out cmp/

Every option may also come from a JSON file given with ``--config``;
explicit flags take precedence.  Output files are written to temporary
names and renamed only once the whole command has succeeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bd_sampler, mh_sampler
from .data import Dataset, fig1_dag, generate, load_csv, random_cpts, random_dag, write_csv
from .estimators import (best_graph, edge_probabilities, error_table, pool_estimates,
                         read_matrix_csv, running_best, score_series, write_matrix_csv)
from .exact import (MAX_ENUM_NODES, MAX_GENERATOR_NODES, exact_edge_marginals, exact_posterior,
                    generator_stationarity_check)
from .graph import Dag
from .score import ScoreModel, parse_prior

GENERATOR = "numpy.random.PCG64"

DEFAULTS = {
    "seed": 0,
    "alpha": 1.0,
    "prior": "uniform",
    "max_parents": None,
    "burn_in": 0.1,
    "holding": "expected",
    "chains": 1,
    "jumps": 100_000,
    "steps": 2_000_000,
    "reversal": False,
    "nodes": "fig1",
    "card": 4,
    "rows": 50,
    "concentration": 1.0,
    "top_k": 10,
    "stationarity": False,
    "init": None,
    "out": ".",
}


class CliError(Exception):
    pass


class _Outputs:
    """Collect files written under temporary names; publish them all or none."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self._pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        final = self.out_dir / name
        tmp = final.with_name(f".{final.name}.tmp{os.getpid()}")
        self._pending.append((tmp, final))
        return tmp

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for tmp, final in self._pending:
                final.parent.mkdir(parents=True, exist_ok=True)
                os.replace(tmp, final)
        else:
            for tmp, _ in self._pending:
                tmp.unlink(missing_ok=True)
        return False


def _config_comment(cfg: dict) -> str:
    return "config=" + json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config file {args.config}: {e}") from e
    for key, value in vars(args).items():
        if key in ("config", "func") or value is None:
            continue
        cfg[key] = value
    if not 0 <= int(cfg["seed"]) < 2**64:
        raise CliError("--seed must be a 64-bit unsigned integer")
    return cfg


def _prepare_out(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"cannot create output directory {out}: {e}") from e
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    return out


def _load_data(cfg) -> Dataset:
    path = cfg.get("data")
    if not path:
        raise CliError("--data is required")
    if not Path(path).is_file():
        raise CliError(f"dataset {path} does not exist")
    try:
        return load_csv(path)
    except ValueError as e:
        raise CliError(str(e)) from e


def _model(cfg, ds: Dataset) -> ScoreModel:
    kind, beta = parse_prior(cfg["prior"])
    return ScoreModel(ds, alpha=float(cfg["alpha"]), prior=kind, beta=beta,
                      max_parents=cfg["max_parents"])


def _initial_graph(cfg, n: int) -> Dag:
    if not cfg.get("init"):
        return Dag(n)
    path = Path(cfg["init"])
    if not path.is_file():
        raise CliError(f"initial graph file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        if text.lstrip().startswith("{"):
            g = Dag.from_json(text)
        else:
            g = Dag.from_edge_list_text(n, text)
    except (ValueError, IndexError, KeyError) as e:
        raise CliError(f"bad initial graph {path}: {e}") from e
    if g.n_nodes != n:
        raise CliError(f"initial graph has {g.n_nodes} nodes, data has {n} variables")
    return g


# generate

def _generator_dag(spec: str, rng) -> Dag:
    if spec == "fig1":
        return fig1_dag()
    if spec.startswith("random:"):
        try:
            _, n, e = spec.split(":")
            return random_dag(int(n), int(e), rng, max_parents=4)
        except ValueError as err:
            raise CliError(f"bad --nodes {spec!r}; use random:N_NODES:N_EDGES") from err
    path = Path(spec)
    if path.is_file():
        return Dag.from_json(path.read_text(encoding="utf-8"))
    raise CliError(f"--nodes must be 'fig1', 'random:N:E' or a DAG JSON file, not {spec!r}")


GENERATE_KEYS = ("nodes", "card", "rows", "concentration", "seed")


def cmd_generate(cfg) -> int:
    out = _prepare_out(cfg)
    cfg = {k: cfg[k] for k in GENERATE_KEYS}
    rng = np.random.default_rng(int(cfg["seed"]))
    dag = _generator_dag(str(cfg["nodes"]), rng)
    if int(cfg["rows"]) < 0:
        raise CliError("--rows must be >= 0")
    net = random_cpts(dag, int(cfg["card"]), float(cfg["concentration"]), rng)
    ds = generate(net, int(cfg["rows"]), rng)
    with _Outputs(out) as o:
        write_csv(ds, o.path("data.csv"), _config_comment(cfg))
        _write_json(o.path("network.json"), {"config": cfg, **net.to_json()})
    print(f"wrote {ds.n_rows} rows x {ds.n_vars} variables to {out / 'data.csv'}")
    return 0


# run

def _chain_rngs(seed: int, k: int):
    if k == 1:
        return [np.random.default_rng(seed)]
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def cmd_run(cfg) -> int:
    sampler = cfg["sampler"]
    ds = _load_data(cfg)
    if ds.n_vars < 2:
        raise CliError("structure sampling needs at least two variables")
    out = _prepare_out(cfg)
    m0 = _model(cfg, ds)
    g0 = _initial_graph(cfg, ds.n_vars)
    k = int(cfg["chains"])
    if k < 1:
        raise CliError("--chains must be >= 1")
    n = int(cfg["jumps"] if sampler == "bd" else cfg["steps"])
    if n < 1:
        raise CliError("--jumps/--steps must be >= 1")
    if cfg["holding"] not in bd_sampler.HOLDING_MODES:
        raise CliError(f"--holding must be one of {bd_sampler.HOLDING_MODES}")
    run_cfg = {key: cfg[key] for key in ("sampler", "data", "seed", "alpha", "prior", "max_parents",
                                         "burn_in", "chains", "init")}
    run_cfg["jumps" if sampler == "bd" else "steps"] = n
    if sampler == "bd":
        run_cfg["holding"] = cfg["holding"]
    else:
        run_cfg["reversal"] = bool(cfg["reversal"])

    def one_chain(c, rng):
        m = _model(cfg, ds)   # each chain owns its score cache
        meta = {"seed": int(cfg["seed"]), "generator": GENERATOR, "chain": c, "config": run_cfg}
        if sampler == "bd":
            return bd_sampler.run(g0, m, n, rng, cfg["holding"], meta=meta)
        return mh_sampler.mh_run(g0, m, n, rng, reversal=bool(cfg["reversal"]), meta=meta)

    rngs = _chain_rngs(int(cfg["seed"]), k)
    if k == 1:
        traces = [one_chain(0, rngs[0])]
    else:
        with ThreadPoolExecutor(max_workers=k) as pool:
            traces = list(pool.map(one_chain, range(k), rngs))

    names = list(ds.names)
    comment = _config_comment(run_cfg)
    estimates = []
    with _Outputs(out) as o:
        for c, tr in enumerate(traces):
            prefix = f"chain{c}_" if k > 1 else ""
            tr.meta["seed"] = int(cfg["seed"])
            tr.to_csv(o.path(prefix + "trace.csv"))
            est = edge_probabilities(tr, float(cfg["burn_in"]))
            estimates.append(est)
            write_matrix_csv(o.path(prefix + "edge_probs.csv"), est.probs, names, comment)
            _write_series(o.path(prefix + "score_series.csv"), tr, comment)
            g, score = best_graph(tr)
            _write_json(o.path(prefix + "best_graph.json"),
                        {"config": run_cfg, "chain": c, "log_score": score,
                         "aic": m0.aic(g) if ds.n_rows else None, **g.to_json()})
        if k > 1:
            pooled = pool_estimates(estimates)
            write_matrix_csv(o.path("edge_probs.csv"), pooled.probs, names, comment)
    print(f"{sampler}: {k} chain(s) x {n} {'jumps' if sampler == 'bd' else 'steps'} -> {out}")
    return 0


def _write_series(path, tr, comment) -> None:
    series = score_series(tr)
    best = running_best(series[:, 2])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {comment}\n")
        fh.write("step,cum_time,log_score,aic,best_aic\n")
        fh.writelines(f"{t + 1},{c!r},{s!r},{a!r},{b!r}\n"
                      for t, ((c, s, a), b) in enumerate(zip(series.tolist(), best.tolist())))


# exact

def cmd_exact(cfg) -> int:
    ds = _load_data(cfg)
    if ds.n_vars > MAX_ENUM_NODES:
        raise CliError(f"exact enumeration is limited to {MAX_ENUM_NODES} variables; "
                       f"the dataset has {ds.n_vars}")
    if cfg["stationarity"] and ds.n_vars > MAX_GENERATOR_NODES:
        raise CliError(f"the stationarity check is limited to {MAX_GENERATOR_NODES} variables")
    out = _prepare_out(cfg)
    m = _model(cfg, ds)
    p = exact_posterior(m)
    marg = exact_edge_marginals(p)
    ex_cfg = {key: cfg[key] for key in ("data", "alpha", "prior", "max_parents", "top_k")}
    summary = {
        "config": ex_cfg,
        "n_dags": len(p.dags),
        "log_Z": p.log_Z,
        "top": [{"log_prob": lp, **g.to_json()} for g, lp in p.top(int(cfg["top_k"]))],
    }
    if cfg["stationarity"]:
        summary["stationarity_residual"] = generator_stationarity_check(p, m)
    with _Outputs(out) as o:
        write_matrix_csv(o.path("exact_marginals.csv"), marg, list(ds.names), _config_comment(ex_cfg))
        _write_json(o.path("top_graphs.json"), summary)
    print(f"exact posterior over {len(p.dags)} DAGs -> {out}")
    if cfg["stationarity"]:
        print(f"generator stationarity residual: {summary['stationarity_residual']:.3e}")
    return 0


# compare

def cmd_compare(cfg) -> int:
    for key in ("exact", "estimate"):
        if not cfg.get(key) or not Path(cfg[key]).is_file():
            raise CliError(f"--{key} must name an existing matrix CSV")
    out = _prepare_out(cfg)
    try:
        exact, names = read_matrix_csv(cfg["exact"])
        est, est_names = read_matrix_csv(cfg["estimate"])
        err = error_table(est, exact)
    except ValueError as e:
        raise CliError(str(e)) from e
    if est_names != names:
        raise CliError("estimate and exact matrices label their nodes differently")
    cmp_cfg = {"exact": cfg["exact"], "estimate": cfg["estimate"]}
    with _Outputs(out) as o:
        write_matrix_csv(o.path("error_table.csv"), err, names, _config_comment(cmp_cfg))
    print(format_error_table(err, names))
    return 0


def format_error_table(err, names) -> str:
    """Plain-text table of error magnitudes, two decimals, ``--`` on the diagonal."""
    width = max(4, *(len(n) for n in names))
    lines = ["Node".ljust(width) + " " + " ".join(n.rjust(width) for n in names)]
    for name, row in zip(names, err):
        cells = ["--".rjust(width) if np.isnan(v) else f"{v:.2f}".lstrip("0").rjust(width) for v in row]
        lines.append(name.ljust(width) + " " + " ".join(cells))
    return "\n".join(lines)


def _add_model_flags(p):
    p.add_argument("--data", help="dataset CSV (header row required)")
    p.add_argument("--alpha", type=float, help="Dirichlet pseudo-count per cell (default 1.0)")
    p.add_argument("--prior", help="'uniform' or 'edge:BETA' (default uniform)")
    p.add_argument("--max-parents", dest="max_parents", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgebd", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of option values (flags win)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--seed", type=int, help="64-bit seed (default 0)")

    g = sub.add_parser("generate", help="sample a synthetic dataset from a random network")
    common(g)
    g.add_argument("--nodes", help="'fig1', 'random:N:E' or a DAG JSON file")
    g.add_argument("--card", type=int, help="states per variable (default 4)")
    g.add_argument("--rows", type=int, help="number of observations (default 50)")
    g.add_argument("--concentration", type=float, help="Dirichlet concentration of CPT rows")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run the birth-death (bd) or Metropolis-Hastings (mh) sampler")
    r.add_argument("sampler", choices=["bd", "mh"])
    common(r)
    _add_model_flags(r)
    r.add_argument("--jumps", type=int, help="birth-death jumps (default 100000)")
    r.add_argument("--steps", type=int, help="MH steps (default 2000000)")
    r.add_argument("--burn-in", dest="burn_in", type=float, help="discarded fraction (default 0.1)")
    r.add_argument("--holding", choices=bd_sampler.HOLDING_MODES, help="holding-time weights")
    r.add_argument("--chains", type=int, help="independent chains run concurrently")
    r.add_argument("--init", help="initial DAG as JSON or an 'i j' edge list")
    r.add_argument("--reversal", action="store_true", default=None, help="MH: allow edge reversals")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("exact", help="exact posterior by enumeration (<= 5 variables)")
    common(e)
    _add_model_flags(e)
    e.add_argument("--top-k", dest="top_k", type=int, help="number of top graphs to report")
    e.add_argument("--stationarity", action="store_true", default=None,
                   help="also check the birth-death generator against the posterior")
    e.set_defaults(func=cmd_exact)

    c = sub.add_parser("compare", help="error table between estimated and exact edge marginals")
    common(c)
    c.add_argument("--exact", help="exact marginals CSV")
    c.add_argument("--estimate", help="estimated marginals CSV")
    c.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = args.func
    try:
        cfg = _resolve(args)
        cfg.pop("command", None)
        return func(cfg)
    except (CliError, ValueError, OSError) as e:
        print(f"edgebd: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
