"""Command-line entry points.

Subcommands: generate (planted instances), fit (one chain on an edge list),
evaluate (link-prediction AUC across traces), similarity (structure
recovery against ground truth), bench (backend comparison), experiment
(manifest runner).

Configuration precedence per option: explicit flag, then --config file
(key=value lines, # comments), then the built-in default. The master seed
additionally falls back to the MNSBM_SEED environment variable before
drawing fresh entropy; the drawn seed is recorded, so every run is
reproducible from its manifest. Rerunning with a fixed seed changes only
the manifest's timing fields.

Exit codes: 0 success, 2 invalid usage or precondition, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as benchmod
from . import kernels
from . import rng as rngmod
from . import synth_gen
from .graph_io import EMPTY_HELDOUT, parse_edge_list, split_holdout, write_graph
from .prediction_eval import auc, predict_link_prob, same_block_vectors, structure_auc
from .superposition import SweepConfig, run_chain
from .trace import read_trace, write_trace
from .version import __version__

_SUPPRESS = argparse.SUPPRESS


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(path):
    """key=value lines; '#' starts a comment; keys use flag names."""
    cfg = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, val = line.split("=", 1)
            cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def resolve_options(args, opts):
    """Merge explicit flags, config file entries, and defaults."""
    config = {}
    if getattr(args, "config", None) is not None:
        config = parse_config(args.config)
        known = {o["dest"] for o in opts}
        unknown = sorted(set(config) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
    out = {}
    for o in opts:
        dest = o["dest"]
        if hasattr(args, dest):
            out[dest] = getattr(args, dest)
        elif dest in config:
            out[dest] = o["type"](config[dest])
        else:
            out[dest] = o["default"]
    return out


def resolve_seed(value):
    """Explicit value, else MNSBM_SEED, else fresh recorded entropy."""
    if value is not None:
        return int(value)
    env = os.environ.get("MNSBM_SEED")
    if env is not None and env != "":
        return int(env)
    return int(np.random.SeedSequence().entropy % (1 << 63))


def _write_manifest(path, command, params, timings):
    doc = {
        "command": command,
        "version": __version__,
        "params": params,
        "timings": timings,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _jsonable(params):
    out = {}
    for k, v in params.items():
        out[k] = str(v) if isinstance(v, Path) else v
    return out


# per-command option registries: dest, flag, type, default

_GENERATE_OPTS = [
    {"dest": "n", "flag": "--n", "type": int, "default": None},
    {"dest": "k", "flag": "--k", "type": int, "default": None},
    {"dest": "shift", "flag": "--shift", "type": int, "default": None},
    {"dest": "lambda_shift", "flag": "--lambda", "type": float, "default": None},
    {"dest": "seed", "flag": "--seed", "type": int, "default": None},
    {"dest": "out_dir", "flag": "--out-dir", "type": Path, "default": None},
]

_FIT_OPTS = [
    {"dest": "subnetworks", "flag": "--subnetworks", "type": int, "default": 1},
    {"dest": "iters", "flag": "--iters", "type": int, "default": 6000},
    {"dest": "burnin", "flag": "--burnin", "type": int, "default": 3000},
    {"dest": "thin", "flag": "--thin", "type": int, "default": 10},
    {"dest": "holdout", "flag": "--holdout", "type": float, "default": 0.05},
    {"dest": "seed", "flag": "--seed", "type": int, "default": None},
    {"dest": "workers", "flag": "--workers", "type": int, "default": 1},
    {"dest": "out_dir", "flag": "--out-dir", "type": Path, "default": None},
    {"dest": "backend", "flag": "--backend", "type": str, "default": None},
    {"dest": "one_based", "flag": "--one-based", "type": _parse_bool,
     "default": False, "bool": True},
    {"dest": "track_all_edges", "flag": "--track-all-edges", "type": _parse_bool,
     "default": False, "bool": True},
]

_EVALUATE_OPTS = [
    {"dest": "out", "flag": "--out", "type": Path, "default": None},
]

_SIMILARITY_OPTS = [
    {"dest": "truth", "flag": "--truth", "type": Path, "default": None},
    {"dest": "window", "flag": "--window", "type": int, "default": 500},
    {"dest": "out", "flag": "--out", "type": Path, "default": None},
]

_BENCH_OPTS = [
    {"dest": "n", "flag": "--n", "type": int, "default": 120},
    {"dest": "k", "flag": "--k", "type": int, "default": 3},
    {"dest": "subnetworks", "flag": "--subnetworks", "type": int, "default": 2},
    {"dest": "iters", "flag": "--iters", "type": int, "default": 40},
    {"dest": "seed", "flag": "--seed", "type": int, "default": 7},
]

_EXPERIMENT_OPTS = [
    {"dest": "manifest", "flag": "--manifest", "type": Path, "default": None},
    {"dest": "out_dir", "flag": "--out-dir", "type": Path, "default": None},
    {"dest": "holdout", "flag": "--holdout", "type": float, "default": 0.0},
    {"dest": "workers", "flag": "--workers", "type": int, "default": 1},
]


def _add_opts(sub, opts):
    sub.add_argument("--config", type=Path, default=None,
                     help="key=value file; explicit flags win")
    for o in opts:
        if o.get("bool"):
            sub.add_argument(o["flag"], dest=o["dest"], action="store_true",
                             default=_SUPPRESS)
        else:
            sub.add_argument(o["flag"], dest=o["dest"], type=o["type"],
                             default=_SUPPRESS)


def _require(opt, name):
    if opt is None:
        raise ValueError(f"missing required option --{name}")
    return opt


def cmd_generate(args):
    t0 = time.perf_counter()
    p = resolve_options(args, _GENERATE_OPTS)
    n = _require(p["n"], "n")
    k = _require(p["k"], "k")
    out_dir = Path(_require(p["out_dir"], "out-dir"))
    if p["shift"] is not None and p["lambda_shift"] is not None:
        raise ValueError("give either --shift or --lambda, not both")
    if p["shift"] is None and p["lambda_shift"] is None:
        raise ValueError("one of --shift or --lambda is required")
    m = p["shift"] if p["shift"] is not None \
        else synth_gen.shift_for_lambda(n, k, p["lambda_shift"])
    seed = resolve_seed(p["seed"])

    pm = synth_gen.planted_params(n, k, m)
    g, gt = synth_gen.generate(pm, rngmod.stream(seed, rngmod.GENERATE))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "edges.txt", "w") as fh:
        write_graph(g, fh)
    synth_gen.write_ground_truth(gt, out_dir)
    params = _jsonable({
        "n": n, "k": k, "m": m, "lambda_shift": pm.lambda_shift,
        "seed": seed, "out_dir": out_dir, "edges": g.edge_count,
    })
    _write_manifest(out_dir / "meta.json", "generate", params,
                    {"total_s": time.perf_counter() - t0})
    print(f"wrote {g.edge_count} edges to {out_dir} "
          f"(m={m}, lambda={pm.lambda_shift:g})")
    return 0


def _mean_L(trace):
    return [float(np.mean([rec.L[s] for rec in trace.records]))
            for s in range(trace.S)]


def cmd_fit(args):
    t0 = time.perf_counter()
    p = resolve_options(args, _FIT_OPTS)
    out_dir = Path(_require(p["out_dir"], "out-dir"))
    seed = resolve_seed(p["seed"])
    if not (0.0 <= p["holdout"] < 1.0):
        raise ValueError("holdout fraction must lie in [0, 1)")

    with open(args.edgelist) as fh:
        g = parse_edge_list(fh, one_based=p["one_based"])
    if p["holdout"] > 0.0:
        g_train, heldout = split_holdout(g, p["holdout"],
                                         rngmod.stream(seed, rngmod.HOLDOUT))
    else:
        g_train, heldout = g, EMPTY_HELDOUT
    kern = kernels.select_backend(p["backend"])
    cfg = SweepConfig(iterations=p["iters"], burn_in=p["burnin"],
                      thinning=p["thin"], master_seed=seed,
                      parallel_workers=p["workers"])
    tracked = g_train.dyads if p["track_all_edges"] else None
    t_setup = time.perf_counter()

    trace = run_chain(g_train, heldout, p["subnetworks"], cfg,
                      tracked_dyads=tracked, kern=kern)
    t_chain = time.perf_counter()

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "trace.jsonl", "w") as fh:
        write_trace(trace, fh)
    auc_text = "n/a"
    if trace.heldout:
        table = predict_link_prob(trace)
        with open(out_dir / "predictions.csv", "w") as fh:
            table.to_csv(fh)
        auc_text = f"{auc(table.labels, table.scores):.6f}"
    params = _jsonable({
        "edgelist": str(args.edgelist), "subnetworks": p["subnetworks"],
        "iters": p["iters"], "burnin": p["burnin"], "thin": p["thin"],
        "holdout": p["holdout"], "seed": seed, "workers": p["workers"],
        "backend": kern.NAME, "one_based": p["one_based"],
        "track_all_edges": p["track_all_edges"], "out_dir": out_dir,
    })
    _write_manifest(out_dir / "manifest.json", "fit", params, {
        "setup_s": t_setup - t0,
        "chain_s": t_chain - t_setup,
        "write_s": time.perf_counter() - t_chain,
        "total_s": time.perf_counter() - t0,
    })
    print(f"AUC: {auc_text}")
    print("mean L per subnetwork: "
          + " ".join(f"{v:.3f}" for v in _mean_L(trace)))
    return 0


def cmd_evaluate(args):
    traces = []
    for path in args.traces:
        with open(path) as fh:
            traces.append(read_trace(fh))
    ns = {tr.n for tr in traces}
    if len(ns) > 1:
        raise ValueError(f"traces disagree on n: {sorted(ns)}")
    by_s = {}
    for tr in traces:
        if not tr.heldout:
            raise ValueError("trace has no held-out dyads to evaluate")
        table = predict_link_prob(tr)
        by_s.setdefault(tr.S, []).append(
            (auc(table.labels, table.scores), float(np.mean(_mean_L(tr)))))

    lines = ["S,mean_auc,sdm,mean_L"]
    for s in sorted(by_s):
        aucs = np.asarray([a for a, _ in by_s[s]])
        mean_ls = np.asarray([l for _, l in by_s[s]])
        # single restart: spread of the mean is unobservable, report 0
        sdm = float(np.std(aucs, ddof=1) / np.sqrt(len(aucs))) if len(aucs) > 1 else 0.0
        lines.append(f"{s},{float(aucs.mean())!r},{sdm!r},{float(mean_ls.mean())!r}")
    _emit(lines, resolve_options(args, _EVALUATE_OPTS)["out"])
    return 0


def cmd_similarity(args):
    p = resolve_options(args, _SIMILARITY_OPTS)
    truth_dir = Path(_require(p["truth"], "truth"))
    meta_path = truth_dir / "meta.json"
    if not meta_path.exists():
        raise ValueError(f"missing ground truth manifest: {meta_path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    n = meta["params"]["n"]
    k = meta["params"]["k"]
    lam = meta["params"]["lambda_shift"]
    gt = synth_gen.read_ground_truth(truth_dir, n)

    lines = ["K,lambda,S,structure_auc"]
    for path in args.traces:
        with open(path) as fh:
            tr = read_trace(fh)
        if tr.n != n:
            raise ValueError(f"trace {path} has n={tr.n}, ground truth has n={n}")
        v = same_block_vectors(gt, tr, window=p["window"])
        lines.append(f"{k},{lam:g},{tr.S},{structure_auc(v)!r}")
    _emit(lines, p["out"])
    return 0


def cmd_bench(args):
    p = resolve_options(args, _BENCH_OPTS)
    report = benchmod.run_benchmark(n=p["n"], k=p["k"], s=p["subnetworks"],
                                    iterations=p["iters"], seed=p["seed"])
    print(f"n={report['n']} edges={report['edges']} S={report['S']} "
          f"iters={report['iterations']}")
    for name, res in report["results"].items():
        print(f"backend {name}: {res['per_sweep_ms']:.3f} ms/sweep "
              f"({res['seconds']:.3f} s total)")
    if report["speedup"] is not None:
        print(f"speedup: {report['speedup']:.1f}x")
    if report["identical"] is not None:
        print(f"traces identical: {'yes' if report['identical'] else 'NO'}")
        if not report["identical"]:
            raise ValueError("backend outputs differ; kernels are out of sync")
    return 0


def cmd_experiment(args):
    p = resolve_options(args, _EXPERIMENT_OPTS)
    manifest_path = _require(p["manifest"], "manifest")
    out_dir = Path(_require(p["out_dir"], "out-dir"))
    with open(manifest_path) as fh:
        runs = json.load(fh)["runs"]

    out_dir.mkdir(parents=True, exist_ok=True)
    datasets = {}
    index = []
    for idx, run in enumerate(runs):
        key = run["data_seed"]
        if key not in datasets:
            pm = synth_gen.planted_params(run["n"], run["k"], run["m"])
            g, gt = synth_gen.generate(
                pm, rngmod.stream(run["data_seed"], rngmod.GENERATE))
            ddir = out_dir / f"data_{len(datasets):03d}"
            ddir.mkdir(exist_ok=True)
            with open(ddir / "edges.txt", "w") as fh:
                write_graph(g, fh)
            synth_gen.write_ground_truth(gt, ddir)
            _write_manifest(ddir / "meta.json", "generate", _jsonable({
                "n": run["n"], "k": run["k"], "m": run["m"],
                "lambda_shift": run["lambda_shift"],
                "seed": run["data_seed"], "out_dir": ddir,
                "edges": g.edge_count,
            }), {"total_s": 0.0})
            datasets[key] = (ddir, g, gt)
        ddir, g, gt = datasets[key]

        seed = run["chain_seed"]
        if p["holdout"] > 0.0:
            g_train, heldout = split_holdout(
                g, p["holdout"], rngmod.stream(seed, rngmod.HOLDOUT))
        else:
            g_train, heldout = g, EMPTY_HELDOUT
        cfg = SweepConfig(iterations=run["iterations"], burn_in=run["burn_in"],
                          thinning=run["thinning"], master_seed=seed,
                          parallel_workers=p["workers"])
        t0 = time.perf_counter()
        trace = run_chain(g_train, heldout, run["S"], cfg,
                          tracked_dyads=g_train.dyads)
        rdir = out_dir / f"run_{idx:04d}"
        rdir.mkdir(exist_ok=True)
        with open(rdir / "trace.jsonl", "w") as fh:
            write_trace(trace, fh)
        _write_manifest(rdir / "manifest.json", "fit", _jsonable({
            "data_dir": ddir, "S": run["S"], "seed": seed,
            "holdout": p["holdout"], "k": run["k"],
            "lambda_shift": run["lambda_shift"], "restart": run["restart"],
        }), {"total_s": time.perf_counter() - t0})
        index.append({"run_dir": rdir.name, "data_dir": ddir.name, **run})
        print(f"run {idx + 1}/{len(runs)}: k={run['k']} "
              f"lambda={run['lambda_shift']:g} restart={run['restart']} "
              f"S={run['S']} done")
    with open(out_dir / "index.json", "w") as fh:
        json.dump({"runs": index}, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")
    return 0


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mnsbm",
        description="Bayesian de-mixing of a binary graph into latent "
                    "Poisson blockmodel subnetworks.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("generate", help="write a planted synthetic instance")
    _add_opts(sp, _GENERATE_OPTS)
    sp.set_defaults(func=cmd_generate)

    sp = subs.add_parser("fit", help="run one chain on an edge list")
    sp.add_argument("edgelist", type=Path)
    _add_opts(sp, _FIT_OPTS)
    sp.set_defaults(func=cmd_fit)

    sp = subs.add_parser("evaluate", help="aggregate link-prediction AUC")
    sp.add_argument("traces", type=Path, nargs="+")
    _add_opts(sp, _EVALUATE_OPTS)
    sp.set_defaults(func=cmd_evaluate)

    sp = subs.add_parser("similarity", help="structure recovery vs ground truth")
    sp.add_argument("traces", type=Path, nargs="+")
    _add_opts(sp, _SIMILARITY_OPTS)
    sp.set_defaults(func=cmd_similarity)

    sp = subs.add_parser("bench", help="compare kernel backends")
    _add_opts(sp, _BENCH_OPTS)
    sp.set_defaults(func=cmd_bench)

    sp = subs.add_parser("experiment", help="run a generated experiment manifest")
    _add_opts(sp, _EXPERIMENT_OPTS)
    sp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
