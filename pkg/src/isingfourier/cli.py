"""Command-line entry point.

Subcommands: simulate, analyze, montecarlo, stability, properties.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from .core import CapExceeded, DataError, atomic_write_text, read_csv, write_csv
from .decision import DecisionFunction, check_properties, from_dict
from .estimation import pipeline_fourier
from .experiments import (
    ConfigError, ExperimentConfig, _corr, file_digest, make_decision, manifest, montecarlo,
    simulate, summarize,
)
from .ising import IsingModel
from .noise import stability_curves

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _load_config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        try:
            base = ExperimentConfig.from_json(args.config).to_dict()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config} ({exc.strerror})") from None
    overrides = {
        "seed": args.seed, "out": args.out, "n": getattr(args, "n", None),
        "m": getattr(args, "m", None), "p_edge": getattr(args, "p_edge", None),
        "theta": getattr(args, "theta", None), "gamma": getattr(args, "gamma", None),
        "replications": getattr(args, "replications", None),
        "theta_grid": getattr(args, "theta_grid", None),
        "rho_grid": getattr(args, "rho_grid", None), "a0_grid": getattr(args, "a0_grid", None),
        "max_order": getattr(args, "max_order", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _decision(spec: str | None, cfg: ExperimentConfig, n: int) -> DecisionFunction:
    if spec is None:
        return make_decision(cfg, n)
    text = open(spec).read() if os.path.exists(spec) else spec
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError(f"decision: not JSON or a readable file: {spec!r}") from None
    if d.get("type") == "ltf" and not d.get("params"):
        return make_decision(ExperimentConfig.from_dict({**cfg.to_dict(), "decision": d}), n)
    d.setdefault("n", n)
    try:
        return from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"decision: {exc}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _write(outdir: str, name: str, text: str, artifacts: dict):
    path = os.path.join(outdir, name)
    atomic_write_text(path, text)
    artifacts[name] = file_digest(path)


def _finish(outdir, cfg, artifacts, command):
    m = manifest(cfg, cfg.seed if cfg else None, artifacts, command)
    atomic_write_text(os.path.join(outdir, "manifest.json"), json.dumps(m, indent=2) + "\n")


# --- commands ------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    os.makedirs(cfg.out, exist_ok=True)
    model, data = simulate(cfg)
    arts: dict = {}
    path = os.path.join(cfg.out, "data.csv")
    write_csv(path, data, header=args.header)
    arts["data.csv"] = file_digest(path)
    _write(cfg.out, "model.json", json.dumps(model.to_dict(), indent=2) + "\n", arts)
    _finish(cfg.out, cfg, arts, "simulate")
    print(f"wrote {data.m}x{data.n} dataset and model to {cfg.out}")
    return 0


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    data = read_csv(args.data, header=args.header, delimiter=args.delimiter, domain=args.domain)
    const = data.constant_items()
    if const:
        labels = ", ".join(str(i + 1) for i in const)
        print(f"warning: degenerate item(s) {labels} are constant in the data", file=sys.stderr)
    f = _decision(args.decision, cfg, data.n)
    res = pipeline_fourier(data, f, cfg.gamma, cfg.max_order, cfg.rule, args.threads)
    os.makedirs(cfg.out, exist_ok=True)
    arts: dict = {}
    _write(cfg.out, "spectrum.csv", res.spectrum.to_csv(), arts)
    _write(cfg.out, "influence.csv", res.influence.to_csv(), arts)
    _write(cfg.out, "fit.json", res.fit.to_json() + "\n", arts)
    _write(cfg.out, "edges.csv", res.fit.edges_csv(), arts)
    a0_grid = cfg.a0_grid if hasattr(f, "a0") else None
    curves = stability_curves(f, cfg.rho_grid, a0_grid, data=data, seed=cfg.seed)
    _write(cfg.out, "stability.csv", curves.to_csv(), arts)
    if args.model:
        with open(args.model) as fh:
            graph = IsingModel.from_json(fh.read()).graph
        source = "true"
    else:
        graph = res.fit.model.graph
        source = "estimated"
    deg = graph.degrees()
    coef = res.spectrum.order1()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item", "degree", "coefficient", "influence"])
    for i in range(data.n):
        w.writerow([i + 1, int(deg[i]), repr(float(coef[i])), repr(float(res.influence.values[i]))])
    _write(cfg.out, "scatter.csv", buf.getvalue(), arts)
    _finish(cfg.out, cfg, arts, "analyze")
    print(f"correlation between {source} degree and order-1 coefficient: {_corr(deg, coef):.3f}")
    flagged = [str(i + 1) for i in np.flatnonzero(res.influence.flags)]
    if flagged:
        print(f"items above the influence bound: {', '.join(flagged)}")
    return 0


def cmd_montecarlo(args) -> int:
    cfg = _load_config(args)
    os.makedirs(cfg.out, exist_ok=True)
    progress = None
    if args.verbose:
        progress = lambda r: print(f"theta={r.theta} precision={r.precision:.3f} "
                                   f"recall={r.recall:.3f}", file=sys.stderr)
    reps = montecarlo(cfg, args.threads, progress)
    arts: dict = {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "replication", "precision", "recall", "prob_mad", "fourier_mad",
                "degree_corr"])
    counts: dict = {}
    for r in reps:
        k = counts.get(r.theta, 0)
        counts[r.theta] = k + 1
        w.writerow([r.theta, k, r.precision, r.recall, r.prob_mad, r.fourier_mad, r.degree_corr])
    _write(cfg.out, "replications.csv", buf.getvalue(), arts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "metric", "mean", "sd", "count"])
    for row in summarize(reps):
        w.writerow([row.theta, row.metric, row.mean, row.sd, row.count])
        print(f"theta={row.theta:g} {row.metric:12s} {row.mean:.3f} +/- {row.sd:.3f}")
    _write(cfg.out, "montecarlo.csv", buf.getvalue(), arts)
    _finish(cfg.out, cfg, arts, "montecarlo")
    return 0


def cmd_stability(args) -> int:
    cfg = _load_config(args)
    if args.data:
        data = read_csv(args.data, header=args.header, delimiter=args.delimiter,
                        domain=args.domain)
        n = data.n
    else:
        data, n = None, args.items
    f = _decision(args.decision, cfg, n)
    a0_grid = cfg.a0_grid if hasattr(f, "a0") else None
    curves = stability_curves(f, cfg.rho_grid, a0_grid, data=data, seed=cfg.seed)
    os.makedirs(cfg.out, exist_ok=True)
    arts: dict = {}
    _write(cfg.out, "stability.csv", curves.to_csv(), arts)
    _finish(cfg.out, cfg, arts, "stability")
    for v in curves.violations():
        print(f"finding: {v}")
    return 0


def cmd_properties(args) -> int:
    cfg = _load_config(args)
    f = _decision(args.decision, cfg, args.items)
    rep = check_properties(f)
    print(json.dumps(rep.as_dict(), indent=2))
    return 0


# --- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for node fits")

    data_opts = argparse.ArgumentParser(add_help=False)
    data_opts.add_argument("--header", action="store_true", help="first line is a header")
    data_opts.add_argument("--delimiter", default=",")
    data_opts.add_argument("--domain", choices=["auto", "01", "pm1"], default="auto")

    grids = argparse.ArgumentParser(add_help=False)
    grids.add_argument("--rho-grid", type=_floats, dest="rho_grid")
    grids.add_argument("--a0-grid", type=_floats, dest="a0_grid")

    p = argparse.ArgumentParser(prog="isingfourier", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="generate a dataset from a random Ising model")
    s.add_argument("--n", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--p-edge", type=float, dest="p_edge")
    s.add_argument("--theta", type=float)
    s.add_argument("--header", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", parents=[common, data_opts, grids],
                       help="fit, spectrum, influence and stability for a dataset")
    a.add_argument("data")
    a.add_argument("--decision", help="decision function as JSON or a path to JSON")
    a.add_argument("--gamma", type=float)
    a.add_argument("--max-order", type=int, dest="max_order")
    a.add_argument("--model", help="true model JSON for the degree scatter")
    a.set_defaults(func=cmd_analyze)

    mc = sub.add_parser("montecarlo", parents=[common], help="recovery and accuracy over a theta grid")
    mc.add_argument("--replications", type=int)
    mc.add_argument("--theta-grid", type=_floats, dest="theta_grid")
    mc.add_argument("--gamma", type=float)
    mc.add_argument("--n", type=int)
    mc.add_argument("--m", type=int)
    mc.add_argument("--verbose", action="store_true")
    mc.set_defaults(func=cmd_montecarlo)

    st = sub.add_parser("stability", parents=[common, data_opts, grids],
                        help="stability and decision reliability curves")
    st.add_argument("--data")
    st.add_argument("--decision")
    st.add_argument("--items", type=int, default=3, help="item count without data")
    st.set_defaults(func=cmd_stability)

    pr = sub.add_parser("properties", parents=[common], help="exhaustive property check")
    pr.add_argument("--decision", required=True)
    pr.add_argument("--items", type=int, default=3)
    pr.set_defaults(func=cmd_properties)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CapExceeded, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
