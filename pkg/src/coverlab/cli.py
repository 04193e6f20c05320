"""Command-line entry point.

    coverlab gen hypercube -p d=4 --seed 1 --out q4.txt
    coverlab metric cov --family cycle -p n=64 --seed 1 --trials 1000
    coverlab check commute-resistance --family path -p n=3 --seed 1
    coverlab sweep cycle --metric cov --sizes 64 128 256 512 --seed 1 --out runs/cycle
    coverlab figure2 --seed 1 --out runs/fig2 --format csv
    coverlab run config.json

Results go to ``--out`` (a directory, with a manifest) or to stdout.
Progress goes to stderr. ``--workers`` only changes speed, never results.
"""
from __future__ import annotations

import argparse
import json
import os
import sys


def _param(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, required=True, help="master seed (required)")
    common.add_argument("--trials", type=int, help="trials for every estimator in this run")
    common.add_argument("--out", help="output directory (file for gen); stdout if omitted")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, help="worker threads (does not affect results)")

    graph = argparse.ArgumentParser(add_help=False)
    src = graph.add_mutually_exclusive_group(required=True)
    src.add_argument("--family", help="generator family")
    src.add_argument("--graph", help="edge-list file")
    graph.add_argument("-p", "--param", type=_param, action="append", default=[],
                       help="generator parameter key=value (repeatable)")

    ap = argparse.ArgumentParser(prog="coverlab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a graph file")
    g.add_argument("family")
    g.add_argument("-p", "--param", type=_param, action="append", default=[])

    m = sub.add_parser("metric", parents=[common, graph], help="one estimator on one graph")
    m.add_argument("metric")
    m.add_argument("--pair", type=int, nargs=2, metavar=("U", "V"))

    c = sub.add_parser("check", parents=[common, graph], help="evaluate relation tags")
    c.add_argument("tags", nargs="*", help="relation tags (default: whole catalog)")

    s = sub.add_parser("sweep", parents=[common], help="log-log scaling fit over sizes")
    s.add_argument("family")
    s.add_argument("--metric", required=True)
    s.add_argument("--sizes", type=int, nargs="+", required=True)
    s.add_argument("--polylog", type=float, default=0.0, help="also fit value / (ln n)^k")
    s.add_argument("--plot-data", action="store_true")

    f = sub.add_parser("figure2", parents=[common], help="family comparison table")
    f.add_argument("--size", type=int, default=64)

    r = sub.add_parser("run", help="run an experiment config file")
    r.add_argument("config")
    r.add_argument("--workers", type=int)

    sub.add_parser("relations", help="list relation tags")
    return ap


def _budget(trials):
    if trials is None:
        return {}
    return {"walk_trials": trials, "broadcast_trials": trials, "fpp_trials": trials}


def _config_dict(a) -> dict:
    d = {"master_seed": a.seed, "budget": _budget(a.trials), "out_dir": a.out or "",
         "emit": [a.format]}
    if a.cmd in ("metric", "check"):
        d["graph"] = {"file": a.graph} if a.graph else {"family": a.family, "params": dict(a.param)}
    if a.cmd == "metric":
        d.update(experiment="single-metric", metric=a.metric, pair=a.pair or [])
    elif a.cmd == "check":
        d.update(experiment="relation-check", relations=a.tags)
    elif a.cmd == "sweep":
        d.update(experiment="sweep", family=a.family, metric=a.metric, sizes=a.sizes,
                 polylog_power=a.polylog)
        if a.plot_data:
            d["emit"].append("plot-data")
    elif a.cmd == "figure2":
        d.update(experiment="figure2", size=a.size)
    return d


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    if getattr(a, "workers", None):
        # must happen before numba is first imported
        os.environ["NUMBA_NUM_THREADS"] = str(a.workers)

    from . import harness
    from .errors import CoverlabError

    try:
        if a.cmd == "relations":
            from .relations import CATALOG
            for tag in sorted(CATALOG):
                print(f"{tag:24s} {CATALOG[tag].kind:6s} {CATALOG[tag].statement}")
            return 0
        if a.cmd == "gen":
            from .generators import generate
            from .graph import to_edge_list
            from ._rng import label_key
            text = to_edge_list(generate(a.family, dict(a.param), label_key(a.seed, "graph")))
            if a.out:
                harness.atomic_write(harness.Path(a.out), text)
            else:
                sys.stdout.write(text)
            return 0
        if a.cmd == "run":
            cfg = harness.ExperimentConfig.load(a.config)
        else:
            cfg = harness.ExperimentConfig.from_dict(_config_dict(a))
        if cfg.out_dir:
            man = harness.run(cfg)
            print(harness.dumps(man.to_dict()), end="")
            return man.exit_code
        doc = harness.execute(cfg)
        files = harness.render(doc, cfg)
        sys.stdout.write(files.get("results.json") or files.get("results.csv", ""))
        return harness.EXIT_OK if doc.get("complete", True) else harness.EXIT_PARTIAL
    except (CoverlabError, ValueError, KeyError, OSError) as e:
        print(json.dumps(harness.error_record(e)))
        return harness.EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
