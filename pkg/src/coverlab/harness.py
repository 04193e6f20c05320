"""Experiment configuration, reproducible runs, atomic result files and plot data."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, exact, relations
from ._rng import label_key
from .broadcast import estimate_rba, pairwise_rba, seq_samples
from .errors import ConfigError, CoverlabError
from .estimate import Estimate
from .generators import generate
from .graph import Graph, from_edge_list
from .percolation import estimate_fpp
from .relations import SCHEMA_VERSION, Budget
from .walk import estimate_blanket_time, estimate_cover_time, estimate_hitting_time

EXPERIMENTS = ("relation-check", "sweep", "figure2", "single-metric", "ratio-landscape")
EMITS = ("json", "csv", "plot-data")
PAIR_METRICS = ("hitting", "rba-pair", "ufpp", "dfpp", "seq")
METRICS = ("cov", "bla", "rba", "ratio", "gap-inverse", "mixing") + PAIR_METRICS

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 2, 3


def log(msg: str):
    print(msg, file=sys.stderr, flush=True)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int
    graph: dict = field(default_factory=dict)  # {"family", "params"} or {"file"}
    budget: dict = field(default_factory=dict)
    out_dir: str = ""
    emit: tuple = ("json",)
    relations: tuple = ()  # relation-check; empty means the whole catalog
    metric: str = ""  # single-metric and sweep
    pair: tuple = ()  # (u, v) for pairwise metrics
    family: str = ""  # sweep
    sizes: tuple = ()  # sweep
    polylog_power: float = 0.0  # sweep
    size: int = 64  # figure2
    n: int = 0  # ratio-landscape
    degrees: tuple = ()  # ratio-landscape

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        if "master_seed" not in d or d["master_seed"] is None:
            raise ConfigError("master_seed is required (there is no default seed)")
        if "experiment" not in d:
            raise ConfigError("experiment is required")
        d = dict(d)
        for k in ("emit", "relations", "pair", "sizes", "degrees"):
            if k in d:
                v = d[k]
                d[k] = (v,) if isinstance(v, str) else tuple(v)
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not isinstance(self.master_seed, int) or isinstance(self.master_seed, bool) \
                or not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be an integer in [0, 2^64)")
        bad = set(self.emit) - set(EMITS)
        if bad or not self.emit:
            raise ConfigError(f"emit must be a non-empty subset of {EMITS}")
        try:
            self.make_budget()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"budget: {e}") from None
        if self.experiment in ("relation-check", "single-metric"):
            g = self.graph
            if not g or (("family" in g) == ("file" in g)):
                raise ConfigError("graph must give exactly one of 'family' or 'file'")
        if self.experiment == "relation-check":
            unknown = set(self.relations) - set(relations.CATALOG)
            if unknown:
                raise ConfigError(f"unknown relation tags: {', '.join(sorted(unknown))}")
        if self.experiment == "single-metric":
            if self.metric not in METRICS:
                raise ConfigError(f"metric must be one of {METRICS}")
            if self.metric in PAIR_METRICS and len(self.pair) != 2:
                raise ConfigError(f"metric {self.metric} needs pair = [u, v]")
        if self.experiment == "sweep":
            if self.metric not in relations.METRICS:
                raise ConfigError(f"sweep metric must be one of {relations.METRICS}")
            if len(self.sizes) < 4 or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
                raise ConfigError("sweep needs at least 4 strictly increasing sizes")
            if not self.family:
                raise ConfigError("sweep needs a family")
        if self.experiment == "ratio-landscape" and (self.n <= 0 or not self.degrees):
            raise ConfigError("ratio-landscape needs n and degrees")
        if self.out_dir:
            out = Path(self.out_dir)
            parent = out if out.exists() else out.parent
            if (out.exists() and not out.is_dir()) or not os.access(parent if str(parent) else ".", os.W_OK):
                raise ConfigError(f"output directory {self.out_dir} is not writable")

    def make_budget(self) -> Budget:
        return Budget(**self.budget)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


@dataclass(frozen=True)
class RunManifest:
    config: dict
    version: str
    duration_s: float
    seeds: dict
    files: dict  # name -> sha256 hex digest
    complete: bool
    exit_code: int

    def to_dict(self) -> dict:
        return asdict(self)


def load_graph(spec: dict, seed: int) -> Graph:
    if "file" in spec:
        return from_edge_list(Path(spec["file"]).read_text())
    return generate(spec["family"], spec.get("params", {}), label_key(seed, "graph"))


# ---------------------------------------------------------------- experiments

def _estimate_metric(g: Graph, metric: str, pair, budget: Budget, seed: int) -> dict:
    if metric in ("gap-inverse", "mixing"):
        k = exact.transition_kernel(g)
        if metric == "gap-inverse":
            sp = exact.spectral(k)
            return {"value": 1.0 / sp.gap, "exact": True, "lambda2": sp.lambda2, "periodic": sp.periodic}
        if exact.spectral(k).periodic:
            k = exact.transition_kernel(g, lazy=True)
        r = exact.mixing_time(k)
        return {"value": r.steps, "exact": True, "lazy": k.lazy, "eps": r.eps, "capped": r.capped}
    if metric == "cov":
        est = estimate_cover_time(g, budget.walk_trials, seed, cap=budget.step_cap)
    elif metric == "bla":
        est = estimate_blanket_time(g, budget.walk_trials, seed, cap=budget.step_cap)
    elif metric == "rba":
        est = estimate_rba(g, budget.broadcast_trials, seed, cap=budget.round_cap)
    elif metric == "ratio":
        est = relations.quotient_R(g, budget, seed)
    else:
        u, v = (int(x) for x in pair)
        if not (0 <= u < g.n and 0 <= v < g.n) or u == v:
            raise ConfigError(f"pair {pair} invalid for n={g.n}")
        if metric == "hitting":
            est = estimate_hitting_time(g, u, v, budget.walk_trials, seed, cap=budget.step_cap)
        elif metric == "rba-pair":
            est = pairwise_rba(g, u, v, budget.broadcast_trials, seed, cap=budget.round_cap)
        elif metric == "seq":
            times, done = seq_samples(g, u, budget.fpp_trials, seed)
            est = Estimate.from_samples(times[:, v], seed, f"seq[{u},{v}]", complete=bool(done.all()),
                                        start=u)
        else:
            est = estimate_fpp(g, u, v, metric == "dfpp", budget.fpp_trials, seed)
    return {"estimate": est.to_dict(), "complete": est.complete}


def execute(cfg: ExperimentConfig) -> dict:
    """Run the experiment in memory; returns the results document (no I/O)."""
    budget = cfg.make_budget()
    seed = cfg.master_seed
    doc = {"schema_version": SCHEMA_VERSION, "version": __version__, "experiment": cfg.experiment,
           "master_seed": seed, "budget": asdict(budget)}
    if cfg.experiment == "relation-check":
        g = load_graph(cfg.graph, seed)
        op_seed = label_key(seed, "relations")
        lab = relations.Lab(g, budget, op_seed)
        reports = []
        for tag in cfg.relations or relations.catalog():
            log(f"check {tag} on {g.graph_id}")
            reports.append(relations.check_relation(tag, g, lab=lab))
        doc.update(graph_id=g.graph_id, seeds={"relations": op_seed},
                   reports=[r.to_dict() for r in reports],
                   complete=_lab_complete(lab))
        doc["_csv"] = relations.reports_to_csv(reports)
    elif cfg.experiment == "single-metric":
        g = load_graph(cfg.graph, seed)
        op_seed = label_key(seed, f"metric/{cfg.metric}")
        log(f"metric {cfg.metric} on {g.graph_id}")
        res = _estimate_metric(g, cfg.metric, cfg.pair, budget, op_seed)
        doc.update(graph_id=g.graph_id, metric=cfg.metric, pair=list(cfg.pair) or None,
                   seeds={"metric": op_seed}, result=res, complete=res.get("complete", True))
        doc["_csv"] = _metric_csv(g, cfg.metric, res)
    elif cfg.experiment == "sweep":
        op_seed = label_key(seed, "sweep")
        log(f"sweep {cfg.family} {cfg.metric} over {list(cfg.sizes)}")
        fit = relations.scaling_sweep(cfg.family, cfg.sizes, cfg.metric, budget, op_seed,
                                      cfg.polylog_power)
        doc.update(seeds={"sweep": op_seed}, fit=fit.to_dict(), complete=fit.complete)
        doc["_csv"] = relations.fits_to_csv([fit])
        doc["_plot"] = ("loglog-sweep", fit)
    elif cfg.experiment == "figure2":
        op_seed = label_key(seed, "figure2")
        log(f"figure2 at size {cfg.size}")
        rep = relations.figure2_table(budget, op_seed, cfg.size)
        doc.update(seeds={"figure2": op_seed}, report=rep.to_dict(),
                   complete=all(r.cov.complete and r.rba.complete for r in rep.rows))
        doc["_csv"] = rep.to_csv()
    else:
        op_seed = label_key(seed, "landscape")
        log(f"ratio landscape n={cfg.n} d={list(cfg.degrees)}")
        pts = relations.ratio_landscape(cfg.n, cfg.degrees, budget, op_seed)
        doc.update(seeds={"landscape": op_seed},
                   points=[{"d": p.d, "n": p.n, "delta": p.delta, "Delta": p.Delta, "m": p.m,
                            "quotient": p.quotient.to_dict(), "curves": p.curves()} for p in pts],
                   complete=all(p.quotient.complete for p in pts))
        doc["_csv"] = landscape_columns(pts)
        doc["_plot"] = ("ratio-landscape", pts)
    return doc


def _lab_complete(lab) -> bool:
    ests = [lab.__dict__[k] for k in ("cover", "blanket", "rba") if k in lab.__dict__]
    return all(e.complete for e in ests)


def _metric_csv(g, metric, res) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["graph_id", "metric", "value", "stderr", "trials", "exact", "complete"])
    if "estimate" in res:
        e = res["estimate"]
        w.writerow([g.graph_id, metric, repr(e["mean"]), repr(e["stderr"]), e["trials"], False, e["complete"]])
    else:
        w.writerow([g.graph_id, metric, repr(res["value"]), repr(0.0), 1, True, True])
    return buf.getvalue()


# ---------------------------------------------------------------- plot data

LANDSCAPE_COLUMNS = ("d", "R", "stderr", "trials", "dense_lower", "upper", "construction")


def landscape_columns(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LANDSCAPE_COLUMNS)
    for p in points:
        c = p.curves()
        w.writerow([p.d, repr(p.quotient.mean), repr(p.quotient.stderr), p.quotient.trials,
                    repr(c["dense_lower"]), repr(c["upper"]), repr(c["construction"])])
    return buf.getvalue()


_PLOT_STUBS = {
    "loglog-sweep": """\
# plot with: python3 plot_sweep.py
import numpy as np
import matplotlib.pyplot as plt

n, value = np.loadtxt("sweep.dat", unpack=True, comments="#")
plt.plot(n, value, "o-")
plt.xscale("log")
plt.yscale("log")
plt.xlabel("n")
plt.ylabel("{metric}")
plt.title("{family}: fitted exponent {exponent:.3f}")
plt.savefig("sweep.png")
""",
    "ratio-landscape": """\
# plot with: python3 plot_landscape.py
import numpy as np
import matplotlib.pyplot as plt

d, R, se, trials, lower, upper, construction = np.loadtxt("landscape.dat", unpack=True, comments="#")
plt.errorbar(d, R, yerr=se, fmt="o", label="measured R(G)")
plt.plot(d, lower, label="delta^2 / (n ln n)")
plt.plot(d, upper, label="(m / delta) ln n")
plt.plot(d, construction, "--", label="max(sqrt n, d) log^2 n")
plt.xscale("log")
plt.yscale("log")
plt.xlabel("degree d")
plt.legend()
plt.savefig("landscape.png")
""",
}


def emit_plot_data(results, kind: str) -> dict:
    """Plain columnar data plus a plotting-script stub, as ``{filename: text}``."""
    if kind not in _PLOT_STUBS:
        raise ValueError(f"unknown plot kind {kind!r}")
    if results is None or (isinstance(results, (list, tuple)) and not results):
        raise ValueError("no data to plot")
    if kind == "loglog-sweep":
        if not isinstance(results, relations.ScalingFit):
            raise ValueError("loglog-sweep needs a ScalingFit")
        if not results.sizes:
            raise ValueError("no data to plot")
        lines = [f"# {results.family} {results.metric}; columns: n value (stderr and trials in results.csv)"]
        lines += [f"{n} {v!r}" for n, v in zip(results.sizes, results.values)]
        stub = _PLOT_STUBS[kind].format(metric=results.metric, family=results.family,
                                        exponent=results.exponent)
        return {"sweep.dat": "\n".join(lines) + "\n", "plot_sweep.py": stub}
    if not isinstance(results, (list, tuple)) or \
            not all(isinstance(p, relations.LandscapePoint) for p in results):
        raise ValueError("ratio-landscape needs landscape points")
    rows = landscape_columns(results).splitlines()
    body = ["# columns: " + " ".join(LANDSCAPE_COLUMNS)] + [r.replace(",", " ") for r in rows[1:]]
    return {"landscape.dat": "\n".join(body) + "\n", "plot_landscape.py": _PLOT_STUBS[kind]}


# ---------------------------------------------------------------- persistence

def atomic_write(path: Path, text: str) -> str:
    """Write via a temp file and rename; returns the sha256 of the content."""
    data = text.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if hasattr(x, "item"):
        return x.item()
    if hasattr(x, "tolist"):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def render(doc: dict, cfg: ExperimentConfig) -> dict:
    """Result files for ``doc`` as ``{filename: text}``."""
    files = {}
    public = {k: v for k, v in doc.items() if not k.startswith("_")}
    if "json" in cfg.emit:
        files["results.json"] = dumps(public)
    if "csv" in cfg.emit:
        files["results.csv"] = doc["_csv"]
    if "plot-data" in cfg.emit:
        if "_plot" not in doc:
            raise ConfigError(f"plot-data is not available for experiment {cfg.experiment}")
        files.update(emit_plot_data(doc["_plot"][1], doc["_plot"][0]))
    return files


def error_record(exc: BaseException) -> dict:
    return {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc)}


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute ``cfg`` and write results plus ``manifest.json`` into ``cfg.out_dir``.

    Budget caps hit during the run still write the (flagged) results and give
    exit code 3. Failures write ``error.json`` and give exit code 2.
    """
    if not cfg.out_dir:
        raise ConfigError("run needs an output directory")
    out = Path(cfg.out_dir)
    t0 = time.perf_counter()
    try:
        doc = execute(cfg)
        files = render(doc, cfg)
    except (CoverlabError, ValueError, KeyError, OSError) as e:
        digest = atomic_write(out / "error.json", dumps(error_record(e)))
        return RunManifest(cfg.to_dict(), __version__, time.perf_counter() - t0, {},
                           {"error.json": digest}, False, EXIT_ERROR)
    digests = {name: atomic_write(out / name, text) for name, text in sorted(files.items())}
    complete = bool(doc.get("complete", True))
    code = EXIT_OK if complete else EXIT_PARTIAL
    man = RunManifest(cfg.to_dict(), __version__, round(time.perf_counter() - t0, 3),
                      doc.get("seeds", {}), digests, complete, code)
    atomic_write(out / "manifest.json", dumps(man.to_dict()))
    log(f"wrote {len(digests)} files to {out}" + ("" if complete else " (partial: caps reached)"))
    return man
