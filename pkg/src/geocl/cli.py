"""Command-line pipeline: ingest -> fit -> generate -> stats -> compare, plus sandbox and baselines.

Each stage reads the previous stage's files, so stages can be rerun alone.
``run`` chains them from one configuration. Exit codes: 0 ok, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, metrics
from .estimation import FitError, fit_model, load_fit, write_fit_report, write_intensities
from .generator import (GeneratorConfig, TorusConfig, child_seed, generate_ensemble,
                        torus_generate, worker_count)
from .graph import (GraphError, SpatialGraph, graph_paths, induced_subgraph, read_graph_csv,
                    trim_top_degree, write_graph_csv)
from .ingest import DataError, build_connectome_graph, named_vertices, read_synapses

log = logging.getLogger("geocl")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
VARIANTS = {"full-1": ("full", 1), "named-2": ("named", 2)}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


@dataclass
class RunConfig:
    synapses: str | None = None
    graph: str | None = None
    variant: str = "named-2"
    trim: int = 0
    grid_size: int = 200
    convention: str = "ordered"
    replicates: int = 200
    seed: int = 0
    permute: bool = True
    baselines: list[str] = field(default_factory=lambda: ["chung-lu", "inverse-power"])
    baseline_weights: str = "degrees"
    output: str = "geocl-out"
    centralities: bool = True
    # not part of the config hash
    workers: int | None = None

    HASH_EXCLUDE = ("output", "workers")

    def validate(self) -> None:
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if (self.synapses is None) == (self.graph is None):
            raise ConfigError("give exactly one of synapses (raw records) or graph (vertex/edge CSV prefix)")
        if self.variant not in (*VARIANTS, "custom"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.trim < 0:
            raise ConfigError("trim must be non-negative")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be at least 2")
        if self.convention not in ("ordered", "unordered"):
            raise ConfigError(f"unknown pair convention {self.convention!r}")
        unknown = set(self.baselines) - {"chung-lu", "inverse-power"}
        if unknown:
            raise ConfigError(f"unknown baselines: {sorted(unknown)}")
        if self.baseline_weights not in ("degrees", "rho"):
            raise ConfigError("baseline_weights must be 'degrees' or 'rho'")
        for p in (self.synapses,):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"input not found: {p}")
        if self.graph is not None:
            for p in graph_paths(self.graph):
                if not p.exists():
                    raise ConfigError(f"input not found: {p}")

    def semantic(self) -> dict:
        d = dataclasses.asdict(self)
        for k in self.HASH_EXCLUDE:
            d.pop(k)
        if self.variant != "custom":
            d.pop("trim")
        d["baselines"] = sorted(d["baselines"])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            raw = json.load(fh)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


# -- stages --------------------------------------------------------------------

def reference_from_synapses(path, variant: str, trim: int = 0) -> tuple[SpatialGraph, SpatialGraph]:
    """(untrimmed base graph, trimmed reference) for a variant."""
    ds = read_synapses(path)
    full = build_connectome_graph(ds)
    if variant == "custom":
        return full, trim_top_degree(full, trim)
    which, k = VARIANTS[variant]
    base = full
    if which == "named":
        keep = named_vertices(full, ds.named_ids)
        if not keep:
            raise DataError("dataset has no named neurons; named reference graph is empty")
        base, _ = induced_subgraph(full, keep)
    return base, trim_top_degree(base, k)


def stage_ingest(synapses, out: Path, full_trim: int = 1, named_trim: int = 2) -> dict:
    ds = read_synapses(synapses)
    full = build_connectome_graph(ds)
    out.mkdir(parents=True, exist_ok=True)
    written = {"full": full}
    keep = named_vertices(full, ds.named_ids)
    written[f"full-{full_trim}"] = trim_top_degree(full, full_trim)
    if keep:
        named, _ = induced_subgraph(full, keep)
        written["named"] = named
        written[f"named-{named_trim}"] = trim_top_degree(named, named_trim)
    summary = {}
    for name, g in written.items():
        write_graph_csv(g, *graph_paths(out / name))
        summary[name] = {"vertices": g.n, "edges": g.num_edges, "self_loops": g.num_loops}
    with open(out / "ingest.json", "w") as fh:
        json.dump({"records": len(ds.records), "neurons": full.n, "graphs": summary}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def stage_fit(g: SpatialGraph, out: Path, grid_size: int, convention: str):
    out.mkdir(parents=True, exist_ok=True)
    result = fit_model(g, grid_size, convention)
    write_fit_report(result, out / "fit.json")
    write_intensities(g, result.model, out / "intensities.csv")
    with open(out / "cdf.csv", "w") as fh:
        fh.write("x,F1_observed,F1_fitted,F2_observed,F2_fitted,ratio_fitted\n")
        m = result.model
        for x, p1, p2 in zip(result.cdf1.xs, result.cdf1.ps, result.cdf2.ps):
            fh.write(f"{x!r},{p1!r},{float(m.f1.value(x))!r},{p2!r},{float(m.f2.value(x))!r},"
                     f"{float(m.ratio(x))!r}\n")
    return result


def stage_generate(g: SpatialGraph, fit, out: Path, cfg: GeneratorConfig, workers=None) -> list:
    out.mkdir(parents=True, exist_ok=True)
    sims = generate_ensemble(g, fit, cfg, workers)
    for r, s in enumerate(sims):
        with open(out / f"sim_{r}.edges.csv", "w") as fh:
            fh.write("src,dst\n")
            fh.writelines(f"{a},{b}\n" for a, b in s.edges.tolist())
    manifest = {"seed": cfg.seed, "replicates": cfg.replicates,
                "permute_intensities": cfg.permute_intensities,
                "seed_rule": "splitmix64(splitmix64(seed) ^ replicate)",
                "replicate_seeds": [child_seed(cfg.seed, r) for r in range(cfg.replicates)]}
    with open(out / "ensemble.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return sims


def load_simulations(g: SpatialGraph, sims_dir: Path) -> list[SpatialGraph]:
    files = sorted(sims_dir.glob("sim_*.edges.csv"), key=lambda p: int(p.name.split("_")[1].split(".")[0]))
    if not files:
        raise DataError(f"no sim_<r>.edges.csv files in {sims_dir}")
    sims = []
    for f in files:
        e = np.loadtxt(f, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2).reshape(-1, 2)
        sims.append(SpatialGraph(g.positions, e))
    return sims


def _stats_many(graphs, centralities: bool, workers=None) -> list:
    from concurrent.futures import ThreadPoolExecutor

    def one(s):
        return metrics.stats_bundle(s, spectrum=True, centralities=centralities)

    nworkers = min(worker_count(workers), len(graphs))
    if nworkers <= 1:
        return [one(s) for s in graphs]
    with ThreadPoolExecutor(nworkers) as pool:
        return list(pool.map(one, graphs))


def stage_stats(g: SpatialGraph, sims: list, out: Path, centralities: bool = True, workers=None):
    out.mkdir(parents=True, exist_ok=True)
    ref = metrics.stats_bundle(g, centralities=centralities)
    stats = _stats_many(sims, centralities, workers)
    metrics.write_stats_csv(stats, out / "stats.csv")
    metrics.write_stats_csv([ref], out / "reference_stats.csv")
    metrics.write_spectrum_histogram(ref.spectrum, [s.spectrum for s in stats],
                                     out / "spectrum_histogram.csv")
    if centralities:
        for measure in ("betweenness", "closeness", "eigencentrality"):
            metrics.write_rank_plot(measure, getattr(ref, measure), getattr(stats[0], measure),
                                    out / f"rank_{measure}.csv")
    return ref, stats


def stage_compare(ref_stats, stats, out: Path):
    summary = metrics.ensemble_summary(stats, ref_stats)
    metrics.write_summary_json(summary, out / "summary.json")
    (out / "comparison.txt").write_text(metrics.comparison_table(summary))
    return summary


def stage_baseline(g: SpatialGraph, fit, out: Path, seed: int, replicates: int,
                   which=("chung-lu", "inverse-power"), weights: str = "degrees",
                   centralities: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"rows": []}
    if "chung-lu" in which:
        w = fit.degrees if weights == "degrees" else fit.rho_hat
        base = 0x5EED_C1 ^ seed
        for r in range(replicates):
            s = baselines.chung_lu_generate(w, child_seed(base, r), g.positions)
            st = metrics.stats_bundle(s, spectrum=False, centralities=centralities)
            row = {"model": "chung-lu", "replicate": r, "params": {"weights": weights},
                   "stats": st.scalars()}
            if centralities:
                row["mean_closeness"] = float(np.mean(st.closeness))
            report["rows"].append(row)
        report["chung_lu_expected_edges"] = baselines.chung_lu_expected_edges(w)
    if "inverse-power" in which:
        prof = baselines.connection_profile(g, 50)
        curve = baselines.fit_inverse_power_profile(prof)
        centers, p = prof.centers, prof.probability
        ok = prof.pairs > 0
        tail = ok & (centers > 500)
        resid_ip = curve.probability(centers[tail]) - p[tail]
        resid_lg = fit.ratio(centers[tail]) - p[tail]
        report["rows"].append({
            "model": "inverse-power",
            "params": {"k": curve.k, "beta": curve.beta_exp},
            "stats": {"tail_mse_inverse_power": float(np.mean(resid_ip ** 2)) if tail.any() else None,
                      "tail_mse_logistic": float(np.mean(resid_lg ** 2)) if tail.any() else None},
        })
    report["short_range"] = baselines.short_range_probabilities(g, (0.0, 100.0, 200.0))
    with open(out / "baseline_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def sandbox(dim: int, n: int, replicates: int, seed: int, classes=(2.0, 5.0, 10.0, 20.0),
            shape=(2.0, -10.0)) -> dict:
    """Mean degree per intensity class on the torus against the intensities themselves."""
    from .estimation import LogisticCurve

    rho = np.resize(np.asarray(classes, dtype=np.float64), n)
    tc = TorusConfig(dim, rho, LogisticCurve(1.0, shape[0], shape[1]))
    per_class = {c: [] for c in classes}
    densities = []
    for r in range(replicates):
        g = torus_generate(tc, child_seed(seed, r))
        deg = np.bincount(g.edges[:, 0], minlength=n) + np.bincount(g.edges[~g.loop_mask, 1], minlength=n)
        for c in classes:
            per_class[c].append(deg[rho == c].mean())
        densities.append(deg.sum() / n ** 2)
    out = {"dim": dim, "n": n, "replicates": replicates, "epsilon": tc.epsilon, "classes": []}
    for c in classes:
        v = np.asarray(per_class[c])
        se = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else float("nan")
        out["classes"].append({"rho": c, "mean_degree": float(v.mean()), "std_error": float(se),
                               "z": float((v.mean() - c) / se) if se > 0 else None})
    d = np.asarray(densities)
    dse = d.std(ddof=1) / np.sqrt(d.size) if d.size > 1 else float("nan")
    out["density"] = {"mean": float(d.mean()), "std_error": float(dse),
                      "z": float((d.mean() - tc.epsilon) / dse) if dse > 0 else None}
    return out


# -- pipeline ------------------------------------------------------------------

def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(cfg: RunConfig) -> dict:
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    gen_cfg = GeneratorConfig(cfg.seed, cfg.replicates, cfg.permute)
    manifest = {"config": cfg.semantic(), "config_hash": cfg.config_hash(), "complete": False,
                "stages": {}, "seed": cfg.seed,
                "replicate_seeds": [child_seed(cfg.seed, r) for r in range(cfg.replicates)]}
    _write_manifest(out, manifest)

    def stage(name, fn):
        try:
            t0 = time.perf_counter()
            res = fn()
            manifest["stages"][name] = {"status": "ok", "seconds": round(time.perf_counter() - t0, 3)}
            return res
        except Exception as exc:
            manifest["stages"][name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            _write_manifest(out, manifest)
            raise StageError(name, exc) from exc

    if cfg.synapses is not None:
        _, g = stage("ingest", lambda: reference_from_synapses(cfg.synapses, cfg.variant, cfg.trim))
    else:
        g = stage("ingest", lambda: trim_top_degree(read_graph_csv(*graph_paths(cfg.graph)),
                                                    VARIANTS.get(cfg.variant, (None, cfg.trim))[1]
                                                    if cfg.variant != "custom" else cfg.trim))
    write_graph_csv(g, *graph_paths(out / "reference"))
    result = stage("fit", lambda: stage_fit(g, out, cfg.grid_size, cfg.convention))
    fit = result.model
    sims = stage("generate", lambda: stage_generate(g, fit, out / "sims", gen_cfg, cfg.workers))
    ref_stats, stats = stage("stats", lambda: stage_stats(g, sims, out, cfg.centralities, cfg.workers))
    if len(stats) >= 2:
        stage("compare", lambda: stage_compare(ref_stats, stats, out))
    if cfg.baselines:
        stage("baseline", lambda: stage_baseline(g, fit, out / "baselines", cfg.seed,
                                                 min(cfg.replicates, 20), cfg.baselines,
                                                 cfg.baseline_weights))
    manifest["complete"] = True
    _write_manifest(out, manifest)
    return manifest


# -- argument parsing -----------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--synapses")
    p.add_argument("--graph", help="prefix of <prefix>.vertices.csv / <prefix>.edges.csv")
    p.add_argument("--variant", choices=[*VARIANTS, "custom"])
    p.add_argument("--trim", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--convention", choices=["ordered", "unordered"])
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-permute", dest="permute", action="store_false", default=None)
    p.add_argument("--baselines", help="comma-separated subset of chung-lu,inverse-power; empty for none")
    p.add_argument("--baseline-weights", choices=["degrees", "rho"])
    p.add_argument("--no-centralities", dest="centralities", action="store_false", default=None)
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int)


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if f.name == "baselines":
            val = [b for b in val.split(",") if b]
        setattr(cfg, f.name, val)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geocl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="synapse CSV -> full/named graphs (vertex/edge CSV)")
    p.add_argument("--synapses", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--full-trim", type=int, default=1)
    p.add_argument("--named-trim", type=int, default=2)

    p = sub.add_parser("fit", help="fit F1/F2 logistics, geometric weights and intensities")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--convention", choices=["ordered", "unordered"], default="ordered")

    p = sub.add_parser("generate", help="sample an ensemble from a fit")
    p.add_argument("--graph", required=True)
    p.add_argument("--fit", required=True, help="fit.json from the fit stage")
    p.add_argument("--out", required=True)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-permute", dest="permute", action="store_false")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("stats", help="statistics of the reference graph and every simulation")
    p.add_argument("--graph", required=True)
    p.add_argument("--sims", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-centralities", dest="centralities", action="store_false")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("compare", help="ensemble summary and reference comparison table")
    p.add_argument("--stats", required=True, help="stats.csv of the simulations")
    p.add_argument("--reference", required=True, help="reference_stats.csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sandbox", help="torus check that mean degree equals intensity")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("baseline", help="classical Chung-Lu and inverse-power comparisons")
    p.add_argument("--graph", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--weights", choices=["degrees", "rho"], default="degrees")
    p.add_argument("--models", default="chung-lu,inverse-power")

    p = sub.add_parser("run", help="whole pipeline from one configuration")
    _add_run_flags(p)
    return parser


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "ingest":
        summary = stage_ingest(args.synapses, Path(args.out), args.full_trim, args.named_trim)
        print(json.dumps(summary, indent=2, sort_keys=True))
    elif cmd == "fit":
        g = read_graph_csv(*graph_paths(args.graph))
        result = stage_fit(g, Path(args.out), args.grid_size, args.convention)
        print((Path(args.out) / "fit.json").read_text(), end="")
        if not result.model.chung_lu.ok:
            log.warning("Chung-Lu condition fails for %d vertices", len(result.model.chung_lu.violators))
    elif cmd == "generate":
        if args.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        g = read_graph_csv(*graph_paths(args.graph))
        fit = load_fit(args.fit, g)
        stage_generate(g, fit, Path(args.out), GeneratorConfig(args.seed, args.replicates, args.permute),
                       args.workers)
    elif cmd == "stats":
        g = read_graph_csv(*graph_paths(args.graph))
        sims = load_simulations(g, Path(args.sims))
        stage_stats(g, sims, Path(args.out), args.centralities, args.workers)
    elif cmd == "compare":
        stats = metrics.read_stats_csv(args.stats)
        ref = metrics.read_stats_csv(args.reference)[0]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = stage_compare(ref, stats, out)
        print(metrics.comparison_table(summary), end="")
    elif cmd == "sandbox":
        if args.replicates < 2:
            raise ConfigError("sandbox needs at least 2 replicates")
        rep = sandbox(args.dim, args.n, args.replicates, args.seed)
        text = json.dumps(rep, indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n")
        print(text)
    elif cmd == "baseline":
        g = read_graph_csv(*graph_paths(args.graph))
        fit = load_fit(args.fit, g)
        stage_baseline(g, fit, Path(args.out), args.seed, args.replicates,
                       [m for m in args.models.split(",") if m], args.weights)
    elif cmd == "run":
        manifest = run_pipeline(_config_from_args(args))
        print(json.dumps({k: manifest[k] for k in ("config_hash", "complete", "stages")}, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc.cause)
    except Exception as exc:
        code = _code_for(exc)
        if code is None:
            raise
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


def _code_for(exc: BaseException) -> int | None:
    if isinstance(exc, (ConfigError, TypeError)):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, GraphError, FileNotFoundError)):
        return EXIT_DATA
    if isinstance(exc, (FitError, metrics.SpectrumError, metrics.EigencentralityError,
                        np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return None


if __name__ == "__main__":
    sys.exit(main())
