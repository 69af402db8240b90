"""Experiment runner: generate, inject missingness, learn, score, write CSV."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from .citest import DataCITester, OracleCITester, Strategy
from .discovery import ALGORITHMS, SearchOptions
from .exceptions import ConfigError
from .metrics import ScoreReport, mean_effective_n, sample_gain, shd, skeleton_shd
from .synth import INJECTORS, MISSINGNESS_KINDS, GenConfig, generate_dag, sample_sem, write_manifest
from .system import CausalSystem, check_assumption1, check_assumption2, system_to_text

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "replicate", "seed", "config_hash", "missingness", "n", "p_observed", "algorithm", "strategy",
    "status", "shd", "skeleton_shd", "avg_effective_n", "n_queries", "n_confirm_queries",
    "n_degenerate", "pct_sample_gain",
)
SUMMARY_COLUMNS = (
    "missingness", "algorithm", "strategy", "n", "n_runs", "n_failed", "mean_shd",
    "mean_skeleton_shd", "mean_rank", "mean_avg_effective_n", "mean_sample_gain",
)
STRATEGY_ORDER = [s.value for s in Strategy]


@dataclass
class ExperimentConfig:
    p: int = 10
    expected_neighbors: float = 2.0
    n_latent_confounders: tuple[int, int] = (0, 4)
    n_missingness_drivers: tuple[int, int] = (1, 2)
    vars_per_driver: tuple[int, int] = (3, 6)
    r_range: tuple[float, float] = (0.1, 0.5)
    seed: int = 0
    sample_sizes: tuple[int, ...] = (100, 250, 500, 1000)
    n_replicates: int = 50
    missingness: str = "MNAR"
    algorithms: tuple[str, ...] = ("FCI", "RFCI")
    strategies: tuple[str, ...] = ("Wrapper", "Heuristic", "ListWise")
    alpha: float = 0.01
    output_dir: str = "results"
    max_cond_size: int | None = None
    workers: int = 1

    def __post_init__(self):
        for name in ("n_latent_confounders", "n_missingness_drivers", "vars_per_driver",
                     "r_range", "sample_sizes", "algorithms", "strategies"):
            setattr(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        self.gen_config()
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise ConfigError("sample_sizes must be a non-empty list of positive integers")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be positive")
        if self.missingness not in MISSINGNESS_KINDS:
            raise ConfigError(f"missingness must be one of {MISSINGNESS_KINDS}")
        if not set(self.algorithms) <= set(ALGORITHMS):
            raise ConfigError(f"algorithms must be drawn from {sorted(ALGORITHMS)}")
        for s in self.strategies:
            Strategy(s)

    def gen_config(self) -> GenConfig:
        return GenConfig(self.p, self.expected_neighbors, self.n_latent_confounders,
                         self.n_missingness_drivers, self.vars_per_driver, self.r_range, self.seed)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def config_hash(self) -> str:
        """Digest of everything that determines the generated data and the scores."""
        d = self.to_dict()
        for k in ("output_dir", "workers"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


@dataclass
class RunRecord:
    replicate: int
    seed: int
    config_hash: str
    rows: list[dict] = field(default_factory=list)
    reports: dict[tuple[int, str, str], ScoreReport] = field(default_factory=dict)
    wall_time: float = 0.0


def replicate_rng(seed: int, replicate: int, stream: int) -> np.random.Generator:
    """Independent PCG64 stream for one (replicate, purpose) pair."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, stream)))


def target_selection(system: CausalSystem, missingness: str) -> frozenset[int]:
    """Selection set defining the oracle graph: all indicators for MNAR, S otherwise."""
    return system.listwise_selection if missingness == "MNAR" else system.selection


def make_replicate(cfg: ExperimentConfig, replicate: int, n: int):
    """Model, dataset and system for one replicate at sample size ``n``.

    The missingness structure (latents, drivers, targets, r) is drawn from a
    stream shared by all sample sizes of the replicate, so only the data change
    with ``n``.
    """
    gen = cfg.gen_config()
    model = generate_dag(gen, replicate_rng(cfg.seed, replicate, 0))
    # stream 0: graph, stream 1: missingness structure, stream 2 + n: data of size n
    full = sample_sem(model, n, replicate_rng(cfg.seed, replicate, 2 + n))
    data, system = INJECTORS[cfg.missingness](model, full, gen, replicate_rng(cfg.seed, replicate, 1))
    return model, data, system


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


def run_replicate(cfg: ExperimentConfig, replicate: int, manifest_dir: Path | None = None) -> RunRecord:
    t0 = time.perf_counter()
    chash = cfg.config_hash()
    rec = RunRecord(replicate, cfg.seed, chash)
    opts = SearchOptions(max_cond_size=cfg.max_cond_size)
    for n in cfg.sample_sizes:
        _, data, system = make_replicate(cfg, replicate, n)
        if manifest_dir is not None:
            write_manifest(manifest_dir / f"rep{replicate:04d}_n{n}.json", seed=cfg.seed, cfg=cfg.gen_config(),
                           system=system, extra={"replicate": replicate, "n": n, "config_hash": chash,
                                                 "missingness": data.info})
        sel = target_selection(system, cfg.missingness)
        for alg in cfg.algorithms:
            run = ALGORITHMS[alg]
            truth = run(OracleCITester(system, Strategy.ORACLE, selection=sel), opts=opts)
            results = {}
            for strat in cfg.strategies:
                s = Strategy(strat)
                try:
                    if s is Strategy.ORACLE:
                        tester = OracleCITester(system, s, selection=sel)
                    else:
                        tester = DataCITester(data, s, cfg.alpha)
                    pag = run(tester, opts=opts)
                    results[strat] = (pag, tester, None)
                except Exception as exc:  # recorded as a failed row; the run continues
                    log.warning("replicate %d n=%d %s/%s failed: %s", replicate, n, alg, strat, exc)
                    results[strat] = (None, None, f"failed:{type(exc).__name__}")
            reference = None
            if "ListWise" in results and results["ListWise"][1] is not None:
                reference = results["ListWise"][1].primary_log()
            for strat in cfg.strategies:
                pag, tester, err = results[strat]
                row = {"replicate": replicate, "seed": cfg.seed, "config_hash": chash,
                       "missingness": cfg.missingness, "n": n, "p_observed": data.p,
                       "algorithm": alg, "strategy": strat}
                if err is not None:
                    rec.rows.append({**row, "status": err})
                    continue
                own = tester.primary_log()
                report = ScoreReport(shd(pag, truth), skeleton_shd(pag, truth))
                avg = None
                if any(d.effective_n is not None for d in own):
                    avg = mean_effective_n(own)
                    report.avg_effective_n[strat] = avg
                report.n_queries[strat] = len(own)
                gain = None
                if reference and strat != "ListWise" and avg is not None:
                    gain = sample_gain(own, reference)
                    report.pct_sample_gain = gain
                rec.reports[(n, alg, strat)] = report
                rec.rows.append({
                    **row, "status": "ok", "shd": report.shd, "skeleton_shd": report.skeleton_shd,
                    "avg_effective_n": avg, "n_queries": len(own),
                    "n_confirm_queries": len(tester.log) - len(own) if strat == Strategy.WRAPPER.value else 0,
                    "n_degenerate": sum(d.degenerate for d in own), "pct_sample_gain": gain,
                })
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_one(args):
    cfg_dict, replicate, manifest_dir = args
    return run_replicate(ExperimentConfig.from_dict(cfg_dict), replicate,
                         Path(manifest_dir) if manifest_dir else None)


def write_rows(path: Path, columns: Iterable[str], rows: Iterable[dict]) -> None:
    columns = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def summarize(rows: list[dict], cfg: ExperimentConfig) -> list[dict]:
    ok = [r for r in rows if r.get("status") == "ok"]
    ranks: dict[tuple, list[float]] = {}
    by_cell: dict[tuple, list[dict]] = {}
    for r in ok:
        by_cell.setdefault((r["replicate"], r["n"], r["algorithm"]), []).append(r)
    for cell_rows in by_cell.values():
        for r, rank in zip(cell_rows, rankdata([r["shd"] for r in cell_rows])):
            ranks.setdefault((r["algorithm"], r["strategy"], r["n"]), []).append(float(rank))
    out = []
    for alg in cfg.algorithms:
        for strat in cfg.strategies:
            for n in cfg.sample_sizes:
                sel = [r for r in rows if (r["algorithm"], r["strategy"], r["n"]) == (alg, strat, n)]
                good = [r for r in sel if r.get("status") == "ok"]
                gains = [r["pct_sample_gain"] for r in good if r.get("pct_sample_gain") is not None]
                effs = [r["avg_effective_n"] for r in good if r.get("avg_effective_n") is not None]
                out.append({
                    "missingness": cfg.missingness, "algorithm": alg, "strategy": strat, "n": n,
                    "n_runs": len(good), "n_failed": len(sel) - len(good),
                    "mean_shd": float(np.mean([r["shd"] for r in good])) if good else None,
                    "mean_skeleton_shd": float(np.mean([r["skeleton_shd"] for r in good])) if good else None,
                    "mean_rank": float(np.mean(ranks[(alg, strat, n)])) if (alg, strat, n) in ranks else None,
                    "mean_avg_effective_n": float(np.mean(effs)) if effs else None,
                    "mean_sample_gain": float(np.mean(gains)) if gains else None,
                })
    return out


def _sort_key(cfg: ExperimentConfig):
    sizes = list(cfg.sample_sizes)
    algs = list(cfg.algorithms)
    strats = list(cfg.strategies)
    return lambda r: (r["replicate"], sizes.index(r["n"]), algs.index(r["algorithm"]), strats.index(r["strategy"]))


def run_experiment(cfg: ExperimentConfig, manifests: bool = True) -> list[RunRecord]:
    """Run every replicate and write ``results.csv``, ``summary.csv`` and ``config.json``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_dir = out / "manifests" if manifests else None
    if manifest_dir is not None:
        manifest_dir.mkdir(exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    records: list[RunRecord] = []
    try:
        if cfg.workers > 1:
            jobs = [(cfg.to_dict(), r, str(manifest_dir) if manifest_dir else None) for r in range(cfg.n_replicates)]
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                records = list(pool.map(_run_one, jobs))
        else:
            for r in range(cfg.n_replicates):
                records.append(run_replicate(cfg, r, manifest_dir))
    finally:
        records.sort(key=lambda rec: rec.replicate)
        rows = sorted((row for rec in records for row in rec.rows), key=_sort_key(cfg))
        write_rows(out / "results.csv", RESULT_COLUMNS, rows)
        write_rows(out / "summary.csv", SUMMARY_COLUMNS, summarize(rows, cfg))
        write_rows(out / "timing.csv", ("replicate", "wall_time"),
                   ({"replicate": rec.replicate, "wall_time": rec.wall_time} for rec in records))
    return records


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- soundness checks ------------------------------------------------------------


@dataclass
class VerifyConfig:
    n_replicates: int = 100
    p_range: tuple[int, int] = (6, 10)
    expected_neighbors: float = 2.0
    missingness: tuple[str, ...] = ("MNAR", "MCAR")
    algorithms: tuple[str, ...] = ("FCI", "RFCI")
    seed: int = 0


@dataclass
class SoundnessReport:
    checks: int = 0
    counterexamples: list[dict] = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return not self.counterexamples


# paired strategies: (strategy under test, reference oracle); the reference uses the
# fixed selection given by the second element
SOUNDNESS_PAIRS = {
    "MNAR": (Strategy.WRAPPER, "listwise"),
    "MAR": (Strategy.WRAPPER, "listwise"),
    "MCAR": (Strategy.HEURISTIC, "selection"),
}


def soundness_system(cfg: VerifyConfig, kind: str, replicate: int) -> CausalSystem:
    rng = replicate_rng(cfg.seed, replicate, 100 + MISSINGNESS_KINDS.index(kind))
    p = int(rng.integers(cfg.p_range[0], cfg.p_range[1] + 1))
    # keep at least three observed variables after hiding confounders and drivers
    gen = GenConfig(p=p, expected_neighbors=min(cfg.expected_neighbors, p - 1),
                    n_latent_confounders=(0, max(0, min(4, p - 6))), seed=cfg.seed)
    model = generate_dag(gen, rng)
    data = sample_sem(model, 20, rng)
    return INJECTORS[kind](model, data, gen, rng)[1]


def compare_oracles(system: CausalSystem, strategy: Strategy, reference: str, algorithm: str,
                    opts: SearchOptions | None = None) -> tuple[bool, object, object]:
    sel = system.listwise_selection if reference == "listwise" else system.selection
    run = ALGORITHMS[algorithm]
    got = run(OracleCITester(system, strategy), opts=opts)
    want = run(OracleCITester(system, Strategy.ORACLE, selection=sel), opts=opts)
    return got == want, got, want


def verify_soundness(cfg: VerifyConfig, systems: Iterable[tuple[str, CausalSystem]] | None = None) -> SoundnessReport:
    """Paired oracle runs: wrapper vs. list-wise selection, heuristic vs. S under MCAR.

    Systems that break the assumption the guarantee rests on are still run
    but counted in ``skipped`` rather than as counterexamples.
    """
    report = SoundnessReport()
    if systems is None:
        systems = ((kind, soundness_system(cfg, kind, r), r)
                   for kind in cfg.missingness for r in range(cfg.n_replicates))
    else:
        systems = ((kind, s, None) for kind, s in systems)
    for kind, system, rep in systems:
        strategy, reference = SOUNDNESS_PAIRS[kind]
        holds = check_assumption2(system) if kind == "MCAR" else check_assumption1(system)
        for alg in cfg.algorithms:
            same, got, want = compare_oracles(system, strategy, reference, alg)
            report.checks += 1
            if same:
                continue
            if not holds:
                report.skipped += 1
                continue
            report.counterexamples.append({
                "missingness": kind, "algorithm": alg, "seed": cfg.seed, "replicate": rep,
                "system": system_to_text(system), "got": got.to_text(), "want": want.to_text(),
            })
    return report
