"""Command-line entry point: ``generate``, ``discover``, ``run``, ``verify``, ``score``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentConfig, VerifyConfig, run_experiment, verify_soundness
from .citest import DataCITester, read_log, write_log
from .discovery import ALGORITHMS, SearchOptions
from .exceptions import ConfigError, UndefinedMetricError
from .graph import from_text, to_text
from .metrics import sample_gain, shd, skeleton_shd
from .synth import MISSINGNESS_KINDS, GenConfig, generate, read_csv, write_csv, write_manifest

EXIT_OK, EXIT_ERROR, EXIT_UNSOUND = 0, 1, 2


def _pair(text: str) -> tuple[int, int]:
    lo, hi = (int(x) for x in text.split(","))
    return lo, hi


def _fpair(text: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _add_gen_flags(p: argparse.ArgumentParser, defaults: bool) -> None:
    """Generation flags; with ``defaults=False`` they only override a config file."""
    d = GenConfig() if defaults else None
    g = p.add_argument_group("generation")
    g.add_argument("--p", type=int, default=d and d.p, help="number of SEM variables")
    g.add_argument("--expected-neighbors", type=float, default=d and d.expected_neighbors)
    g.add_argument("--n-latent-confounders", type=_pair, default=d and d.n_latent_confounders, metavar="LO,HI")
    g.add_argument("--n-missingness-drivers", type=_pair, default=d and d.n_missingness_drivers, metavar="LO,HI")
    g.add_argument("--vars-per-driver", type=_pair, default=d and d.vars_per_driver, metavar="LO,HI")
    g.add_argument("--r-range", type=_fpair, default=d and d.r_range, metavar="LO,HI")
    g.add_argument("--seed", type=int, default=d and d.seed)
    g.add_argument("--missingness", choices=MISSINGNESS_KINDS, default="MNAR" if defaults else None)


GEN_KEYS = ("p", "expected_neighbors", "n_latent_confounders", "n_missingness_drivers",
            "vars_per_driver", "r_range", "seed")


def cmd_generate(args) -> int:
    cfg = GenConfig(**{k: getattr(args, k) for k in GEN_KEYS})
    _, data, system = generate(cfg, args.n, args.missingness, np.random.default_rng(cfg.seed))
    out = Path(args.out)
    write_csv(data, out)
    if args.emit_truth:
        write_manifest(out.with_suffix(".json"), seed=cfg.seed, cfg=cfg, system=system,
                       extra={"n": args.n, "missingness": data.info})
    print(f"wrote {out} ({data.n} rows, {data.p} columns, {data.missing_fraction().mean():.3f} missing)")
    return EXIT_OK


def cmd_discover(args) -> int:
    data = read_csv(args.data)
    tester = DataCITester(data, args.strategy, args.alpha)
    opts = SearchOptions(max_cond_size=args.max_cond_size)
    pag = ALGORITHMS[args.algorithm](tester, opts=opts)
    text = pag.to_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        Path(args.summary).write_text(pag.summary_json(tester))
    if args.log:
        write_log(tester.log, args.log)
    return EXIT_OK


def cmd_run(args) -> int:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else ExperimentConfig().to_dict()
    overrides = {k: getattr(args, k) for k in (*GEN_KEYS, "missingness", "sample_sizes", "n_replicates",
                                               "algorithms", "strategies", "alpha", "output_dir",
                                               "max_cond_size", "workers")}
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig.from_dict(base)
    records = run_experiment(cfg, manifests=not args.no_manifests)
    failed = sum(r.get("status") != "ok" for rec in records for r in rec.rows)
    print(f"{len(records)} replicates, {failed} failed runs; results in {cfg.output_dir} (config {cfg.config_hash()})")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = VerifyConfig(n_replicates=args.n_replicates, p_range=args.p_range, seed=args.seed,
                       missingness=tuple(args.missingness), algorithms=tuple(args.algorithms))
    report = verify_soundness(cfg)
    print(f"{report.checks} paired oracle runs, {len(report.counterexamples)} counterexamples")
    if args.report:
        Path(args.report).write_text(json.dumps(
            {"checks": report.checks, "skipped": report.skipped, "counterexamples": report.counterexamples},
            indent=2, sort_keys=True) + "\n")
    for cx in report.counterexamples:
        print(f"counterexample: {cx['missingness']} {cx['algorithm']} seed={cx['seed']} replicate={cx['replicate']}")
    return EXIT_OK if report.passed else EXIT_UNSOUND


def cmd_score(args) -> int:
    learned = from_text(Path(args.learned).read_text())
    truth = from_text(Path(args.truth).read_text())
    row = {"shd": shd(learned, truth), "skeleton_shd": skeleton_shd(learned, truth)}
    if args.log and args.reference_log:
        try:
            row["pct_sample_gain"] = sample_gain(read_log(args.log), read_log(args.reference_log))
        except UndefinedMetricError:
            row["pct_sample_gain"] = ""
    print(",".join(row))
    print(",".join(str(v) for v in row.values()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="testwise-fci", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample one incomplete dataset")
    _add_gen_flags(g, defaults=True)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--out", required=True, help="CSV path; the manifest goes next to it as .json")
    g.add_argument("--emit-truth", action="store_true", help="write the ground-truth manifest")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("discover", help="learn a PAG from a CSV with missing cells")
    d.add_argument("data")
    d.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="FCI")
    d.add_argument("--strategy", default="Wrapper", choices=["TestWise", "ListWise", "Wrapper", "Heuristic"])
    d.add_argument("--alpha", type=float, default=0.01)
    d.add_argument("--max-cond-size", type=int)
    d.add_argument("--out", help="graph text output (default: stdout)")
    d.add_argument("--summary", help="JSON summary path")
    d.add_argument("--log", help="CSV log of executed CI tests")
    d.set_defaults(func=cmd_discover)

    r = sub.add_parser("run", help="run a benchmark experiment")
    r.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    _add_gen_flags(r, defaults=False)
    r.add_argument("--sample-sizes", type=int, nargs="+")
    r.add_argument("--n-replicates", type=int)
    r.add_argument("--algorithms", nargs="+", choices=sorted(ALGORITHMS))
    r.add_argument("--strategies", nargs="+", choices=["TestWise", "ListWise", "Wrapper", "Heuristic", "Oracle"])
    r.add_argument("--alpha", type=float)
    r.add_argument("--output-dir")
    r.add_argument("--max-cond-size", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--no-manifests", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="paired oracle soundness check; exit 2 on a counterexample")
    v.add_argument("--n-replicates", type=int, default=100)
    v.add_argument("--p-range", type=_pair, default=(6, 10), metavar="LO,HI")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--missingness", nargs="+", default=["MNAR", "MCAR"], choices=["MNAR", "MAR", "MCAR"])
    v.add_argument("--algorithms", nargs="+", default=["FCI", "RFCI"], choices=sorted(ALGORITHMS))
    v.add_argument("--report", help="write the JSON report here")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("score", help="SHD between two graph files")
    s.add_argument("learned")
    s.add_argument("truth")
    s.add_argument("--log", help="CI log of the learned graph's run")
    s.add_argument("--reference-log", help="list-wise CI log for the sample gain")
    s.set_defaults(func=cmd_score)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
