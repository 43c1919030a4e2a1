"""Command-line harness: ``nfisac {generate,estimate,evaluate,perturb,tradeoff,selfcheck}``.

Exit codes: 0 success, 1 validation error, 2 runtime or numeric error,
3 self-check failure.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from .config import RunConfig
from .dataset import (add_complex_noise, apply_phase_offset, build_manifest, read_container, rms,
                      snr_equivalent_db, write_container, write_labels_csv)
from .exceptions import (ContainerError, EstimatorNotApplicableError, InvalidConfigError,
                         SingularityError, SolverError)
from .metrics import REPORT_COLUMNS, aggregate
from .pipeline import (FAILED, PREDICTION_COLUMNS, build_dataset, config_from_manifest,
                       estimate_samples)
from .selfcheck import run_selfcheck
from .tradeoff import NOT_MET, RATE_COLUMNS, ergodic_rate_analytic, qos_min_bandwidth, rate_table, read_curve_csv

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_SELFCHECK = 0, 1, 2, 3
SENSITIVITY_COLUMNS = ("kind", "level", "snr_eq_db", "rms_signal", "rms_perturbation", "container")
QOS_COLUMNS = ("target", "tau_cls", "tau_loc_m", "k_s_star", "rate")
PERTURB_KINDS = ("noise", "phase")

log = logging.getLogger("nfisac")


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def _load_config(args):
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(seed=int(args.seed))
    return cfg


def _out_dir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _parse_levels(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidConfigError(f"--levels must be a comma-separated list of numbers, got {text!r}") from exc


# -- subcommands ----------------------------------------------------------

def cmd_generate(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    samples, manifest = build_dataset(cfg, workers=args.workers)
    path = os.path.join(out, cfg.output_name("container"))
    n = write_container(samples, manifest, path)
    write_labels_csv(manifest, os.path.join(out, cfg.output_name("labels")))
    with open(os.path.join(out, cfg.output_name("manifest")), "w", encoding="utf-8") as fh:
        json.dump({"config": manifest.config, "splits": manifest.splits,
                   "records": manifest.records}, fh, sort_keys=True, indent=1)
        fh.write("\n")
    log.info("wrote %d samples (%d bytes) to %s", len(samples), n, path)
    return EXIT_OK


def cmd_estimate(args):
    samples, manifest = read_container(args.dataset)
    out = _out_dir(args)
    rows = []
    if samples:
        cfg = config_from_manifest(manifest)
        name = (args.estimator or cfg.estimator_name()).replace("-", "_")
        grid = cfg.grid()
        rows = estimate_samples(samples, cfg.array(), grid.selected_frequencies, name,
                                cfg.estimator_options(name), workers=args.workers)
    name_out = "predictions.csv"
    if manifest.config.get("run"):
        name_out = config_from_manifest(manifest).output_name("predictions")
    _write_csv(os.path.join(out, name_out), PREDICTION_COLUMNS, rows)
    failed = sum(1 for r in rows if r[4] == FAILED)
    log.info("estimated %d samples (%d failed)", len(rows), failed)
    return EXIT_OK


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(PREDICTION_COLUMNS):
            raise InvalidConfigError(f"{path}: expected columns {','.join(PREDICTION_COLUMNS)}")
        return list(reader)


def evaluate_rows(pred_rows, samples):
    """Join predictions to samples by id and aggregate; failed rows are skipped."""
    truth = {s.sample_id: s.truth for s in samples}
    unknown = sorted({r["id"] for r in pred_rows} - set(truth))
    if unknown:
        raise InvalidConfigError(f"predictions reference unknown ids: {', '.join(unknown[:5])}")
    good = [r for r in sorted(pred_rows, key=lambda r: r["id"]) if r["score"] != FAILED]
    if not good:
        raise InvalidConfigError("no successful predictions to evaluate")
    rh = [float(r["range_hat_m"]) for r in good]
    ah = [float(r["azimuth_hat_rad"]) for r in good]
    rt = [truth[r["id"]].range for r in good]
    at = [truth[r["id"]].azimuth for r in good]
    return aggregate(rh, ah, rt, at)


def cmd_evaluate(args):
    samples, _ = read_container(args.dataset)
    report = evaluate_rows(read_predictions(args.predictions), samples)
    out = _out_dir(args)
    _write_csv(os.path.join(out, "metrics.csv"), REPORT_COLUMNS, [report.as_row()])
    log.info("planar MAE %.4f m over %d samples", report.planar_mae, report.sample_count)
    return EXIT_OK


def perturb_samples(samples, kind, level, seed):
    if kind == "noise":
        return [add_complex_noise(s, level, seed=[int(seed), i])[0] for i, s in enumerate(samples)]
    return [apply_phase_offset(s, math.radians(level)) for s in samples]


def cmd_perturb(args):
    if args.kind not in PERTURB_KINDS:
        raise InvalidConfigError(f"--kind must be one of {PERTURB_KINDS}, got {args.kind!r}")
    levels = _parse_levels(args.levels)
    if args.kind == "noise" and any(v < 0 for v in levels):
        raise InvalidConfigError("noise levels must be nonnegative")
    samples, manifest = read_container(args.dataset)
    out = _out_dir(args)
    seed = 0 if args.seed is None else int(args.seed)
    signal = math.sqrt(np.mean([rms(s.tensor) ** 2 for s in samples])) if samples else 0.0
    rows = []
    for level in levels:
        name = f"{args.kind}_{level:g}.nfct"
        path = os.path.join(out, name)
        if level == 0:
            write_container(samples, manifest, path)
            perturbed = samples
        else:
            perturbed = perturb_samples(samples, args.kind, level, seed)
            config = dict(manifest.config)
            config["perturbation"] = {"kind": args.kind, "level": level, "seed": seed,
                                      "unit": "sigma/RMS(H)" if args.kind == "noise" else "deg"}
            write_container(perturbed, build_manifest(perturbed, manifest.splits, config), path)
        diff = math.sqrt(np.mean([rms(p.tensor.astype(np.complex128) - s.tensor.astype(np.complex128)) ** 2
                                  for p, s in zip(perturbed, samples)])) if samples else 0.0
        snr = snr_equivalent_db(level) if args.kind == "noise" else math.nan
        rows.append((args.kind, level, snr, signal, diff, name))
    _write_csv(os.path.join(out, "sensitivity.csv"), SENSITIVITY_COLUMNS, rows)
    return EXIT_OK


def cmd_tradeoff(args):
    cfg = _load_config(args)
    out = _out_dir(args)
    rc = cfg.rate_config()
    ks = [int(v) for v in _parse_levels(args.levels)] if args.levels else cfg.rate_k_values()
    _write_csv(os.path.join(out, cfg.output_name("rates")), RATE_COLUMNS,
               rate_table(rc, ks, with_mc=not args.no_mc))
    if args.curve:
        curve = read_curve_csv(args.curve)
        rows = []
        for name, targets in cfg.qos_targets().items():
            k_star = qos_min_bandwidth(curve, targets)
            rate = ergodic_rate_analytic(rc, k_star) if k_star != NOT_MET else NOT_MET
            rows.append((name, targets.tau_cls, targets.tau_loc, k_star if k_star == NOT_MET else int(k_star), rate))
        _write_csv(os.path.join(out, cfg.output_name("qos")), QOS_COLUMNS, rows)
        for row in rows:
            log.info("%s: K_s* = %s", row[0], row[3])
    return EXIT_OK


def cmd_selfcheck(args):
    results = run_selfcheck()
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_SELFCHECK if failed else EXIT_OK


# -- entry point ------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="nfisac", description="Near-field extended-target ISAC lab")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, out=True):
        if config:
            p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        if out:
            p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("generate", help="simulate a dataset container")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate", help="run a classical baseline on a dataset")
    p.add_argument("dataset")
    p.add_argument("--estimator", choices=("periodogram", "matched-filter", "matched_filter"))
    common(p, config=False)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="score predictions against dataset labels")
    p.add_argument("predictions")
    p.add_argument("dataset")
    common(p, config=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("perturb", help="noise or phase sensitivity sweep")
    p.add_argument("dataset")
    p.add_argument("--kind", required=True)
    p.add_argument("--levels", default="0,0.02,0.05,0.10,0.15",
                   help="noise scales (sigma/RMS) or phase offsets in degrees")
    common(p, config=False)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("tradeoff", help="ergodic-rate table and QoS bandwidth search")
    p.add_argument("--curve", help="CSV with columns k_s,accuracy,planar_mae_m")
    p.add_argument("--levels", help="sensing tone counts, e.g. 1,2,4,8,16")
    p.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo column")
    common(p)
    p.set_defaults(func=cmd_tradeoff)

    p = sub.add_parser("selfcheck", help="physics and operator invariant suite")
    common(p, config=False, out=False)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (SingularityError, SolverError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (InvalidConfigError, ContainerError, EstimatorNotApplicableError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, ArithmeticError, MemoryError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
