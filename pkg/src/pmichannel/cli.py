"""Command-line entry points for the experiment drivers.

Subcommands: crb-experiment, fdd-experiment, ablate-tau, ablate-init,
verify-theory, dataset-make, dataset-inspect.  Options may also be given
through a JSON config file (--config); explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .dataset import read_dataset, write_dataset


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=str, default=None, help="JSON file with defaults")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", type=str, default=None, help="output directory")
    sp.add_argument("--workers", type=int, default=None)


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """Config file first, command line on top, built-in defaults last."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(json.loads(Path(args.config).read_text()))
    for key, val in vars(args).items():
        if key in ("command", "config"):
            continue
        if val is not None:
            merged[key] = val
    return merged


def _outdir(opts: dict) -> Path:
    out = Path(opts.get("out") or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmichannel")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("crb-experiment", help="MSE of the MLE against the trace CRB")
    _add_common(sp)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--rounds", type=_int_list, default=None, help="comma-separated T values")
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--dataset", type=str, default=None)

    sp = sub.add_parser("fdd-experiment", help="beam precision of all methods vs rounds")
    _add_common(sp)
    sp.add_argument("--r", type=int, default=None, help="streams (1 or 2)")
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--rounds", type=_int_list, default=None)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--scheme", type=str, default=None,
                    choices=["haar-random", "structured-outer-inner"])
    sp.add_argument("--methods", type=str, default=None, help="comma-separated method names")
    sp.add_argument("--dataset", type=str, default=None)

    for name, help_text in (
        ("ablate-tau", "temperature sweep for the subspace MLE"),
        ("ablate-init", "initialization comparison for the subspace MLE"),
    ):
        sp = sub.add_parser(name, help=help_text)
        _add_common(sp)
        sp.add_argument("--grid", type=str, default=None, help="comma-separated grid")
        sp.add_argument("--rounds", type=_int_list, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--r", type=int, default=None)
        sp.add_argument("--dataset", type=str, default=None)

    sp = sub.add_parser("verify-theory", help="run every analytic-identity check")
    _add_common(sp)
    sp.add_argument("--moment-samples", type=int, default=None, dest="moment_samples")
    sp.add_argument("--secant-samples", type=int, default=None, dest="secant_samples")
    sp.add_argument("--slope-trials", type=int, default=None, dest="slope_trials")
    sp.add_argument("--skip-slope", action="store_true", default=None, dest="skip_slope")

    sp = sub.add_parser("dataset-make", help="write a synthetic ray-model dataset")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--n-rx", type=int, default=None, dest="n_rx")
    sp.add_argument("--paths", type=int, default=None)
    sp.add_argument("path", type=str, help="output file")

    sp = sub.add_parser("dataset-inspect", help="print dataset header and statistics")
    sp.add_argument("path", type=str)
    return ap


def _cmd_crb(opts: dict) -> int:
    out = _outdir(opts)
    rows = experiments.run_crb_experiment(
        d=opts["d"], p=opts["p"], tau=opts["tau"], rounds=tuple(opts["rounds"]),
        trials=opts["trials"], seed=opts["seed"], workers=opts["workers"],
        dataset=opts.get("dataset"),
    )
    experiments.write_results_csv(rows, out / "results.csv")
    experiments.write_timings_csv(rows, out / "timings.csv")
    summary = experiments.summarize_crb(rows)
    experiments.write_summary_csv(summary, out / "summary.csv")
    c = experiments.fit_inverse_t(
        np.array([rec["T"] for rec in summary]), np.array([rec["crb"] for rec in summary])
    )
    (out / "fit.txt").write_text(f"c = {c!r}\n")
    print(f"wrote {out}/results.csv, summary.csv, fit.txt (c = {c:.6g})")
    return 0


def _cmd_fdd(opts: dict) -> int:
    out = _outdir(opts)
    methods = (
        tuple(m.strip() for m in opts["methods"].split(","))
        if opts.get("methods")
        else experiments.FDD_METHODS
    )
    rows = experiments.run_fdd_experiment(
        r=opts["r"], tau=opts["tau"], rounds=tuple(opts["rounds"]),
        n_samples=opts["samples"], scheme=opts["scheme"], methods=methods,
        seed=opts["seed"], dataset=opts.get("dataset"), workers=opts["workers"],
    )
    experiments.write_results_csv(rows, out / "results.csv")
    experiments.write_timings_csv(rows, out / "timings.csv")
    experiments.write_summary_csv(experiments.summarize_fdd(rows), out / "summary.csv")
    print(f"wrote {out}/results.csv and summary.csv")
    return 0


def _cmd_ablate(opts: dict, kind: str) -> int:
    out = _outdir(opts)
    grid = None
    if opts.get("grid"):
        grid = _float_list(opts["grid"]) if kind == "tau" else opts["grid"].split(",")
    rows = experiments.run_ablation(
        kind, grid=grid, rounds=tuple(opts["rounds"]), n_samples=opts["samples"],
        seed=opts["seed"], workers=opts["workers"], r=opts["r"],
        dataset=opts.get("dataset"),
    )
    experiments.write_results_csv(rows, out / "results.csv")
    experiments.write_summary_csv(experiments.summarize_ablation(rows), out / "summary.csv")
    print(f"wrote {out}/results.csv and summary.csv")
    return 0


def _cmd_verify(opts: dict) -> int:
    out = _outdir(opts)
    records = experiments.run_theory_verification(
        seed=opts["seed"],
        moment_samples=opts["moment_samples"],
        secant_samples=opts["secant_samples"],
        slope_trials=opts["slope_trials"],
        workers=opts["workers"],
        include_slope=not opts.get("skip_slope"),
    )
    experiments.write_report_csv(records, out / "report.csv")
    failed = [rec for rec in records if not rec["passed"]]
    for rec in records:
        status = "pass" if rec["passed"] else "FAIL"
        print(f"[{status}] {rec['check']}: value={rec['value']:.4g} threshold={rec['threshold']:.4g}")
    print(f"wrote {out}/report.csv")
    return 1 if failed else 0


def _cmd_dataset_make(opts: dict) -> int:
    data = experiments.make_synthetic_dataset(
        n_samples=opts["samples"], d=opts["d"], n_rx=opts["n_rx"],
        paths=opts["paths"], seed=opts["seed"],
    )
    write_dataset(opts["path"], data)
    print(f"wrote {opts['path']}: {data.n_samples} samples, d={data.d}, n_rx={data.n_rx}")
    return 0


def _cmd_dataset_inspect(opts: dict) -> int:
    data = read_dataset(opts["path"])
    norms = np.linalg.norm(data.channels.reshape(data.n_samples, -1), axis=1)
    print(f"samples: {data.n_samples}")
    print(f"d: {data.d}")
    print(f"n_rx: {data.n_rx}")
    print(f"covariances: {'yes' if data.covariances is not None else 'no'}")
    print(f"channel norms: min={norms.min():.6g} mean={norms.mean():.6g} max={norms.max():.6g}")
    return 0


_DEFAULTS = {
    "crb-experiment": {
        "seed": 0, "out": "results", "workers": 1, "d": 16, "p": 4,
        "tau": 0.05, "rounds": [2000, 5000, 10000], "trials": 100,
    },
    "fdd-experiment": {
        "seed": 0, "out": "results", "workers": 1, "r": 1, "tau": 1.0,
        "rounds": [1, 5, 10, 20], "samples": 100,
        "scheme": "structured-outer-inner",
    },
    "ablate-tau": {
        "seed": 0, "out": "results", "workers": 1, "rounds": [5, 10],
        "samples": 50, "r": 1,
    },
    "ablate-init": {
        "seed": 0, "out": "results", "workers": 1, "rounds": [5, 10],
        "samples": 50, "r": 1,
    },
    "verify-theory": {
        "seed": 0, "out": "results", "workers": 1,
        "moment_samples": 1_000_000, "secant_samples": 100_000, "slope_trials": 50,
    },
    "dataset-make": {
        "seed": 0, "out": "results", "workers": 1, "samples": 100,
        "d": 32, "n_rx": 4, "paths": 4,
    },
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    if cmd == "dataset-inspect":
        return _cmd_dataset_inspect({"path": args.path})
    opts = _merge(args, _DEFAULTS[cmd])
    if cmd == "crb-experiment":
        return _cmd_crb(opts)
    if cmd == "fdd-experiment":
        return _cmd_fdd(opts)
    if cmd == "ablate-tau":
        return _cmd_ablate(opts, "tau")
    if cmd == "ablate-init":
        return _cmd_ablate(opts, "init")
    if cmd == "verify-theory":
        return _cmd_verify(opts)
    if cmd == "dataset-make":
        return _cmd_dataset_make(opts)
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
