"""Command-line entry point.

Subcommands:
  noise     generate the privacy noise trace plus histogram and moment checks
  simulate  full pipeline: noise -> net reference -> receding-horizon dispatch
  report    regenerate summary and plot data from a stored run directory

Exit codes: 0 success, 1 config/IO error, 2 exact-solver guard, 3 comfort
infeasibility under --strict.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from dpdispatch import metrics
from dpdispatch.dispatch import SolverGuardError, receding_horizon_run
from dpdispatch.metrics import RunReport
from dpdispatch.privacy import (
    NoiseTrace,
    compute_net_pv,
    generate_noise_trace,
    save_noise_trace,
)
from dpdispatch.scenario import ConfigError, ScenarioConfig, build_simulation, config_as_dict, load_config
from dpdispatch.traces import TraceError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GUARD = 2
EXIT_INFEASIBLE = 3


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])


def _write_summary(path: Path, summary: dict) -> None:
    _write_csv(path, list(summary.keys()), [list(summary.values())])


def _manifest(cfg: ScenarioConfig, args: argparse.Namespace) -> dict:
    return {
        "tool": "dpdispatch",
        "subcommand": args.command,
        "solver": getattr(args, "solver", None),
        "config": config_as_dict(cfg),
    }


def _emit_noise_files(noise: NoiseTrace, cfg: ScenarioConfig, out: Path) -> None:
    save_noise_trace(noise, out / "noise.csv")
    counts, edges = metrics.noise_histogram(noise, n_bins=40)
    centers = (edges[:-1] + edges[1:]) / 2.0
    _write_csv(
        out / "noise_histogram.csv",
        ["bin_center", "count"],
        [(repr(float(c)), int(n)) for c, n in zip(centers, counts)],
    )
    moments = metrics.noise_moment_check(noise, cfg.dp)
    _write_csv(
        out / "noise_moments.csv",
        ["n", "mean", "variance", "expected_variance"],
        [[moments["n"], moments["mean"],
          moments["variance"] if moments["variance_defined"] else "undefined",
          moments["expected_variance"]]],
    )


def cmd_noise(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    noise = generate_noise_trace(cfg.dp, cfg.horizon_steps, cfg.traces.step_seconds)
    _emit_noise_files(noise, cfg, out)
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, args), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(noise)}-step noise trace to {out / 'noise.csv'}")
    return EXIT_OK


def _emit_run_files(report: RunReport, cfg: ScenarioConfig, out: Path) -> dict:
    residual = report.residual_kw
    lo, hi = cfg.mpc.comfort_min, cfg.mpc.comfort_max
    per_step_viol = [
        int(np.count_nonzero(
            (report.temps[:, k] < lo - metrics.COMFORT_TOL)
            | (report.temps[:, k] > hi + metrics.COMFORT_TOL)
        ))
        for k in range(report.n_steps)
    ]
    _write_csv(
        out / "results.csv",
        ["step", "ref_kw", "agg_kw", "residual_kw", "n_on", "violations"],
        [
            (k, report.reference_kw[k], report.aggregate_kw[k], residual[k],
             report.n_on[k], per_step_viol[k])
            for k in range(report.n_steps)
        ],
    )
    _write_csv(
        out / "pv.csv",
        ["step", "pv_kw"],
        [(k, v) for k, v in enumerate(report.pv_kw)],
    )
    _write_csv(
        out / "temperatures.csv",
        ["step"] + [f"b{j:03d}" for j in range(report.temps.shape[0])],
        [(k, *report.temps[:, k]) for k in range(report.n_steps)],
    )
    infeasible = set(report.infeasible_steps)
    _write_csv(
        out / "flags.csv",
        ["step", "ref_unclamped_kw", "ref_clamped", "target_clipped",
         "must_on_kw", "free_kw", "infeasible"],
        [
            (k, report.unclamped_reference_kw[k], int(report.ref_clamped[k]),
             int(report.target_clipped[k]), report.must_on_kw[k],
             report.free_kw[k], int(k in infeasible))
            for k in range(report.n_steps)
        ],
    )
    summary = metrics.summarize(report, band=(lo, hi))
    _write_summary(out / "summary.csv", summary)
    _emit_plot_files(report, out)
    return summary


def _emit_plot_files(report: RunReport, out: Path) -> None:
    plots = out / "plots"
    plots.mkdir(exist_ok=True)
    _write_csv(plots / "noise_trace.csv", ["step", "noise_kw"],
               [(k, v) for k, v in enumerate(report.noise_kw)])
    noise = NoiseTrace(values=report.noise_kw, step_seconds=report.step_seconds)
    counts, edges = metrics.noise_histogram(noise, n_bins=40)
    centers = (edges[:-1] + edges[1:]) / 2.0
    _write_csv(plots / "noise_histogram.csv", ["bin_center", "count"],
               [(repr(float(c)), int(n)) for c, n in zip(centers, counts)])
    _write_csv(plots / "net_reference.csv", ["step", "net_pv_kw"],
               [(k, v) for k, v in enumerate(report.reference_kw)])
    _write_csv(plots / "temperatures.csv",
               ["step"] + [f"b{j:03d}" for j in range(report.temps.shape[0])],
               [(k, *report.temps[:, k]) for k in range(report.n_steps)])
    _write_csv(plots / "tracking_overlay.csv", ["step", "ref_kw", "agg_kw"],
               [(k, report.reference_kw[k], report.aggregate_kw[k])
                for k in range(report.n_steps)])


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    models, init_states, disturbances, pv = build_simulation(cfg)
    noise = generate_noise_trace(cfg.dp, len(pv), cfg.traces.step_seconds)
    net = compute_net_pv(pv, noise)

    report = receding_horizon_run(
        models, init_states, disturbances, net, cfg.mpc,
        solver_choice=args.solver, pv=pv, noise_kw=noise.values,
    )

    _emit_noise_files(noise, cfg, out)
    summary = _emit_run_files(report, cfg, out)
    (out / "manifest.json").write_text(json.dumps(_manifest(cfg, args), indent=2, sort_keys=True) + "\n")

    print(
        f"simulated {report.n_steps} steps, {cfg.n_buildings} buildings, solver={args.solver}: "
        f"rmse={summary['tracking_rmse_kw']:.4f} kW, "
        f"violations={summary['comfort_violations']}, "
        f"clamped_steps={summary['ref_clamped_steps']}"
    )
    if args.strict and summary["infeasible_steps"] > 0:
        print("comfort infeasibility flagged and --strict set", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise TraceError(f"missing run file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"{path}: empty file") from None
        return header, [row for row in reader if row]


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise ConfigError(f"run directory not found: {out}")
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise TraceError(f"missing run file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    band = (
        manifest["config"]["mpc"]["comfort_min"],
        manifest["config"]["mpc"]["comfort_max"],
    )
    step_seconds = manifest["config"]["traces"]["step_seconds"]

    _, result_rows = _read_csv(out / "results.csv")
    _, pv_rows = _read_csv(out / "pv.csv")
    _, noise_rows = _read_csv(out / "noise.csv")
    temp_header, temp_rows = _read_csv(out / "temperatures.csv")
    _, flag_rows = _read_csv(out / "flags.csv")

    n_b = len(temp_header) - 1
    temps = np.array([[float(v) for v in row[1:]] for row in temp_rows]).T
    report = RunReport(
        step_seconds=step_seconds,
        pv_kw=tuple(float(r[1]) for r in pv_rows),
        noise_kw=tuple(float(r[1]) for r in noise_rows),
        reference_kw=tuple(float(r[1]) for r in result_rows),
        unclamped_reference_kw=tuple(float(r[1]) for r in flag_rows),
        aggregate_kw=tuple(float(r[2]) for r in result_rows),
        temps=temps,
        n_on=tuple(int(r[4]) for r in result_rows),
        must_on_kw=tuple(float(r[4]) for r in flag_rows),
        free_kw=tuple(float(r[5]) for r in flag_rows),
        target_clipped=tuple(bool(int(r[3])) for r in flag_rows),
        ref_clamped=tuple(bool(int(r[2])) for r in flag_rows),
        infeasible_steps=tuple(int(r[0]) for r in flag_rows if int(r[6])),
    )
    summary = metrics.summarize(report, band=band)
    _write_summary(out / "summary.csv", summary)
    _emit_plot_files(report, out)
    print(
        f"report regenerated for {report.n_steps} steps x {n_b} buildings: "
        f"rmse={summary['tracking_rmse_kw']:.4f} kW, violations={summary['comfort_violations']}"
    )
    return EXIT_OK


def _load(args: argparse.Namespace) -> ScenarioConfig:
    overrides = {}
    for key in ("seed", "epsilon", "horizon", "n_buildings"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpdispatch",
        description="Privacy-preserving PV load-following simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_solver=False):
        p.add_argument("--config", type=str, default=None, help="YAML scenario configuration")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--epsilon", type=float, default=None, help="privacy budget override")
        p.add_argument("--horizon", type=int, default=None, help="MPC prediction horizon override")
        p.add_argument("--n-buildings", dest="n_buildings", type=int, default=None)
        if with_solver:
            p.add_argument("--solver", choices=("exact", "greedy"), default="greedy")
            p.add_argument("--strict", action="store_true",
                           help="exit 3 when comfort infeasibility is flagged")

    p_noise = sub.add_parser("noise", help="generate the privacy noise artifacts")
    common(p_noise)
    p_noise.set_defaults(func=cmd_noise)

    p_sim = sub.add_parser("simulate", help="run the full closed-loop pipeline")
    common(p_sim, with_solver=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("report", help="regenerate summary/plots from a run directory")
    p_rep.add_argument("--out", type=str, required=True, help="existing run directory")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverGuardError as exc:
        print(f"solver guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
