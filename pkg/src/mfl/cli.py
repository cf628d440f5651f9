"""Command-line harness.

    mfl run          --config cfg.json [--out DIR] [--seed N]
    mfl sweep-gamma  --config cfg.json ...
    mfl sweep-tau    --config cfg.json ...
    mfl bounds       --config cfg.json ...
    mfl estimate     --config cfg.json ...
    mfl verify-gap   --config cfg.json ...

Exit codes: 0 success, 1 bound violation (verify-gap), 2 bad config,
3 divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from . import experiments
from .core import DivergenceError, DomainError
from .experiments import ConfigError, ExperimentConfig

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def fmt(value) -> str:
    """Shortest round-trip text for floats; blank for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            raise ValueError("refusing to write NaN")
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# commands


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    problem = experiments.build_problem(cfg)
    traces = experiments.run_all(cfg, problem)
    rows = [(t, alg, loss, acc) for alg, tr in traces.items() for t, loss, acc in zip(tr.t, tr.loss, tr.accuracy)]
    write_csv(out / "trace.csv", ["t", "algorithm", "loss", "accuracy"], rows)
    summary = {alg: {"final_loss": tr.final_loss, "final_accuracy": tr.accuracy[-1]} for alg, tr in traces.items()}
    write_json(out / "summary.json", summary)
    for alg, s in summary.items():
        acc = "" if s["final_accuracy"] is None else f"  accuracy {s['final_accuracy']!r}"
        print(f"{alg:>4}: final loss {s['final_loss']!r}{acc}")
    return EXIT_OK


_SWEEP_HEADER = ["algorithm", "{name}", "final_loss", "wf_loss", "min_loss", "aggregations", "diverged_at", "rebound"]


def _sweep_rows(rows):
    return [(r.algorithm, r.value, r.final_loss, r.wf_loss, r.min_loss, r.aggregations, r.diverged_at, r.rebound)
            for r in rows]


def cmd_sweep_gamma(cfg: ExperimentConfig, out: Path) -> int:
    problem = experiments.build_problem(cfg)
    rows = experiments.sweep_gamma(cfg, problem)
    write_csv(out / "sweep_gamma.csv", [h.format(name="gamma") for h in _SWEEP_HEADER], _sweep_rows(rows))
    for r in rows:
        status = f"diverged at t={r.diverged_at}" if r.diverged_at is not None else repr(r.final_loss)
        label = "FL reference" if r.value is None else f"gamma={r.value!r}"
        print(f"{label:>14}: {status}{'  (rebound)' if r.rebound else ''}")
    return EXIT_OK


def cmd_sweep_tau(cfg: ExperimentConfig, out: Path) -> int:
    problem = experiments.build_problem(cfg)
    rows = experiments.sweep_tau(cfg, problem)
    write_csv(out / "sweep_tau.csv", [h.format(name="tau") for h in _SWEEP_HEADER], _sweep_rows(rows))
    for r in rows:
        print(f"tau={r.value:>5} {r.algorithm:>4}: {r.final_loss!r}")
    return EXIT_OK


def render_bounds(report: dict) -> str:
    lines = ["constants:"]
    for key, value in report["params"].items():
        lines.append(f"  {key} = {value!r}")
    for name in ("f1", "f2"):
        if report.get(name) is None:
            lines.append(f"{name}(T) = undefined: {report[name + '_error']}")
        else:
            lines.append(f"{name}(T) = {report[name]!r}")
    acc = report["acceleration"]
    lines.append(f"omega*alpha = {acc['omega_alpha']!r}")
    lines.append(f"eta*phi = {acc['eta_phi']!r}")
    lines.append(f"gamma ceiling = {acc['gamma_ceiling']!r}")
    lines.append(f"accelerated: {'true' if acc['accelerated'] else 'false'}")
    if "note" in report:
        lines.append(report["note"])
    lines.append("h(x):")
    lines.extend(f"  x={x}: {v!r}" for x, v in enumerate(report["h"]))
    constants = report.get("notes", {}).get("constants")
    if constants:
        lines.append(f"constants are {constants}")
    return "\n".join(lines)


def cmd_bounds(cfg: ExperimentConfig, out: Path) -> int:
    needs_data = cfg.bounds.get("source", "explicit") == "estimate"
    problem = experiments.build_problem(cfg) if needs_data else None
    params, notes = experiments.bound_params(cfg, problem)
    report = experiments.bounds_report(params, notes)
    write_json(out / "bounds.json", report)
    # text is rendered from the JSON round-trip so both carry the same numbers
    text = render_bounds(json.loads(json.dumps(_jsonable(report))))
    (out / "bounds.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_estimate(cfg: ExperimentConfig, out: Path) -> int:
    problem = experiments.build_problem(cfg)
    est = experiments.estimate_for(cfg, problem).as_dict()
    write_json(out / "estimate.json", est)
    for key in ("beta_hat", "rho_hat", "delta_hat"):
        print(f"{key} = {est[key]!r}")
    print("delta_i_hat = " + ", ".join(repr(v) for v in est["delta_i_hat"]))
    print(f"(max over {est['probes']} probes in a radius-{est['radius']!r} ball; lower estimates)")
    return EXIT_OK


def cmd_verify_gap(cfg: ExperimentConfig, out: Path) -> int:
    problem = experiments.build_problem(cfg)
    report = experiments.verify_gap(cfg, problem)
    write_csv(
        out / "gap.csv",
        ["k", "t", "x", "gap", "bound", "loss_gap", "loss_bound", "violation"],
        [(r.k, r.t, r.x, r.gap, r.bound, r.loss_gap, r.loss_bound, r.violation) for r in report.rows],
    )
    bad = report.violations
    print(f"beta={report.beta!r} delta={report.delta!r} rho={report.rho!r}")
    print(f"checked {len(report.rows)} (k, t) pairs, {len(bad)} violations")
    if not report.in_region:
        print("warning: iterates left the region where delta is valid")
    if bad:
        for r in bad:
            print(f"violation at k={r.k} t={r.t}: gap {r.gap!r} > bound {r.bound!r}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep-gamma": cmd_sweep_gamma,
    "sweep-tau": cmd_sweep_tau,
    "bounds": cmd_bounds,
    "estimate": cmd_estimate,
    "verify-gap": cmd_verify_gap,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfl", description="Momentum federated learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir or .)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seed = args.seed
        out = Path(args.out or cfg.output_dir or ".")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
