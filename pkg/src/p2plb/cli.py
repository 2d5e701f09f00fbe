"""Command-line entry point: run, sweep, dump-state, validate.

Flag precedence is flags > config file > defaults.  The default output
directory comes from the P2PLB_OUT_DIR environment variable when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ScenarioConfig, build_simulation, load_scenario
from .dump import dump_json
from .errors import ConfigurationError, SimulationError
from .sweep import CSV_HEADER, PLOT_SCRIPT, plot_data_files, run_point, run_sweep

ENV_OUT_DIR = "P2PLB_OUT_DIR"


def _out_dir(value: str | None) -> Path:
    return Path(value or os.environ.get(ENV_OUT_DIR, "."))


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="scenario YAML file")
    parser.add_argument("--seed", type=int, help="override the file's seed")
    arm = parser.add_mutually_exclusive_group()
    arm.add_argument("--with-lb", dest="lb", action="store_true", default=None,
                     help="force load balancing on")
    arm.add_argument("--without-lb", dest="lb", action="store_false",
                     help="force load balancing off")


def _load(args: argparse.Namespace) -> ScenarioConfig:
    return load_scenario(args.config)


def cmd_run(args: argparse.Namespace) -> int:
    sc = _load(args)
    sim = build_simulation(sc, lb_enabled=args.lb, seed=args.seed,
                           audit_level=args.audit_level,
                           track_tick_loads=args.tick_loads is not None)
    metrics = sim.run()
    text = metrics.to_json()
    if args.format == "csv":
        keys = sorted(k for k in json.loads(text) if k != "per_peer_load")
        values = json.loads(text)
        text = (",".join(keys) + "\n"
                + ",".join(repr(values[k]) for k in keys) + "\n")
    if args.out:
        Path(args.out).write_text(text + ("" if text.endswith("\n") else "\n"))
    else:
        print(text)
    if args.audit:
        Path(args.audit).write_text(sim.audit_jsonl() + "\n")
    if args.tick_loads:
        rows = ["t_ms,peer,load_bytes"]
        rows += [f"{t!r},{p},{l!r}" for t, p, l in sim.tick_loads]
        Path(args.tick_loads).write_text("\n".join(rows) + "\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    sc = _load(args)
    param = args.param or (sc.sweep.param if sc.sweep else None)
    values = ([float(v) for v in args.values.split(",")] if args.values
              else list(sc.sweep.values) if sc.sweep else None)
    if not param or not values:
        raise ConfigurationError(
            "sweep needs --param/--values or a sweep section in the config")
    base_seed = args.seed if args.seed is not None else sc.seed
    seeds = [base_seed + i for i in range(args.seeds)]
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"

    # Written incrementally so an aborted sweep leaves a visibly invalid file.
    with csv_path.open("w") as fh:
        fh.write(CSV_HEADER + "\n")
        try:
            table = run_sweep(sc, param, values, seeds, parallel=args.parallel)
        except Exception as exc:
            fh.write(f"# INVALID: sweep aborted: {exc}\n")
            print(f"sweep aborted: {exc}", file=sys.stderr)
            return 1
        fh.seek(0)
        fh.truncate()
        fh.write(table.to_csv())
    for name, text in plot_data_files(table).items():
        (out / name).write_text(text)
    (out / "plot_sweep.py").write_text(PLOT_SCRIPT)
    print(f"wrote {csv_path}")
    return 0


def cmd_dump_state(args: argparse.Namespace) -> int:
    sc = _load(args)
    sim = build_simulation(sc, lb_enabled=args.lb, seed=args.seed)
    sim.run(stop_after_placement=True)
    text = dump_json(sim)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    _load(args)
    print(f"{args.config}: ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="p2plb",
        description="Cluster-based replica placement and load balancing "
                    "simulator for P2P content-distribution overlays")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and emit metrics")
    _add_common(p_run)
    p_run.add_argument("--out", help="metrics output file (default: stdout)")
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.add_argument("--audit", help="write the audit log (JSON lines) here")
    p_run.add_argument("--audit-level", type=int, default=0, choices=(0, 1))
    p_run.add_argument("--tick-loads", help="write per-tick load histogram CSV here")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="compare WithLB vs WithoutLB over a parameter")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", help="numeric field, e.g. workload.payload_bytes")
    p_sweep.add_argument("--values", help="comma-separated sweep values")
    p_sweep.add_argument("--seeds", type=int, default=5,
                         help="seeds per point (default 5)")
    p_sweep.add_argument("--out", help=f"output directory (default ${ENV_OUT_DIR} or .)")
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N")
    p_sweep.set_defaults(func=cmd_sweep)

    p_dump = sub.add_parser("dump-state",
                            help="run to warm-up end and dump placement state")
    _add_common(p_dump)
    p_dump.add_argument("--out", help="dump output file (default: stdout)")
    p_dump.set_defaults(func=cmd_dump_state)

    p_val = sub.add_parser("validate", help="check a scenario file and exit")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
