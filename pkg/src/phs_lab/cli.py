"""Command line entry point ``phs-lab``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(blow-up, non-convergence, infeasible schedule), 4 audit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scenarios
from .config import Scenario
from .errors import AuditFailure, ConfigError, DomainError, NumericalError
from .integrator import Trajectory, supplied_energy_cumulative

log = logging.getLogger("phs_lab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_AUDIT = 0, 2, 3, 4

CONFIG_COMMANDS = {
    "simulate": scenarios.run_simulate,
    "carnot": scenarios.run_carnot,
    "storage-bounds": scenarios.run_storage_bounds,
    "router": scenarios.run_router,
    "audit": scenarios.run_audit,
}


# ------------------------------------------------------------------ writers


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _labels(labels, prefix, count):
    return list(labels) if len(labels) == count else [f"{prefix}{i + 1}" for i in range(count)]


def trajectory_rows(traj: Trajectory, stride: int = 1):
    """Header and rows of the CSV time series."""
    n, m = traj.states.shape[1], traj.inputs.shape[1]
    ports = len(traj.port_partition)
    header = (
        ["t"]
        + _labels(traj.state_labels, "x", n)
        + _labels(traj.input_labels, "u", m)
        + _labels(traj.output_labels, "y", m)
        + ["H"]
        + [f"E_port{k + 1}" for k in range(ports)]
        + ["phase"]
    )
    cum = [supplied_energy_cumulative(traj, port=k + 1) for k in range(ports)]
    last = len(traj) - 1
    idx = list(range(0, len(traj), max(1, stride)))
    if idx[-1] != last:
        idx.append(last)
    rows = []
    for i in idx:
        nums = [traj.times[i], *traj.states[i], *traj.inputs[i], *traj.outputs[i], traj.energies[i]]
        nums += [c[i] for c in cum]
        phase = "" if traj.phases is None else str(traj.phases[i])
        rows.append([_fmt(v) for v in nums] + [phase])
    return header, rows


def write_csv(traj: Trajectory, path, stride: int = 1):
    header, rows = trajectory_rows(traj, stride)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dump_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def write_json(report: dict, path):
    Path(path).write_text(dump_json(report), encoding="utf-8")


# ----------------------------------------------------------------- running


def _exit_for(report: dict) -> int:
    return EXIT_AUDIT if report.get("passed") is False else EXIT_OK


def _guarded(fn):
    """Run ``fn`` and translate library errors into ``(code, message)``."""
    try:
        return fn()
    except ConfigError as exc:
        return EXIT_CONFIG, f"config error: {exc}"
    except (NumericalError, DomainError) as exc:
        return EXIT_NUMERICAL, f"numerical failure: {exc}"
    except AuditFailure as exc:
        return EXIT_AUDIT, f"audit failure: {exc}"
    except ValueError as exc:
        # invalid parameters rejected by constructors
        return EXIT_CONFIG, f"config error: {exc}"


def run_config(command: str, config: str, out=None, csv=None, stride: int = 1):
    """Run one config file; returns ``(exit_code, message)``.  Picklable for ``--jobs``."""

    def body():
        log.info("%s %s", command, config)
        sc = Scenario.read(config)
        report, traj = CONFIG_COMMANDS[command](sc)
        if out is not None:
            write_json(report, out)
        else:
            sys.stdout.write(dump_json(report))
        if csv is not None:
            if traj is None:
                raise ConfigError(f"{command} produces no time series; drop --csv")
            write_csv(traj, csv, stride)
        code = _exit_for(report)
        return code, "" if code == EXIT_OK else f"audit failed for {config}"

    return _guarded(body)


def _config_jobs(args):
    configs = args.config
    if len(configs) == 1 and args.out_dir is None:
        return [(configs[0], args.out, args.csv)]
    if args.out is not None or args.csv is not None:
        raise ConfigError("with several configs use --out-dir instead of --out/--csv")
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = [Path(c).stem for c in configs]
    if len(set(stems)) != len(stems):
        raise ConfigError("config file names must be distinct when writing to --out-dir")
    return [(c, out_dir / f"{s}.json", out_dir / f"{s}.csv" if args.command in ("simulate", "carnot", "router") else None)
            for c, s in zip(configs, stems)]


def _run_config_command(args) -> int:
    try:
        jobs = _config_jobs(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stride = args.csv_stride
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_config, args.command, c, o, v, stride) for c, o, v in jobs]
            results = [f.result() for f in futures]
    else:
        results = [run_config(args.command, c, o, v, stride) for c, o, v in jobs]
    for code, msg in results:
        if msg:
            print(msg, file=sys.stderr)
    return max(code for code, _ in results)


def _emit(report, out):
    if out is not None:
        write_json(report, out)
    else:
        sys.stdout.write(dump_json(report))
    return _exit_for(report)


def _run_storage_lmi(args) -> int:
    def body():
        if not (args.m > 0 and args.k > 0 and args.d > 0):
            raise ConfigError("storage-lmi needs --m, --k and --d > 0")
        report, _ = scenarios.run_storage_lmi(args.m, args.k, args.d, args.audit)
        return _emit(report, args.out), ""

    code, msg = _guarded(body)
    if msg:
        print(msg, file=sys.stderr)
    return code


def _run_ida_pbc(args) -> int:
    def body():
        kw = {"L0": args.L0, "a": args.a, "m": args.m, "samples": args.samples, "tol": args.tol}
        if args.config:
            sc = Scenario.read(args.config)
            for key in ("L0", "a", "m", "tol"):
                kw[key] = sc.float("ida_pbc", key, kw[key])
            kw["samples"] = sc.int("ida_pbc", "samples", kw["samples"])
            if sc.has("ida_pbc", "seed"):
                kw["seed"] = sc.int("ida_pbc", "seed")
        if not (kw["L0"] > 0 and kw["a"] > 0 and kw["m"] > 0):
            raise ConfigError("ida-pbc needs L0, a and m > 0")
        report, _ = scenarios.run_ida_pbc(**kw)
        code = _emit(report, args.out)
        return code, "" if code == EXIT_OK else "IDA-PBC audit failed"

    code, msg = _guarded(body)
    if msg:
        print(msg, file=sys.stderr)
    return code


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phs-lab",
        description="Port-Hamiltonian scenarios: simulations, Carnot cycles, storage certificates and audits.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "simulate": "open-loop simulation with energy ledger",
        "carnot": "four-phase Carnot cycle on a two-port model",
        "storage-bounds": "sampled bounds on extractable/required energy",
        "router": "energy router between two lossless systems",
        "audit": "invariant audits (constant_effort, legendre, order, heat_exchanger, path_independence, lmi)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", nargs="+", required=True, help="scenario file(s)")
        p.add_argument("--out", help="JSON report path (default: stdout)")
        p.add_argument("--csv", help="CSV time-series path")
        p.add_argument("--out-dir", help="output directory when running several configs")
        p.add_argument("--jobs", type=int, default=1, help="run configs concurrently")
        p.add_argument("--csv-stride", type=int, default=1, help="write every k-th grid point")

    p = sub.add_parser("storage-lmi", help="closed-form quadratic storage of the mass-spring-damper")
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--audit", type=int, default=0, metavar="N", help="audit on N random trajectories")
    p.add_argument("--out", help="JSON report path (default: stdout)")

    p = sub.add_parser("ida-pbc", help="IDA-PBC design for the actuator and its matching audit")
    p.add_argument("--config", help="scenario file with an [ida_pbc] section")
    p.add_argument("--L0", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.05)
    p.add_argument("--m", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", help="JSON report path (default: stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in CONFIG_COMMANDS:
        if args.jobs < 1 or args.csv_stride < 1:
            print("config error: --jobs and --csv-stride must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        return _run_config_command(args)
    if args.command == "storage-lmi":
        return _run_storage_lmi(args)
    return _run_ida_pbc(args)


if __name__ == "__main__":
    sys.exit(main())
