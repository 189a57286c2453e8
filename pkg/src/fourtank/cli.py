"""Command-line entry point.

    fourtank run       --scenario FILE [--mode fixed|reconfigurable] [--out DIR] [--set k=v ...]
    fourtank compare   --scenario FILE [--out DIR] [--set k=v ...]
    fourtank linearize --scenario FILE [--set k=v ...]
    fourtank validate  --scenario FILE [--set k=v ...]

Without ``--scenario`` the bundled fault scenario (paper_scenario.yaml) is used.

Exit codes: 0 success, 1 unexpected error, 2 usage error, 3 scenario file
not found, 4 scenario parse error, 5 validation error, 6 controller
synthesis error, 7 integration blow-up, 8 comparison error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import metrics, scenario, simulation
from .exceptions import FourTankError
from .synthesis import eigenvalues, verify_closed_loop

log = logging.getLogger("fourtank")


def _load(args):
    path = args.scenario or scenario.paper_scenario_path()
    return scenario.load_scenario(path, args.set or ())


def _prepare_out(cfg, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    scenario.write_scenario(cfg, out / f"scenario_{digest}.yaml")
    return out, digest


def _run_one(cfg, mode, out, digest):
    trace = simulation.run(cfg, mode)
    trace_path = out / f"trace_{mode}_{digest}.csv"
    metrics.write_trace(trace, trace_path)
    summary = trace.summary()
    summary["trace"] = trace_path.name
    (out / f"summary_{mode}_{digest}.json").write_text(json.dumps(summary, indent=2) + "\n")
    return trace, summary


def cmd_run(args):
    cfg = _load(args)
    mode = args.mode or cfg.controller.mode
    out, digest = _prepare_out(cfg, args.out)
    _, summary = _run_one(cfg, mode, out, digest)
    print(f"mode: {mode}")
    print(f"samples: {summary['samples']}")
    print(f"reconfigurations: {summary['reconfigurations']}")
    print(f"saturated samples per pump: {summary['saturated_samples']}")
    for ev in summary["events"]:
        if ev["kind"] == "synthesis_error":
            print(f"warning: synthesis failed at t={ev['t']:g} s: {ev['message']}")
    print(f"trace: {out / summary['trace']}")
    return 0


def cmd_compare(args):
    cfg = _load(args)
    out, digest = _prepare_out(cfg, args.out)
    traces = {}
    for mode in ("fixed", "reconfigurable"):
        traces[mode], summary = _run_one(cfg, mode, out, digest)
        for ev in summary["events"]:
            if ev["kind"] == "synthesis_error":
                print(f"warning: {mode} synthesis failed at t={ev['t']:g} s: {ev['message']}")
    windows = cfg.windows or scenario.default_windows(cfg.duration, cfg.reference, cfg.faults)
    report = metrics.compare_report(traces["fixed"], traces["reconfigurable"], windows)
    metrics.write_report(report, out / f"report_{digest}.json", out / f"report_{digest}.txt")
    sys.stdout.write(report.render())
    return 0


def _print_matrix(name, M):
    print(f"{name} =")
    print(np.array2string(np.asarray(M), precision=4, suppress_small=True, max_line_width=120))


def cmd_linearize(args):
    cfg = _load(args)
    op, lin, aug, poles, K = simulation.nominal_design(cfg)
    print(f"operating point ({cfg.op_source}): levels {op.levels0} cm, voltages {op.voltages0} V")
    print("time constants T_i (s):", np.array2string(lin.time_constants, precision=3))
    _print_matrix("A", lin.A)
    _print_matrix("B", lin.B)
    _print_matrix("C", lin.C)
    _print_matrix("A_aug", aug.A_aug)
    _print_matrix("B_aug", aug.B_aug)
    print(f"requested poles: {[p.real if p.imag == 0 else p for p in poles.poles]}")
    _print_matrix("K", K)
    report = verify_closed_loop(aug.A_aug, aug.B_aug, K, poles)
    achieved = eigenvalues(aug.A_aug - aug.B_aug @ K)
    print("achieved closed-loop eigenvalues:")
    for ev in achieved:
        print(f"  {ev.real:.6f}" + (f" {ev.imag:+.6f}j" if abs(ev.imag) > 1e-12 else ""))
    print(f"max deviation from requested: {report.max_abs_deviation:.3e}")
    return 0


def cmd_validate(args):
    cfg = _load(args)
    sys.stdout.write(scenario.dump_scenario(cfg))
    print(f"# scenario valid, digest {cfg.digest()}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fourtank", description="Four-tank actuator-fault simulation with reconfigurable control."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", help="scenario YAML file (default: bundled paper_scenario.yaml)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario field by dotted key; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("run", help="simulate one controller mode")
    common(p)
    p.add_argument("--mode", choices=("fixed", "reconfigurable"))
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="simulate both modes and report IAE")
    common(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("linearize", help="print the linear model and nominal design")
    common(p)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("validate", help="check a scenario and echo its effective configuration")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FourTankError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
