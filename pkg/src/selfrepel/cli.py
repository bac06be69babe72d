"""Command-line entry point: ``selfrepel {simulate,verify,bench}``.

Exit codes: 0 success, 1 a statistical verdict failed, 2 configuration
error, 3 non-finite numerical state.
"""

import argparse
import logging
import os
import platform
import sys

import matplotlib
import numpy as np
import scipy

from . import __version__, plotting
from .bench import run_bench
from .config import RunConfig
from .errors import ConfigError, NonFiniteState
from .integrate import simulate, write_trajectory_csv
from .serialize import dump_file
from .verify import SUITES, run_verify, write_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("selfrepel")


def _versions():
    return {"selfrepel": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "matplotlib": matplotlib.__version__,
            "python": platform.python_version()}


def _manifest(cfg, command, files, extra=None):
    out = {"command": command, "config_hash": cfg.hash, "seed": cfg.seed,
           "versions": _versions(), "config": cfg.to_dict(), "files": files}
    if extra:
        out.update(extra)
    return out


def _load(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append({"sim": {"seed": int(args.seed)}})
    if args.out is not None:
        overrides.append({"output": {"dir": args.out}})
    return RunConfig.load(args.config, overrides)


def _workers(args):
    if args.workers is not None:
        return max(int(args.workers), 1)
    return max(int(os.environ.get("SELFREPEL_WORKERS", "1")), 1)


def cmd_simulate(args):
    cfg = _load(args)
    out = cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    traj = simulate(cfg.spec, cfg.sim)
    write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    files = ["trajectory.csv"]
    if cfg.output.get("plots", True):
        plotting.plot_trajectory(traj, os.path.join(out, "trajectory.svg"))
        files.append("trajectory.svg")
    dump_file(_manifest(cfg, "simulate", files), os.path.join(out, "manifest.json"))
    log.info("wrote %d steps to %s", len(traj.times) - 1, out)
    return EXIT_OK


def cmd_verify(args):
    cfg = _load(args)
    out = cfg.output["dir"]
    report = run_verify(cfg, args.suite, out, _workers(args))
    dump_file(_manifest(cfg, "verify", report["files"], {"suite": args.suite}),
              os.path.join(out, "manifest.json"))
    for rep in report["reports"]:
        log.info("%-45s %s", rep["test"], rep["verdict"])
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


def cmd_bench(args):
    cfg = _load(args)
    out = cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    b = cfg.bench
    report = run_bench(cfg.spec, float(b["dt"]), [float(h) for h in b["horizons"]],
                       int(b["repeats"]), cfg.seed)
    dump_file(report, os.path.join(out, "bench.json"))
    rep_index = {r: i for i, r in enumerate(("history", "reduced", "environment"))}
    e = report["entries"]
    write_csv(os.path.join(out, "bench.csv"),
              ["representation", "horizon", "steps", "per_step_seconds"],
              [[rep_index[x["representation"]] for x in e], [x["horizon"] for x in e],
               [x["steps"] for x in e], [x["per_step_seconds"] for x in e]])
    dump_file(_manifest(cfg, "bench", ["bench.json", "bench.csv"]),
              os.path.join(out, "manifest.json"))
    for rep, r in report["per_step_ratios"].items():
        log.info("%-12s per-step ratio %.3g  %s", rep, r,
                 "ok" if report["checks"][rep] else "FAIL")
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="selfrepel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--workers", type=int,
                        help="worker processes (default $SELFREPEL_WORKERS or 1)")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one configuration value; repeatable")

    common(sub.add_parser("simulate", help="simulate one trajectory"))
    v = sub.add_parser("verify", help="run verification suites")
    common(v)
    v.add_argument("--suite", default="all", choices=SUITES + ("all",))
    common(sub.add_parser("bench", help="time the three steppers"))
    return p


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteState as exc:
        where = ""
        if exc.path_index is not None:
            where = " (path %d)" % exc.path_index
        print("numerical failure%s: %s" % (where, exc), file=sys.stderr)
        return EXIT_NUMERIC

