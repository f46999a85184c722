"""Command-line entry point: ``horolab run|validate|list-experiments``.

Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 invalid config,
3 construction failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import multiprocessing as mp
import sys
import time
from pathlib import Path

from horolab import config as config_mod
from horolab.errors import HorolabError, InvalidConfig
from horolab.experiments import REGISTRY, Context, run_experiment

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_IO = 0, 1, 2, 3, 4

_WORKER_CTX = None


def _worker(entry, cfg_hash):
    return run_experiment(_WORKER_CTX, entry, cfg_hash)


def run(cfg: dict, out_dir, jobs: int = 1, plots: bool = True, log=print):
    """Run every experiment of a validated config and write the reports.

    Returns ``(exit_code, reports)``.
    """
    global _WORKER_CTX
    from horolab.report import write_reports

    cfg_hash = config_mod.config_hash(cfg)
    ctx = Context(cfg)
    entries = cfg["experiments"]
    names = [e["name"] for e in entries]
    start = time.perf_counter()
    try:
        ctx.warm(names)
    except HorolabError as exc:
        log(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION, []
    log(f"context built in {time.perf_counter() - start:.1f} s")

    reports = []
    if jobs > 1 and len(entries) > 1:
        _WORKER_CTX = ctx
        with cf.ProcessPoolExecutor(jobs, mp_context=mp.get_context("fork")) as pool:
            futures = [pool.submit(_worker, e, cfg_hash) for e in entries]
            for fut in futures:
                reports.append(fut.result())
                _log_report(reports[-1], log)
        _WORKER_CTX = None
    else:
        for e in entries:
            reports.append(run_experiment(ctx, e, cfg_hash))
            _log_report(reports[-1], log)

    meta = {"config": cfg["name"], "config_hash": cfg_hash, "seed": cfg["seed"]}
    if "group" in ctx.__dict__:
        meta["dimension"] = ctx.dim
    if "estimate" in ctx.__dict__:
        meta["exponent_estimate"] = ctx.estimate.value
        meta["exponent_band"] = ctx.estimate.band
    try:
        paths = write_reports(reports, out_dir, meta, plots=plots)
    except OSError as exc:
        log(f"cannot write reports to {out_dir}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO, reports
    for p in paths:
        log(str(p))
    failed = [r for r in reports if not r.passed]
    for r in failed:
        log(f"FAIL {r.id}: {', '.join(r.failures)}", file=sys.stderr)
    return (EXIT_VERDICT if failed else EXIT_OK), reports


def _log_report(rep, log):
    status = "pass" if rep.passed else "FAIL"
    log(f"[{status}] {rep.id} ({rep.elapsed:.1f} s)")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="horolab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiments of a config")
    r.add_argument("config", help="YAML file or name of a bundled config")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--out", help="output directory (default: reports/<name>)")
    r.add_argument("--jobs", type=int, default=1, help="experiments to run in parallel")
    r.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    sub.add_parser("list-experiments", help="list experiment names")
    return ap


def _echo(*args, file=None):
    print(*args, file=file or sys.stdout, flush=True)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-experiments":
        for e in sorted(REGISTRY.values(), key=lambda e: (e.criterion, e.name)):
            _echo(f"{e.name:18s} [{e.criterion}] {e.description}")
        bundled = config_mod.bundled_configs()
        if bundled:
            _echo("bundled configs: " + ", ".join(bundled))
        return EXIT_OK
    try:
        cfg = config_mod.load(config_mod.resolve(args.config))
    except InvalidConfig as exc:
        _echo(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        _echo(f"{cfg['name']}: ok ({len(cfg['experiments'])} experiments, hash {config_mod.config_hash(cfg)[:12]})")
        return EXIT_OK
    if args.seed is not None:
        if args.seed < 0:
            _echo("invalid config: --seed must be non-negative", file=sys.stderr)
            return EXIT_CONFIG
        cfg["seed"] = args.seed
    if args.jobs < 1:
        _echo("invalid config: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg["output"] or Path("reports") / cfg["name"])
    code, _ = run(cfg, out, jobs=args.jobs, plots=not args.no_plots, log=_echo)
    return code


if __name__ == "__main__":
    sys.exit(main())
