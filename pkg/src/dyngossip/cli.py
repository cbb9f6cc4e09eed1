"""Command-line front end: run/sweep simulations, verify traces, compare oracles.

Exit codes: 0 success, 1 usage or configuration error, 2 invariant or
verification failure, 3 internal construction error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .adversaries import (
    ADVERSARY_KEYS,
    GreedyConnectedAdversary,
    OptimalAdversaryOracle,
    AdversaryContext,
)
from .engine import (
    RunConfig,
    Scenario,
    expand_sweep,
    run,
    sweep,
    verify_trace,
    write_trace_jsonl,
)
from .errors import ConfigError, ConstructionError, DyngossipError, TraceFormatError
from .knowledge import KnowledgeState, TokenAssignment, deliver
from .protocols import PROTOCOL_KEYS

CSV_COLUMNS = (
    "run_id", "seed", "n", "k", "b", "c", "T", "delta", "protocol", "adversary",
    "round", "phi", "delta_phi", "free_components", "nonfree_edges",
    "gifted_tokens", "done_fraction",
)

CONFIG_KEYS = {
    "n", "k", "b", "c", "T", "delta", "p_kprime", "epsilon", "alpha",
    "q_initial", "initial", "initial_tokens", "protocol", "adversary",
    "seed", "reps", "max_rounds", "termination", "emit_trace", "local",
}
SWEEPABLE = {
    "n", "k", "b", "c", "T", "delta", "p_kprime", "epsilon", "alpha",
    "q_initial", "protocol", "adversary", "max_rounds", "termination", "initial",
}
CONFIG_DIR_ENV = "DYNGOSSIP_CONFIG_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _load_config_file(path):
    if not os.path.isabs(path):
        base = os.environ.get(CONFIG_DIR_ENV)
        if base:
            path = os.path.join(base, path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    for key in doc:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    return doc


def _build_parser():
    parser = _Parser(prog="dyngossip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run or sweep and print CSV")
    p_run.add_argument("--config", help="JSON config file (flags override its keys)")
    p_run.add_argument("--n", type=int)
    p_run.add_argument("--k", type=int)
    p_run.add_argument("--b", type=int)
    p_run.add_argument("--c", type=int)
    p_run.add_argument("--T", type=int)
    p_run.add_argument("--delta", type=float)
    p_run.add_argument("--p-kprime", dest="p_kprime", type=float)
    p_run.add_argument("--epsilon", type=float)
    p_run.add_argument("--alpha", type=float)
    p_run.add_argument("--q-initial", dest="q_initial", type=float)
    p_run.add_argument("--initial", choices=("bernoulli", "single-source"))
    p_run.add_argument("--protocol", choices=PROTOCOL_KEYS)
    p_run.add_argument("--adversary", choices=ADVERSARY_KEYS)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--reps", type=int)
    p_run.add_argument("--max-rounds", dest="max_rounds", type=int)
    p_run.add_argument("--termination", choices=("full", "partial", "fec"))
    p_run.add_argument("--local", action="store_true", default=None)
    p_run.add_argument("--emit-trace", dest="emit_trace", metavar="PATH",
                       help="write JSONL traces (off by default; sweeps add _<run_id>)")
    p_run.add_argument("--jobs", type=int, default=1)

    p_ver = sub.add_parser("verify", help="re-check an emitted JSONL trace")
    p_ver.add_argument("trace")
    p_ver.add_argument("--scenario", choices=("auto", "connected", "cconn", "interval"),
                       default="auto")
    p_ver.add_argument("--c", type=int)
    p_ver.add_argument("--T", type=int)

    p_orc = sub.add_parser("oracle-compare",
                           help="compare greedy adversary growth against the exhaustive optimum")
    p_orc.add_argument("--n", type=int, default=4)
    p_orc.add_argument("--k", type=int, default=2)
    p_orc.add_argument("--trials", type=int, default=100)
    p_orc.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_run_config(args):
    doc = _load_config_file(args.config) if args.config else {}
    reps = doc.pop("reps", 1)
    emit_trace = doc.pop("emit_trace", None)
    axes = {}
    scalars = {}
    for key, value in doc.items():
        if isinstance(value, list) and key in SWEEPABLE:
            axes[key] = value
        elif key == "initial_tokens":
            scalars[key] = tuple(tuple(t) for t in value)
        else:
            scalars[key] = value
    for key in ("n", "k", "b", "c", "T", "delta", "p_kprime", "epsilon", "alpha",
                "q_initial", "initial", "protocol", "adversary", "seed",
                "max_rounds", "termination", "local"):
        value = getattr(args, key, None)
        if value is not None:
            scalars[key] = value
            axes.pop(key, None)
    if args.reps is not None:
        reps = args.reps
    if args.emit_trace is not None:
        emit_trace = args.emit_trace
    try:
        base = RunConfig(**scalars)
    except TypeError as exc:
        raise ConfigError(str(exc))
    return base, axes, int(reps), emit_trace


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def cmd_run(args):
    base, axes, reps, emit_trace = _resolve_run_config(args)
    configs = expand_sweep(base, axes, reps)
    for cfg in configs:
        cfg.validate()
    record = emit_trace is not None
    if record or args.jobs <= 1:
        reports = [run(cfg, record_trace=record) for cfg in configs]
    else:
        reports = sweep(base, axes, reps, jobs=args.jobs)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for run_id, report in enumerate(reports):
        cfg = report.config
        for rr in report.rounds:
            writer.writerow([
                run_id, cfg.seed, cfg.n, cfg.k, cfg.b, cfg.c, cfg.T, _fmt(cfg.delta),
                cfg.protocol, cfg.adversary, rr.round, rr.phi_after, rr.delta_phi,
                rr.free_components, rr.nonfree_edges, rr.gifted_tokens,
                _fmt(rr.done_fraction),
            ])
        if record:
            path = emit_trace
            if len(reports) > 1:
                root, ext = os.path.splitext(emit_trace)
                path = f"{root}_{run_id}{ext or '.jsonl'}"
            write_trace_jsonl(path, report)
    total_viol = sum(r.invariant_violations for r in reports)
    done = sum(1 for r in reports if r.terminated)
    print(
        f"runs={len(reports)} terminated={done} invariant_violations={total_viol}",
        file=sys.stderr,
    )
    return 2 if total_viol else 0


def cmd_verify(args):
    scenario = None
    if args.scenario != "auto":
        scenario = Scenario(args.scenario, c=args.c or 1, T=args.T or 1)
    elif args.c is not None or args.T is not None:
        raise ConfigError("--c/--T require an explicit --scenario")
    report = verify_trace(args.trace, scenario=scenario)
    print(report)
    return 0 if report.ok else 2


def cmd_oracle_compare(args):
    if args.n > 6 or args.k > 3:
        raise ConfigError("oracle comparison is limited to n <= 6, k <= 3")
    if args.n < 2 or args.k < 1 or args.trials < 0:
        raise ConfigError("need n >= 2, k >= 1, trials >= 0")
    rng = np.random.default_rng(args.seed)
    greedy = GreedyConnectedAdversary()
    oracle = OptimalAdversaryOracle()
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["trial", "oracle_dphi", "greedy_dphi", "bound"])
    worst_ratio_bound = 0.0
    violations = 0
    for trial in range(args.trials):
        known = rng.random((args.n, args.k)) < 0.5
        gifted = rng.random((args.n, args.k)) < 0.25
        state = KnowledgeState(args.n, args.k, known, gifted)
        tokens = np.full(args.n, -1, dtype=np.int64)
        for u in range(args.n):
            held = np.flatnonzero(known[u])
            if held.size:
                tokens[u] = int(rng.choice(held))
        assignment = TokenAssignment.from_single(args.k, tokens)
        ctx = AdversaryContext(round=1, state=state, assignment=assignment)
        g_out = greedy.choose(ctx)
        o_out = oracle.choose(ctx)
        _, g_pd = deliver(g_out.graph, assignment, state)
        _, o_pd = deliver(o_out.graph, assignment, state)
        g_delta = g_pd.after - g_pd.before
        o_delta = o_pd.after - o_pd.before
        bound = 2 * (g_out.free_components - 1)
        writer.writerow([trial, o_delta, g_delta, bound])
        if not (o_delta <= g_delta <= bound):
            violations += 1
        if bound:
            worst_ratio_bound = max(worst_ratio_bound, g_delta / bound)
    print(
        f"trials={args.trials} violations={violations} "
        f"max_greedy_over_bound={worst_ratio_bound:.3f}",
        file=sys.stderr,
    )
    return 2 if violations else 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_oracle_compare(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TraceFormatError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return 1
    except ConstructionError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return 3
    except DyngossipError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
