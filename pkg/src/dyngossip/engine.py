"""The synchronous round loop, run configuration, sweeps, and trace verification.

Round order (the strongly adaptive contract): the protocol commits its
broadcasts from the pre-round state, the adversary then sees those messages
and picks the graph plus any gifts, gifts are credited, and only then are the
messages delivered.  Everything is deterministic per seed: one seed sequence
is split into independent streams for gifted-set sampling, the initial token
placement, and protocol randomness.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .adversaries import (
    ADVERSARY_KEYS,
    AdversaryContext,
    default_gift_probability,
    make_adversary,
)
from .errors import ConfigError, ContractViolationError, PromiseViolationError, TraceFormatError
from .graphs import DynamicTrace, Graph, interval_connectivity_ok, is_connected, vertex_connectivity
from .knowledge import (
    KnowledgeState,
    TokenAssignment,
    apply_gifts,
    deliver,
    potential,
    sample_kprime,
)
from .protocols import PROTOCOL_KEYS, make_protocol

__all__ = [
    "RunConfig",
    "RoundReport",
    "RunReport",
    "run",
    "sweep",
    "verify_trace",
    "VerifyReport",
    "Scenario",
]

TERMINATION_MODES = ("full", "partial", "fec")
INITIAL_MODES = ("bernoulli", "single-source", "explicit")


@dataclass(frozen=True)
class RunConfig:
    """All parameters of one simulated run."""

    n: int = 16
    k: int = 8
    b: int = 1
    c: int = 1
    T: int = 1
    delta: float = 1.0
    p_kprime: float | None = None
    epsilon: float = 0.5
    alpha: float = 4.0
    q_initial: float = 0.5
    initial: str = "bernoulli"
    initial_tokens: tuple | None = None
    protocol: str = "seq"
    adversary: str = "greedy"
    seed: int = 0
    max_rounds: int | None = None
    termination: str = "full"
    local: bool = False

    def validate(self):
        if self.n < 1:
            raise ConfigError(f"n must be at least 1, got {self.n}")
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")
        if self.b < 1:
            raise ConfigError(f"b must be at least 1, got {self.b}")
        if not 1 <= self.c <= max(1, self.n - 1):
            raise ConfigError(f"c must lie in [1, n-1], got c={self.c} with n={self.n}")
        if self.T < 1:
            raise ConfigError(f"T must be at least 1, got {self.T}")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if self.p_kprime is not None and not 0.0 <= self.p_kprime <= 1.0:
            raise ConfigError(f"p_kprime must lie in [0, 1], got {self.p_kprime}")
        if not 0.0 <= self.q_initial <= 1.0:
            raise ConfigError(f"q_initial must lie in [0, 1], got {self.q_initial}")
        if self.initial not in INITIAL_MODES:
            raise ConfigError(f"initial must be one of {INITIAL_MODES}, got {self.initial!r}")
        if self.initial == "explicit" and self.initial_tokens is None:
            raise ConfigError("initial='explicit' needs initial_tokens")
        if self.protocol not in PROTOCOL_KEYS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.adversary not in ADVERSARY_KEYS:
            raise ConfigError(f"unknown adversary {self.adversary!r}")
        if self.termination not in TERMINATION_MODES:
            raise ConfigError(f"termination must be one of {TERMINATION_MODES}, got {self.termination!r}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be at least 1, got {self.max_rounds}")
        if self.protocol == "fec":
            if self.termination != "fec":
                raise ConfigError("protocol 'fec' requires termination 'fec'")
            if self.initial != "single-source":
                raise ConfigError("protocol 'fec' requires a single source (initial='single-source')")
        if self.termination == "fec" and self.protocol != "fec":
            raise ConfigError("termination 'fec' only applies to the fec protocol")

    def resolved_max_rounds(self):
        if self.max_rounds is not None:
            return self.max_rounds
        return max(1, 4 * self.n * self.k)

    def resolved_p_kprime(self):
        if self.p_kprime is not None:
            return self.p_kprime
        return default_gift_probability(
            self.adversary, b=self.b, T=self.T, delta=self.delta, epsilon=self.epsilon
        )

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if d["initial_tokens"] is not None:
            d["initial_tokens"] = [list(t) for t in d["initial_tokens"]]
        return d


@dataclass(frozen=True)
class RoundReport:
    round: int
    phi_before: int
    phi_after: int
    delta_phi: int
    free_components: int
    nonfree_edges: int
    gifted_tokens: int
    done_fraction: float


@dataclass
class RunReport:
    """Aggregate outcome of one run plus its per-round trajectory."""

    config: RunConfig
    rounds: list[RoundReport]
    terminated: bool
    rounds_to_termination: int | None
    stop_reason: str
    phi_initial: int
    max_delta_phi: int
    invariant_violations: int
    realized_initial_fraction: float
    final_state: KnowledgeState | None = None
    trace_rounds: list | None = None  # (graph, assignment_sets, gifts, diagnostics)
    initial_snapshot: tuple | None = None  # (known sets, gifted sets) when tracing

    def trace(self):
        if self.trace_rounds is None:
            return None
        return DynamicTrace(self.config.n, [t[0] for t in self.trace_rounds])

    def check_round_identity(self):
        """Arithmetic floor on the round count: the potential climbs to its
        target at no more than max_delta_phi per round."""
        if not self.terminated or self.rounds_to_termination is None:
            return True
        target = _phi_target(self.config)
        need = target - self.phi_initial
        if need <= 0:
            return True
        return self.rounds_to_termination * self.max_delta_phi >= need


def _phi_target(config):
    if config.termination == "partial":
        return config.n * math.ceil(config.delta * config.k)
    return config.n * config.k


def _universe(config):
    if config.termination == "fec":
        return config.resolved_max_rounds()
    return config.k


def _initial_known(config, rng, universe):
    n, k = config.n, config.k
    known = np.zeros((n, universe), dtype=bool)
    if config.termination == "fec":
        # The source can mint any packet id, so it is seeded with the full
        # packet universe; real tokens stay implicit.
        known[0, :] = True
        return known
    if config.initial == "single-source":
        known[0, :k] = True
        return known
    if config.initial == "explicit":
        for u, toks in enumerate(config.initial_tokens):
            for t in toks:
                if not 0 <= t < k:
                    raise ConfigError(f"initial token {t} out of range for node {u}")
                known[u, t] = True
        return known
    known[:, :k] = rng.random((n, k)) < config.q_initial
    # Every token starts somewhere: orphaned tokens go to a seeded random node.
    orphans = np.flatnonzero(~known.any(axis=0))
    for t in orphans.tolist():
        known[int(rng.integers(n)), t] = True
    return known


def _termination_predicate(config):
    mode = config.termination
    k = config.k
    if mode == "full":
        need = k
    elif mode == "partial":
        need = math.ceil(config.delta * k)
    else:  # fec: decoded once k distinct packet ids are held
        need = k
    def predicate(state):
        if need == 0:
            return True
        return int(state.known.sum(axis=1).min()) >= need
    return predicate


def _edge_weights(graph, assignment, credited):
    if graph.edge_count == 0:
        return np.zeros(0, dtype=np.int64)
    eu, ev = graph.eu, graph.ev
    w = (assignment.sent[ev] & ~credited[eu]).sum(axis=1) + (
        assignment.sent[eu] & ~credited[ev]
    ).sum(axis=1)
    return w.astype(np.int64)


def run(config, record_trace=False, record_history=False):
    """Execute one run and return its report.

    record_trace keeps per-round graphs, assignments, gifts, and diagnostics
    (needed for JSONL emission and offline verification); record_history makes
    the full past visible to the adversary context.
    """
    config.validate()
    seed_seq = np.random.SeedSequence(config.seed)
    kprime_rng, initial_rng, protocol_rng = (
        np.random.default_rng(s) for s in seed_seq.spawn(3)
    )
    universe = _universe(config)
    known0 = _initial_known(config, initial_rng, universe)
    gifted0 = sample_kprime(config.n, universe, config.resolved_p_kprime(), kprime_rng)
    if config.termination == "fec":
        gifted0[0, :] = False  # the source's seeding already covers it
    state = KnowledgeState(config.n, universe, known0, gifted0)
    realized_initial = float(known0[:, : config.k].mean()) if config.k else 1.0

    protocol = make_protocol(
        config.protocol,
        n=config.n,
        k=config.k,
        b=config.b,
        c=config.c,
        delta=config.delta,
        rng=protocol_rng,
        local=config.local,
    )
    adversary = make_adversary(
        config.adversary,
        c=config.c,
        T=config.T,
        alpha=config.alpha,
        initial_gifted=state.gifted,
        b=config.b,
    )
    predicate = _termination_predicate(config)

    reports = []
    history = []
    trace_rounds = [] if record_trace else None
    initial_snapshot = None
    if record_trace:
        initial_snapshot = (
            [np.flatnonzero(row).tolist() for row in known0],
            [np.flatnonzero(row).tolist() for row in gifted0],
        )
    violations = 0
    phi = potential(state)
    phi_initial = phi
    max_delta = 0
    terminated = predicate(state)
    termination_round = 0 if terminated else None
    stop_reason = "initial-state" if terminated else "max-rounds"
    k_for_fraction = max(1, config.k)

    if not terminated:
        for rnd in range(1, config.resolved_max_rounds() + 1):
            decision = protocol.decide(rnd, state)
            assignment = decision.assignment
            if int(assignment.counts().max(initial=0)) > config.b:
                raise ContractViolationError(
                    f"round {rnd}: protocol broadcast more than b={config.b} tokens"
                )
            if (assignment.sent & ~state.known).any():
                raise ContractViolationError(
                    f"round {rnd}: protocol broadcast a token outside a node's known set"
                )
            if decision.done and assignment.is_empty():
                stop_reason = "protocol-exhausted"
                break
            ctx = AdversaryContext(
                round=rnd,
                state=state,
                assignment=assignment,
                history=tuple(history) if record_history else (),
            )
            out = adversary.choose(ctx)
            if not is_connected(out.graph):
                raise PromiseViolationError(
                    f"round {rnd}: adversary {config.adversary!r} emitted a disconnected graph"
                )
            gifted_state = apply_gifts(state, out.gifts)
            credited = gifted_state.known | gifted_state.gifted
            weights = _edge_weights(out.graph, assignment, credited)
            nonfree = int((weights > 0).sum())
            new_state, pd = deliver(out.graph, assignment, gifted_state)
            phi_after = pd.after
            if phi_after - pd.before > int(weights.sum()):
                violations += 1
            if phi_after < phi:
                violations += 1
            delta_phi = phi_after - phi
            max_delta = max(max_delta, delta_phi)
            done_fraction = float(new_state.known.sum(axis=1).min() / k_for_fraction)
            reports.append(
                RoundReport(
                    round=rnd,
                    phi_before=phi,
                    phi_after=phi_after,
                    delta_phi=delta_phi,
                    free_components=out.free_components,
                    nonfree_edges=nonfree,
                    gifted_tokens=len(out.gifts),
                    done_fraction=done_fraction,
                )
            )
            if record_history:
                history.append((out.graph, assignment))
            if record_trace:
                diag = {
                    "free_components": out.free_components,
                    "nonfree_edges": nonfree,
                    "phi_after": phi_after,
                }
                diag.update(out.extra)
                trace_rounds.append((out.graph, assignment.as_sets(), list(out.gifts), diag))
            state = new_state
            phi = phi_after
            if predicate(state):
                terminated = True
                termination_round = rnd
                stop_reason = "terminated"
                break
            if decision.done:
                stop_reason = "protocol-exhausted"
                break

    report = RunReport(
        config=config,
        rounds=reports,
        terminated=terminated,
        rounds_to_termination=termination_round,
        stop_reason=stop_reason,
        phi_initial=phi_initial,
        max_delta_phi=max_delta,
        invariant_violations=violations,
        realized_initial_fraction=realized_initial,
        final_state=state,
        trace_rounds=trace_rounds,
        initial_snapshot=initial_snapshot,
    )
    if not report.check_round_identity():
        report.invariant_violations += 1
    return report


SWEEP_AXIS_ORDER = (
    "n", "k", "b", "c", "T", "delta", "p_kprime", "epsilon", "alpha",
    "q_initial", "protocol", "adversary", "max_rounds", "termination", "initial",
)


def expand_sweep(base, axes, reps=1):
    """Cartesian product of axis values times repetition seeds.

    Repetition i runs with seed base.seed + i.  Returns the configs in
    deterministic order: axes in SWEEP_AXIS_ORDER, repetitions innermost.
    """
    for key in axes:
        if key not in SWEEP_AXIS_ORDER:
            raise ConfigError(f"cannot sweep over key {key!r}")
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    names = [k for k in SWEEP_AXIS_ORDER if k in axes]
    grids = [axes[k] for k in names]
    if any(len(g) == 0 for g in grids):
        raise ConfigError("sweep axes must be non-empty")
    configs = []
    for values in itertools.product(*grids):
        cfg = replace(base, **dict(zip(names, values)))
        for rep in range(reps):
            configs.append(replace(cfg, seed=base.seed + rep))
    return configs


def _run_plain(config):
    return run(config)


def sweep(base, axes=None, reps=1, jobs=1, record_trace=False):
    """Run the whole grid; results come back in expansion order."""
    configs = expand_sweep(base, axes or {}, reps)
    if jobs > 1 and not record_trace and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_plain, configs))
    return [run(c, record_trace=record_trace) for c in configs]


# ---------------------------------------------------------------------------
# Offline trace verification


@dataclass(frozen=True)
class Scenario:
    """What an emitted trace promised: per-round connectivity, c-connectivity,
    or T-interval connectivity across the trace."""

    kind: str  # connected | cconn | interval
    c: int = 1
    T: int = 1

    @classmethod
    def for_adversary(cls, adversary, c=1, T=1):
        if adversary in ("vconn-basic", "vconn-refined"):
            return cls("cconn", c=c)
        if adversary == "interval":
            return cls("interval", T=T)
        return cls("connected")


@dataclass
class VerifyReport:
    ok: bool
    rounds_checked: int
    first_bad_round: int | None = None
    reason: str | None = None

    def __str__(self):
        if self.ok:
            return f"ok: {self.rounds_checked} rounds verified"
        return f"FAIL at round {self.first_bad_round}: {self.reason}"


def write_trace_jsonl(path, report):
    """Emit a recorded run as JSONL: a config/state header then one object per round."""
    if report.trace_rounds is None:
        raise ValueError("run was not recorded with record_trace=True")
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "round": 0,
            "config": report.config.as_dict(),
            "known": report.initial_snapshot[0],
            "gifted": report.initial_snapshot[1],
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, (graph, assignment_sets, gifts, diag) in enumerate(report.trace_rounds, start=1):
            obj = {
                "round": i,
                "edges": [[int(u), int(v)] for u, v in zip(graph.eu, graph.ev)],
                "assignment": {str(u): toks for u, toks in assignment_sets.items()},
                "gifts": [[int(u), int(t)] for u, t in gifts],
                "diagnostics": diag,
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def _parse_trace(path):
    rounds = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"invalid JSON ({exc.msg})", line=lineno) from exc
            if not isinstance(obj, dict) or "round" not in obj:
                raise TraceFormatError("object lacks a 'round' field", line=lineno)
            if obj["round"] == 0:
                header = (obj, lineno)
            else:
                rounds.append((obj, lineno))
    if header is None:
        raise TraceFormatError("missing round-0 header object")
    rounds.sort(key=lambda pair: pair[0]["round"])
    return header, rounds


def verify_trace(path, scenario=None, b=None):
    """Re-check an emitted trace offline.

    Validates graph well-formedness, the scenario's connectivity promise, the
    broadcast contract, and the potential accounting (recomputed weights,
    non-free counts, recorded phi values) for every round.
    """
    (header, header_line), round_objs = _parse_trace(path)
    try:
        cfg_dict = dict(header["config"])
        if cfg_dict.get("initial_tokens") is not None:
            cfg_dict["initial_tokens"] = tuple(tuple(t) for t in cfg_dict["initial_tokens"])
        config = RunConfig(**cfg_dict)
        known_sets = header["known"]
        gifted_sets = header["gifted"]
    except (KeyError, TypeError) as exc:
        raise TraceFormatError(f"bad header: {exc}", line=header_line) from exc
    if scenario is None:
        scenario = Scenario.for_adversary(config.adversary, c=config.c, T=config.T)
    if b is None:
        b = config.b
    n = config.n
    universe = _universe(config)
    known = np.zeros((n, universe), dtype=bool)
    gifted = np.zeros((n, universe), dtype=bool)
    for u, toks in enumerate(known_sets):
        known[u, toks] = True
    for u, toks in enumerate(gifted_sets):
        gifted[u, toks] = True

    graphs = []
    checked = 0
    for obj, lineno in round_objs:
        rnd = obj["round"]
        try:
            graph = Graph(n, [(int(u), int(v)) for u, v in obj["edges"]])
            sent = np.zeros((n, universe), dtype=bool)
            for u_str, toks in obj.get("assignment", {}).items():
                sent[int(u_str), toks] = True
            gifts = [(int(u), int(t)) for u, t in obj.get("gifts", [])]
            diag = obj.get("diagnostics", {})
        except (ValueError, IndexError, TypeError) as exc:
            raise TraceFormatError(str(exc), line=lineno) from exc
        assignment = TokenAssignment(sent)
        if int(assignment.counts().max(initial=0)) > b:
            return VerifyReport(False, checked, rnd, f"more than b={b} tokens broadcast")
        if (sent & ~known).any():
            return VerifyReport(False, checked, rnd, "broadcast of an unknown token")
        if scenario.kind in ("connected", "interval") and not is_connected(graph):
            return VerifyReport(False, checked, rnd, "round graph disconnected")
        if scenario.kind == "cconn":
            kappa = vertex_connectivity(graph) if n >= 2 else 0
            if n >= 2 and kappa < scenario.c:
                return VerifyReport(
                    False, checked, rnd, f"vertex connectivity {kappa} below promise {scenario.c}"
                )
        for u, t in gifts:
            gifted[u, t] = True
        credited = known | gifted
        weights = _edge_weights(graph, assignment, credited)
        phi_before_delivery = int(np.count_nonzero(credited))
        if graph.edge_count:
            received = (graph.adjacency().astype(np.float32) @ sent.astype(np.float32)) > 0
            known = known | received
        phi_after = int(np.count_nonzero(known | gifted))
        if phi_after - phi_before_delivery > int(weights.sum()):
            return VerifyReport(False, checked, rnd, "potential grew beyond the edge-weight bound")
        nonfree = int((weights > 0).sum())
        if "nonfree_edges" in diag and diag["nonfree_edges"] != nonfree:
            return VerifyReport(
                False, checked, rnd,
                f"recorded nonfree_edges={diag['nonfree_edges']} but recomputed {nonfree}",
            )
        if "phi_after" in diag and diag["phi_after"] != phi_after:
            return VerifyReport(
                False, checked, rnd,
                f"recorded phi_after={diag['phi_after']} but recomputed {phi_after}",
            )
        graphs.append(graph)
        checked += 1
    if scenario.kind == "interval":
        trace = DynamicTrace(n, graphs)
        if not interval_connectivity_ok(trace, scenario.T):
            return VerifyReport(False, checked, None, f"trace is not {scenario.T}-interval connected")
    return VerifyReport(True, checked)
