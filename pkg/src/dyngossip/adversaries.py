"""Strongly adaptive topology schedulers.

Each adversary sees the full pre-delivery state plus the round's messages and
answers with a graph satisfying its connectivity promise, optionally gifting
tokens into nodes' credited sets.  All constructions are deterministic: ties
break by ascending node id, token id, or lexicographic edge order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigError, ConstructionError
from .graphs import (
    Graph,
    UnionFind,
    augment_to_c_connected,
    components_of_adjacency,
    harary_overlay,
    peel_adjacency,
)
from .knowledge import TokenAssignment, deliver, free_adjacency, potential

__all__ = [
    "AdversaryContext",
    "AdversaryOutput",
    "IntervalWindowState",
    "free_edge_graph",
    "GreedyConnectedAdversary",
    "MstAdversary",
    "IntervalAdversary",
    "VertexConnAdversaryBasic",
    "VertexConnAdversaryRefined",
    "OptimalAdversaryOracle",
    "StaticPathAdversary",
    "ADVERSARY_KEYS",
    "make_adversary",
    "default_gift_probability",
]

ORACLE_MAX_NODES = 7


@dataclass(frozen=True)
class AdversaryContext:
    """Everything a strongly adaptive adversary may see when picking a round graph.

    The state is the pre-delivery state of the round; the assignment holds the
    messages the nodes are about to broadcast.  History never includes the
    current round's outcome.
    """

    round: int
    state: object
    assignment: TokenAssignment
    history: tuple = ()


@dataclass
class AdversaryOutput:
    graph: Graph
    gifts: list = field(default_factory=list)
    free_components: int = 1
    nonfree_edges: int = 0
    extra: dict = field(default_factory=dict)


def _clamped_log(n):
    return max(1.0, math.log(max(n, 1)))


def free_edge_graph(assignment, state):
    """Graph of all weight-zero edges plus its component partition.

    Components are returned as lists of node ids, ordered by their smallest
    member.
    """
    adj = free_adjacency(assignment, state)
    ncomp, labels = components_of_adjacency(adj)
    comps = [[] for _ in range(ncomp)]
    for u, lab in enumerate(labels.tolist()):
        comps[lab].append(u)
    comps.sort(key=lambda c: c[0])
    return Graph.from_adjacency(adj), comps


def _chain_edges(reps):
    reps = sorted(reps)
    return [(reps[i], reps[i + 1]) for i in range(len(reps) - 1)]


def _component_reps(labels):
    """Smallest node id of every component, ascending."""
    reps = {}
    for u, lab in enumerate(labels.tolist()):
        if lab not in reps:
            reps[lab] = u
    return sorted(reps.values())


class GreedyConnectedAdversary:
    """All free edges plus a chain of connectors over component representatives.

    Keeps every round graph connected while conceding at most
    2 * (free components - 1) potential per round (b = 1).
    """

    key = "greedy"
    promise = "connected"

    def choose(self, ctx):
        adj = free_adjacency(ctx.assignment, ctx.state)
        ncomp, labels = components_of_adjacency(adj)
        connectors = _chain_edges(_component_reps(labels))
        for u, v in connectors:
            adj[u, v] = adj[v, u] = True
        return AdversaryOutput(
            graph=Graph.from_adjacency(adj),
            free_components=ncomp,
            nonfree_edges=len(connectors),
        )


class StaticPathAdversary:
    """Degenerate scheduler: the fixed path 0-1-...-(n-1) every round."""

    key = "static-path"
    promise = "connected"

    def choose(self, ctx):
        n = ctx.state.n
        u = np.arange(n - 1)
        graph = Graph.from_arrays(n, u, u + 1)
        adj = free_adjacency(ctx.assignment, ctx.state)
        ncomp, _ = components_of_adjacency(adj)
        nonfree = sum(1 for a, b in zip(u.tolist(), (u + 1).tolist()) if not adj[a, b])
        return AdversaryOutput(graph=graph, free_components=ncomp, nonfree_edges=nonfree)


class MstAdversary:
    """Minimum spanning tree of the complete graph under the edge weights.

    Kruskal with ties broken lexicographically by (u, v); the potential can
    grow by at most the tree weight each round.
    """

    key = "mst"
    promise = "connected"

    def choose(self, ctx):
        state, a = ctx.state, ctx.assignment
        n = state.n
        credited = state.known | state.gifted
        sent = a.sent.astype(np.float32)
        miss = (~credited).astype(np.float32)
        short = sent @ miss.T  # short[v, u] = |I_v without credited_u|
        weights = (short + short.T).astype(np.int64)
        iu, iv = np.triu_indices(n, 1)
        w = weights[iu, iv]
        order = np.lexsort((iv, iu, w))
        uf = UnionFind(n)
        tree_u, tree_v, tree_w = [], [], 0
        zero_edges = 0
        for idx in order.tolist():
            u, v = int(iu[idx]), int(iv[idx])
            if uf.union(u, v):
                tree_u.append(u)
                tree_v.append(v)
                tree_w += int(w[idx])
                zero_edges += int(w[idx]) == 0
                if len(tree_u) == n - 1:
                    break
        # Kruskal saturates zero-weight cuts first, so the zero-weight forest
        # spans exactly the free components.
        ncomp = n - zero_edges
        return AdversaryOutput(
            graph=Graph.from_arrays(n, np.array(tree_u), np.array(tree_v)),
            free_components=ncomp,
            nonfree_edges=len(tree_u) - zero_edges,
            extra={"mst_weight": tree_w},
        )


@dataclass
class IntervalWindowState:
    """Per-window bookkeeping of the interval adversary.

    Tracks the cumulative broadcast sets since the window opened, the
    component partition of the conservatively-free graph of those cumulative
    sets, and the connector edges committed so far.  Connectors chosen for a
    component split were free at the previous cumulative level, so they
    already appeared (as free edges) in every earlier round of the window.
    """

    start_round: int
    cumulative: np.ndarray
    labels: np.ndarray | None = None
    prev_free: np.ndarray | None = None
    connectors: set = field(default_factory=set)


class IntervalAdversary:
    """Keeps the trace T-interval connected while conceding few non-free edges.

    Two overlapping 2T-round windows are maintained; each round's graph is the
    current free edges plus both windows' connectors.
    """

    key = "interval"
    promise = "interval"

    def __init__(self, T, initial_gifted):
        if T < 1:
            raise ConfigError("interval parameter T must be at least 1")
        self.T = T
        self.initial_gifted = np.asarray(initial_gifted, dtype=bool)
        self.windows = {}

    def _kprime_free(self, cumulative):
        cum = cumulative.astype(np.float32)
        outside = (~self.initial_gifted).astype(np.float32)
        short = cum @ outside.T  # short[u, v] = |cum_u without gifts0_v|
        free = (short == 0) & (short == 0).T
        free = free.copy()
        np.fill_diagonal(free, False)
        return free

    def _advance(self, win, assignment):
        win.cumulative = win.cumulative | assignment.sent
        free = self._kprime_free(win.cumulative)
        ncomp, labels = components_of_adjacency(free)
        if win.labels is None:
            for e in _chain_edges(_component_reps(labels)):
                win.connectors.add(e)
        else:
            self._reconnect_splits(win, labels)
        win.labels = labels
        win.prev_free = free

    def _reconnect_splits(self, win, labels):
        prev_labels = win.labels
        groups = {}
        for u, plab in enumerate(prev_labels.tolist()):
            groups.setdefault(plab, []).append(u)
        for plab, members in sorted(groups.items(), key=lambda kv: kv[1][0]):
            sub = {labels[u] for u in members}
            if len(sub) <= 1:
                continue
            # Kruskal over the previous level's free edges inside the group,
            # lexicographic order, until the split parts are rejoined.
            part = {lab: i for i, lab in enumerate(sorted(sub))}
            uf = UnionFind(len(part))
            needed = len(part) - 1
            members_arr = np.array(members)
            block = win.prev_free[np.ix_(members_arr, members_arr)]
            bu, bv = np.nonzero(np.triu(block, 1))
            for a, b in zip(bu.tolist(), bv.tolist()):
                u, v = int(members_arr[a]), int(members_arr[b])
                pu, pv = part[int(labels[u])], part[int(labels[v])]
                if uf.union(pu, pv):
                    win.connectors.add((min(u, v), max(u, v)))
                    needed -= 1
                    if needed == 0:
                        break
            if needed:
                raise ConstructionError(
                    f"window starting at round {win.start_round}: component split "
                    "without a free crossing edge at the previous level"
                )

    def choose(self, ctx):
        state, a, rnd = ctx.state, ctx.assignment, ctx.round
        n = state.n
        cur_start = self.T * ((rnd - 1) // self.T) + 1
        prev_start = cur_start - self.T
        for start in (prev_start, cur_start):
            if start >= 1 and start not in self.windows:
                self.windows[start] = IntervalWindowState(
                    start_round=start, cumulative=np.zeros((n, state.k), dtype=bool)
                )
        # Retire windows older than the previous one.
        for start in [s for s in self.windows if s < prev_start]:
            del self.windows[start]
        active = [self.windows[s] for s in sorted(self.windows) if s <= rnd]
        for win in active:
            self._advance(win, a)
        adj = free_adjacency(a, state)
        ncomp, _ = components_of_adjacency(adj)
        connectors = set()
        for win in active:
            connectors |= win.connectors
        for u, v in connectors:
            adj[u, v] = adj[v, u] = True
        graph = Graph.from_adjacency(adj)
        return AdversaryOutput(
            graph=graph,
            free_components=ncomp,
            nonfree_edges=len(connectors),
            extra={"windows": [w.start_round for w in active]},
        )


def _single_token_classes(assignment, members):
    """Partition `members` by broadcast token id (-1 for silent nodes)."""
    single = assignment.single_tokens()
    if single is None:
        raise ConfigError("connectivity adversaries require single-token assignments (b=1)")
    classes = {}
    for u in members:
        classes.setdefault(int(single[u]), []).append(int(u))
    return classes


class VertexConnAdversaryBasic:
    """c-connected rounds via peeling plus a circulant overlay on the residual.

    Vertices with at least c free neighbors peel off and reattach for free;
    the peeling residual gets a c-connected overlay whose non-free edges are
    the round's entire concession.
    """

    key = "vconn-basic"
    promise = "cconn"

    def __init__(self, c):
        if c < 1:
            raise ConfigError("connectivity parameter c must be positive")
        self.c = c

    def choose(self, ctx):
        state, a = ctx.state, ctx.assignment
        n = state.n
        adj = free_adjacency(a, state)
        ncomp, _ = components_of_adjacency(adj)
        order, alive = peel_adjacency(adj, self.c)
        residual = np.flatnonzero(alive).tolist()
        if len(residual) >= self.c + 1:
            overlay = harary_overlay(sorted(residual), self.c)
        else:
            core = sorted(residual + order[len(order) - (self.c + 1 - len(residual)) :])
            overlay = frozenset((u, v) for u, v in combinations(core, 2))
        nonfree = sum(1 for u, v in overlay if not adj[u, v])
        out = np.array(adj)
        for u, v in overlay:
            out[u, v] = out[v, u] = True
        return AdversaryOutput(
            graph=Graph.from_adjacency(out),
            free_components=ncomp,
            nonfree_edges=nonfree,
            extra={"residual_size": len(residual), "overlay_edges": len(overlay)},
        )


class VertexConnAdversaryRefined:
    """c-connected rounds paid for with token gifts instead of a dense overlay.

    Works on a residual set S of about alpha * c * log(n) nodes.  Gifts first
    make every token sent on one side of S well represented on the other side,
    then raise every node's free cross-degree to 2c; a greedy cut repair then
    closes the last gaps to c-connectivity with a handful of extra edges.
    """

    key = "vconn-refined"
    promise = "cconn"

    def __init__(self, c, alpha=4.0):
        if c < 1:
            raise ConfigError("connectivity parameter c must be positive")
        self.c = c
        self.alpha = alpha
        self._single = None  # per-round broadcast ids, set by choose()

    def _split_sides(self, classes, s):
        """(left, right) as lists of (token, members); right is one big class
        when any class exceeds s/3, otherwise a balanced prefix split."""
        ordered = sorted(classes.items())
        big = [(tok, mem) for tok, mem in ordered if len(mem) > s / 3]
        if big:
            # Prefer a real token class; silent nodes cannot anchor freeness.
            big.sort(key=lambda kv: (-len(kv[1]), kv[0] < 0, kv[0]))
            tok = big[0][0]
            right = [(t, m) for t, m in ordered if t == tok]
            left = [(t, m) for t, m in ordered if t != tok]
            return left, right, True
        prefix = 0
        for i, (tok, mem) in enumerate(ordered):
            prefix += len(mem)
            if prefix >= s / 3 and s - prefix >= s / 3:
                return ordered[: i + 1], ordered[i + 1 :], False
        raise ConstructionError("no balanced class split exists")

    def _boost_holders(self, left, right_nodes, credited, gifts, target):
        """Gift left-side tokens to right-side nodes until each has `target` holders."""
        for tok, _ in left:
            if tok < 0:
                continue
            lacking = [u for u in right_nodes if not credited[u, tok]]
            have = len(right_nodes) - len(lacking)
            for u in lacking[: max(0, target - have)]:
                credited[u, tok] = True
                gifts.append((u, tok))

    def _boost_degrees(self, from_side, to_side, credited, gifts):
        """Gift tokens of `to_side` classes until every `from_side` node has
        2c free neighbors across, greedily by new-neighbor count."""
        holder_classes = {tok: members for tok, members in to_side}
        for _, members in from_side:
            for v in members:
                deg = self._cross_degree(v, holder_classes, credited)
                if deg >= 2 * self.c:
                    continue
                cand = sorted(t for t in holder_classes if t >= 0 and not credited[v, t])
                while deg < 2 * self.c and cand:
                    best_tok, best_gain = None, 0
                    for t in cand:
                        gain = self._holders_of_own(v, holder_classes[t], credited)
                        if gain > best_gain:
                            best_tok, best_gain = t, gain
                    if best_tok is None:
                        break
                    credited[v, best_tok] = True
                    gifts.append((v, best_tok))
                    cand.remove(best_tok)
                    deg += best_gain

    def _cross_degree(self, v, holder_classes, credited):
        deg = 0
        for tok, members in holder_classes.items():
            if tok >= 0 and not credited[v, tok]:
                continue  # v does not credit their token: no free edge
            deg += self._holders_of_own(v, members, credited)
        return deg

    def _holders_of_own(self, v, members, credited):
        """How many of `members` credit v's own broadcast (all, if v is silent)."""
        if self._single[v] < 0:
            return len(members)
        tok = self._single[v]
        return int(credited[list(members), tok].sum())

    def choose(self, ctx):
        state, a = ctx.state, ctx.assignment
        n = state.n
        c = self.c
        single = a.single_tokens()
        if single is None:
            raise ConfigError("vconn-refined requires single-token assignments (b=1)")
        self._single = single
        s_target = math.ceil(self.alpha * c * _clamped_log(n))
        credited = np.array(state.known | state.gifted)
        adj0 = free_adjacency(a, state, credited=credited)
        ncomp0, _ = components_of_adjacency(adj0)
        order, alive = peel_adjacency(adj0, c, stop_size=s_target)
        S = np.flatnonzero(alive).tolist()
        s = len(S)
        classes = _single_token_classes(a, S)
        left, right, big = self._split_sides(classes, s)
        gifts = []
        target = math.ceil(s / math.sqrt(_clamped_log(n)))
        right_nodes = sorted(u for _, mem in right for u in mem)
        self._boost_holders(left, right_nodes, credited, gifts, target)
        self._boost_degrees(left, right, credited, gifts)
        if not big:
            left_nodes = sorted(u for _, mem in left for u in mem)
            self._boost_holders(right, left_nodes, credited, gifts, target)
            self._boost_degrees(right, left, credited, gifts)
        # Rebuild freeness under the enlarged credited sets and repair S to
        # c-connectivity with greedily chosen extra edges.
        adj = free_adjacency(a, state, credited=credited)
        S_arr = np.array(S)
        sub = adj[np.ix_(S_arr, S_arr)]
        clique = None
        real = [(tok, mem) for tok, mem in sorted(classes.items()) if len(mem) >= c]
        if real:
            real.sort(key=lambda kv: (-len(kv[1]), kv[0]))
            pos = {u: i for i, u in enumerate(S)}
            clique = [pos[u] for u in sorted(real[0][1])[:c]]
        added_rel = augment_to_c_connected(sub, c, clique=clique, max_added=c * s)
        added = [(int(S_arr[i]), int(S_arr[j])) for i, j in added_rel]
        out = np.array(adj)
        for u, v in added:
            out[u, v] = out[v, u] = True
        return AdversaryOutput(
            graph=Graph.from_adjacency(out),
            gifts=gifts,
            free_components=int(components_of_adjacency(adj)[0]),
            nonfree_edges=len(added),
            extra={
                "residual_size": s,
                "gift_count": len(gifts),
                "repair_edges": len(added),
            },
        )


class OptimalAdversaryOracle:
    """Exhaustive ground truth: the connected graph minimising the round's potential growth.

    Deleting edges never increases realized growth, so the minimum over
    connected graphs is attained on a spanning tree; all spanning trees are
    enumerated, which caps n at 7.
    """

    key = "oracle"
    promise = "connected"

    def choose(self, ctx):
        state, a = ctx.state, ctx.assignment
        n = state.n
        if n > ORACLE_MAX_NODES:
            raise ConfigError(f"oracle adversary enumerates spanning trees; n must be <= {ORACLE_MAX_NODES}")
        adj = free_adjacency(a, state)
        ncomp, _ = components_of_adjacency(adj)
        if n <= 1:
            return AdversaryOutput(graph=Graph(n), free_components=ncomp)
        pairs = list(combinations(range(n), 2))
        best_tree, best_delta = None, None
        for subset in combinations(pairs, n - 1):
            uf = UnionFind(n)
            if all(uf.union(u, v) for u, v in subset):
                g = Graph(n, subset)
                _, pd = deliver(g, a, state)
                delta = pd.after - pd.before
                if best_delta is None or delta < best_delta:
                    best_tree, best_delta = g, delta
        nonfree = sum(1 for u, v in zip(best_tree.eu, best_tree.ev) if not adj[u, v])
        return AdversaryOutput(
            graph=best_tree,
            free_components=ncomp,
            nonfree_edges=nonfree,
            extra={"oracle_delta": best_delta},
        )


_ADVERSARIES = {
    cls.key: cls
    for cls in (
        GreedyConnectedAdversary,
        MstAdversary,
        IntervalAdversary,
        VertexConnAdversaryBasic,
        VertexConnAdversaryRefined,
        OptimalAdversaryOracle,
        StaticPathAdversary,
    )
}
_ADVERSARIES["partial"] = GreedyConnectedAdversary

ADVERSARY_KEYS = tuple(sorted(_ADVERSARIES))


def default_gift_probability(key, *, b=1, T=1, delta=1.0, epsilon=0.5):
    """Per-scenario default for the Bernoulli gifted-set density."""
    if key in ("greedy", "oracle"):
        return 0.25
    if key == "partial":
        return delta / 4.0
    if key == "mst":
        return max(0.0, 1.0 - epsilon / (4.0 * math.e * b))
    if key == "interval":
        return max(0.0, 1.0 - epsilon / T)
    if key in ("vconn-basic", "vconn-refined"):
        return 0.5
    if key == "static-path":
        return 0.0
    raise ConfigError(f"unknown adversary {key!r}")


def make_adversary(key, *, c=1, T=1, alpha=4.0, initial_gifted=None, b=1):
    if key not in _ADVERSARIES:
        raise ConfigError(f"unknown adversary {key!r}; choose one of {', '.join(ADVERSARY_KEYS)}")
    if key in ("greedy", "partial", "oracle", "interval", "vconn-basic", "vconn-refined") and b != 1:
        raise ConfigError(f"adversary {key!r} is defined for single-token rounds (b=1)")
    if key == "interval":
        if initial_gifted is None:
            raise ConfigError("interval adversary needs the initial gifted sets")
        return IntervalAdversary(T, initial_gifted)
    if key == "vconn-basic":
        return VertexConnAdversaryBasic(c)
    if key == "vconn-refined":
        return VertexConnAdversaryRefined(c, alpha=alpha)
    return _ADVERSARIES[key]()
