"""Undirected simple graphs, exact connectivity oracles, and overlay constructions.

Graphs are immutable values on node ids 0..n-1.  Vertex connectivity is
computed exactly via unit-vertex-capacity maximum flow (each vertex split
into an in/out pair), minimised over a dominating set of source-sink pairs.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow

from .errors import ConstructionError

__all__ = [
    "Graph",
    "DynamicTrace",
    "UnionFind",
    "is_connected",
    "vertex_connectivity",
    "interval_connectivity_ok",
    "harary_overlay",
    "peel_high_degree",
    "augment_to_c_connected",
]


class UnionFind:
    """Disjoint sets over 0..size-1 with path compression."""

    def __init__(self, size):
        self.parent = list(range(size))
        self.count = size

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while x != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        self.count -= 1
        return True


class Graph:
    """Immutable undirected simple graph.

    Edges are kept as parallel arrays (eu, ev) with eu < ev, lexicographically
    sorted and de-duplicated, so identical edge sets always compare equal and
    iteration order is reproducible.
    """

    __slots__ = ("n", "eu", "ev", "_edge_set", "_adj")

    def __init__(self, n, edges=()):
        edges = [(int(a), int(b)) for a, b in edges]
        u = np.array([e[0] for e in edges], dtype=np.int64)
        v = np.array([e[1] for e in edges], dtype=np.int64)
        self._init_arrays(int(n), u, v)

    @classmethod
    def from_arrays(cls, n, u, v):
        g = cls.__new__(cls)
        g._init_arrays(int(n), np.asarray(u, dtype=np.int64), np.asarray(v, dtype=np.int64))
        return g

    @classmethod
    def from_adjacency(cls, adj):
        u, v = np.nonzero(np.triu(adj, 1))
        return cls.from_arrays(adj.shape[0], u, v)

    def _init_arrays(self, n, u, v):
        if n < 0:
            raise ValueError("node count must be non-negative")
        if u.size:
            lo = np.minimum(u, v)
            hi = np.maximum(u, v)
            if (lo == hi).any():
                raise ValueError("self-loops are not allowed")
            if lo.min() < 0 or hi.max() >= n:
                raise ValueError("edge endpoint out of range")
            keys = lo * n + hi
            order = np.argsort(keys, kind="stable")
            keys = keys[order]
            keep = np.ones(keys.size, dtype=bool)
            keep[1:] = keys[1:] != keys[:-1]
            lo, hi = lo[order][keep], hi[order][keep]
        else:
            lo = np.empty(0, dtype=np.int64)
            hi = np.empty(0, dtype=np.int64)
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.n = n
        self.eu = lo
        self.ev = hi
        self._edge_set = None
        self._adj = None

    @property
    def edge_count(self):
        return int(self.eu.size)

    def edge_set(self):
        if self._edge_set is None:
            self._edge_set = frozenset(zip(self.eu.tolist(), self.ev.tolist()))
        return self._edge_set

    def adjacency(self):
        """Dense boolean adjacency matrix (cached, read-only)."""
        if self._adj is None:
            adj = np.zeros((self.n, self.n), dtype=bool)
            adj[self.eu, self.ev] = True
            adj[self.ev, self.eu] = True
            adj.setflags(write=False)
            self._adj = adj
        return self._adj

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.eu, 1)
        np.add.at(deg, self.ev, 1)
        return deg

    def union(self, other_edges):
        """New graph with extra (u, v) pairs added."""
        extra = [(int(a), int(b)) for a, b in other_edges]
        u = np.concatenate([self.eu, np.array([e[0] for e in extra], dtype=np.int64)])
        v = np.concatenate([self.ev, np.array([e[1] for e in extra], dtype=np.int64)])
        return Graph.from_arrays(self.n, u, v)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.eu, other.eu)
            and np.array_equal(self.ev, other.ev)
        )

    def __hash__(self):
        return hash((self.n, self.edge_set()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.edge_count})"


class DynamicTrace:
    """A per-round sequence of graphs over a fixed node set."""

    def __init__(self, n, rounds):
        rounds = tuple(rounds)
        for g in rounds:
            if g.n != n:
                raise ValueError("all round graphs must share the same node count")
        self.n = int(n)
        self.rounds = rounds

    def __len__(self):
        return len(self.rounds)

    def __repr__(self):
        return f"DynamicTrace(n={self.n}, rounds={len(self.rounds)})"


def _component_labels(g):
    if g.n == 0:
        return 0, np.empty(0, dtype=np.int32)
    data = np.ones(g.eu.size, dtype=np.int8)
    mat = csr_matrix((data, (g.eu, g.ev)), shape=(g.n, g.n))
    ncomp, labels = connected_components(mat, directed=False)
    return int(ncomp), labels


def is_connected(g):
    """True iff the graph has exactly one component (n <= 1 counts as connected)."""
    if g.n <= 1:
        return True
    ncomp, _ = _component_labels(g)
    return ncomp == 1


def components_of_adjacency(adj):
    """(count, labels) of the connected components of a boolean adjacency matrix."""
    m = adj.shape[0]
    if m == 0:
        return 0, np.empty(0, dtype=np.int32)
    ncomp, labels = connected_components(csr_matrix(adj), directed=False)
    return int(ncomp), labels


class _VertexFlowNet:
    """Unit-vertex-capacity flow network for internally disjoint path counts.

    Vertex w splits into w_in = w and w_out = m + w joined by a capacity-1
    arc; each undirected edge {u, v} becomes u_out->v_in and v_out->u_in with
    effectively unbounded capacity.  An optional fan sink (node 2m) with
    capacity-1 arcs from r_out for r in `fan_targets` supports flows from a
    vertex to a target set.
    """

    def __init__(self, adj, fan_targets=None):
        m = adj.shape[0]
        us, vs = np.nonzero(np.triu(adj, 1))
        rows = [np.arange(m), m + us, m + vs]
        cols = [m + np.arange(m), vs, us]
        data = [np.ones(m, dtype=np.int32), np.full(2 * us.size, m, dtype=np.int32)]
        size = 2 * m
        if fan_targets is not None:
            t = np.asarray(fan_targets, dtype=np.int64)
            rows.append(m + t)
            cols.append(np.full(t.size, 2 * m, dtype=np.int64))
            data.append(np.ones(t.size, dtype=np.int32))
            size = 2 * m + 1
        self.m = m
        self.size = size
        self.cap = csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate([c.astype(np.int64) for c in cols]))),
            shape=(size, size),
            dtype=np.int32,
        )

    def pair_flow(self, s, t):
        """Max internally vertex-disjoint paths between non-adjacent s and t."""
        return maximum_flow(self.cap, self.m + s, t)

    def fan_flow(self, s):
        """Max vertex-disjoint paths from s to the fan target set."""
        return maximum_flow(self.cap, self.m + s, 2 * self.m)

    def cut_from_flow(self, source, result):
        """Extract the vertex min-cut behind a max-flow result."""
        residual = self.cap - result.flow
        residual.data = (residual.data > 0).astype(np.int32)
        residual.eliminate_zeros()
        reach = breadth_first_order(residual, self.m + source, directed=True, return_predecessors=False)
        in_reach = np.zeros(self.size, dtype=bool)
        in_reach[reach] = True
        cut = [w for w in range(self.m) if in_reach[w] and not in_reach[self.m + w]]
        return cut


def vertex_connectivity(g):
    """The largest c such that g is c-vertex connected.

    Menger reduction: the minimum, over a dominating set of non-adjacent
    source-sink pairs, of the maximum number of internally vertex-disjoint
    paths.  Complete graphs are (n-1)-connected by convention.
    """
    n = g.n
    if n < 2:
        raise ValueError("vertex connectivity requires at least 2 nodes")
    if not is_connected(g):
        return 0
    if g.edge_count == n * (n - 1) // 2:
        return n - 1
    adj = g.adjacency()
    deg = g.degrees()
    net = _VertexFlowNet(adj)
    v = int(np.argmin(deg))
    best = int(deg[v])
    for w in range(n):
        if w != v and not adj[v, w]:
            best = min(best, int(net.pair_flow(v, w).flow_value))
    nbrs = np.flatnonzero(adj[v])
    for i, x in enumerate(nbrs):
        for y in nbrs[i + 1 :]:
            if not adj[x, y]:
                best = min(best, int(net.pair_flow(int(x), int(y)).flow_value))
    return best


def interval_connectivity_ok(trace, T):
    """True iff every window of T consecutive rounds shares a connected subgraph.

    For traces shorter than T the single window of all rounds is checked, so
    a one-round trace must simply be connected.
    """
    if T < 1:
        raise ValueError("window length must be at least 1")
    rounds = trace.rounds
    if not rounds:
        return True
    n = trace.n
    keysets = [set((g.eu * n + g.ev).tolist()) for g in rounds]
    span = min(T, len(rounds))
    for start in range(len(rounds) - span + 1):
        common = set(keysets[start])
        for i in range(start + 1, start + span):
            common &= keysets[i]
            if not common and n > 1:
                break
        edges = np.array(sorted(common), dtype=np.int64)
        g = Graph.from_arrays(n, edges // n, edges % n)
        if not is_connected(g):
            return False
    return True


def harary_overlay(nodes, c):
    """Circulant edge set making the given nodes c-vertex connected.

    Each node connects to its ceil(c/2) cyclic successors; odd c additionally
    links diametric partners.  Edge count stays within
    ceil(c*s/2) + s for s = len(nodes).
    """
    s = len(nodes)
    if c < 1:
        raise ValueError("connectivity target must be positive")
    if s <= c:
        raise ValueError(f"need at least {c + 1} nodes for a {c}-connected overlay, got {s}")
    edges = set()

    def add(i, j):
        a, b = nodes[i], nodes[j]
        if a != b:
            edges.add((min(a, b), max(a, b)))

    for d in range(1, (c + 1) // 2 + 1):
        for i in range(s):
            add(i, (i + d) % s)
    if c % 2 == 1:
        dm = s // 2
        for i in range(s // 2 + 1):
            add(i, (i + dm) % s)
    return frozenset(edges)


def peel_high_degree(g, c):
    """Iteratively remove vertices with >= c remaining neighbors.

    Returns (removal order, residual set).  At every step the smallest
    eligible node id is removed, so the result is reproducible.  Every vertex
    in the residual set has fewer than c neighbors inside it.
    """
    if c < 1:
        raise ValueError("degree threshold must be positive")
    order, alive = peel_adjacency(g.adjacency(), c)
    return order, set(np.flatnonzero(alive).tolist())


def peel_adjacency(adj, c, stop_size=0):
    """Array-level peeling used by the adversaries.

    Peels smallest-id vertices of residual degree >= c until none remains or
    only `stop_size` vertices are left.  Returns (order list, alive mask).
    """
    m = adj.shape[0]
    alive = np.ones(m, dtype=bool)
    deg = adj.sum(axis=1).astype(np.int64)
    order = []
    remaining = m
    while remaining > stop_size:
        ready = np.flatnonzero(alive & (deg >= c))
        if ready.size == 0:
            break
        v = int(ready[0])
        alive[v] = False
        deg[adj[v] & alive] -= 1
        order.append(v)
        remaining -= 1
    return order, alive


def _lowest_cross_pair(labels):
    """Lexicographically smallest (a, b) with a, b in different components."""
    a = 0
    other = np.flatnonzero(labels != labels[a])
    return a, int(other[0])


def augment_to_c_connected(adj, c, clique=None, max_added=None):
    """Greedy cut repair: add non-edges until the graph is c-vertex connected.

    Repeatedly locates a vertex cut of size < c (degree shortfall, then exact
    flow certification) and inserts the lexicographically smallest missing
    edge between two components of the cut remainder.  `clique` may name
    pairwise-adjacent vertices; when it covers c of them the pairwise flow
    phase of the certification is skipped.

    Returns the list of added (u, v) pairs; the input matrix is not modified.
    Raises ConstructionError if more than `max_added` edges are needed.
    """
    m = adj.shape[0]
    if m <= c:
        raise ValueError(f"cannot make {m} nodes {c}-vertex connected")
    if max_added is None:
        max_added = c * m
    adj = adj.copy()
    added = []

    def repair(cut):
        keep = np.ones(m, dtype=bool)
        keep[list(cut)] = False
        idx = np.flatnonzero(keep)
        sub = adj[np.ix_(idx, idx)]
        ncomp, sublabels = components_of_adjacency(sub)
        if ncomp < 2:
            raise ConstructionError("cut extraction produced a connected remainder")
        a, b = _lowest_cross_pair(sublabels)
        u, v = int(idx[a]), int(idx[b])
        u, v = min(u, v), max(u, v)
        added.append((u, v))
        if len(added) > max_added:
            raise ConstructionError(f"augmentation exceeded {max_added} edge insertions")
        adj[u, v] = adj[v, u] = True

    # Phase 0: plain connectivity.
    while True:
        ncomp, labels = components_of_adjacency(adj)
        if ncomp <= 1:
            break
        a, b = _lowest_cross_pair(labels)
        added.append((a, b))
        if len(added) > max_added:
            raise ConstructionError(f"augmentation exceeded {max_added} edge insertions")
        adj[a, b] = adj[b, a] = True

    # Phase 1: degree shortfalls give immediate cuts (the open neighborhood).
    while True:
        deg = adj.sum(axis=1)
        low = np.flatnonzero(deg < c)
        low = [int(v) for v in low if deg[v] + 1 < m]
        if not low:
            break
        v = low[0]
        repair(np.flatnonzero(adj[v]))

    deg = adj.sum(axis=1)
    if int(deg.min()) >= m - 1:
        return added  # complete
    if float(deg.min()) >= (m + c - 2) / 2:
        return added  # minimum degree certifies c-connectivity

    # Phase 2: exact certification by flows, repairing as cuts appear.
    targets = None
    if clique is not None:
        cl = [int(x) for x in clique]
        if len(cl) >= c:
            block = adj[np.ix_(cl[:c], cl[:c])]
            if block.sum() == c * (c - 1):
                targets = cl[:c]
    pair_phase = targets is None
    if targets is None:
        targets = list(range(c))
    net = _VertexFlowNet(adj, fan_targets=targets)

    if pair_phase:
        for i in range(c):
            for j in range(i + 1, c):
                x, y = targets[i], targets[j]
                while not adj[x, y]:
                    result = net.pair_flow(x, y)
                    if result.flow_value >= c:
                        break
                    repair(net.cut_from_flow(x, result))
                    net = _VertexFlowNet(adj, fan_targets=targets)
    in_targets = np.zeros(m, dtype=bool)
    in_targets[targets] = True
    for u in range(m):
        if in_targets[u]:
            continue
        while True:
            result = net.fan_flow(u)
            if result.flow_value >= c:
                break
            repair(net.cut_from_flow(u, result))
            net = _VertexFlowNet(adj, fan_targets=targets)
    return added
