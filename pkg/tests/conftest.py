"""Shared helpers: brute-force oracles and random instance builders."""

from itertools import combinations

import numpy as np
import pytest

from dyngossip.graphs import Graph, components_of_adjacency, is_connected
from dyngossip.knowledge import KnowledgeState, TokenAssignment


def brute_vertex_connectivity(g):
    """Independent oracle: smallest vertex set whose removal disconnects.

    Exhaustive subset enumeration; complete graphs are (n-1)-connected by
    convention.  Only sensible for n <= 10.
    """
    n = g.n
    assert n >= 2
    if not is_connected(g):
        return 0
    if g.edge_count == n * (n - 1) // 2:
        return n - 1
    adj = g.adjacency()
    for size in range(1, n - 1):
        for cut in combinations(range(n), size):
            keep = [u for u in range(n) if u not in cut]
            ncomp, _ = components_of_adjacency(adj[np.ix_(keep, keep)])
            if ncomp > 1:
                return size
    return n - 1


def random_graph(n, p, rng):
    adj = rng.random((n, n)) < p
    adj = np.triu(adj, 1)
    u, v = np.nonzero(adj)
    return Graph.from_arrays(n, u, v)


def random_state(n, k, rng, q=0.5, p=0.25):
    known = rng.random((n, k)) < q
    gifted = rng.random((n, k)) < p
    return KnowledgeState(n, k, known, gifted)


def random_known_assignment(state, rng):
    """One random token per node, drawn from what it knows (silent when empty)."""
    tokens = np.full(state.n, -1, dtype=np.int64)
    for u in range(state.n):
        held = np.flatnonzero(state.known[u])
        if held.size:
            tokens[u] = int(rng.choice(held))
    return TokenAssignment.from_single(state.k, tokens)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
