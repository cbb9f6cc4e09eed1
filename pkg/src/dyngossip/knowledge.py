"""Per-node token knowledge, the potential function, and message delivery.

Every node u carries two token sets: `known` (tokens it actually holds) and
`gifted` (tokens credited to it by an adversary's accounting).  The potential
of a state is the total credited knowledge sum(|known_u | gifted_u|); an edge
is *free* in a round when delivering over it cannot raise that total.

Sets are stored as dense boolean matrices of shape (n, k); all operations are
pure and return fresh states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "KnowledgeState",
    "TokenAssignment",
    "PotentialDelta",
    "potential",
    "edge_weight",
    "is_free",
    "is_kprime_free",
    "sample_kprime",
    "deliver",
    "gift",
    "apply_gifts",
    "free_adjacency",
]


class KnowledgeState:
    """Immutable snapshot of every node's known and gifted token sets."""

    __slots__ = ("n", "k", "known", "gifted")

    def __init__(self, n, k, known=None, gifted=None):
        self.n = int(n)
        self.k = int(k)
        self.known = self._checked(known)
        self.gifted = self._checked(gifted)

    def _checked(self, mat):
        if mat is None:
            mat = np.zeros((self.n, self.k), dtype=bool)
        else:
            mat = np.asarray(mat, dtype=bool)
            if mat.shape != (self.n, self.k):
                raise ValueError(f"expected shape {(self.n, self.k)}, got {mat.shape}")
            mat = mat.copy()
        mat.setflags(write=False)
        return mat

    def credited(self):
        """known | gifted, the set the potential function counts."""
        return self.known | self.gifted

    def known_counts(self):
        return self.known.sum(axis=1)

    def replace(self, known=None, gifted=None):
        return KnowledgeState(
            self.n,
            self.k,
            self.known if known is None else known,
            self.gifted if gifted is None else gifted,
        )

    def __repr__(self):
        return f"KnowledgeState(n={self.n}, k={self.k}, phi={potential(self)})"


_UNSET = object()


class TokenAssignment:
    """The per-round broadcast choice: a set of token ids for every node."""

    __slots__ = ("sent", "_single")

    def __init__(self, sent):
        sent = np.asarray(sent, dtype=bool).copy()
        sent.setflags(write=False)
        self.sent = sent
        self._single = _UNSET

    @property
    def n(self):
        return self.sent.shape[0]

    @property
    def k(self):
        return self.sent.shape[1]

    @classmethod
    def empty(cls, n, k):
        return cls(np.zeros((n, k), dtype=bool))

    @classmethod
    def from_single(cls, k, tokens):
        """One token id per node; -1 means the node stays silent."""
        tokens = np.asarray(tokens, dtype=np.int64)
        n = tokens.size
        sent = np.zeros((n, k), dtype=bool)
        senders = np.flatnonzero(tokens >= 0)
        sent[senders, tokens[senders]] = True
        return cls(sent)

    @classmethod
    def from_sets(cls, n, k, sets):
        sent = np.zeros((n, k), dtype=bool)
        for u, toks in sets.items() if isinstance(sets, dict) else enumerate(sets):
            for t in toks:
                sent[u, t] = True
        return cls(sent)

    def counts(self):
        return self.sent.sum(axis=1)

    def is_empty(self):
        return not self.sent.any()

    def single_tokens(self):
        """Array of per-node token ids (-1 for silent), or None if any node sends more than one."""
        if self._single is _UNSET:
            counts = self.counts()
            if counts.max(initial=0) <= 1:
                toks = np.full(self.n, -1, dtype=np.int64)
                senders, ids = np.nonzero(self.sent)
                toks[senders] = ids
                self._single = toks
            else:
                self._single = None
        return self._single

    def as_sets(self):
        return {int(u): np.flatnonzero(row).tolist() for u, row in enumerate(self.sent) if row.any()}


@dataclass(frozen=True)
class PotentialDelta:
    """Potential before/after a delivery, with optional per-edge attribution.

    `learned_edges` lists (edge, ((node, token), ...)) for edges that credited
    at least one new token, processed in lexicographic edge order so that the
    per-edge contributions sum exactly to after - before.  It is None unless
    the delivery was asked for detail.
    """

    before: int
    after: int
    learned_edges: tuple | None = None


def potential(state):
    """Total credited knowledge: sum over nodes of |known_u | gifted_u|."""
    return int(np.count_nonzero(state.known | state.gifted))


def edge_weight(u, v, assignment, state):
    """How much delivering over {u, v} can raise the potential.

    |I_v without credited_u| + |I_u without credited_v|.
    """
    if u == v:
        raise ValueError("edge endpoints must differ")
    cu = state.known[u] | state.gifted[u]
    cv = state.known[v] | state.gifted[v]
    return int(np.count_nonzero(assignment.sent[v] & ~cu)) + int(
        np.count_nonzero(assignment.sent[u] & ~cv)
    )


def is_free(u, v, assignment, state):
    """True iff the edge contributes nothing to the round's potential growth."""
    return edge_weight(u, v, assignment, state) == 0


def is_kprime_free(u, v, assignment, initial_gifted):
    """Conservative free test: both broadcast sets lie inside the other end's initial gifts.

    Implies is_free whenever `initial_gifted` is a subset of the current
    credited sets, which gift monotonicity guarantees.
    """
    if u == v:
        raise ValueError("edge endpoints must differ")
    return bool(
        not (assignment.sent[u] & ~initial_gifted[v]).any()
        and not (assignment.sent[v] & ~initial_gifted[u]).any()
    )


def sample_kprime(n, k, p, seed):
    """Bernoulli(p) gifted sets: each (node, token) pair included independently.

    `seed` may be an int or a numpy Generator; results are deterministic
    either way.  Returns an (n, k) boolean matrix, row u = gifts of node u.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if p == 0.0:
        return np.zeros((n, k), dtype=bool)
    if p == 1.0:
        return np.ones((n, k), dtype=bool)
    return rng.random((n, k)) < p


def free_adjacency(assignment, state, credited=None):
    """Boolean (n, n) matrix with True exactly on weight-zero pairs.

    Single-token assignments use an O(n^2) gather; general assignments fall
    back to counting missing tokens with one matrix product.
    """
    m = state.known | state.gifted if credited is None else credited
    n = state.n
    single = assignment.single_tokens()
    if single is not None:
        senders = single >= 0
        toks = np.where(senders, single, 0)
        # covered[u, j]: node u already credits whatever j broadcasts
        covered = m[:, toks] | ~senders[None, :]
        free = covered & covered.T
    else:
        sent = assignment.sent.astype(np.float32)
        miss = (~m).astype(np.float32)
        short = sent @ miss.T  # short[v, u] = |I_v without credited_u|
        free = (short + short.T) == 0
    free = free.copy()
    np.fill_diagonal(free, False)
    return free


def deliver(graph, assignment, state, detail=False):
    """Broadcast over one round graph: both ends of every edge receive the other's set.

    Gifted sets never change.  Raises ContractViolationError if some node
    broadcasts a token outside its known set.  With detail=True the returned
    PotentialDelta attributes newly credited tokens to edges in lexicographic
    edge order.
    """
    if (assignment.sent & ~state.known).any():
        bad = int(np.flatnonzero((assignment.sent & ~state.known).any(axis=1))[0])
        raise ContractViolationError(f"node {bad} broadcasts a token it does not know")
    before = potential(state)
    adj = graph.adjacency()
    if graph.edge_count:
        received = (adj.astype(np.float32) @ assignment.sent.astype(np.float32)) > 0
        new_known = state.known | received
    else:
        new_known = state.known
    new_state = state.replace(known=new_known)
    after = potential(new_state)
    learned = None
    if detail:
        learned = []
        acc = np.array(state.known | state.gifted)
        for u, v in zip(graph.eu.tolist(), graph.ev.tolist()):
            gained = []
            for node, other in ((u, v), (v, u)):
                fresh = assignment.sent[other] & ~acc[node]
                if fresh.any():
                    gained.extend((node, int(t)) for t in np.flatnonzero(fresh))
                    acc[node] |= fresh
            if gained:
                learned.append(((u, v), tuple(gained)))
        learned = tuple(learned)
    return new_state, PotentialDelta(before, after, learned)


def gift(state, node, tokens):
    """Credit extra tokens to one node's gifted set (monotone)."""
    tokens = list(tokens)
    if any(t < 0 or t >= state.k for t in tokens):
        raise ValueError("token id out of range")
    gifted = np.array(state.gifted)
    gifted[node, tokens] = True
    return state.replace(gifted=gifted)


def apply_gifts(state, pairs):
    """Batched gift: pairs is an iterable of (node, token)."""
    pairs = list(pairs)
    if not pairs:
        return state
    gifted = np.array(state.gifted)
    nodes = [p[0] for p in pairs]
    toks = [p[1] for p in pairs]
    gifted[nodes, toks] = True
    return state.replace(gifted=gifted)
