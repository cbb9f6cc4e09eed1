"""Token-forwarding protocols: pre-round knowledge in, broadcast choice out.

Protocols are centralized by default (they may inspect the global state when
choosing broadcasts); passing local=True restricts the choice of each node to
its own token set.  Every decision satisfies the broadcast contract: a node
only sends tokens it knows, at most b of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .knowledge import TokenAssignment

__all__ = [
    "ProtocolDecision",
    "SequentialFlood",
    "BlockFlood",
    "GreedyPerTokenC",
    "RandomUseful",
    "FecSource",
    "PartialSequentialFlood",
    "PROTOCOL_KEYS",
    "make_protocol",
]


@dataclass(frozen=True)
class ProtocolDecision:
    """The assignment for one round plus the protocol's own exhaustion claim."""

    assignment: TokenAssignment
    done: bool = False


class SequentialFlood:
    """Flood one token at a time; every knower forwards it for n-1 rounds."""

    key = "seq"

    def __init__(self, n, k, b=1, **_):
        if b != 1:
            raise ConfigError("seq broadcasts a single token per round (b=1)")
        self.n = n
        self.k = k
        self.total_rounds = k * (n - 1) if n > 1 else 0

    def decide(self, rnd, state):
        if self.n <= 1 or rnd > self.total_rounds:
            return ProtocolDecision(TokenAssignment.empty(self.n, state.k), done=True)
        token = (rnd - 1) // (self.n - 1)
        tokens = np.where(state.known[:, token], token, -1)
        return ProtocolDecision(
            TokenAssignment.from_single(state.k, tokens), done=rnd == self.total_rounds
        )


class BlockFlood:
    """Flood ceil(k/b) blocks of b tokens, one block per n-1 rounds."""

    key = "block"

    def __init__(self, n, k, b=1, **_):
        if b < 1:
            raise ConfigError("block size must be positive")
        self.n = n
        self.k = k
        self.b = b
        self.blocks = math.ceil(k / b) if k else 0
        self.total_rounds = self.blocks * (n - 1) if n > 1 else 0

    def decide(self, rnd, state):
        if self.n <= 1 or rnd > self.total_rounds:
            return ProtocolDecision(TokenAssignment.empty(self.n, state.k), done=True)
        block = (rnd - 1) // (self.n - 1)
        lo, hi = block * self.b, min((block + 1) * self.b, self.k)
        sent = np.zeros((self.n, state.k), dtype=bool)
        sent[:, lo:hi] = state.known[:, lo:hi]
        return ProtocolDecision(TokenAssignment(sent), done=rnd == self.total_rounds)


class GreedyPerTokenC:
    """Sequential flood with phases shortened to ceil((n-1)/c) rounds.

    Sound when every round graph is promised c-vertex connected: each round
    at least c new nodes learn the current token.
    """

    key = "greedy-c"

    def __init__(self, n, k, b=1, c=1, **_):
        if b != 1:
            raise ConfigError("greedy-c broadcasts a single token per round (b=1)")
        if c < 1:
            raise ConfigError("connectivity parameter c must be positive")
        self.n = n
        self.k = k
        self.phase = math.ceil((n - 1) / c) if n > 1 else 0
        self.total_rounds = k * self.phase

    def decide(self, rnd, state):
        if self.n <= 1 or rnd > self.total_rounds:
            return ProtocolDecision(TokenAssignment.empty(self.n, state.k), done=True)
        token = (rnd - 1) // self.phase
        tokens = np.where(state.known[:, token], token, -1)
        return ProtocolDecision(
            TokenAssignment.from_single(state.k, tokens), done=rnd == self.total_rounds
        )


class RandomUseful:
    """Randomized baseline: each node sends up to b random tokens someone still misses.

    The useful-token filter needs the global state; with local=True each node
    just samples from its own set.
    """

    key = "random"

    def __init__(self, n, k, b=1, rng=None, local=False, **_):
        self.n = n
        self.k = k
        self.b = b
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.local = local

    def decide(self, rnd, state):
        if self.local:
            useful = np.ones(state.k, dtype=bool)
        else:
            useful = ~state.known.all(axis=0)
        sent = np.zeros((self.n, state.k), dtype=bool)
        for u in range(self.n):
            cands = np.flatnonzero(state.known[u] & useful)
            if cands.size == 0:
                continue
            take = min(self.b, cands.size)
            picks = self.rng.choice(cands, size=take, replace=False)
            sent[u, picks] = True
        done = not self.local and not useful.any()
        return ProtocolDecision(TokenAssignment(sent), done=done)


class FecSource:
    """Rateless coded dissemination from a single source.

    The source holds all k original tokens and emits one fresh coded packet id
    per round; any node holding k distinct packet ids can decode.  Relays
    forward the globally rarest packet they hold (locally: their freshest).
    The knowledge universe of the run is the packet id space, and the source
    is seeded with the full universe since it can mint any packet.
    """

    key = "fec"

    def __init__(self, n, k, b=1, source=0, local=False, **_):
        if b != 1:
            raise ConfigError("fec forwards a single packet id per round (b=1)")
        self.n = n
        self.k = k
        self.source = source
        self.local = local

    def decide(self, rnd, state):
        packet = rnd - 1
        tokens = np.full(self.n, -1, dtype=np.int64)
        if packet < state.k:
            tokens[self.source] = packet
        holders = state.known.sum(axis=0)
        decoded = True
        for u in range(self.n):
            if u == self.source:
                continue
            held = np.flatnonzero(state.known[u])
            if held.size < self.k:
                decoded = False
            if held.size == 0:
                continue
            if self.local:
                tokens[u] = int(held[-1])
            else:
                tokens[u] = int(held[np.argmin(holders[held])])
        return ProtocolDecision(TokenAssignment.from_single(state.k, tokens), done=decoded)


class PartialSequentialFlood(SequentialFlood):
    """Sequential flood restricted to the first ceil(delta * k) tokens."""

    key = "partial-seq"

    def __init__(self, n, k, b=1, delta=1.0, **_):
        if not 0.0 < delta <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        super().__init__(n, math.ceil(delta * k), b=b)


_PROTOCOLS = {
    cls.key: cls
    for cls in (
        SequentialFlood,
        BlockFlood,
        GreedyPerTokenC,
        RandomUseful,
        FecSource,
        PartialSequentialFlood,
    )
}

PROTOCOL_KEYS = tuple(sorted(_PROTOCOLS))


def make_protocol(key, *, n, k, b=1, c=1, delta=1.0, rng=None, local=False, source=0):
    if key not in _PROTOCOLS:
        raise ConfigError(f"unknown protocol {key!r}; choose one of {', '.join(PROTOCOL_KEYS)}")
    return _PROTOCOLS[key](
        n=n, k=k, b=b, c=c, delta=delta, rng=rng, local=local, source=source
    )
