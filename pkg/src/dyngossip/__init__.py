"""Token dissemination in adversarial dynamic networks.

Forwarding protocols, strongly adaptive topology adversaries, potential
accounting, and a deterministic round engine with offline trace verification.
"""

from .errors import (
    ConfigError,
    ConstructionError,
    ContractViolationError,
    DyngossipError,
    PromiseViolationError,
    TraceFormatError,
)
from .graphs import (
    DynamicTrace,
    Graph,
    harary_overlay,
    interval_connectivity_ok,
    is_connected,
    peel_high_degree,
    vertex_connectivity,
)
from .knowledge import (
    KnowledgeState,
    PotentialDelta,
    TokenAssignment,
    deliver,
    edge_weight,
    gift,
    is_free,
    is_kprime_free,
    potential,
    sample_kprime,
)
from .adversaries import AdversaryContext, AdversaryOutput, free_edge_graph, make_adversary
from .protocols import ProtocolDecision, make_protocol
from .engine import RunConfig, RunReport, RoundReport, Scenario, run, sweep, verify_trace

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstructionError",
    "ContractViolationError",
    "DyngossipError",
    "PromiseViolationError",
    "TraceFormatError",
    "DynamicTrace",
    "Graph",
    "harary_overlay",
    "interval_connectivity_ok",
    "is_connected",
    "peel_high_degree",
    "vertex_connectivity",
    "KnowledgeState",
    "PotentialDelta",
    "TokenAssignment",
    "deliver",
    "edge_weight",
    "gift",
    "is_free",
    "is_kprime_free",
    "potential",
    "sample_kprime",
    "AdversaryContext",
    "AdversaryOutput",
    "free_edge_graph",
    "make_adversary",
    "ProtocolDecision",
    "make_protocol",
    "RunConfig",
    "RunReport",
    "RoundReport",
    "Scenario",
    "run",
    "sweep",
    "verify_trace",
    "__version__",
]
