"""Single-item diffusion auctions on social networks.

Implements the fair diffusion mechanism (FDM), the information diffusion
mechanism (IDM) and a second-price auction among the seller's neighbours,
plus brute-force checks of individual rationality, incentive compatibility
and the revenue ordering between them.
"""

from .graph import (
    NEG_INF,
    ActionProfile,
    CriticalStructure,
    EffectiveGraph,
    Network,
    Report,
    build_effective_graph,
    critical_descendants,
    critical_structure,
    removed_set,
    strong_critical_sequence,
    top_bid,
    top_descendant_holder,
    weak_critical_sets,
)
from .instances import fixture_network, load_instance, save_instance
from .mechanisms import (
    NoParticipants,
    Outcome,
    fdm_outcome,
    fdm_winner,
    idm_outcome,
    neighbor_vcg_outcome,
    run_mechanism,
    social_welfare,
)

__all__ = [
    "NEG_INF",
    "ActionProfile",
    "CriticalStructure",
    "EffectiveGraph",
    "Network",
    "NoParticipants",
    "Outcome",
    "Report",
    "build_effective_graph",
    "critical_descendants",
    "critical_structure",
    "fdm_outcome",
    "fdm_winner",
    "fixture_network",
    "idm_outcome",
    "load_instance",
    "neighbor_vcg_outcome",
    "removed_set",
    "run_mechanism",
    "save_instance",
    "social_welfare",
    "strong_critical_sequence",
    "top_bid",
    "top_descendant_holder",
    "weak_critical_sets",
]
