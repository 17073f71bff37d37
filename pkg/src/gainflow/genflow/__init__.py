"""Online generalized network flow: networks, residual search, and the
arrival engine."""

from .engine import (FAITHFUL, ONESHOT, DualReport, OnlineGenFlow, StepReport,
                     apply_residual_flows, augment, dual_certificate, max_step,
                     step_cost)
from .network import (INF, Edge, FlowNetwork, FlowState, ResEdge,
                      residual_adjacency, residual_edges)
from .search import (CYCLE_THROUGH_SOURCE, LOLLIPOP, PATH_TO_SINK,
                     AugmentingStructure, cheapest_structure,
                     lp_cheapest_structure, solve_heights, split_structure,
                     structure_from_policy)

__all__ = [
    "AugmentingStructure", "CYCLE_THROUGH_SOURCE", "DualReport", "Edge",
    "FAITHFUL", "FlowNetwork", "FlowState", "INF", "LOLLIPOP", "ONESHOT",
    "OnlineGenFlow", "PATH_TO_SINK", "ResEdge", "StepReport",
    "apply_residual_flows", "augment",
    "cheapest_structure", "dual_certificate", "lp_cheapest_structure",
    "max_step", "residual_adjacency", "residual_edges", "solve_heights",
    "split_structure", "step_cost", "structure_from_policy",
]
