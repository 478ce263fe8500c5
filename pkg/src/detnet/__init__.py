"""Distributed decisions in layered linear deterministic networks."""

from .detmodel import Cut, DetNetwork, NetworkError, Skeleton, build_network, cut_rank, propagate, shift_matrix, unicast_min_cut
from .localview import CapExceeded, ConsistencyClass, LocalView, Route, consistent_networks, enumerate_routes, node_view, source_view

__all__ = [
    "CapExceeded",
    "ConsistencyClass",
    "Cut",
    "DetNetwork",
    "LocalView",
    "NetworkError",
    "Route",
    "Skeleton",
    "build_network",
    "consistent_networks",
    "cut_rank",
    "enumerate_routes",
    "node_view",
    "propagate",
    "shift_matrix",
    "source_view",
    "unicast_min_cut",
]
