"""Hybrid Petri-net modelling and fault detection for switched discrete-time systems."""

from .net import (
    GuardPredicate,
    HybridModel,
    IncidenceBlocks,
    Marking,
    ModeLti,
    NetStructure,
    NodeKind,
    build_net,
    build_wc,
    build_wc_with_output,
    enabled_transitions,
    incidence,
    mode_selector,
    step_continuous,
    step_discrete,
    step_hybrid,
)

__version__ = "0.1.0"
