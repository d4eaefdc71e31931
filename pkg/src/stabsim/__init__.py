"""Simulator and exhaustive verifier for self-stabilizing protocols in the
shared-state model: bounded-clock unison, EMSS mutual exclusion and
Dijkstra's K-state ring."""

from .clock import ClockDomain, ClockError
from .engine import ProtocolDef, Rule, activable_set, apply_step, privileged_set, run
from .protocols import EmssParams, UnisonParams, make_dijkstra, make_emss, make_unison
from .topology import Graph, diameter, generate, load_graph, metrics

__all__ = [
    "ClockDomain", "ClockError", "EmssParams", "Graph", "ProtocolDef", "Rule",
    "UnisonParams", "activable_set", "apply_step", "diameter", "generate",
    "load_graph", "make_dijkstra", "make_emss", "make_unison", "metrics",
    "privileged_set", "run",
]
