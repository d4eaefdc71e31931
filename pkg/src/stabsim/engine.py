"""Shared-state execution semantics.

A protocol is a list of guarded rules per node. Guards and actions see only a
:class:`LocalView` (own id, own register, neighbor registers in adjacency
order). A step applies the selected nodes' actions against the pre-step
configuration, so simultaneous moves never observe each other.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

STABILIZED = "stabilized"
BUDGET = "budget"
DEADLOCK = "deadlock"
STOPPED = "stopped"


class StepError(ValueError):
    """Bad selection or configuration handed to the engine."""


class GuardConflictError(RuntimeError):
    """More than one guard of a node holds in the same configuration."""


class LocalView(NamedTuple):
    node: int
    value: int
    neighbors: tuple


class Outcome(NamedTuple):
    rule: Optional[int]  # index into the node's rules, None when disabled
    value: int  # register after firing (own value when disabled)
    privileged: bool


@dataclass(frozen=True)
class Rule:
    name: str
    guard: Callable[[LocalView], bool]
    action: Callable[[LocalView], int]
    increments: bool = False


@dataclass(frozen=True, eq=False)
class ProtocolDef:
    """An immutable protocol instance compiled for one graph.

    ``rules[v]`` is the ordered rule list of node ``v``; ``values`` is the
    register domain shared by all nodes. ``liveness`` names the event that
    counts as progress: ``"cs"`` (critical section) or
    ``"increment"`` (clock increment).
    """

    name: str
    graph: object
    values: tuple
    rules: tuple
    privilege: Optional[Callable[[LocalView], bool]] = None
    liveness: str = "cs"
    domain: object = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_value_set", frozenset(self.values))
        object.__setattr__(self, "_cache", {})

    @property
    def n(self):
        return self.graph.n

    def check_config(self, config):
        config = tuple(config)
        if len(config) != self.n:
            raise StepError(f"configuration has {len(config)} registers, expected {self.n}")
        for v, c in enumerate(config):
            if c not in self._value_set:
                raise StepError(f"register of node {v} holds {c}, outside the {self.name} domain")
        return config

    def local(self, node, value, neighbors):
        """Evaluate node's guards on a local view; results are memoized."""
        key = (node, value, neighbors)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        view = LocalView(node, value, neighbors)
        enabled = [i for i, r in enumerate(self.rules[node]) if r.guard(view)]
        if len(enabled) > 1:
            names = [self.rules[node][i].name for i in enabled]
            raise GuardConflictError(f"node {node} has guards {names} true in view {view}")
        if enabled:
            rule = enabled[0]
            new = self.rules[node][rule].action(view)
        else:
            rule, new = None, value
        privileged = bool(self.privilege(view)) if self.privilege is not None else False
        out = Outcome(rule, new, privileged)
        self._cache[key] = out
        return out

    def outcome(self, config, node):
        nbs = tuple(config[u] for u in self.graph.adjacency[node])
        return self.local(node, config[node], nbs)

    def outcomes(self, config):
        return [self.outcome(config, v) for v in range(self.n)]


def activable_set(p, config):
    return frozenset(v for v, o in enumerate(p.outcomes(config)) if o.rule is not None)


def privileged_set(p, config):
    return frozenset(v for v, o in enumerate(p.outcomes(config)) if o.privileged)


def apply_step(p, config, selected):
    config = tuple(config)
    if not selected:
        raise StepError("selection must be nonempty")
    out = list(config)
    for v in selected:
        if not 0 <= v < p.n:
            raise StepError(f"node {v} does not exist")
        o = p.outcome(config, v)
        if o.rule is None:
            raise StepError(f"node {v} is not activable")
        out[v] = o.value
    return tuple(out)


def progress_events(p, outcomes, selected):
    """Nodes that make progress in a step: a critical section for ``cs``
    liveness, an incrementing rule for ``increment`` liveness."""
    if p.liveness == "cs":
        return frozenset(v for v in selected if outcomes[v].privileged)
    return frozenset(v for v in selected if p.rules[v][outcomes[v].rule].increments)


@dataclass
class TraceRecord:
    step: int
    selected: tuple
    config: tuple
    privileged: tuple
    cs: tuple
    activable: tuple = ()

    def to_dict(self):
        return {"step": self.step, "selected": list(self.selected),
                "config": list(self.config), "privileged": list(self.privileged),
                "cs": list(self.cs)}


@dataclass
class ExecutionTrace:
    protocol: str
    initial: tuple
    records: list = field(default_factory=list)
    status: str = BUDGET
    final: tuple = ()

    def __len__(self):
        return len(self.records)

    def configurations(self):
        return [r.config for r in self.records] + [self.final]

    def to_jsonl(self):
        lines = [json.dumps(r.to_dict(), separators=(",", ":")) for r in self.records]
        lines.append(json.dumps({"status": self.status, "steps": len(self.records),
                                 "final": list(self.final)}, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def run(p, initial, daemon, max_steps, stop_when=None):
    """Execute ``p`` from ``initial`` under ``daemon`` for at most ``max_steps``.

    ``daemon.select(config, activable)`` returns a nonempty subset of the
    activable set, or ``None`` to stop the execution. ``stop_when(config)``
    ends the run with status ``stabilized`` as soon as it holds.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    config = p.check_config(initial)
    trace = ExecutionTrace(p.name, config)
    status = BUDGET
    for step in range(max_steps):
        if stop_when is not None and stop_when(config):
            status = STABILIZED
            break
        outcomes = p.outcomes(config)
        activable = frozenset(v for v, o in enumerate(outcomes) if o.rule is not None)
        if not activable:
            status = DEADLOCK
            break
        selected = daemon.select(config, activable)
        if selected is None:
            status = STOPPED
            break
        selected = frozenset(selected)
        if not selected or not selected <= activable:
            raise StepError(f"daemon selected {sorted(selected)} from activable {sorted(activable)}")
        privileged = tuple(v for v, o in enumerate(outcomes) if o.privileged)
        trace.records.append(TraceRecord(
            step=step,
            selected=tuple(sorted(selected)),
            config=config,
            privileged=privileged,
            cs=tuple(sorted(v for v in selected if outcomes[v].privileged)),
            activable=tuple(sorted(activable)),
        ))
        nxt = list(config)
        for v in selected:
            nxt[v] = outcomes[v].value
        config = tuple(nxt)
    else:
        if stop_when is not None and stop_when(config):
            status = STABILIZED
    trace.status = status
    trace.final = config
    return trace
