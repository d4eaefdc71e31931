"""Schedulers that pick which activable nodes move at each step.

Random choices come from an integer-only splitmix64 stream so a seed gives
the same executions on every platform.
"""

import json
from itertools import combinations

MASK64 = (1 << 64) - 1
DEFAULT_CHOICE_LIMIT = 12


class DaemonError(ValueError):
    pass


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound):
        """Uniform integer in ``[0, bound)`` by rejection (no modulo bias)."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        if bound > 1 << 64:
            raise ValueError("bound exceeds 2**64")
        limit = (1 << 64) - (1 << 64) % bound
        while True:
            x = self.next()
            if x < limit:
                return x % bound


class SynchronousDaemon:
    kind = "synchronous"

    def select(self, config, activable):
        return frozenset(activable)


class RandomSubsetDaemon:
    """Uniform nonempty subset: draw ``x`` in ``[1, 2^m - 1]`` and keep the
    activable nodes (sorted ascending) whose bit is set in ``x``."""

    kind = "random_subset"

    def __init__(self, seed):
        self.seed = seed
        self.rng = SplitMix64(seed)

    def select(self, config, activable):
        nodes = sorted(activable)
        x = 1 + self.rng.below((1 << len(nodes)) - 1)
        return frozenset(v for i, v in enumerate(nodes) if x >> i & 1)


class SingleMinMaxDaemon:
    """Moves one node per step: the activable node with the smallest (or
    largest) register, lowest id first on ties."""

    kind = "single_minmax"

    def __init__(self, pick="min"):
        if pick not in ("min", "max"):
            raise DaemonError(f"pick must be 'min' or 'max', got {pick!r}")
        self.pick = pick

    def select(self, config, activable):
        sign = 1 if self.pick == "min" else -1
        return frozenset([min(activable, key=lambda v: (sign * config[v], v))])


class ScriptedDaemon:
    """Replays a fixed list of selections; each is intersected with the
    activable set. Returns ``None`` (stop) once the script runs out."""

    kind = "scripted"

    def __init__(self, selections):
        self.selections = [frozenset(s) for s in selections]
        self.position = 0

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, list) or not all(isinstance(s, list) for s in data):
            raise DaemonError(f"{path}: expected a JSON list of node-id arrays")
        return cls(data)

    def select(self, config, activable):
        if self.position >= len(self.selections):
            return None
        choice = self.selections[self.position] & activable
        if not choice:
            raise DaemonError(
                f"scripted choice {sorted(self.selections[self.position])} at position "
                f"{self.position} is disjoint from activable {sorted(activable)}")
        self.position += 1
        return choice


def select(strategy, config, activable):
    if not activable:
        raise DaemonError("activable set is empty")
    return strategy.select(config, frozenset(activable))


def parse_daemon(spec):
    """``sync`` | ``random:<seed>`` | ``scripted:<file>`` | ``minmax:<min|max>``."""
    kind, _, arg = spec.partition(":")
    if kind == "sync":
        return SynchronousDaemon()
    if kind == "random":
        try:
            return RandomSubsetDaemon(int(arg))
        except ValueError:
            raise DaemonError(f"bad seed in daemon spec {spec!r}") from None
    if kind == "scripted":
        return ScriptedDaemon.from_file(arg)
    if kind == "minmax":
        return SingleMinMaxDaemon(arg or "min")
    raise DaemonError(f"unknown daemon {spec!r}")


def enumerate_choices(activable, limit=DEFAULT_CHOICE_LIMIT):
    """All nonempty subsets, by size then lexicographically."""
    nodes = sorted(activable)
    if not nodes:
        raise DaemonError("activable set is empty")
    if len(nodes) > limit:
        raise DaemonError(f"{len(nodes)} activable nodes exceed the choice limit {limit}")
    return [frozenset(c) for r in range(1, len(nodes) + 1) for c in combinations(nodes, r)]


def allows(kind, selected, activable):
    selected, activable = frozenset(selected), frozenset(activable)
    if not selected or not selected <= activable:
        return False
    if kind == "synchronous":
        return selected == activable
    if kind == "distributed_unfair":
        return True
    raise DaemonError(f"unknown daemon constraint {kind!r}")


def weaker_than(executions, kind):
    """True when every step of every sampled execution is a legal choice for
    the daemon ``kind`` (``synchronous`` or ``distributed_unfair``)."""
    return all(allows(kind, r.selected, r.activable)
               for trace in executions for r in trace.records)
