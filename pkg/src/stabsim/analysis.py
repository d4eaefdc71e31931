"""Legitimacy predicates and stabilization-time analyses.

Two routes coexist on purpose. The engine route (:func:`sync_stab_time`)
simulates one execution with exact-state memoization. The exhaustive route
compiles the whole configuration space into numpy arrays
(:class:`StateSpace`) and works on its transition relation: a functional
graph for the synchronous daemon, a game graph for the unfair one.
"""

import json
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .daemons import ScriptedDaemon, SplitMix64, SynchronousDaemon
from .engine import progress_events, run
from .topology import diameter

INF = math.inf
DEFAULT_CONFIG_BUDGET = 2_000_000
DEFAULT_ORBIT_BUDGET = 100_000
DEFAULT_CHOICE_LIMIT = 12


class BudgetExceeded(RuntimeError):
    def __init__(self, message, budget):
        super().__init__(message)
        self.budget = budget


def fmt_time(t):
    if t is None:
        return "unknown"
    return "inf" if t == INF else str(int(t))


# ---------------------------------------------------------------- predicates

class Predicate:
    """A named predicate over configurations, with an optional vectorized form."""

    def __init__(self, name, fn, vec=None):
        self.name = name
        self.fn = fn
        self.vec = vec

    def __call__(self, p, config):
        return bool(self.fn(p, tuple(config)))

    def mask(self, space):
        if self.vec is not None:
            return self.vec(space)
        p = space.protocol
        return np.fromiter((self.fn(p, space.decode(i)) for i in range(space.size)),
                           dtype=bool, count=space.size)

    def __repr__(self):
        return f"Predicate({self.name!r})"


def _gamma1(p, config):
    dom = p.domain
    return all(dom.is_stab(config[u]) and dom.is_stab(config[v])
               and dom.distance(config[u], config[v]) <= 1
               for u, v in p.graph.sorted_edges())


def _gamma1_vec(space):
    dom = space.protocol.domain
    out = np.ones(space.size, dtype=bool)
    for u, v in space.protocol.graph.sorted_edges():
        ru, rv = space.register(u), space.register(v)
        diff = (ru - rv) % dom.k
        out &= (ru >= 0) & (rv >= 0) & (np.minimum(diff, dom.k - diff) <= 1)
    return out


def _em_safety(p, config):
    return sum(o.privileged for o in p.outcomes(config)) <= 1


def _em_safety_vec(space):
    return space.priv.sum(axis=0) <= 1


GAMMA1 = Predicate("gamma1", _gamma1, _gamma1_vec)
EM_SAFETY = Predicate("em_safety", _em_safety, _em_safety_vec)
PREDICATES = {"gamma1": GAMMA1, "em_safety": EM_SAFETY}


def default_predicate(p):
    return GAMMA1 if p.liveness == "increment" else EM_SAFETY


# --------------------------------------------------------------- state space

class StateSpace:
    """The full configuration space of a protocol, indexed mixed-radix.

    Configuration index ``i`` has register digit ``(i // m**v) % m`` at node
    ``v`` where ``m`` is the domain size. Guards are evaluated once per
    distinct local view and broadcast to all configurations.
    """

    def __init__(self, protocol, budget=DEFAULT_CONFIG_BUDGET):
        p = protocol
        m, n = len(p.values), p.n
        size = m ** n
        if size > budget:
            raise BudgetExceeded(f"{m}^{n} = {size} configurations exceed budget {budget}", budget)
        self.protocol = p
        self.n, self.radix, self.size = n, m, size
        self.values = np.asarray(p.values, dtype=np.int64)
        self.weights = np.array([m ** v for v in range(n)], dtype=np.int64)
        index = np.arange(size, dtype=np.int64)
        self.digits = np.empty((n, size), dtype=np.int32)
        for v in range(n):
            self.digits[v] = (index // self.weights[v]) % m
        self.rule = np.empty((n, size), dtype=np.int8)
        self.newdigit = np.empty((n, size), dtype=np.int32)
        self.priv = np.empty((n, size), dtype=bool)
        self.incr = np.empty((n, size), dtype=bool)
        for v in range(n):
            local = self._local_index(v)
            t_rule, t_new, t_priv, t_incr = self._local_table(v)
            self.rule[v] = t_rule[local]
            self.newdigit[v] = t_new[local]
            self.priv[v] = t_priv[local]
            self.incr[v] = t_incr[local]
        self.act = np.zeros(size, dtype=np.int64)
        for v in range(n):
            self.act |= (self.rule[v] >= 0).astype(np.int64) << v
        self.delta = (self.newdigit - self.digits).astype(np.int64) * self.weights[:, None]

    def _local_index(self, v):
        m = self.radix
        local = self.digits[v].astype(np.int64)
        for j, u in enumerate(self.protocol.graph.adjacency[v]):
            local = local + self.digits[u].astype(np.int64) * m ** (j + 1)
        return local

    def _local_table(self, v):
        p, m = self.protocol, self.radix
        vals = p.values
        index = {c: i for i, c in enumerate(vals)}
        deg = len(p.graph.adjacency[v])
        t_rule = np.full(m ** (deg + 1), -1, dtype=np.int8)
        t_new = np.empty(m ** (deg + 1), dtype=np.int32)
        t_priv = np.zeros(m ** (deg + 1), dtype=bool)
        t_incr = np.zeros(m ** (deg + 1), dtype=bool)
        for digs in product(range(m), repeat=deg + 1):
            # product varies the last digit fastest: reverse to get own digit least significant
            digs = digs[::-1]
            code = sum(d * m ** j for j, d in enumerate(digs))
            o = p.local(v, vals[digs[0]], tuple(vals[d] for d in digs[1:]))
            if o.rule is not None:
                t_rule[code] = o.rule
                t_incr[code] = p.rules[v][o.rule].increments
            t_new[code] = index[o.value]
            t_priv[code] = o.privileged
        return t_rule, t_new, t_priv, t_incr

    def register(self, v):
        return self.values[self.digits[v]]

    def decode(self, i):
        m, vals = self.radix, self.protocol.values
        return tuple(vals[(i // m ** v) % m] for v in range(self.n))

    def encode(self, config):
        index = {c: i for i, c in enumerate(self.protocol.values)}
        return sum(index[c] * self.radix ** v for v, c in enumerate(config))

    def successor(self, subset):
        """Successor index of every configuration when ``subset`` (a node
        bitmask) moves, and the mask of configurations where that is legal."""
        nodes = [v for v in range(self.n) if subset >> v & 1]
        succ = np.arange(self.size, dtype=np.int64) + self.delta[nodes].sum(axis=0)
        valid = (self.act & subset) == subset
        return succ, valid

    def sync_successor(self):
        return np.arange(self.size, dtype=np.int64) + self.delta.sum(axis=0)

    def events(self, subset=None):
        """Bitmask of nodes making progress; ``subset=None`` means synchronous."""
        p = self.protocol
        moved = self.rule >= 0 if subset is None else np.array(
            [[bool(subset >> v & 1)] for v in range(self.n)])
        ev = (self.priv if p.liveness == "cs" else self.incr) & moved & (self.rule >= 0)
        out = np.zeros(self.size, dtype=np.int64)
        for v in range(self.n):
            out |= ev[v].astype(np.int64) << v
        return out


# ------------------------------------------------------------------ reports

@dataclass
class StabilizationReport:
    protocol: str
    graph: dict
    daemon: str
    stab_time: object
    method: str
    witness: tuple = None
    witness_trace: object = None
    liveness_ok: bool = True
    predicate: str = ""
    configs: int = 0
    extra: dict = field(default_factory=dict)
    times: object = field(default=None, repr=False)

    def to_dict(self):
        d = {
            "protocol": self.protocol,
            "graph": self.graph,
            "daemon": self.daemon,
            "predicate": self.predicate,
            "method": self.method,
            "configs": self.configs,
            "stab_time": fmt_time(self.stab_time) if self.stab_time in (None, INF) else int(self.stab_time),
            "liveness_ok": self.liveness_ok,
            "witness": list(self.witness) if self.witness is not None else None,
        }
        if self.witness_trace is not None:
            d["witness_trace"] = [list(c) for c in self.witness_trace]
        d.update(self.extra)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class SpeculationReport:
    protocol: str
    graph: dict
    stab_time_strong: object
    stab_time_weak: object
    ratio: object
    claimed_f: str
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "graph": self.graph,
            "strong_daemon": "distributed_unfair",
            "weak_daemon": "synchronous",
            "stab_time_strong": fmt_time(self.stab_time_strong),
            "stab_time_weak": fmt_time(self.stab_time_weak),
            "ratio": self.ratio if isinstance(self.ratio, str) else round(self.ratio, 6),
            "claimed_f": self.claimed_f,
            **self.flags,
        }


def graph_info(p):
    g = p.graph
    return {"n": g.n, "diam": diameter(g), "edges": [list(e) for e in g.sorted_edges()]}


# ----------------------------------------------------- synchronous analysis

def sync_orbit(p, initial, budget=DEFAULT_ORBIT_BUDGET):
    """Follow the synchronous execution until a configuration repeats.

    Returns ``(configs, events, cycle_start)``; ``cycle_start`` is None when
    the execution deadlocks at ``configs[-1]``.
    """
    config = p.check_config(initial)
    seen, configs, events = {}, [], []
    while config not in seen:
        if len(configs) >= budget:
            raise BudgetExceeded(f"orbit longer than {budget} steps", budget)
        seen[config] = len(configs)
        configs.append(config)
        outs = p.outcomes(config)
        active = [v for v, o in enumerate(outs) if o.rule is not None]
        if not active:
            return configs, events, None
        events.append(progress_events(p, outs, active))
        config = tuple(o.value for o in outs)
    return configs, events, seen[config]


def sync_stab_time(p, initial, pred=None, budget=DEFAULT_ORBIT_BUDGET):
    """Steps before the synchronous execution from ``initial`` reaches a
    configuration after which ``pred`` always holds and every node keeps
    making progress; ``INF`` when that never happens."""
    pred = pred or default_predicate(p)
    configs, events, start = sync_orbit(p, initial, budget)
    if start is None:
        return INF
    bad = [i for i, c in enumerate(configs) if not pred(p, c)]
    if bad and bad[-1] >= start:
        return INF
    progressed = frozenset().union(*events[start:])
    if len(progressed) < p.n:
        return INF
    return bad[-1] + 1 if bad else 0


def functional_stab_times(succ, bad, events, full):
    """Stabilization time of every node of a functional graph.

    ``succ[i]`` is the successor (-1 for a dead end), ``bad[i]`` flags
    configurations violating the predicate and ``events[i]`` the nodes
    progressing on the step out of ``i``. Returns a list with -1 for INF.
    """
    size = len(succ)
    h = [-2] * size  # -2 unvisited, -3 on the current path, -1 INF
    pos = {}
    for s in range(size):
        if h[s] != -2:
            continue
        path = []
        x = s
        while h[x] == -2:
            h[x] = -3
            pos[x] = len(path)
            path.append(x)
            if succ[x] < 0:
                break
            x = succ[x]
        if succ[path[-1]] < 0 and h[path[-1]] == -3:
            h[path[-1]] = -1
            tail = path[:-1]
        elif h[x] == -3:
            cycle = path[pos[x]:]
            ev = 0
            for y in cycle:
                ev |= events[y]
            val = -1 if ev != full or any(bad[y] for y in cycle) else 0
            for y in cycle:
                h[y] = val
            tail = path[:pos[x]]
        else:
            tail = path
        for y in reversed(tail):
            hs = h[succ[y]]
            if hs == -1:
                h[y] = -1
            elif hs > 0:
                h[y] = hs + 1
            else:
                h[y] = 1 if bad[y] else 0
        pos.clear()
    return h


def _sync_trace(p, initial, steps):
    trace = run(p, initial, SynchronousDaemon(), steps)
    return tuple(trace.configurations())


def _orbit_length(p, initial):
    configs, _, _ = sync_orbit(p, initial)
    return len(configs)


def sync_worst_case(p, mode="exhaustive", samples=10_000, seed=0, pred=None,
                    budget=DEFAULT_CONFIG_BUDGET, orbit_budget=DEFAULT_ORBIT_BUDGET,
                    workers=None):
    pred = pred or default_predicate(p)
    if mode == "exhaustive":
        space = StateSpace(p, budget)
        succ = space.sync_successor()
        succ[space.act == 0] = -1
        times = functional_stab_times(succ.tolist(), (~pred.mask(space)).tolist(),
                                      space.events().tolist(), (1 << p.n) - 1)
        arr = np.array(times)
        method = "exhaustive"
        decode = space.decode
        configs = space.size
        unknown = 0
    elif mode == "sampled":
        rng = SplitMix64(seed)
        m = len(p.values)
        starts = [tuple(p.values[rng.below(m)] for _ in range(p.n)) for _ in range(samples)]
        times = _sample_times(p, starts, pred, orbit_budget, workers)
        arr = np.array([-4 if t is None else t for t in times])
        method = f"sampled({samples},{seed})"
        decode = starts.__getitem__
        configs = samples
        unknown = sum(t is None for t in times)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if (arr == -1).any():
        worst = int(np.argmax(arr == -1))
        stab = INF
    elif unknown:
        worst = int(np.argmax(arr == -4))
        stab = None
    else:
        worst = int(np.argmax(arr))
        stab = int(arr[worst])
    witness = decode(worst)
    if stab is None:
        steps = 0
    elif stab == INF:
        steps = min(_orbit_length(p, witness), orbit_budget)
    else:
        steps = stab
    report = StabilizationReport(
        protocol=p.name, graph=graph_info(p), daemon="synchronous", stab_time=stab,
        method=method, witness=witness, witness_trace=_sync_trace(p, witness, steps),
        liveness_ok=stab != INF, predicate=pred.name, configs=configs,
        extra={"unknown": unknown} if unknown else {},
    )
    report.times = arr
    return report


_WORKER = {}


def _sample_chunk(bounds):
    p, starts, pred, budget = (_WORKER[k] for k in ("p", "starts", "pred", "budget"))
    out = []
    for i in range(*bounds):
        try:
            t = sync_stab_time(p, starts[i], pred, budget)
            out.append(-1 if t == INF else t)
        except BudgetExceeded:
            out.append(None)
    return out


def worker_count(workers=None):
    if workers is None:
        workers = int(os.environ.get("STABSIM_THREADS", "1") or 1)
    return max(1, workers)


def _sample_times(p, starts, pred, budget, workers):
    workers = worker_count(workers)
    _WORKER.update(p=p, starts=starts, pred=pred, budget=budget)
    try:
        if workers == 1 or len(starts) < 2 * workers \
                or "fork" not in multiprocessing.get_all_start_methods():
            return _sample_chunk((0, len(starts)))
        step = -(-len(starts) // workers)
        bounds = [(i, min(i + step, len(starts))) for i in range(0, len(starts), step)]
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx) as pool:
            # map preserves chunk order, so output never depends on scheduling
            return [t for chunk in pool.map(_sample_chunk, bounds) for t in chunk]
    finally:
        _WORKER.clear()


# ------------------------------------------------------- daemon game search

@dataclass
class ClosureResult:
    closed: bool
    counterexample: tuple = None  # (config, selected, successor)


def _choice_arrays(space, limit):
    if space.n > limit:
        raise BudgetExceeded(f"{space.n} nodes exceed the choice limit {limit}", limit)
    return [(s,) + space.successor(s) for s in range(1, 1 << space.n)]


def _members(space, mask):
    return tuple(v for v in range(space.n) if mask >> v & 1)


def closure_check(p, pred, budget=DEFAULT_CONFIG_BUDGET, choice_limit=DEFAULT_CHOICE_LIMIT,
                  space=None):
    """Every legal move out of a ``pred`` configuration stays in ``pred``."""
    space = space or StateSpace(p, budget)
    holds = pred.mask(space)
    for s, succ, valid in _choice_arrays(space, choice_limit):
        broken = holds & valid & ~holds[succ]
        if broken.any():
            i = int(np.argmax(broken))
            return ClosureResult(False, (space.decode(i), _members(space, s),
                                         space.decode(int(succ[i]))))
    return ClosureResult(True)


def greatest_closed_subset(space, holds, choices):
    target = holds.copy()
    while True:
        nxt = target.copy()
        for _, succ, valid in choices:
            nxt &= ~valid | target[succ]
        if (nxt == target).all():
            return target
        target = nxt


def _peel(size, alive, src, dst):
    """Repeatedly drop alive nodes whose alive out-edges are all gone.

    Returns the layer at which each node dropped (0 for not-alive nodes,
    -1 for nodes that never drop, i.e. that reach a cycle among survivors).
    """
    keep = alive[src] & alive[dst]
    src, dst = src[keep], dst[keep]
    remaining = np.bincount(src, minlength=size)
    layer = np.where(alive, -1, 0)
    pending = alive.copy()
    k = 0
    while True:
        k += 1
        newly = pending & (remaining == 0)
        if not newly.any():
            return layer
        layer[newly] = k
        pending &= ~newly
        hit = newly[dst]
        remaining -= np.bincount(src[hit], minlength=size)


def _edges(choices, sources):
    src, dst, lab = [], [], []
    for s, succ, valid in choices:
        idx = np.flatnonzero(valid & sources)
        src.append(idx)
        dst.append(succ[idx])
        lab.append(np.full(len(idx), s, dtype=np.int64))
    return np.concatenate(src), np.concatenate(dst), np.concatenate(lab)


def _lasso(space, choices, start, inside, allowed=None):
    """Walk from ``start`` through configurations in ``inside`` until one
    repeats or the walk dead-ends. ``allowed(i, s)`` filters moves."""
    path, moves, seen = [start], [], {start: 0}
    x = start
    while True:
        for s, succ, valid in choices:
            if valid[x] and inside[succ[x]] and (allowed is None or allowed(x, s)):
                moves.append(_members(space, s))
                x = int(succ[x])
                break
        else:
            return {"kind": "deadlock", "prefix": [space.decode(i) for i in path],
                    "moves": moves, "cycle_start": None}
        if x in seen:
            return {"kind": "cycle", "prefix": [space.decode(i) for i in path],
                    "moves": moves, "cycle_start": seen[x]}
        seen[x] = len(path)
        path.append(x)


def did_worst_case(p, pred=None, budget=DEFAULT_CONFIG_BUDGET,
                   choice_limit=DEFAULT_CHOICE_LIMIT, space=None):
    """Exact worst-case stabilization time under the distributed unfair daemon.

    The target is the largest ``pred``-closed set T. Outside T, W(c) = 1 +
    max over legal moves of W(successor); configurations that can avoid T
    forever (a cycle or a dead end outside T) get INF and a lasso witness.
    """
    pred = pred or default_predicate(p)
    space = space or StateSpace(p, budget)
    choices = _choice_arrays(space, choice_limit)
    target = greatest_closed_subset(space, pred.mask(space), choices)
    outside = ~target
    dead = space.act == 0
    src, dst, lab = _edges(choices, outside)
    # dead ends outside T never resolve; giving them a self-loop keeps them pending
    loops = np.flatnonzero(outside & dead)
    src = np.concatenate([src, loops])
    dst = np.concatenate([dst, loops])
    w = _peel(space.size, outside, src, dst)
    info = graph_info(p)
    extra = {"target_size": int(target.sum())}
    if (w == -1).any():
        start = int(np.argmax(w == -1))
        lasso = _lasso(space, choices, start, w == -1)
        witness_trace = tuple(lasso["prefix"])
        stab, witness = INF, space.decode(start)
        extra["lasso"] = {k: v for k, v in lasso.items() if k != "prefix"}
    else:
        worst = int(np.argmax(w))
        stab, witness = int(w[worst]), space.decode(worst)
        witness_trace, moves = _worst_path(space, choices, w, worst)
        extra["moves"] = moves
        denom = info["diam"] * p.n ** 3
        extra["implied_constant"] = round(stab / denom, 6)
    report = StabilizationReport(
        protocol=p.name, graph=info, daemon="distributed_unfair", stab_time=stab,
        method="game_search", witness=witness, witness_trace=witness_trace,
        liveness_ok=stab != INF, predicate=pred.name, configs=space.size, extra=extra)
    report.times = w
    report.target = target
    return report


def _worst_path(space, choices, w, start):
    """A daemon strategy realizing W: always move to a successor with W one less."""
    path, moves = [start], []
    x = start
    while w[x] > 0:
        for s, succ, valid in choices:
            if valid[x] and w[succ[x]] == w[x] - 1:
                moves.append(list(_members(space, s)))
                x = int(succ[x])
                break
        path.append(x)
    return tuple(space.decode(i) for i in path), moves


def replay_moves(p, initial, moves):
    """Replay a recorded move sequence through the engine."""
    return run(p, initial, ScriptedDaemon(moves), len(moves))


# --------------------------------------------------------------- liveness

@dataclass
class StarvationResult:
    ok: bool
    node: int = None
    lasso: dict = None


def starvation_check(p, within, budget=DEFAULT_CONFIG_BUDGET,
                     choice_limit=DEFAULT_CHOICE_LIMIT, space=None):
    """Look for an execution staying in ``within`` forever in which some node
    never progresses. ``within`` is a Predicate or a boolean mask."""
    space = space or StateSpace(p, budget)
    inside = within.mask(space) if isinstance(within, Predicate) else np.asarray(within)
    choices = _choice_arrays(space, choice_limit)
    dead = inside & (space.act == 0)
    if dead.any():
        i = int(np.argmax(dead))
        return StarvationResult(False, None, {"kind": "deadlock", "prefix": [space.decode(i)],
                                              "moves": [], "cycle_start": None})
    ev_by_choice = {s: space.events(s) for s, _, _ in choices}
    src, dst, lab = _edges(choices, inside)
    edge_ev = np.concatenate([ev_by_choice[s][np.flatnonzero(valid & inside)]
                              for s, _, valid in choices])
    for v in range(p.n):
        bit = 1 << v
        quiet = (edge_ev & bit) == 0
        layer = _peel(space.size, inside, src[quiet], dst[quiet])
        stuck = layer == -1
        if stuck.any():
            start = int(np.argmax(stuck))
            lasso = _lasso(space, choices, start, stuck,
                           allowed=lambda i, s: not (ev_by_choice[s][i] & bit))
            return StarvationResult(False, v, lasso)
    return StarvationResult(True)


# ------------------------------------------------------------ Γ1 audit

@dataclass
class Gamma1Audit:
    legitimate: int
    multi_privileged: int
    max_pair_distance: int
    diam: int


def gamma1_audit(p, budget=DEFAULT_CONFIG_BUDGET, space=None):
    """Enumerate Γ1 and count configurations with two or more privileged nodes."""
    space = space or StateSpace(p, budget)
    legit = GAMMA1.mask(space)
    multi = int((legit & (space.priv.sum(axis=0) >= 2)).sum())
    k = p.domain.k
    worst = 0
    for u in range(p.n):
        for v in range(u + 1, p.n):
            diff = (space.register(u) - space.register(v))[legit] % k
            if len(diff):
                worst = max(worst, int(np.minimum(diff, k - diff).max()))
    return Gamma1Audit(int(legit.sum()), multi, worst, diameter(p.graph))


# ------------------------------------------------------------ speculation

def speculation_report(strong, weak):
    if strong.protocol != weak.protocol or strong.graph != weak.graph:
        raise ValueError("reports must describe the same protocol and graph")
    a, b = strong.stab_time, weak.stab_time
    if a in (None, INF) or b in (None, INF):
        ratio = "undefined"
    elif b == 0:
        ratio = 1.0 if a == 0 else "undefined"
    else:
        ratio = a / b
    diam, n = strong.graph["diam"], strong.graph["n"]
    flags = {}
    if strong.protocol == "emss":
        bound = -(-diam // 2)
        flags["sync_bound"] = bound
        flags["sync_matches_bound"] = b == bound
        if a not in (None, INF):
            flags["implied_constant"] = round(a / (diam * n ** 3), 6)
    return SpeculationReport(strong.protocol, strong.graph, a, b, ratio,
                             "did/ds stabilization-time ratio", flags)
