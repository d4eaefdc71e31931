"""Concrete protocols: the reset-based unison, EMSS mutual exclusion built on
top of it, and Dijkstra's K-state token ring as a baseline."""

from dataclasses import dataclass

from .clock import ClockDomain
from .engine import ProtocolDef, Rule
from .topology import (DEFAULT_ENUMERATION_LIMIT, EnumerationLimitError,
                       GraphError, cyclomatic_characteristic, diameter,
                       largest_hole, ring)


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class UnisonParams:
    alpha: int
    k: int

    def validate(self, g, limit=DEFAULT_ENUMERATION_LIMIT):
        """Check ``alpha >= trou - 2`` and ``K > cyclo`` for ``g``.

        Past the enumeration limit both constants are replaced by their
        upper bound ``n``.
        """
        try:
            trou = largest_hole(g, limit)
            cyclo = cyclomatic_characteristic(g, limit)
        except EnumerationLimitError:
            trou = cyclo = g.n
        if self.alpha < 1 or self.k < 2:
            raise ParameterError(f"need alpha >= 1 and K >= 2, got alpha={self.alpha}, K={self.k}")
        if self.alpha < trou - 2:
            raise ParameterError(f"alpha>=trou-2 violated: alpha={self.alpha}, trou={trou}")
        if not self.k > cyclo:
            raise ParameterError(f"K>cyclo violated: K={self.k}, cyclo={cyclo}")
        return self


@dataclass(frozen=True)
class EmssParams:
    n: int
    diam: int

    @property
    def alpha(self):
        return self.n

    @property
    def k(self):
        return (2 * self.n - 1) * (self.diam + 1) + 2

    def target(self, v):
        return 2 * self.n + 2 * self.diam * v

    @property
    def targets(self):
        return tuple(self.target(v) for v in range(self.n))


def unison_rules(domain):
    """The three rules NA (normal step), CA (convergence step) and RA (reset)."""

    def correct(view, ru):
        rv = view.value
        return domain.is_stab(rv) and domain.is_stab(ru) and domain.distance(rv, ru) <= 1

    def all_correct(view):
        return all(correct(view, ru) for ru in view.neighbors)

    def normal_step(view):
        return all_correct(view) and all(domain.local_leq(view.value, ru) for ru in view.neighbors)

    def reset(view):
        return not all_correct(view) and not domain.is_init(view.value)

    def convergence_step(view):
        rv = view.value
        return domain.is_init_strict(rv) and all(
            domain.is_init(ru) and domain.init_leq(rv, ru) for ru in view.neighbors)

    def tick(view):
        return domain.increment(view.value)

    return (
        Rule("NA", normal_step, tick, increments=True),
        Rule("CA", convergence_step, tick, increments=True),
        Rule("RA", reset, lambda view: domain.reset_value()),
    )


def make_unison(g, params, validate=True):
    if validate:
        params.validate(g)
    domain = ClockDomain(params.alpha, params.k)
    rules = unison_rules(domain)
    return ProtocolDef(
        name="unison",
        graph=g,
        values=tuple(domain.values),
        rules=(rules,) * g.n,
        liveness="increment",
        domain=domain,
        params={"alpha": params.alpha, "k": params.k},
    )


def make_emss(g):
    ep = EmssParams(g.n, diameter(g))
    domain = ClockDomain(ep.alpha, ep.k)
    targets = ep.targets

    def privilege(view):
        return view.value == targets[view.node]

    return ProtocolDef(
        name="emss",
        graph=g,
        values=tuple(domain.values),
        rules=(unison_rules(domain),) * g.n,
        privilege=privilege,
        liveness="cs",
        domain=domain,
        params={"alpha": ep.alpha, "k": ep.k, "diam": ep.diam, "targets": list(targets)},
    )


def is_canonical_ring(g):
    n = g.n
    return n >= 3 and g.edges == frozenset(frozenset((i, (i + 1) % n)) for i in range(n))


def make_dijkstra(g, k=None):
    """Dijkstra's K-state ring; node 0 is the root, node ``v`` reads ``v-1``.

    ``g`` may also be a plain ring size. ``K`` defaults to the ring size.
    A node is privileged exactly when one of its rules is enabled.
    """
    if isinstance(g, int):
        g = ring(g)
    if not is_canonical_ring(g):
        raise GraphError("Dijkstra's protocol needs a ring numbered in path order, size >= 3")
    n = g.n
    k = n if k is None else k
    if k < 2:
        raise ParameterError(f"need K >= 2, got {k}")
    # adjacency is sorted: node v sees (v-1, v+1) except at the ends of the numbering
    pred_pos = [g.adjacency[v].index((v - 1) % n) for v in range(n)]

    def pred(view):
        return view.neighbors[pred_pos[view.node]]

    root = (Rule("R", lambda view: view.value == pred(view),
                 lambda view: (view.value + 1) % k, increments=True),)
    other = (Rule("C", lambda view: view.value != pred(view), pred, increments=True),)

    def privilege(view):
        return (view.value == pred(view)) if view.node == 0 else (view.value != pred(view))

    return ProtocolDef(
        name="dijkstra",
        graph=g,
        values=tuple(range(k)),
        rules=(root,) + (other,) * (n - 1),
        privilege=privilege,
        liveness="cs",
        params={"k": k},
    )


def make_protocol(name, g, alpha=None, k=None):
    if name == "emss":
        return make_emss(g)
    if name == "unison":
        if alpha is None or k is None:
            raise ParameterError("unison needs --alpha and --k")
        return make_unison(g, UnisonParams(alpha, k))
    if name == "dijkstra":
        return make_dijkstra(g, k)
    raise ParameterError(f"unknown protocol {name!r}")
