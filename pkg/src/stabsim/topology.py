"""Undirected connected topologies, edge-list I/O, generators and the
structural constants (diameter, largest hole, cyclomatic characteristic).
"""

import json
from collections import deque
from dataclasses import dataclass, field

DEFAULT_ENUMERATION_LIMIT = 12


class GraphError(ValueError):
    pass


class ParseError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class NodeRangeError(GraphError):
    pass


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class EnumerationLimitError(GraphError):
    """Exponential enumeration refused because the graph is too large."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset
    adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("a graph needs at least one node")
        adj = [set() for _ in range(self.n)]
        for e in self.edges:
            u, v = tuple(e)
            adj[u].add(v)
            adj[v].add(u)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))

    @classmethod
    def from_edges(cls, n, pairs):
        """Build and validate a graph on nodes ``0..n-1``."""
        seen = set()
        for u, v in pairs:
            if u < 0 or v < 0 or u >= n or v >= n:
                raise NodeRangeError(f"edge ({u}, {v}) uses a node outside 0..{n - 1}")
            if u == v:
                raise SelfLoopError(f"self-loop on node {u}")
            e = frozenset((u, v))
            if e in seen:
                raise DuplicateEdgeError(f"duplicate edge ({u}, {v})")
            seen.add(e)
        g = cls(n, frozenset(seen))
        if not g.is_connected():
            raise DisconnectedGraphError("graph is not connected")
        return g

    def neighbors(self, v):
        return self.adjacency[v]

    def has_edge(self, u, v):
        return v in self.adjacency[u]

    def sorted_edges(self):
        return sorted(tuple(sorted(e)) for e in self.edges)

    def is_connected(self):
        return len(bfs_distances(self, 0)) == self.n

    def to_text(self):
        lines = [f"n {self.n}"]
        lines += [f"{u} {v}" for u, v in self.sorted_edges()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TopologyMetrics:
    n: int
    diam: int
    trou: int
    cyclo: int

    def to_json(self):
        return json.dumps({"n": self.n, "diam": self.diam, "trou": self.trou,
                           "cyclo": self.cyclo})


def load_graph(text):
    """Parse edge-list text: optional ``n <count>`` header, then ``u v`` lines.

    Without a header the node count is one more than the largest id seen.
    Blank lines and ``#`` comments are ignored.
    """
    n = None
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n":
            if n is not None or pairs:
                raise ParseError(f"line {lineno}: 'n' header must come first")
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError(f"line {lineno}: expected 'n <count>'")
            n = int(parts[1])
            continue
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ParseError(f"line {lineno}: expected two nonnegative integers, got {raw!r}")
        pairs.append((int(parts[0]), int(parts[1])))
    if n is None:
        if not pairs:
            raise ParseError("empty edge list")
        n = 1 + max(max(p) for p in pairs)
    return Graph.from_edges(n, pairs)


def ring(size):
    if size < 3:
        raise GraphError(f"ring needs size >= 3, got {size}")
    return Graph.from_edges(size, [(i, (i + 1) % size) for i in range(size)])


def line(size):
    if size < 2:
        raise GraphError(f"line needs size >= 2, got {size}")
    return Graph.from_edges(size, [(i, i + 1) for i in range(size - 1)])


def star(size):
    if size < 2:
        raise GraphError(f"star needs size >= 2, got {size}")
    return Graph.from_edges(size, [(0, i) for i in range(1, size)])


def complete(size):
    if size < 2:
        raise GraphError(f"complete graph needs size >= 2, got {size}")
    return Graph.from_edges(size, [(u, v) for u in range(size) for v in range(u + 1, size)])


def grid(rows, cols):
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GraphError(f"grid needs at least 2 nodes, got {rows}x{cols}")
    pairs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                pairs.append((v, v + 1))
            if r + 1 < rows:
                pairs.append((v, v + cols))
    return Graph.from_edges(rows * cols, pairs)


GENERATORS = {"ring": ring, "line": line, "star": star, "complete": complete, "grid": grid}


def generate(kind, *size):
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise GraphError(f"unknown topology kind {kind!r}") from None
    return gen(*size)


def parse_graph_spec(spec):
    """``ring:4``, ``grid:2x3`` ... or a path to an edge-list file."""
    kind, sep, arg = spec.partition(":")
    if sep and kind in GENERATORS:
        try:
            sizes = [int(s) for s in arg.split("x")]
        except ValueError:
            raise GraphError(f"bad size in topology spec {spec!r}") from None
        return generate(kind, *sizes)
    with open(spec) as fh:
        return load_graph(fh.read())


def bfs_distances(g, source):
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in g.adjacency[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def diameter(g):
    return max(max(bfs_distances(g, s).values()) for s in range(g.n))


def _guard(g, limit):
    if limit is not None and g.n > limit:
        raise EnumerationLimitError(f"n={g.n} exceeds enumeration limit {limit}")


def chordless_cycles(g):
    """Yield every chordless cycle of length >= 3 once, as a vertex list
    starting at its smallest vertex.

    Paths are grown as induced paths over vertices larger than the start;
    the second vertex is kept smaller than the last to fix the direction.
    """
    adj = g.adjacency
    for s in range(g.n):
        stack = [[s, w] for w in adj[s] if w > s]
        while stack:
            path = stack.pop()
            last = path[-1]
            for w in adj[last]:
                if w <= s or w in path:
                    continue
                # w may touch only `last` among interior vertices
                if any(g.has_edge(w, x) for x in path[1:-1]):
                    continue
                if g.has_edge(w, s):
                    if path[1] < w:
                        yield path + [w]
                    continue
                stack.append(path + [w])


def largest_hole(g, limit=DEFAULT_ENUMERATION_LIMIT):
    _guard(g, limit)
    return max((len(c) for c in chordless_cycles(g)), default=2)


def _edge_index(g):
    return {e: i for i, e in enumerate(sorted(g.edges, key=lambda e: sorted(e)))}


def cycle_edge_mask(cycle, index):
    mask = 0
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        mask |= 1 << index[frozenset((a, b))]
    return mask


def _shortest_path_tree(g, root):
    parent = {root: None}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for w in g.adjacency[u]:
            if w not in parent:
                parent[w] = u
                queue.append(w)
    return parent


def _tree_path(parent, v):
    path = []
    while v is not None:
        path.append(v)
        v = parent[v]
    return path


def horton_candidates(g):
    """Horton's candidate set: for each root and each edge (x, y), the closed
    walk root->x, x-y, y->root along one shortest-path tree, kept when simple."""
    index = _edge_index(g)
    seen = set()
    out = []
    for root in range(g.n):
        parent = _shortest_path_tree(g, root)
        for e in g.edges:
            x, y = sorted(e)
            if parent[x] == y or parent[y] == x:
                continue
            px, py = _tree_path(parent, x), _tree_path(parent, y)
            if set(px) & set(py) != {root}:
                continue
            cycle = list(reversed(px)) + py[:-1]
            mask = cycle_edge_mask(cycle, index)
            if mask not in seen:
                seen.add(mask)
                out.append((len(cycle), mask, cycle))
    out.sort(key=lambda t: (t[0], t[1]))
    return out


def independent_greedy(candidates, rank):
    """Select cycles in order while they stay independent over GF(2).

    ``candidates`` yields ``(length, edge_mask, cycle)``; stops at ``rank``.
    """
    pivots = {}  # leading bit -> reduced row
    chosen = []
    for length, mask, cycle in candidates:
        row = mask
        while row:
            top = row.bit_length() - 1
            if top not in pivots:
                pivots[top] = row
                chosen.append(cycle)
                break
            row ^= pivots[top]
        if len(chosen) == rank:
            break
    return chosen


def cycle_space_rank(g):
    return len(g.edges) - g.n + 1


def minimum_cycle_basis(g, limit=DEFAULT_ENUMERATION_LIMIT):
    _guard(g, limit)
    return independent_greedy(horton_candidates(g), cycle_space_rank(g))


def cyclomatic_characteristic(g, limit=DEFAULT_ENUMERATION_LIMIT):
    basis = minimum_cycle_basis(g, limit)
    return max((len(c) for c in basis), default=2)


def metrics(g, limit=DEFAULT_ENUMERATION_LIMIT):
    return TopologyMetrics(g.n, diameter(g), largest_hole(g, limit),
                           cyclomatic_characteristic(g, limit))
