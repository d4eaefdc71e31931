"""Brute-force reference implementations used only by the tests.

Nothing here shares code with the paths under test beyond the Graph type
and the engine's one-step semantics.
"""

import math
from itertools import combinations, permutations

from stabsim.daemons import enumerate_choices
from stabsim.engine import activable_set, apply_step


def floyd_warshall_diameter(g):
    n = g.n
    d = [[0 if i == j else math.inf for j in range(n)] for i in range(n)]
    for u, v in g.sorted_edges():
        d[u][v] = d[v][u] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return max(max(row) for row in d)


def all_simple_cycles(g):
    """Every simple cycle once, by trying all vertex orderings."""
    out = []
    for size in range(3, g.n + 1):
        for subset in combinations(range(g.n), size):
            first = subset[0]
            for rest in permutations(subset[1:]):
                if rest[0] > rest[-1]:
                    continue
                cyc = (first,) + rest
                if all(g.has_edge(a, b) for a, b in zip(cyc, cyc[1:] + cyc[:1])):
                    out.append(cyc)
    return out


def has_chord(g, cyc):
    k = len(cyc)
    for i in range(k):
        for j in range(i + 2, k):
            if i == 0 and j == k - 1:
                continue
            if g.has_edge(cyc[i], cyc[j]):
                return True
    return False


def brute_largest_hole(g):
    return max((len(c) for c in all_simple_cycles(g) if not has_chord(g, c)), default=2)


def edge_vector(g, cyc):
    edges = g.sorted_edges()
    return sum(1 << edges.index(tuple(sorted((a, b)))) for a, b in zip(cyc, cyc[1:] + cyc[:1]))


def gf2_rank(vectors):
    rows = list(vectors)
    rank = 0
    bit = 0
    width = max((v.bit_length() for v in rows), default=0)
    while bit < width and rows:
        pivot = next((r for r in rows if r >> bit & 1), None)
        if pivot is not None:
            rows.remove(pivot)
            rows = [r ^ pivot if r >> bit & 1 else r for r in rows]
            rank += 1
        bit += 1
    return rank


def brute_cyclomatic(g):
    """Matroid greedy over *all* simple cycles sorted by length: the result is
    a minimum cycle basis and every such basis has the same length profile."""
    dim = len(g.edges) - g.n + 1
    if dim == 0:
        return 2
    chosen = []
    for cyc in sorted(all_simple_cycles(g), key=len):
        vec = edge_vector(g, cyc)
        if gf2_rank(chosen + [vec]) > len(chosen):
            chosen.append(vec)
            last = len(cyc)
            if len(chosen) == dim:
                return last
    raise AssertionError("cycle space not spanned")


def exhaustive_basis_search(g):
    """Minimum total length over all bases, then the smallest max length among them."""
    dim = len(g.edges) - g.n + 1
    cycles = all_simple_cycles(g)
    best = None
    for combo in combinations(cycles, dim):
        if gf2_rank([edge_vector(g, c) for c in combo]) < dim:
            continue
        key = (sum(map(len, combo)), max(map(len, combo)))
        if best is None or key < best:
            best = key
    return best


def explicit_game(p, configs):
    """Successor lists over all daemon choices, built one step at a time."""
    succ = {}
    for c in configs:
        act = activable_set(p, c)
        succ[c] = [] if not act else [apply_step(p, c, s) for s in enumerate_choices(act)]
    return succ


def brute_did(p, configs, pred):
    """Greatest closed subset of ``pred`` and the longest path to it, by
    plain fixpoint iteration and memoized recursion."""
    succ = explicit_game(p, configs)
    target = {c for c in configs if pred(p, c)}
    changed = True
    while changed:
        changed = False
        for c in list(target):
            if any(s not in target for s in succ[c]):
                target.discard(c)
                changed = True
    memo, onstack = {}, set()

    def w(c):
        if c in target:
            return 0
        if c in memo:
            return memo[c]
        if c in onstack or not succ[c]:
            return math.inf
        onstack.add(c)
        val = 1 + max(w(s) for s in succ[c])
        onstack.discard(c)
        memo[c] = val
        return val

    return target, {c: w(c) for c in configs}
