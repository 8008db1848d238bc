"""Classical heuristics used as calibration opponents.

All of them are deterministic given their arguments (mvc_approx takes
an explicit seed for its random edge choice); ties break toward lower
indices so repeated runs agree bit for bit.  TSP heuristics work on a
PointSet and respect its distance rule.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, InfeasibleError
from .graphs import PointSet, WeightedGraph, rng_stream
from .problems import _best_insertion


def mvc_approx(g: WeightedGraph, seed: int) -> tuple:
    """2-approximate vertex cover: grab both ends of random uncovered edges."""
    rng = rng_stream(seed, 0xBA)
    cover = set()
    uncovered = list(zip(g.edge_u.tolist(), g.edge_v.tolist()))
    while uncovered:
        u, v = uncovered[int(rng.integers(len(uncovered)))]
        cover.add(u)
        cover.add(v)
        uncovered = [(a, b) for a, b in uncovered
                     if a not in cover and b not in cover]
    return tuple(sorted(cover))


def mvc_approx_greedy(g: WeightedGraph) -> tuple:
    """Vertex cover taking both ends of the busiest uncovered edge.

    Busiest means maximum sum of endpoint degrees, with degrees counted
    in the residual graph of still-uncovered edges; ties go to the
    lexicographically smallest edge.
    """
    cover = set()
    uncovered = list(zip(g.edge_u.tolist(), g.edge_v.tolist()))
    while uncovered:
        deg = {}
        for a, b in uncovered:
            deg[a] = deg.get(a, 0) + 1
            deg[b] = deg.get(b, 0) + 1
        u, v = max(uncovered, key=lambda e: (deg[e[0]] + deg[e[1]],
                                             -e[0], -e[1]))
        cover.add(u)
        cover.add(v)
        uncovered = [(a, b) for a, b in uncovered
                     if a not in cover and b not in cover]
    return tuple(sorted(cover))


def maxcut_approx(g: WeightedGraph) -> np.ndarray:
    """Single-node local search for max cut from the all-one-side start.

    Repeatedly moves the node whose side change gives the largest
    strictly positive cut improvement (ties to the lowest id).  The cut
    weight increases strictly each move, so this terminates, and any
    local optimum carries at least half the total edge weight.
    """
    n = g.node_count
    side = np.zeros(n, dtype=np.uint8)
    # gain[v] = cut change if v switches sides
    gain = np.zeros(n, dtype=np.float64)
    for v in range(n):
        same = side[g.neighbors[v]] == side[v]
        gain[v] = g.weights[v][same].sum() - g.weights[v][~same].sum()
    while True:
        v = int(np.argmax(gain))
        if gain[v] <= 0.0:
            return side
        side[v] ^= 1
        gain[v] = -gain[v]
        for u, w in zip(g.neighbors[v].tolist(), g.weights[v].tolist()):
            if side[u] == side[v]:
                gain[u] += 2.0 * w
            else:
                gain[u] -= 2.0 * w


def tsp_nearest_neighbor(ps: PointSet) -> tuple:
    """Start at point 0, always visit the nearest unvisited point."""
    n = ps.count
    if n < 2:
        raise ArgumentError("nearest neighbor needs at least 2 points")
    dist = ps.distance_matrix()
    tour = [0]
    left = set(range(1, n))
    while left:
        here = tour[-1]
        nxt = min(left, key=lambda v: (dist[here, v], v))
        tour.append(nxt)
        left.discard(nxt)
    return tuple(tour)


INSERTION_STRATEGIES = ("nearest", "farthest", "cheapest", "closest")


def tsp_insertion(ps: PointSet, strategy: str) -> tuple:
    """Insertion heuristics: grow a tour from point 0.

    Selection of the next point, measured against the current tour's
    node set: nearest takes the smallest minimum distance, farthest the
    largest minimum distance, closest the smallest mean distance, and
    cheapest the smallest insertion cost.  The chosen point enters at
    the position of minimum length increase.  All ties break to the
    lowest point index.
    """
    if strategy not in INSERTION_STRATEGIES:
        raise ArgumentError(f"unknown insertion strategy {strategy!r}")
    n = ps.count
    if n < 2:
        raise ArgumentError("insertion needs at least 2 points")
    dist = ps.distance_matrix()
    tour = (0,)
    left = list(range(1, n))
    dmin = dist[0].copy()
    dsum = dist[0].copy()
    while left:
        if strategy == "nearest":
            v = min(left, key=lambda u: (dmin[u], u))
        elif strategy == "farthest":
            v = min(left, key=lambda u: (-dmin[u], u))
        elif strategy == "closest":
            v = min(left, key=lambda u: (dsum[u], u))
        else:
            v = min(left, key=lambda u: (_best_insertion(tour, u, ps.distance)[1], u))
        pos, _ = _best_insertion(tour, v, ps.distance)
        tour = tour[:pos + 1] + (v,) + tour[pos + 1:]
        left.remove(v)
        np.minimum(dmin, dist[v], out=dmin)
        dsum += dist[v]
    return tour


def tsp_mst(ps: PointSet) -> tuple:
    """Preorder walk of a Prim minimum spanning tree rooted at point 0.

    Shortcutting repeated nodes gives the classic factor-2 tour for
    metric instances.
    """
    n = ps.count
    if n < 2:
        raise ArgumentError("mst tour needs at least 2 points")
    dist = ps.distance_matrix()
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_d = dist[0].copy()
    best_edge = np.zeros(n, dtype=np.int64)
    children = [[] for _ in range(n)]
    for _ in range(n - 1):
        cand = np.nonzero(~in_tree)[0]
        v = int(cand[np.argmin(best_d[cand])])
        children[int(best_edge[v])].append(v)
        in_tree[v] = True
        closer = dist[v] < best_d
        best_d[closer] = dist[v][closer]
        best_edge[closer] = v
    tour = []
    stack = [0]
    while stack:
        u = stack.pop()
        tour.append(u)
        stack.extend(sorted(children[u], reverse=True))
    return tuple(tour)


def tsp_two_opt(tour, ps: PointSet) -> tuple:
    """Best-improvement 2-opt until no edge exchange shortens the tour."""
    tour = list(tour)
    L = len(tour)
    if sorted(tour) != list(range(ps.count)):
        raise ArgumentError("tour must visit every point exactly once")
    if L < 4:
        return tuple(tour)
    d = ps.distance
    # Tolerance must scale with coordinate magnitude: deltas that are zero
    # in exact arithmetic carry rounding noise proportional to edge length.
    eps = 1e-9 * max(1.0, max(float(ps.points[:, 0].max()), float(ps.points[:, 1].max())))
    while True:
        best_delta = -eps
        best_ij = None
        for i in range(L - 1):
            a, b = tour[i], tour[i + 1]
            for j in range(i + 2, L):
                if i == 0 and j == L - 1:
                    continue
                c, e = tour[j], tour[(j + 1) % L]
                delta = d(a, c) + d(b, e) - d(a, b) - d(c, e)
                if delta < best_delta:
                    best_delta = delta
                    best_ij = (i, j)
        if best_ij is None:
            return tuple(tour)
        i, j = best_ij
        tour[i + 1:j + 1] = reversed(tour[i + 1:j + 1])


def scp_greedy(g: WeightedGraph) -> tuple:
    """Set cover by repeatedly taking the set covering the most new elements.

    Ties go to the lowest cover-node id.  Raises InfeasibleError when
    some universe element cannot be covered at all.
    """
    if g.kind != "bipartite_scp":
        raise ArgumentError("scp_greedy needs a bipartite_scp graph")
    k = g.cover_count
    uncovered = set(range(k, g.node_count))
    chosen = []
    while uncovered:
        gains = [len(uncovered.intersection(g.neighbors[c].tolist()))
                 for c in range(k)]
        c = int(np.argmax(gains))
        if gains[c] == 0:
            raise InfeasibleError(
                f"universe nodes {sorted(uncovered)} cannot be covered")
        chosen.append(c)
        uncovered.difference_update(g.neighbors[c].tolist())
    return tuple(sorted(chosen))
