"""Greedy construction episodes for four graph optimization problems.

Each problem is played the same way: start from an empty partial
solution, repeatedly pick a candidate node and add it, stop when the
problem's termination rule fires.  Every step reports the raw change in
the cost function c(S), so rewards telescope: the sum of step rewards
over an episode equals the cost of the terminal state exactly (up to
float roundoff), with c(empty) = 0.

Costs (maximized by the learner):
  mvc     c(S) = -|S|                 stop when all edges covered
  maxcut  c(S) = cut weight of (S, V\\S)   stop when no candidate has a
                                      strictly positive marginal gain
  tsp     c(S) = -tour length         stop when all nodes are visited;
                                      nodes enter the tour at the
                                      cheapest insertion position
  scp     c(S) = -|S|                 stop when the universe is covered;
                                      only cover-side nodes are pickable
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .graphs import PointSet, WeightedGraph


class Problem(str, enum.Enum):
    MVC = "mvc"
    MAXCUT = "maxcut"
    TSP = "tsp"
    SCP = "scp"


@dataclass(frozen=True, eq=False)
class EpisodeState:
    """Immutable snapshot of a partial solution.

    ``solution`` records picked nodes in pick order; ``tags`` is the
    0/1 membership vector.  ``cost`` is c(S) maintained incrementally.
    The remaining fields are per-problem bookkeeping: covered edge
    count (mvc), marginal gain per node (maxcut), the current cyclic
    tour (tsp), or per-universe-element hit counts (scp).
    """

    graph: WeightedGraph
    kind: Problem
    solution: tuple
    tags: np.ndarray
    cost: float
    covered: int = 0
    gains: np.ndarray | None = None
    tour: tuple = ()
    hits: np.ndarray | None = None
    uncovered: int = 0


def init_state(g: WeightedGraph, kind: Problem) -> EpisodeState:
    """Start an episode on g with an empty partial solution."""
    kind = Problem(kind)
    n = g.node_count
    tags = np.zeros(n, dtype=np.uint8)
    tags.setflags(write=False)
    if kind is Problem.TSP:
        if g.kind != "euclidean":
            raise ArgumentError("tsp episodes need a euclidean graph")
        return EpisodeState(g, kind, (), tags, 0.0)
    if kind is Problem.SCP:
        if g.kind != "bipartite_scp":
            raise ArgumentError("scp episodes need a bipartite_scp graph")
        hits = np.zeros(n, dtype=np.int64)
        hits.setflags(write=False)
        return EpisodeState(g, kind, (), tags, 0.0, hits=hits,
                            uncovered=n - g.cover_count)
    if kind is Problem.MAXCUT:
        gains = np.zeros(n, dtype=np.float64)
        for v in range(n):
            gains[v] = g.weights[v].sum()
        gains.setflags(write=False)
        return EpisodeState(g, kind, (), tags, 0.0, gains=gains)
    return EpisodeState(g, kind, (), tags, 0.0, covered=0)


def candidates(state: EpisodeState, prune: bool = False) -> np.ndarray:
    """Nodes that may be added next, in ascending id order.

    With prune=True the mvc candidate set drops nodes whose incident
    edges are all covered already; such picks cannot help any cover.
    Off by default so the action set stays the plain complement of S.
    """
    untagged = np.nonzero(state.tags == 0)[0]
    if state.kind is Problem.SCP:
        return untagged[untagged < state.graph.cover_count]
    if prune and state.kind is Problem.MVC and untagged.size:
        nbrs = state.graph.neighbors
        keep = np.fromiter(
            (bool((state.tags[nbrs[v]] == 0).any()) for v in untagged),
            dtype=bool, count=untagged.size)
        return untagged[keep]
    return untagged


def terminated(state: EpisodeState) -> bool:
    """Whether the episode's stop rule holds in this state."""
    g = state.graph
    if state.kind is Problem.MVC:
        return state.covered == g.edge_count
    if state.kind is Problem.MAXCUT:
        cand = np.nonzero(state.tags == 0)[0]
        return cand.size == 0 or float(state.gains[cand].max()) <= 0.0
    if state.kind is Problem.TSP:
        return len(state.solution) == g.node_count
    return state.uncovered == 0


def _best_insertion(tour: tuple, v: int, dist) -> tuple[int, float]:
    """Cheapest insertion position for v and its length increase.

    Position i means insertion between tour[i] and tour[(i+1) % L].
    Ties resolve to the lowest position index.
    """
    length = len(tour)
    if length == 0:
        return 0, 0.0
    if length == 1:
        return 0, 2.0 * dist(tour[0], v)
    best_pos, best_delta = 0, None
    for i in range(length):
        a, b = tour[i], tour[(i + 1) % length]
        delta = dist(a, v) + dist(v, b) - dist(a, b)
        if best_delta is None or delta < best_delta:
            best_pos, best_delta = i, delta
    return best_pos, best_delta


def apply(state: EpisodeState, v: int) -> tuple[EpisodeState, float]:
    """Add node v to the partial solution.

    Returns the successor state and the raw cost change
    c(S + v) - c(S).  The input state is not modified.  Raises
    ArgumentError if v is not a candidate or the episode is over.
    """
    v = int(v)
    g = state.graph
    n = g.node_count
    if terminated(state):
        raise ArgumentError("episode already terminated")
    if not 0 <= v < n or state.tags[v]:
        raise ArgumentError(f"node {v} is not a candidate")
    if state.kind is Problem.SCP and v >= g.cover_count:
        raise ArgumentError(f"node {v} is on the universe side")

    tags = state.tags.copy()
    tags[v] = 1
    tags.setflags(write=False)
    solution = state.solution + (v,)

    if state.kind is Problem.MVC:
        newly = int(np.count_nonzero(state.tags[g.neighbors[v]] == 0))
        nxt = EpisodeState(g, state.kind, solution, tags, state.cost - 1.0,
                           covered=state.covered + newly)
        return nxt, -1.0

    if state.kind is Problem.MAXCUT:
        delta = float(state.gains[v])
        gains = state.gains.copy()
        gains[g.neighbors[v]] -= 2.0 * g.weights[v]
        gains.setflags(write=False)
        nxt = EpisodeState(g, state.kind, solution, tags, state.cost + delta,
                           gains=gains)
        return nxt, delta

    if state.kind is Problem.TSP:
        ps = g.point_set()
        pos, delta = _best_insertion(state.tour, v, ps.distance)
        tour = state.tour[:pos + 1] + (v,) + state.tour[pos + 1:]
        nxt = EpisodeState(g, state.kind, solution, tags, state.cost - delta,
                           tour=tour)
        return nxt, -delta

    hits = state.hits.copy()
    hits[g.neighbors[v]] += 1
    newly = int(np.count_nonzero((hits == 1) & (state.hits == 0)))
    hits.setflags(write=False)
    nxt = EpisodeState(g, state.kind, solution, tags, state.cost - 1.0,
                       hits=hits, uncovered=state.uncovered - newly)
    return nxt, -1.0


def restore_state(g: WeightedGraph, kind: Problem, solution) -> EpisodeState:
    """Rebuild the state reached by applying the given nodes in order."""
    state = init_state(g, kind)
    for v in solution:
        state, _ = apply(state, v)
    return state


def terminal_cost(state: EpisodeState) -> float:
    """c(S) of a terminal state, recomputed from scratch."""
    if not terminated(state):
        raise ArgumentError("state is not terminal")
    g = state.graph
    if state.kind is Problem.MVC or state.kind is Problem.SCP:
        return -float(len(state.solution))
    if state.kind is Problem.MAXCUT:
        return cut_value(g, state.tags)
    return -tour_length(g.point_set(), state.tour)


def solution_value(state: EpisodeState) -> float:
    """Objective value of a terminal state in its natural positive units.

    mvc/scp: number of picked nodes.  maxcut: cut weight.  tsp: tour
    length.  Recomputed from scratch, independent of the incremental
    cost bookkeeping.
    """
    c = terminal_cost(state)
    return c if state.kind is Problem.MAXCUT else -c


# ---------------------------------------------------------------------------
# feasibility checks, usable for any solution regardless of origin


def is_vertex_cover(g: WeightedGraph, nodes) -> bool:
    """Whether the node set touches every edge of g."""
    sel = set(int(v) for v in nodes)
    return all(u in sel or v in sel
               for u, v in zip(g.edge_u.tolist(), g.edge_v.tolist()))


def cut_value(g: WeightedGraph, side) -> float:
    """Total weight of edges crossing the 0/1 node partition."""
    side = np.asarray(side)
    crossing = side[g.edge_u] != side[g.edge_v]
    return float(g.edge_w[crossing].sum())


def tour_length(ps: PointSet, tour) -> float:
    """Length of the closed tour visiting the points in the given order."""
    tour = list(tour)
    if len(tour) < 2:
        return 0.0
    if len(set(tour)) != len(tour):
        raise ArgumentError("tour visits a point twice")
    return float(sum(ps.distance(tour[i], tour[(i + 1) % len(tour)])
                     for i in range(len(tour))))


def is_set_cover(g: WeightedGraph, cover_nodes) -> bool:
    """Whether the chosen cover-side nodes dominate the whole universe."""
    if g.kind != "bipartite_scp":
        raise ArgumentError("is_set_cover needs a bipartite_scp graph")
    sel = [int(v) for v in cover_nodes]
    if any(not 0 <= v < g.cover_count for v in sel):
        raise ArgumentError("cover set contains a non-cover node")
    hit = np.zeros(g.node_count, dtype=bool)
    for v in sel:
        hit[g.neighbors[v]] = True
    return bool(hit[g.cover_count:].all())


def uncoverable(g: WeightedGraph) -> list:
    """Universe elements with no incident cover node (cannot be covered)."""
    if g.kind != "bipartite_scp":
        raise ArgumentError("uncoverable needs a bipartite_scp graph")
    return [u for u in range(g.cover_count, g.node_count) if g.degree(u) == 0]
