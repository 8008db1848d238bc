"""Graph and point-set containers plus seeded instance generators.

Every generator is a deterministic function of its arguments and a
nonnegative integer seed.  Randomness comes from numpy's PCG64.  Batch
generation derives one independent stream per instance index via
``SeedSequence(entropy=seed, spawn_key=key)`` so instance i can be
rebuilt in isolation without replaying instances 0..i-1.

Containers are immutable after construction.  ``WeightedGraph`` stores a
sorted adjacency structure plus a canonical edge list (u < v, ascending);
``PointSet`` stores 2-D coordinates and owns the distance rule (exact
Euclidean, or TSPLIB nearest-integer rounding for benchmark files).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ParseError

FORMAT_MAGIC = "greedyq-graph"
FORMAT_VERSION = 1

GRAPH_KINDS = ("general", "euclidean", "bipartite_scp")


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for the given seed and stream key.

    Distinct keys yield statistically independent streams of the same
    seed, which is how per-instance substreams are derived.
    """
    if seed < 0:
        raise ArgumentError(f"seed must be nonnegative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True, eq=False)
class PointSet:
    """2-D points in [0, grid_extent]^2 with an attached distance rule."""

    points: np.ndarray            # (n, 2) float64
    grid_extent: float
    tsplib_rounding: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ArgumentError(f"points must be (n, 2) with n >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ArgumentError("points contain non-finite coordinates")
        if self.grid_extent <= 0:
            raise ArgumentError(f"grid_extent must be positive, got {self.grid_extent}")
        if pts.min() < 0 or pts.max() > self.grid_extent * (1 + 1e-12):
            raise ArgumentError("points fall outside [0, grid_extent]^2")
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def distance(self, i: int, j: int) -> float:
        """Distance between points i and j under this set's rule."""
        d = float(np.hypot(*(self.points[i] - self.points[j])))
        if self.tsplib_rounding:
            return float(int(d + 0.5))
        return d

    def distance_matrix(self) -> np.ndarray:
        """Full pairwise distance matrix under this set's rule."""
        diff = self.points[:, None, :] - self.points[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        if self.tsplib_rounding:
            d = np.floor(d + 0.5)
        return d


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with nonnegative float edge weights.

    ``neighbors[v]`` and ``weights[v]`` are aligned arrays sorted by
    neighbor id.  ``edge_u/edge_v/edge_w`` list each edge once with
    u < v, sorted lexicographically.  Kind-specific extras:

    - ``euclidean``: ``coords`` (n, 2) and ``extent`` are set; edge
      weights equal point distances under ``tsplib_rounding``.
    - ``bipartite_scp``: nodes [0, cover_count) form the cover side,
      the rest the universe side; every edge crosses sides.
    """

    n: int
    kind: str
    neighbors: tuple
    weights: tuple
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    coords: np.ndarray | None = None
    extent: float | None = None
    cover_count: int | None = None
    tsplib_rounding: bool = False
    _layout_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_edges(cls, n: int, edges, *, kind: str = "general", coords=None,
                   extent: float | None = None, cover_count: int | None = None,
                   tsplib_rounding: bool = False) -> "WeightedGraph":
        """Build a graph from an iterable of (u, v, weight) triples.

        Rejects self loops, duplicate edges (in either orientation),
        out-of-range endpoints, and negative or non-finite weights.
        """
        if kind not in GRAPH_KINDS:
            raise ArgumentError(f"unknown graph kind {kind!r}")
        if n < 1:
            raise ArgumentError(f"node count must be >= 1, got {n}")
        triples = [(int(u), int(v), float(w)) for u, v, w in edges]
        for u, v, w in triples:
            if not (0 <= u < n and 0 <= v < n):
                raise ArgumentError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ArgumentError(f"self loop at node {u}")
            if not (math.isfinite(w) and w >= 0):
                raise ArgumentError(f"edge ({u}, {v}) has invalid weight {w}")
        canon = sorted((min(u, v), max(u, v), w) for u, v, w in triples)
        for a, b in zip(canon, canon[1:]):
            if a[0] == b[0] and a[1] == b[1]:
                raise ArgumentError(f"duplicate edge ({a[0]}, {a[1]})")

        if kind == "bipartite_scp":
            if cover_count is None or not (1 <= cover_count < n):
                raise ArgumentError("bipartite_scp needs 1 <= cover_count < n")
            for u, v, _ in canon:
                if (u < cover_count) == (v < cover_count):
                    raise ArgumentError(f"edge ({u}, {v}) does not cross sides")
        elif cover_count is not None:
            raise ArgumentError("cover_count only applies to bipartite_scp")

        if kind == "euclidean":
            if coords is None or extent is None:
                raise ArgumentError("euclidean graphs need coords and extent")
            coords = np.array(coords, dtype=np.float64)
            if coords.shape != (n, 2):
                raise ArgumentError(f"coords must be ({n}, 2), got {coords.shape}")
            if extent <= 0:
                raise ArgumentError("extent must be positive")
            coords.setflags(write=False)
        elif coords is not None:
            raise ArgumentError("coords only apply to euclidean graphs")

        nbr_lists = [[] for _ in range(n)]
        for u, v, w in canon:
            nbr_lists[u].append((v, w))
            nbr_lists[v].append((u, w))
        neighbors = []
        weights = []
        for lst in nbr_lists:
            lst.sort()
            ids = np.array([x[0] for x in lst], dtype=np.int64)
            ws = np.array([x[1] for x in lst], dtype=np.float64)
            ids.setflags(write=False)
            ws.setflags(write=False)
            neighbors.append(ids)
            weights.append(ws)

        edge_u = np.array([e[0] for e in canon], dtype=np.int64)
        edge_v = np.array([e[1] for e in canon], dtype=np.int64)
        edge_w = np.array([e[2] for e in canon], dtype=np.float64)
        for arr in (edge_u, edge_v, edge_w):
            arr.setflags(write=False)
        return cls(n=n, kind=kind, neighbors=tuple(neighbors),
                   weights=tuple(weights), edge_u=edge_u, edge_v=edge_v,
                   edge_w=edge_w, coords=coords, extent=extent,
                   cover_count=cover_count, tsplib_rounding=tsplib_rounding)

    @property
    def node_count(self) -> int:
        return self.n

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.shape[0])

    @property
    def total_weight(self) -> float:
        return float(self.edge_w.sum())

    def degree(self, v: int) -> int:
        return int(self.neighbors[v].shape[0])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    def point_set(self) -> PointSet:
        """View the coordinates of a euclidean graph as a PointSet."""
        if self.kind != "euclidean":
            raise ArgumentError("point_set() requires a euclidean graph")
        return PointSet(self.coords, self.extent, self.tsplib_rounding)

    def distance(self, i: int, j: int) -> float:
        return self.point_set().distance(i, j)


def relabel(g: WeightedGraph, perm: np.ndarray) -> WeightedGraph:
    """Apply a node permutation: node v of g becomes node perm[v].

    Supported for general and euclidean graphs.  Coordinates follow
    their nodes, so the relabeled graph is the same geometric object.
    """
    perm = np.asarray(perm, dtype=np.int64)
    n = g.node_count
    if sorted(perm.tolist()) != list(range(n)):
        raise ArgumentError("perm must be a permutation of 0..n-1")
    if g.kind == "bipartite_scp":
        raise ArgumentError("relabel would break the bipartite side layout")
    edges = [(int(perm[u]), int(perm[v]), float(w))
             for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w)]
    coords = None
    if g.kind == "euclidean":
        coords = np.empty_like(g.coords)
        coords[perm] = g.coords
    return WeightedGraph.from_edges(n, edges, kind=g.kind, coords=coords,
                                    extent=g.extent,
                                    tsplib_rounding=g.tsplib_rounding)


# ---------------------------------------------------------------------------
# generators


def gen_erdos_renyi(n: int, p: float, seed: int, *, index: int = 0) -> WeightedGraph:
    """Erdos-Renyi G(n, p) with unit edge weights.

    Each of the C(n, 2) pairs is included independently with
    probability p.  Pairs are scanned row by row in ascending order, so
    the draw sequence (and hence the graph) is reproducible bit for bit.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"p must lie in [0, 1], got {p}")
    rng = rng_stream(seed, index)
    edges = []
    for u in range(n - 1):
        hits = np.nonzero(rng.random(n - 1 - u) < p)[0]
        for off in hits:
            edges.append((u, u + 1 + int(off), 1.0))
    return WeightedGraph.from_edges(n, edges)


def gen_barabasi_albert(n: int, m: int, seed: int, *, index: int = 0) -> WeightedGraph:
    """Barabasi-Albert preferential attachment with unit edge weights.

    Starts from a complete graph on m + 1 nodes; every later node
    attaches to m distinct existing nodes sampled proportionally to
    their current degree.  Edge count is therefore
    C(m+1, 2) + (n - m - 1) * m exactly.
    """
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ArgumentError(f"need n > m, got n={n}, m={m}")
    rng = rng_stream(seed, index)
    edges = []
    # one entry per degree unit; sampling an index uniformly from this
    # list is preferential attachment
    repeated = []
    for u in range(m + 1):
        for v in range(u + 1, m + 1):
            edges.append((u, v, 1.0))
            repeated.append(u)
            repeated.append(v)
    for v in range(m + 1, n):
        targets = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for u in sorted(targets):
            edges.append((u, v, 1.0))
            repeated.append(u)
            repeated.append(v)
    return WeightedGraph.from_edges(n, edges)


def gen_maxcut_weights(g: WeightedGraph, seed: int, *, index: int = 0) -> WeightedGraph:
    """Redraw the edge weights of g uniformly from [0, 1).

    Weights are assigned in canonical edge order (u < v, ascending), one
    uniform draw per edge.  Structure, kind and coordinates are kept.
    """
    rng = rng_stream(seed, index)
    w = rng.random(g.edge_count)
    edges = zip(g.edge_u.tolist(), g.edge_v.tolist(), w.tolist())
    return WeightedGraph.from_edges(g.node_count, edges, kind=g.kind,
                                    coords=g.coords, extent=g.extent,
                                    cover_count=g.cover_count,
                                    tsplib_rounding=g.tsplib_rounding)


def gen_tsp_points(n: int, mode: str, seed: int, *, index: int = 0,
                   extent: float = 1e6, clusters: int | None = None) -> PointSet:
    """Random 2-D points on a square grid of the given extent.

    mode "random": i.i.d. uniform on the square.
    mode "clustered": cluster count defaults to n/100 rounded half up
    (minimum 1).  Cluster centers are uniform; each point picks a
    center uniformly and adds Gaussian noise with standard deviation
    extent / (10 * sqrt(clusters)) per axis, clipped to the grid.
    Draw order is centers, then assignments, then noise.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if extent <= 0:
        raise ArgumentError("extent must be positive")
    rng = rng_stream(seed, index)
    if mode == "random":
        pts = rng.random((n, 2)) * extent
    elif mode == "clustered":
        ncl = clusters if clusters is not None else max(1, int(n / 100 + 0.5))
        if ncl < 1:
            raise ArgumentError("clusters must be >= 1")
        centers = rng.random((ncl, 2)) * extent
        assign = rng.integers(0, ncl, size=n)
        sigma = extent / (10.0 * math.sqrt(ncl))
        pts = centers[assign] + rng.normal(0.0, sigma, size=(n, 2))
        pts = np.clip(pts, 0.0, extent)
    else:
        raise ArgumentError(f"unknown point mode {mode!r}")
    return PointSet(pts, extent)


def knn_graph(ps: PointSet, k: int) -> WeightedGraph:
    """Symmetrized k-nearest-neighbor graph of a point set.

    Each node is joined to its k nearest points (ties broken by lower
    index); the union over both directions is kept, so every degree is
    at least k.  Edge weights are distances under the point set's rule.
    """
    n = ps.count
    if not 1 <= k < n:
        raise ArgumentError(f"need 1 <= k < n, got k={k}, n={n}")
    diff = ps.points[:, None, :] - ps.points[None, :, :]
    dmat = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dmat, np.inf)
    pairs = set()
    for i in range(n):
        order = np.argsort(dmat[i], kind="stable")[:k]
        for j in order:
            pairs.add((min(i, int(j)), max(i, int(j))))
    edges = [(u, v, ps.distance(u, v)) for u, v in sorted(pairs)]
    return WeightedGraph.from_edges(n, edges, kind="euclidean",
                                    coords=ps.points, extent=ps.grid_extent,
                                    tsplib_rounding=ps.tsplib_rounding)


def _raw_scp_matrix(cover_count: int, universe_count: int,
                    density: float, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli(density) incidence draws, one row per cover node."""
    return rng.random((cover_count, universe_count)) < density


def gen_scp(n: int, density: float, seed: int, *, index: int = 0) -> WeightedGraph:
    """Random set-cover incidence graph with unit edge weights.

    Nodes [0, round(0.2 n)) are cover nodes (candidate sets); the rest
    are universe elements.  Each (cover, universe) pair is joined with
    the given probability, then the graph is repaired so every universe
    node has degree >= 2 and every cover node degree >= 1.  Repair adds
    uniformly chosen missing cross edges, universe side first, scanning
    nodes in ascending order.
    """
    k = int(0.2 * n + 0.5)
    u_count = n - k
    if k < 1 or u_count < 1:
        raise ArgumentError(f"n={n} leaves an empty side (cover {k}, universe {u_count})")
    if not 0.0 < density <= 1.0:
        raise ArgumentError(f"density must lie in (0, 1], got {density}")
    rng = rng_stream(seed, index)
    mat = _raw_scp_matrix(k, u_count, density, rng).copy()
    for j in range(u_count):
        while mat[:, j].sum() < min(2, k):
            missing = np.nonzero(~mat[:, j])[0]
            mat[missing[int(rng.integers(len(missing)))], j] = True
    for i in range(k):
        if not mat[i].any():
            mat[i, int(rng.integers(u_count))] = True
    edges = [(i, k + j, 1.0) for i, j in zip(*np.nonzero(mat))]
    return WeightedGraph.from_edges(n, edges, kind="bipartite_scp", cover_count=k)


# ---------------------------------------------------------------------------
# file formats


def parse_tsplib(path: str) -> PointSet:
    """Read a TSPLIB .tsp file with EUC_2D coordinates.

    Distances on the returned point set follow the TSPLIB convention
    (Euclidean rounded to nearest integer), so published optimal tour
    lengths are reproduced exactly.  Coordinates are shifted to be
    nonnegative if needed; the grid extent is the largest coordinate.
    Anything but a EUC_2D coordinate list is rejected.
    """
    dimension = None
    weight_type = None
    coords = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    in_coords = False
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if in_coords:
            if line == "EOF":
                break
            parts = line.split()
            if len(parts) != 3:
                raise ParseError("expected '<id> <x> <y>'", path, i)
            try:
                idx = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError("malformed coordinate line", path, i)
            if idx in coords:
                raise ParseError(f"duplicate node id {idx}", path, i)
            coords[idx] = (x, y)
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key == "DIMENSION":
            dimension = int(value)
        elif key == "EDGE_WEIGHT_TYPE":
            weight_type = value
        elif key == "NODE_COORD_SECTION":
            in_coords = True
        elif key == "EOF":
            break
    if weight_type != "EUC_2D":
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {weight_type!r} (need EUC_2D)",
                         path, i)
    if dimension is None:
        raise ParseError("missing DIMENSION", path, i)
    if len(coords) != dimension or sorted(coords) != list(range(1, dimension + 1)):
        raise ParseError(f"expected node ids 1..{dimension}, got {len(coords)} ids",
                         path, i)
    pts = np.array([coords[j] for j in range(1, dimension + 1)], dtype=np.float64)
    pts -= np.minimum(pts.min(axis=0), 0.0)
    extent = max(float(pts.max()), 1.0)
    return PointSet(pts, extent, tsplib_rounding=True)


def save_graph(g: WeightedGraph, path: str) -> None:
    """Write a graph in the package's plain-text instance format."""
    lines = [f"{FORMAT_MAGIC} {FORMAT_VERSION}",
             f"kind {g.kind}",
             f"nodes {g.node_count}",
             f"edges {g.edge_count}"]
    if g.kind == "bipartite_scp":
        lines.append(f"cover {g.cover_count}")
    if g.kind == "euclidean":
        lines.append(f"extent {g.extent!r}")
        lines.append(f"rounding {int(g.tsplib_rounding)}")
    for u, v, w in zip(g.edge_u.tolist(), g.edge_v.tolist(), g.edge_w.tolist()):
        lines.append(f"{u} {v} {w!r}")
    if g.kind == "euclidean":
        for x, y in g.coords.tolist():
            lines.append(f"{x!r} {y!r}")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_graph(path: str) -> WeightedGraph:
    """Read a graph written by save_graph.  Inverse of save_graph."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    def fail(msg, lineno):
        raise ParseError(msg, path, lineno)

    if not lines or lines[0].split() != [FORMAT_MAGIC, str(FORMAT_VERSION)]:
        fail(f"expected header '{FORMAT_MAGIC} {FORMAT_VERSION}'", 1)
    header = {}
    ln = 1
    for ln in range(2, len(lines) + 1):
        parts = lines[ln - 1].split()
        if not parts:
            fail("unexpected blank line in header", ln)
        if parts[0] not in ("kind", "nodes", "edges", "cover", "extent", "rounding"):
            break
        if len(parts) != 2:
            fail(f"malformed header line {parts[0]!r}", ln)
        header[parts[0]] = parts[1]
    for req in ("kind", "nodes", "edges"):
        if req not in header:
            fail(f"missing header field {req!r}", ln)
    try:
        kind = header["kind"]
        n = int(header["nodes"])
        m = int(header["edges"])
    except ValueError:
        fail("non-integer node or edge count", ln)
    body = lines[ln - 1:]
    want = m + (n if kind == "euclidean" else 0)
    if len(body) < want:
        fail(f"expected {want} data lines, found {len(body)}", len(lines))
    edges = []
    for off in range(m):
        parts = body[off].split()
        if len(parts) != 3:
            fail("expected '<u> <v> <weight>'", ln + off)
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            fail("malformed edge line", ln + off)
    coords = None
    extent = None
    rounding = False
    cover = None
    if kind == "euclidean":
        if "extent" not in header or "rounding" not in header:
            fail("euclidean graph missing extent/rounding", ln)
        extent = float(header["extent"])
        rounding = bool(int(header["rounding"]))
        coords = []
        for off in range(m, m + n):
            parts = body[off].split()
            if len(parts) != 2:
                fail("expected '<x> <y>'", ln + off)
            coords.append((float(parts[0]), float(parts[1])))
        coords = np.array(coords, dtype=np.float64)
    if kind == "bipartite_scp":
        if "cover" not in header:
            fail("bipartite_scp graph missing cover count", ln)
        cover = int(header["cover"])
    try:
        return WeightedGraph.from_edges(n, edges, kind=kind, coords=coords,
                                        extent=extent, cover_count=cover,
                                        tsplib_rounding=rounding)
    except ArgumentError as exc:
        raise ParseError(f"inconsistent graph data: {exc}", path, ln)
