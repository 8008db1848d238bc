"""Graph embedding value network: forward, Q readout, exact backward.

A parameter set Theta defines node embeddings through T synchronous
sweeps of

    mu_v <- relu(theta1 x_v + theta2 PHI(sum_{u~v} mu_u)
                 + theta3 sum_{u~v} relu(theta4 e_uv))

with mu^(0) = 0, where PHI is the identity or an optional extra
relu(theta8 .) layer, x_v are node features and e_uv edge features.
The value of picking node v in the current state is

    Q(v) = theta5 . [ relu(theta6 sum_u mu_u), relu(theta7 mu_v) ]

All neighborhood and pooling sums are computed in a label-independent
order: the addends of each sum are sorted componentwise before adding.
Floating-point addition is not associative, so this is what makes
embeddings of relabeled graphs bit-identical copies of each other
rather than merely close.

The backward pass is exact reverse-mode differentiation of the forward
recursion, with relu'(0) = 0.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ParseError
from .graphs import WeightedGraph, rng_stream
from .problems import EpisodeState, Problem

MODEL_MAGIC = b"GQMB"
MODEL_VERSION = 1

# node feature width, edge feature width per problem
FEATURE_DIMS = {
    Problem.MVC: (1, 1),
    Problem.MAXCUT: (1, 2),
    Problem.TSP: (5, 2),
    Problem.SCP: (1, 1),
}


def feature_dims(kind: Problem) -> tuple[int, int]:
    return FEATURE_DIMS[Problem(kind)]


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def sorted_sum(a: np.ndarray, axis: int) -> np.ndarray:
    """Sum along axis with addends sorted first.

    The result depends only on the multiset of addends per output
    component, not on their storage order, so any node relabeling that
    permutes the addends reproduces the sum bit for bit.
    """
    return np.sort(a, axis=axis).sum(axis=axis)


def row_transform(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """a @ w.T computed row by row: out[i] = a[i] @ w.T.

    Plain 2-D BLAS matmul is not bit-stable under row permutation of a
    (kernel tails differ by row position), which would leak node labels
    into the embeddings.  Shaping the product as a stack of (1, k)
    matmuls makes every row an independent call, so equal input rows
    give bit-equal output rows.
    """
    n = a.shape[0]
    return (a[:, None, :] @ w.T).reshape(n, w.shape[0])


@dataclass(eq=False)
class EmbedParams:
    """The trainable parameter set plus the sweep count T.

    Shapes: theta1 (p, d_node), theta2/theta3/theta6/theta7 (p, p),
    theta4 (p, d_edge), theta5 (2p,), optional theta8 (p, p).
    """

    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray
    theta4: np.ndarray
    theta5: np.ndarray
    theta6: np.ndarray
    theta7: np.ndarray
    theta8: np.ndarray | None
    T: int

    def __post_init__(self):
        p = self.theta2.shape[0]
        want = {"theta1": (p, self.theta1.shape[1]),
                "theta2": (p, p), "theta3": (p, p),
                "theta4": (p, self.theta4.shape[1]),
                "theta5": (2 * p,), "theta6": (p, p), "theta7": (p, p)}
        for name, shape in want.items():
            arr = getattr(self, name)
            a = np.ascontiguousarray(arr, dtype=np.float64)
            if a.shape != shape:
                raise ArgumentError(f"{name} must have shape {shape}, got {a.shape}")
            setattr(self, name, a)
        if self.theta8 is not None:
            a = np.ascontiguousarray(self.theta8, dtype=np.float64)
            if a.shape != (p, p):
                raise ArgumentError(f"theta8 must have shape {(p, p)}, got {a.shape}")
            self.theta8 = a
        if self.T < 0:
            raise ArgumentError(f"T must be >= 0, got {self.T}")

    @property
    def p(self) -> int:
        return self.theta2.shape[0]

    @property
    def d_node(self) -> int:
        return self.theta1.shape[1]

    @property
    def d_edge(self) -> int:
        return self.theta4.shape[1]

    def array_names(self) -> list:
        names = ["theta1", "theta2", "theta3", "theta4", "theta5", "theta6",
                 "theta7"]
        if self.theta8 is not None:
            names.append("theta8")
        return names

    def copy(self) -> "EmbedParams":
        kw = {name: getattr(self, name).copy() for name in self.array_names()}
        if self.theta8 is None:
            kw["theta8"] = None
        return EmbedParams(T=self.T, **kw)

    def zeros_like(self) -> "EmbedParams":
        kw = {name: np.zeros_like(getattr(self, name))
              for name in self.array_names()}
        if self.theta8 is None:
            kw["theta8"] = None
        return EmbedParams(T=self.T, **kw)

    def add_scaled(self, other: "EmbedParams", scale: float) -> None:
        """In-place self += scale * other, array by array."""
        for name in self.array_names():
            getattr(self, name).__iadd__(scale * getattr(other, name))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel()
                               for n in self.array_names()])

    def assign_vector(self, vec: np.ndarray) -> None:
        pos = 0
        for name in self.array_names():
            arr = getattr(self, name)
            nxt = pos + arr.size
            arr.flat[:] = vec[pos:nxt]
            pos = nxt
        if pos != vec.size:
            raise ArgumentError(f"vector has {vec.size} entries, expected {pos}")

    def all_finite(self) -> bool:
        return all(np.isfinite(getattr(self, n)).all() for n in self.array_names())


def init_params(p: int, d_node: int, d_edge: int, T: int, seed: int,
                extra_layer: bool = False) -> EmbedParams:
    """Draw every entry i.i.d. uniform on [-1/sqrt(p), 1/sqrt(p))."""
    if p < 1 or d_node < 1 or d_edge < 1:
        raise ArgumentError("p, d_node and d_edge must be >= 1")
    rng = rng_stream(seed)
    bound = 1.0 / np.sqrt(p)

    def draw(*shape):
        return rng.uniform(-bound, bound, size=shape)

    theta8 = draw(p, p) if extra_layer else None
    return EmbedParams(theta1=draw(p, d_node), theta2=draw(p, p),
                       theta3=draw(p, p), theta4=draw(p, d_edge),
                       theta5=draw(2 * p), theta6=draw(p, p),
                       theta7=draw(p, p), theta8=theta8, T=T)


def zero_params(p: int, d_node: int, d_edge: int, T: int,
                extra_layer: bool = False) -> EmbedParams:
    z = init_params(p, d_node, d_edge, T, 0, extra_layer)
    for name in z.array_names():
        getattr(z, name).fill(0.0)
    return z


# ---------------------------------------------------------------------------
# padded graph layout and state features


@dataclass(eq=False)
class GraphLayout:
    """Fixed-width neighbor table of a graph.

    Row v lists the neighbors of v (ascending), padded with the
    sentinel index n up to the maximum degree.  Gathers index an array
    extended with one zero row at position n, so pads contribute zero.
    """

    nbr_idx: np.ndarray    # (n, maxdeg) int64
    mask: np.ndarray       # (n, maxdeg) bool, True on real entries
    w_pad: np.ndarray      # (n, maxdeg) float64, 0 on pads


def graph_layout(g: WeightedGraph) -> GraphLayout:
    cached = g._layout_cache.get("layout")
    if cached is not None:
        return cached
    n = g.node_count
    maxdeg = max(1, max((len(a) for a in g.neighbors), default=0))
    nbr = np.full((n, maxdeg), n, dtype=np.int64)
    w = np.zeros((n, maxdeg), dtype=np.float64)
    for v in range(n):
        k = len(g.neighbors[v])
        nbr[v, :k] = g.neighbors[v]
        w[v, :k] = g.weights[v]
    lay = GraphLayout(nbr_idx=nbr, mask=nbr < n, w_pad=w)
    g._layout_cache["layout"] = lay
    return lay


@dataclass(eq=False)
class Features:
    """Per-node and per-incidence input features in padded layout."""

    layout: GraphLayout
    x: np.ndarray       # (n, d_node)
    edge: np.ndarray    # (n, maxdeg, d_edge), zero on pads


def node_features(state: EpisodeState) -> Features:
    """Assemble the feature arrays the embedding consumes.

    mvc/scp: x = [tag], edge = [weight].
    maxcut:  x = [tag], edge = [weight, tag of neighbor].
    tsp:     x = [px/extent, py/extent, tag, is_first, is_last] where
             first/last refer to the canonical partial-tour sequence,
             edge = [weight/extent, tag of neighbor].
    """
    g = state.graph
    lay = graph_layout(g)
    n = g.node_count
    tags = state.tags.astype(np.float64)
    kind = state.kind
    if kind in (Problem.MVC, Problem.SCP):
        x = tags[:, None].copy()
        edge = lay.w_pad[:, :, None].copy()
        return Features(lay, x, edge)
    tags_ext = np.concatenate([tags, [0.0]])
    nbr_tags = tags_ext[lay.nbr_idx] * lay.mask
    if kind is Problem.MAXCUT:
        x = tags[:, None].copy()
        edge = np.stack([lay.w_pad, nbr_tags], axis=2)
        return Features(lay, x, edge)
    ext = g.extent
    x = np.zeros((n, 5), dtype=np.float64)
    x[:, 0] = g.coords[:, 0] / ext
    x[:, 1] = g.coords[:, 1] / ext
    x[:, 2] = tags
    if state.tour:
        x[state.tour[0], 3] = 1.0
        x[state.tour[-1], 4] = 1.0
    edge = np.stack([lay.w_pad / ext, nbr_tags], axis=2)
    return Features(lay, x, edge)


# ---------------------------------------------------------------------------
# forward, Q readout, backward


@dataclass(eq=False)
class EmbedResult:
    """Final embeddings plus every intermediate needed by backward."""

    feats: Features
    params: EmbedParams
    mus: list          # T+1 arrays (n, p); mus[0] is all zero
    preacts: list      # T arrays (n, p), pre-relu sweep inputs
    s_raws: list       # T arrays (n, p), raw neighbor sums
    s8pres: list       # T arrays (n, p) when theta8 is set, else []
    zpre: np.ndarray   # (n, maxdeg, p) pre-relu edge terms
    edge_sum: np.ndarray  # (n, p)
    base: np.ndarray   # (n, p)
    mu: np.ndarray     # (n, p) final embeddings
    pooled: np.ndarray  # (p,) sum of final embeddings


def embed(feats: Features, params: EmbedParams) -> EmbedResult:
    """Run T embedding sweeps and retain intermediates for backward."""
    lay = feats.layout
    n = feats.x.shape[0]
    p = params.p
    if feats.x.shape[1] != params.d_node:
        raise ArgumentError(f"features have d_node={feats.x.shape[1]}, "
                            f"params expect {params.d_node}")
    if feats.edge.shape[2] != params.d_edge:
        raise ArgumentError(f"features have d_edge={feats.edge.shape[2]}, "
                            f"params expect {params.d_edge}")
    zpre = np.einsum("vuf,pf->vup", feats.edge, params.theta4)
    edge_sum = sorted_sum(relu(zpre), axis=1)
    base = row_transform(feats.x, params.theta1) + row_transform(edge_sum, params.theta3)
    mus = [np.zeros((n, p))]
    preacts, s_raws, s8pres = [], [], []
    ext = np.zeros((n + 1, p))
    for _ in range(params.T):
        ext[:n] = mus[-1]
        s_raw = sorted_sum(ext[lay.nbr_idx], axis=1)
        if params.theta8 is not None:
            s8 = row_transform(s_raw, params.theta8)
            spost = relu(s8)
            s8pres.append(s8)
        else:
            spost = s_raw
        pre = base + row_transform(spost, params.theta2)
        preacts.append(pre)
        s_raws.append(s_raw)
        mus.append(relu(pre))
    mu = mus[-1]
    pooled = sorted_sum(mu, axis=0)
    return EmbedResult(feats=feats, params=params, mus=mus, preacts=preacts,
                       s_raws=s_raws, s8pres=s8pres, zpre=zpre,
                       edge_sum=edge_sum, base=base, mu=mu, pooled=pooled)


def q_values(result: EmbedResult) -> np.ndarray:
    """Q of every node under the parameters the result was built with."""
    params = result.params
    p = params.p
    a = params.theta6 @ result.pooled
    node_pre = row_transform(result.mu, params.theta7)
    graph_term = float(relu(a) @ params.theta5[:p])
    return graph_term + np.einsum("np,p->n", relu(node_pre), params.theta5[p:])


def backward(result: EmbedResult, node: int, upstream: float) -> EmbedParams:
    """Gradient of upstream * Q(node) with respect to every parameter.

    relu'(0) = 0 throughout.  Returns gradients in an EmbedParams
    container of matching shapes.
    """
    params = result.params
    feats = result.feats
    lay = feats.layout
    p = params.p
    n = result.mu.shape[0]
    if not 0 <= node < n:
        raise ArgumentError(f"node {node} out of range")
    grads = params.zeros_like()

    a = params.theta6 @ result.pooled
    ga = relu(a)
    node_pre = params.theta7 @ result.mu[node]
    gb = relu(node_pre)
    grads.theta5[:p] = upstream * ga
    grads.theta5[p:] = upstream * gb
    da = upstream * params.theta5[:p] * (a > 0)
    grads.theta6[:] = np.outer(da, result.pooled)
    d_pooled = params.theta6.T @ da
    db = upstream * params.theta5[p:] * (node_pre > 0)
    grads.theta7[:] = np.outer(db, result.mu[node])
    dmu = np.broadcast_to(d_pooled, (n, p)).copy()
    dmu[node] += params.theta7.T @ db

    dbase = np.zeros((n, p))
    ext = np.zeros((n + 1, p))
    for t in range(params.T - 1, -1, -1):
        dpre = dmu * (result.preacts[t] > 0)
        dbase += dpre
        if params.theta8 is not None:
            spost = relu(result.s8pres[t])
            grads.theta2 += dpre.T @ spost
            ds8 = (dpre @ params.theta2) * (result.s8pres[t] > 0)
            grads.theta8 += ds8.T @ result.s_raws[t]
            ds = ds8 @ params.theta8
        else:
            grads.theta2 += dpre.T @ result.s_raws[t]
            ds = dpre @ params.theta2
        ext[:n] = ds
        dmu = ext[lay.nbr_idx].sum(axis=1)

    grads.theta1[:] = dbase.T @ feats.x
    grads.theta3[:] = dbase.T @ result.edge_sum
    dz = (dbase @ params.theta3)[:, None, :] * (result.zpre > 0)
    grads.theta4[:] = np.einsum("vup,vuf->pf", dz, feats.edge)
    return grads


def min_kink_distance(result: EmbedResult) -> float:
    """Smallest |pre-activation| over all relu inputs, zeros excluded.

    Entries that are exactly zero are structural (padding, or sums over
    the all-zero initial embedding); relu'(0) = 0 handles them
    consistently, so only nonzero near-kink entries matter when judging
    whether a finite-difference probe is trustworthy.
    """
    params = result.params
    pres = [result.zpre] + result.preacts + result.s8pres
    a = params.theta6 @ result.pooled
    node_pre = result.mu @ params.theta7.T
    pres += [a, node_pre]
    dist = np.inf
    for arr in pres:
        vals = np.abs(arr[arr != 0.0])
        if vals.size:
            dist = min(dist, float(vals.min()))
    return dist


# ---------------------------------------------------------------------------
# model files


def save_model(params: EmbedParams, path: str, meta: dict | None = None) -> None:
    """Write parameters in the package's binary model format.

    Layout: magic, version, dims header, then the arrays as little-
    endian float64 in fixed order.  A JSON sidecar at path + '.json'
    carries caller metadata (problem, config hash, and the like).
    """
    extra = 1 if params.theta8 is not None else 0
    head = struct.pack("<4sIIIIII", MODEL_MAGIC, MODEL_VERSION, params.p,
                       params.T, params.d_node, params.d_edge, extra)
    blobs = [head]
    for name in params.array_names():
        arr = np.ascontiguousarray(getattr(params, name), dtype="<f8")
        blobs.append(arr.tobytes())
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(blobs))
    os.replace(tmp, path)
    side = dict(meta or {})
    side["format"] = {"magic": MODEL_MAGIC.decode(), "version": MODEL_VERSION,
                      "p": params.p, "T": params.T, "d_node": params.d_node,
                      "d_edge": params.d_edge, "extra_layer": bool(extra)}
    tmp = path + ".json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path + ".json")


def load_model(path: str) -> tuple[EmbedParams, dict]:
    """Read a model file written by save_model.  Returns (params, meta)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sIIIIII")
    if len(blob) < head_size:
        raise ParseError("model file too short for header", path, 0)
    magic, version, p, T, d_node, d_edge, extra = struct.unpack(
        "<4sIIIIII", blob[:head_size])
    if magic != MODEL_MAGIC:
        raise ParseError(f"bad magic {magic!r}", path, 0)
    if version != MODEL_VERSION:
        raise ParseError(f"unsupported model version {version}", path, 0)
    shapes = [("theta1", (p, d_node)), ("theta2", (p, p)), ("theta3", (p, p)),
              ("theta4", (p, d_edge)), ("theta5", (2 * p,)),
              ("theta6", (p, p)), ("theta7", (p, p))]
    if extra:
        shapes.append(("theta8", (p, p)))
    want = head_size + sum(int(np.prod(s)) * 8 for _, s in shapes)
    if len(blob) != want:
        raise ParseError(f"model file has {len(blob)} bytes, expected {want}",
                         path, 0)
    kw = {"theta8": None}
    pos = head_size
    for name, shape in shapes:
        cnt = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=cnt, offset=pos)
        kw[name] = arr.reshape(shape).astype(np.float64)
        pos += cnt * 8
    params = EmbedParams(T=T, **kw)
    meta = {}
    side = path + ".json"
    if os.path.exists(side):
        with open(side, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    return params, meta
