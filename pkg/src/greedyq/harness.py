"""Experiment drivers: instance streams, training runs, result tables.

Everything here is deterministic in the experiment seed.  Instances come
from per-purpose streams (train / validation / test) that never overlap,
so a model is always scored on graphs it has not seen.  All emitted CSV
files start with a metadata comment carrying the tool version, a hash of
the effective configuration, and the seed; data rows are reproducible
byte for byte.  Wall-clock timings go to a separate file because they
are the one thing that legitimately varies between runs.
"""

import configparser
import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import baselines, exact, graphs, learning, problems
from .embedding import feature_dims, load_model, save_model
from .errors import (ArgumentError, GreedyQError, InfeasibleError,
                     ParseError, SizeLimitError)
from .graphs import WeightedGraph, rng_stream
from .learning import TrainConfig
from .problems import Problem

__version__ = "0.1.0"

STREAM_TRAIN = 0
STREAM_VAL = 1
STREAM_TEST = 2
_STREAM_NAMES = {"train": STREAM_TRAIN, "val": STREAM_VAL, "test": STREAM_TEST}

FAMILIES = ("er", "ba", "er+ba", "tsp-random", "tsp-clustered", "scp")
_FAMILY_PROBLEMS = {
    "er": (Problem.MVC, Problem.MAXCUT),
    "ba": (Problem.MVC, Problem.MAXCUT),
    "er+ba": (Problem.MVC, Problem.MAXCUT),
    "tsp-random": (Problem.TSP,),
    "tsp-clustered": (Problem.TSP,),
    "scp": (Problem.SCP,),
}

# classic instances with proven optimal tour lengths, keyed by file stem
TSPLIB_BEST_KNOWN = {
    "berlin52": 7542.0,
    "eil51": 426.0,
    "st70": 675.0,
    "eil76": 538.0,
    "pr76": 108159.0,
    "kroA100": 21282.0,
    "rd100": 7910.0,
    "eil101": 629.0,
    "lin105": 14379.0,
}


@dataclass
class ExperimentConfig:
    """Effective settings of one experiment, INI-loadable and hashable."""

    problem: Problem = Problem.MVC
    family: str = "er+ba"
    seed: int = 0
    # instance streams
    train_sizes: tuple = (15, 20)
    test_sizes: tuple = (15, 20)
    er_p: float = 0.15
    ba_m: int = 4
    scp_density: float = 0.1
    tsp_extent: float = 1e6
    knn_k: int = 10
    val_count: int = 100
    test_count: int = 100
    # value network
    embed_p: int = 64
    embed_T: int | None = None
    extra_layer: bool = False
    # training loop
    episodes: int = 500
    n_step: int | None = None
    batch_size: int | None = None
    capacity: int = 10000
    gamma: float | None = None
    lr0: float = 1e-5
    lr_decay_factor: float = 0.95
    lr_decay_steps: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_anneal_steps: int | None = None
    reward_norm: float | None = None
    target_sync_interval: int = 500
    momentum: float = 0.0
    burnin_episodes: int = 0
    burnin_lr0: float = 1e-8
    validate_every: int = 100
    checkpoint_every: int = 0
    # evaluation
    methods: tuple = ()

    def __post_init__(self):
        self.problem = Problem(self.problem)
        if self.family not in FAMILIES:
            raise ArgumentError(f"unknown family {self.family!r}")
        if self.problem not in _FAMILY_PROBLEMS[self.family]:
            raise ArgumentError(
                f"family {self.family!r} cannot host problem "
                f"{self.problem.value!r}")
        for name in ("train_sizes", "test_sizes"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ArgumentError(f"bad size range {name}={lo}-{hi}")
        preset = learning.default_config(self.problem, episodes=1)
        if self.embed_T is None:
            self.embed_T = preset.embed_T
        if self.n_step is None:
            self.n_step = preset.n_step
        if self.batch_size is None:
            self.batch_size = preset.batch_size
        if self.gamma is None:
            self.gamma = preset.gamma
        if self.reward_norm is None:
            # intermediate rewards are normalized by the largest training
            # node count; TSP rewards are lengths, hence the grid factor
            norm = float(self.train_sizes[1])
            if self.problem is Problem.TSP:
                norm *= self.tsp_extent
            self.reward_norm = norm
        if not self.methods:
            self.methods = default_methods(self.problem)
        self.methods = tuple(self.methods)

    def train_config(self) -> TrainConfig:
        preset = learning.default_config(self.problem, episodes=1)
        cfg = TrainConfig(
            episodes=self.episodes, n_step=self.n_step,
            batch_size=self.batch_size, capacity=self.capacity,
            gamma=self.gamma, lr0=self.lr0,
            lr_decay_factor=self.lr_decay_factor,
            lr_decay_steps=self.lr_decay_steps, eps_start=self.eps_start,
            eps_end=self.eps_end, eps_anneal_steps=self.eps_anneal_steps,
            reward_sign=preset.reward_sign, reward_norm=self.reward_norm,
            target_sync_interval=self.target_sync_interval,
            momentum=self.momentum, embed_p=self.embed_p,
            embed_T=self.embed_T, extra_layer=self.extra_layer,
            seed=self.seed)
        cfg.validate()
        return cfg

    def canonical(self) -> str:
        """Stable text form of every effective setting, for hashing."""
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = "auto"
            elif isinstance(v, Problem):
                v = v.value
            elif f.name in _SIZE_KEYS:
                v = f"{v[0]}-{v[1]}"
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(sorted(lines)) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


_INT_KEYS = {"seed", "ba_m", "knn_k", "val_count", "test_count", "embed_p",
             "embed_T", "episodes", "n_step", "batch_size", "capacity",
             "lr_decay_steps", "eps_anneal_steps", "target_sync_interval",
             "burnin_episodes", "validate_every", "checkpoint_every"}
_FLOAT_KEYS = {"er_p", "scp_density", "tsp_extent", "gamma", "lr0",
               "lr_decay_factor", "eps_start", "eps_end", "reward_norm",
               "momentum", "burnin_lr0"}
_BOOL_KEYS = {"extra_layer"}
_SIZE_KEYS = {"train_sizes", "test_sizes"}


def _parse_sizes(text: str) -> tuple:
    parts = text.split("-")
    try:
        if len(parts) == 1:
            lo = hi = int(parts[0])
        elif len(parts) == 2:
            lo, hi = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise ArgumentError(f"size range must look like 15-20, got {text!r}")
    return (lo, hi)


def parse_config(path: str, **overrides) -> ExperimentConfig:
    """Load a key = value config file with sections per module.

    Unknown keys are rejected so typos cannot silently fall back to
    defaults.  Keyword overrides win over file values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str    # keep key case: embed_T is not embed_t
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=path)
    except configparser.Error as exc:
        raise ParseError(str(exc), path=path)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kw: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in known:
                raise ParseError(f"unknown config key {key!r}",
                                 path=path)
            kw[key] = _convert_key(key, raw.strip())
    kw.update(overrides)
    return ExperimentConfig(**kw)


def _convert_key(key: str, raw: str):
    try:
        if key in _SIZE_KEYS:
            return _parse_sizes(raw)
        if key in _INT_KEYS:
            return None if raw in ("", "auto") else int(raw)
        if key in _FLOAT_KEYS:
            return None if raw in ("", "auto") else float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key == "methods":
            return tuple(m.strip() for m in raw.split(",") if m.strip())
    except ValueError:
        raise ArgumentError(f"bad value for config key {key}: {raw!r}")
    return raw


def write_config(cfg: ExperimentConfig, path: str) -> None:
    """Write the effective settings back out as a sectioned config file."""
    sections = {
        "experiment": ("problem", "family", "seed"),
        "instances": ("train_sizes", "test_sizes", "er_p", "ba_m",
                      "scp_density", "tsp_extent", "knn_k", "val_count",
                      "test_count"),
        "model": ("embed_p", "embed_T", "extra_layer"),
        "training": ("episodes", "n_step", "batch_size", "capacity",
                     "gamma", "lr0", "lr_decay_factor", "lr_decay_steps",
                     "eps_start", "eps_end", "eps_anneal_steps",
                     "reward_norm", "target_sync_interval", "momentum",
                     "burnin_episodes", "burnin_lr0", "validate_every",
                     "checkpoint_every"),
        "eval": ("methods",),
    }
    lines = []
    for section, keys in sections.items():
        lines.append(f"[{section}]")
        for key in keys:
            v = getattr(cfg, key)
            if isinstance(v, Problem):
                v = v.value
            elif key in _SIZE_KEYS:
                v = f"{v[0]}-{v[1]}"
            elif isinstance(v, tuple):
                v = ", ".join(v)
            elif v is None:
                v = "auto"
            lines.append(f"{key} = {v}")
        lines.append("")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# instance streams

def _gen_index(stream: int, index: int, salt: int = 0) -> int:
    # distinct rng substream per (stream, salt, instance); instance
    # indices stay below 2^24
    if not 0 <= index < (1 << 24):
        raise ArgumentError(f"instance index out of range: {index}")
    return ((stream * 8 + salt) << 24) + index


def instance_size(cfg: ExperimentConfig, stream: int, index: int,
                  sizes: tuple | None = None) -> int:
    """Node count for one instance, drawn uniformly from the range."""
    if sizes is None:
        sizes = cfg.train_sizes if stream != STREAM_TEST else cfg.test_sizes
    lo, hi = sizes
    rng = rng_stream(cfg.seed, _gen_index(stream, index, salt=2))
    return int(rng.integers(lo, hi + 1))


def make_instance(cfg: ExperimentConfig, stream: int, index: int,
                  sizes: tuple | None = None) -> WeightedGraph:
    """Deterministic instance number `index` of the given stream."""
    n = instance_size(cfg, stream, index, sizes)
    family = cfg.family
    if family == "er+ba":
        family = "er" if index % 2 == 0 else "ba"
    if family == "er":
        g = _gen_with_edges(
            lambda salt: graphs.gen_erdos_renyi(
                n, cfg.er_p, cfg.seed, index=_gen_index(stream, index, salt)))
    elif family == "ba":
        g = graphs.gen_barabasi_albert(n, min(cfg.ba_m, n - 1), cfg.seed,
                                       index=_gen_index(stream, index))
    elif family in ("tsp-random", "tsp-clustered"):
        mode = "random" if family == "tsp-random" else "clustered"
        ps = graphs.gen_tsp_points(n, mode, cfg.seed,
                                   index=_gen_index(stream, index),
                                   extent=cfg.tsp_extent)
        return graphs.knn_graph(ps, min(cfg.knn_k, n - 1))
    elif family == "scp":
        return graphs.gen_scp(n, cfg.scp_density, cfg.seed,
                              index=_gen_index(stream, index))
    else:
        raise ArgumentError(f"unknown family {cfg.family!r}")
    if cfg.problem is Problem.MAXCUT:
        g = graphs.gen_maxcut_weights(g, cfg.seed,
                                      index=_gen_index(stream, index, salt=1))
    return g


def _gen_with_edges(gen, attempts: int = 4) -> WeightedGraph:
    # empty graphs carry no decision problem; redraw on a shifted salt
    for salt in range(attempts):
        g = gen(salt * 4)
        if g.edge_count > 0:
            return g
    raise InfeasibleError("could not draw an instance with any edge")


def training_sampler(cfg: ExperimentConfig):
    return lambda episode: make_instance(cfg, STREAM_TRAIN, episode)


def exact_reference(problem: Problem, g: WeightedGraph):
    """Exact optimum for the instance, or None when too large."""
    try:
        if problem is Problem.MVC:
            return exact.mvc_exact(g)
        if problem is Problem.MAXCUT:
            return exact.maxcut_exact(g)
        if problem is Problem.TSP:
            return exact.tsp_exact(g.point_set())
        return exact.scp_exact(g)
    except SizeLimitError:
        return None


# ---------------------------------------------------------------------------
# solution methods

def default_methods(problem: Problem) -> tuple:
    if problem is Problem.MVC:
        return ("model", "mvc-approx", "mvc-approx-greedy", "exact")
    if problem is Problem.MAXCUT:
        return ("model", "maxcut-approx", "exact")
    if problem is Problem.TSP:
        return ("model", "nearest-neighbor", "two-opt", "nearest-insertion",
                "farthest-insertion", "cheapest-insertion",
                "closest-insertion", "mst", "exact")
    return ("model", "scp-greedy", "exact")


def run_method(cfg: ExperimentConfig, name: str, g: WeightedGraph,
               params=None, method_seed: int = 0):
    """Solve one instance with one named method.

    Returns (value, solution) with value on the problem's natural scale
    (cover size, cut weight, tour length, set count).  The solution is
    checked for feasibility before being reported.
    """
    kind = cfg.problem
    if name == "model":
        if params is None:
            raise ArgumentError("method 'model' needs trained parameters")
        state = learning.greedy_rollout(g, kind, params)
        value = problems.solution_value(state)
        sol = state.solution
    elif name == "exact":
        res = exact_reference(kind, g)
        if res is None:
            raise SizeLimitError(
                f"instance too large for the exact {kind.value} solver")
        value, sol = res.value, res.certificate
    elif kind is Problem.MVC and name == "mvc-approx":
        sol = baselines.mvc_approx(g, seed=method_seed)
        value = float(len(sol))
    elif kind is Problem.MVC and name == "mvc-approx-greedy":
        sol = baselines.mvc_approx_greedy(g)
        value = float(len(sol))
    elif kind is Problem.MAXCUT and name == "maxcut-approx":
        side = baselines.maxcut_approx(g)
        value = problems.cut_value(g, side)
        sol = tuple(int(v) for v in np.nonzero(side)[0])
    elif kind is Problem.TSP and name in _TSP_METHODS:
        ps = g.point_set()
        sol = _TSP_METHODS[name](ps)
        value = problems.tour_length(ps, sol)
    elif kind is Problem.SCP and name == "scp-greedy":
        sol = baselines.scp_greedy(g)
        value = float(len(sol))
    else:
        raise ArgumentError(
            f"method {name!r} not available for {kind.value}")
    _check_feasible(cfg, g, name, sol)
    return float(value), sol


_TSP_METHODS = {
    "nearest-neighbor": baselines.tsp_nearest_neighbor,
    "two-opt": lambda ps: baselines.tsp_two_opt(
        baselines.tsp_nearest_neighbor(ps), ps),
    "nearest-insertion": lambda ps: baselines.tsp_insertion(ps, "nearest"),
    "farthest-insertion": lambda ps: baselines.tsp_insertion(ps, "farthest"),
    "cheapest-insertion": lambda ps: baselines.tsp_insertion(ps, "cheapest"),
    "closest-insertion": lambda ps: baselines.tsp_insertion(ps, "closest"),
    "mst": baselines.tsp_mst,
}


def _check_feasible(cfg: ExperimentConfig, g: WeightedGraph, name: str,
                    sol) -> None:
    kind = cfg.problem
    if kind is Problem.MVC:
        ok = problems.is_vertex_cover(g, sol)
    elif kind is Problem.MAXCUT:
        ok = all(0 <= v < g.node_count for v in sol)
    elif kind is Problem.TSP:
        ok = sorted(sol) == list(range(g.node_count))
    else:
        ok = problems.is_set_cover(g, sol)
    if not ok:
        raise GreedyQError(
            f"method {name!r} produced an infeasible {kind.value} solution")


def _method_params(cfg: ExperimentConfig, methods, model_path):
    if "model" not in methods:
        return None
    if model_path is None:
        raise ArgumentError("requested method 'model' without a model file")
    params, meta = load_model(model_path)
    want = feature_dims(cfg.problem)
    if (params.d_node, params.d_edge) != want:
        raise ArgumentError(
            f"model at {model_path} expects features "
            f"({params.d_node}, {params.d_edge}); {cfg.problem.value} "
            f"needs {want}")
    return params


# ---------------------------------------------------------------------------
# CSV plumbing

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if v != int(v) else str(int(v))
    return str(v)


def write_csv(path: str, cfg: ExperimentConfig, header, rows) -> None:
    """Write rows under a header plus a reproducibility comment line."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# greedyq {__version__} config={cfg.config_hash()[:12]} "
                 f"seed={cfg.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# commands

def cmd_generate(cfg: ExperimentConfig, out_dir: str, stream: str = "test",
                 count: int | None = None) -> dict:
    """Write a deterministic instance set plus its manifest.

    The manifest embeds the full effective configuration, so the set can
    be regenerated bit for bit from the manifest alone.
    """
    if stream not in _STREAM_NAMES:
        raise ArgumentError(f"stream must be one of {sorted(_STREAM_NAMES)}")
    sid = _STREAM_NAMES[stream]
    if count is None:
        count = cfg.test_count if sid == STREAM_TEST else cfg.val_count
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(count):
        g = make_instance(cfg, sid, i)
        fname = f"instance_{i:04d}.graph"
        graphs.save_graph(g, os.path.join(out_dir, fname))
        entries.append({"index": i, "n": g.node_count, "file": fname})
    manifest = {
        "format": "greedyq-instances",
        "version": 1,
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "problem": cfg.problem.value,
        "family": cfg.family,
        "seed": cfg.seed,
        "stream": stream,
        "count": count,
        "config": cfg.canonical(),
        "instances": entries,
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))
    return manifest


def regenerate(manifest_path: str, out_dir: str | None = None) -> dict:
    """Rebuild an instance set from its manifest, bit for bit."""
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}",
                         path=manifest_path)
    if manifest.get("format") != "greedyq-instances":
        raise ParseError("not an instance manifest", path=manifest_path)
    kw: dict = {}
    for line in manifest["config"].splitlines():
        key, _, raw = line.partition(" = ")
        kw[key] = _convert_key(key, raw)
    cfg = ExperimentConfig(**kw)
    if cfg.config_hash() != manifest["config_hash"]:
        raise ParseError("manifest config hash mismatch",
                         path=manifest_path)
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(manifest_path))
    return cmd_generate(cfg, out_dir, stream=manifest["stream"],
                        count=manifest["count"])


def load_instances(cfg: ExperimentConfig, stream: int,
                   count: int) -> list:
    return [make_instance(cfg, stream, i) for i in range(count)]


def _validation_pack(cfg: ExperimentConfig):
    """Held-out graphs with reference values for model selection.

    References are exact optima at desk sizes; beyond the exact solvers'
    limits the strongest classical heuristic stands in (documented in
    the returned kind).
    """
    insts = load_instances(cfg, STREAM_VAL, cfg.val_count)
    refs, kinds = [], []
    fallback = {
        Problem.MVC: "mvc-approx-greedy",
        Problem.MAXCUT: "maxcut-approx",
        Problem.TSP: "two-opt",
        Problem.SCP: "scp-greedy",
    }[cfg.problem]
    for i, g in enumerate(insts):
        res = exact_reference(cfg.problem, g)
        if res is not None:
            refs.append(res.value)
            kinds.append("exact")
        else:
            value, _ = run_method(cfg, fallback, g, method_seed=i)
            refs.append(value)
            kinds.append(fallback)
    return insts, refs, kinds


def validation_ratio(cfg: ExperimentConfig, params, insts, refs) -> float:
    total = 0.0
    for g, ref in zip(insts, refs):
        state = learning.greedy_rollout(g, cfg.problem, params)
        total += exact.approx_ratio(problems.solution_value(state), ref)
    return total / len(insts)


def cmd_train(cfg: ExperimentConfig, model_out: str,
              log_out: str | None = None, init_model: str | None = None):
    """Train a model, keeping the checkpoint with the best validation ratio.

    An optional burn-in ladder runs the same loop for a few episodes at
    tiny learning rates first; with the uniform parameter init, dense
    graphs start with activations far above the reward scale, and a
    direct start at the working rate diverges.  The ladder climbs one
    decade at a time from burnin_lr0 toward lr0, letting the output
    scale collapse before real learning begins.  Exploration stays
    fully random during the ladder.  A warm-start model skips it.
    """
    tcfg = cfg.train_config()
    params = None
    offset = 0
    if init_model is not None:
        params, _ = load_model(init_model)
    elif cfg.burnin_episodes > 0:
        ratio = tcfg.lr0 / cfg.burnin_lr0
        decades = max(1, int(math.floor(math.log10(ratio) + 1e-9))) \
            if ratio > 1.0 else 1
        base, rem = divmod(cfg.burnin_episodes, decades)
        for j in range(decades):
            count = base + (rem if j == 0 else 0)
            if count == 0:
                continue
            burn = dataclasses.replace(
                tcfg, episodes=count, lr0=cfg.burnin_lr0 * 10.0 ** j,
                eps_anneal_steps=10 ** 9)
            start = offset

            def burn_sampler(episode, start=start):
                return make_instance(cfg, STREAM_TRAIN, episode + start)

            result = learning.train(burn_sampler, cfg.problem, burn,
                                    params=params)
            params = result.params
            offset += count
    insts, refs, kinds = _validation_pack(cfg)

    def val_fn(p, episode):
        return validation_ratio(cfg, p, insts, refs)

    def maybe_checkpoint(episode, state, p):
        if cfg.checkpoint_every > 0 and (episode + 1) % cfg.checkpoint_every == 0:
            path = f"{model_out}.ep{episode + 1:05d}"
            save_model(p, path, _model_meta(cfg, note=f"episode {episode + 1}"))

    def sampler(episode):
        # the burn-in consumed the first indices; keep instances fresh
        return make_instance(cfg, STREAM_TRAIN, episode + offset)

    result = learning.train(
        sampler, cfg.problem, tcfg, params=params,
        validate_fn=val_fn, validate_every=cfg.validate_every,
        on_episode_end=maybe_checkpoint)
    best = result.best_params
    meta = _model_meta(cfg)
    if result.best_val is not None:
        meta["validation_ratio"] = result.best_val
        meta["validation_reference"] = sorted(set(kinds))
    save_model(best, model_out, meta)
    if log_out is not None:
        rows = [(r.episode, r.step, _fmt(r.epsilon), _fmt(r.lr),
                 _fmt(r.loss), "" if r.val is None else _fmt(r.val))
                for r in result.log]
        write_csv(log_out, cfg,
                  ("episode", "step", "epsilon", "lr", "loss",
                   "validation_ratio"), rows)
    return result


def _model_meta(cfg: ExperimentConfig, **extra) -> dict:
    meta = {"problem": cfg.problem.value, "family": cfg.family,
            "seed": cfg.seed, "config_hash": cfg.config_hash(),
            "tool": f"greedyq {__version__}"}
    meta.update(extra)
    return meta


def _references(problem: Problem, values_by_method: dict, exact_value):
    """Reference value and its kind for one instance's method values."""
    if exact_value is not None:
        return exact_value, "exact"
    vals = list(values_by_method.values())
    if not vals:
        return None, "none"
    best = max(vals) if problem is Problem.MAXCUT else min(vals)
    return best, "best-known"


def cmd_eval(cfg: ExperimentConfig, results_out: str,
             model_path: str | None = None,
             timings_out: str | None = None,
             methods: tuple | None = None,
             count: int | None = None) -> list:
    """Score methods on the test stream; write ratio and timing tables.

    results.csv rows are (instance, n, method, value, ratio, reference)
    followed by one aggregate mean-ratio row per method.  Timings go to
    their own file so the results table stays byte-reproducible.
    """
    methods = tuple(sorted(methods if methods else cfg.methods))
    params = _method_params(cfg, methods, model_path)
    if count is None:
        count = cfg.test_count
    rows, timing_rows = [], []
    sums = {m: [0.0, 0] for m in methods}
    for i in range(count):
        g = make_instance(cfg, STREAM_TEST, i)
        values, seconds = {}, {}
        for m in methods:
            t0 = time.perf_counter()
            try:
                value, _sol = run_method(cfg, m, g, params=params,
                                         method_seed=cfg.seed * 100003 + i)
            except SizeLimitError:
                continue
            seconds[m] = time.perf_counter() - t0
            values[m] = value
        ref, kind = _references(
            cfg.problem, {m: v for m, v in values.items() if m != "exact"},
            values.get("exact"))
        if ref is None:
            continue
        for m in methods:
            if m not in values:
                continue
            ratio = exact.approx_ratio(values[m], ref)
            rows.append((i, g.node_count, m, values[m],
                         _fmt(float(ratio)), kind))
            timing_rows.append((i, g.node_count, m, seconds[m]))
            sums[m][0] += ratio
            sums[m][1] += 1
    for m in methods:
        if sums[m][1]:
            rows.append(("mean", "", m, "",
                         _fmt(sums[m][0] / sums[m][1]), ""))
    write_csv(results_out, cfg,
              ("instance", "n", "method", "value", "ratio", "reference"),
              rows)
    if timings_out is not None:
        write_csv(timings_out, cfg,
                  ("instance", "n", "method", "seconds"),
                  [(i, n, m, repr(s)) for i, n, m, s in timing_rows])
    return rows


def cmd_generalize(cfg: ExperimentConfig, model_path: str, ranges,
                   out_csv: str, count: int | None = None) -> list:
    """Evaluate one model across several test size ranges.

    Emits one row per range with the model's mean ratio; the reference
    is exact where every instance fits the oracle, otherwise the best
    value across all methods run (reported in the reference column).
    """
    params = _method_params(cfg, ("model",), model_path)
    methods = tuple(sorted(m for m in cfg.methods if m != "exact"))
    if count is None:
        count = cfg.test_count
    train_tag = f"{cfg.train_sizes[0]}-{cfg.train_sizes[1]}"
    rows = []
    for ri, sizes in enumerate(ranges):
        total, exact_hits = 0.0, 0
        for i in range(count):
            idx = ri * count + i
            g = make_instance(cfg, STREAM_TEST, idx, sizes=sizes)
            values = {}
            for m in methods:
                value, _sol = run_method(cfg, m, g, params=params,
                                         method_seed=cfg.seed * 100003 + idx)
                values[m] = value
            res = exact_reference(cfg.problem, g)
            ref, kind = _references(cfg.problem, values,
                                    None if res is None else res.value)
            exact_hits += kind == "exact"
            total += exact.approx_ratio(values["model"], ref)
        ref_kind = "exact" if exact_hits == count else "best-known"
        rows.append((train_tag, f"{sizes[0]}-{sizes[1]}", count,
                     _fmt(total / count), ref_kind))
    write_csv(out_csv, cfg,
              ("train_sizes", "test_sizes", "instances", "mean_ratio",
               "reference"), rows)
    return rows


def cmd_timesweep(cfg: ExperimentConfig, out_csv: str,
                  model_path: str | None = None,
                  methods: tuple | None = None,
                  count: int | None = None) -> list:
    """Record (method, instance, seconds, ratio) points for trade-off plots."""
    methods = tuple(sorted(methods if methods else cfg.methods))
    params = _method_params(cfg, methods, model_path)
    if count is None:
        count = cfg.test_count
    rows = []
    for i in range(count):
        g = make_instance(cfg, STREAM_TEST, i)
        values, seconds = {}, {}
        for m in methods:
            t0 = time.perf_counter()
            try:
                value, _sol = run_method(cfg, m, g, params=params,
                                         method_seed=cfg.seed * 100003 + i)
            except SizeLimitError:
                continue
            seconds[m] = time.perf_counter() - t0
            values[m] = value
        ref, _kind = _references(
            cfg.problem, {m: v for m, v in values.items() if m != "exact"},
            values.get("exact"))
        if ref is None:
            continue
        for m in methods:
            if m in values:
                rows.append((m, i, repr(seconds[m]),
                             _fmt(float(exact.approx_ratio(values[m], ref)))))
    write_csv(out_csv, cfg, ("method", "instance", "seconds", "ratio"), rows)
    return rows


def load_single_instance(path: str, problem: Problem | None = None):
    """Instance file -> (graph, problem, best-known value or None).

    TSPLIB .tsp files become k-nearest-neighbor graphs over the parsed
    points; native graph files carry their own kind, with general graphs
    needing the caller to say whether they mean vertex cover or max cut.
    """
    stem = os.path.splitext(os.path.basename(path))[0]
    if path.endswith(".tsp"):
        ps = graphs.parse_tsplib(path)
        g = graphs.knn_graph(ps, min(10, ps.count - 1))
        return g, Problem.TSP, TSPLIB_BEST_KNOWN.get(stem)
    g = graphs.load_graph(path)
    if g.kind == "euclidean":
        kind = Problem.TSP
    elif g.kind == "bipartite_scp":
        kind = Problem.SCP
    elif problem in (Problem.MVC, Problem.MAXCUT):
        kind = problem
    else:
        raise ArgumentError(
            "general graphs need --problem mvc or --problem maxcut")
    return g, kind, None


def cmd_active_search(cfg: ExperimentConfig, instance_path: str,
                      episodes: int | None = None) -> dict:
    """Learn on a single instance and report the best solution found."""
    g, kind, best_known = load_single_instance(instance_path, cfg.problem)
    norm = float(g.node_count)
    if kind is Problem.TSP:
        norm *= g.point_set().grid_extent
    if kind is cfg.problem:
        tcfg = cfg.train_config()
    else:
        # instance kind overrides the configured problem (a .tsp path is
        # unambiguous); take that problem's presets with generic knobs
        tcfg = learning.default_config(
            kind, episodes=cfg.episodes, capacity=cfg.capacity,
            lr0=cfg.lr0, lr_decay_factor=cfg.lr_decay_factor,
            lr_decay_steps=cfg.lr_decay_steps, eps_start=cfg.eps_start,
            eps_end=cfg.eps_end, eps_anneal_steps=cfg.eps_anneal_steps,
            target_sync_interval=cfg.target_sync_interval,
            momentum=cfg.momentum, embed_p=cfg.embed_p,
            extra_layer=cfg.extra_layer, seed=cfg.seed)
    tcfg = dataclasses.replace(tcfg, reward_norm=norm)
    if episodes is not None:
        tcfg = dataclasses.replace(tcfg, episodes=episodes)
    if tcfg.eps_anneal_steps is None:
        tcfg = dataclasses.replace(
            tcfg, eps_anneal_steps=max(1, tcfg.episodes * g.node_count))
    result = learning.active_search(g, kind, tcfg)
    report = {
        "instance": os.path.basename(instance_path),
        "problem": kind.value,
        "episodes": tcfg.episodes,
        "best_value": result.best_value,
        "solution": list(result.best_state.solution),
    }
    reference = None
    ref_kind = None
    if best_known is not None:
        reference, ref_kind = best_known, "best-known"
    else:
        res = exact_reference(kind, g)
        if res is not None:
            reference, ref_kind = res.value, "exact"
    if reference is not None:
        report["reference"] = reference
        report["reference_kind"] = ref_kind
        report["ratio"] = exact.approx_ratio(result.best_value, reference)
    return report
