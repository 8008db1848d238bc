"""n-step fitted Q-learning on construction episodes.

One learning step works on a replay tuple (S_t, a_t, R, S_{t+n}) where
R is the discount-free sum of the n step rewards after t (truncated at
episode end).  The regression target is

    y = R + gamma * max_a Q(S_{t+n}, a; target params)

computed with a periodically synchronized copy of the parameters, and
the loss is the squared error (Q(S_t, a_t) - y)^2 averaged over a batch
sampled i.i.d. with replacement from a bounded replay memory.

Episodes are played epsilon-greedily with a linearly annealed epsilon.
Rewards are the raw cost deltas of the environment, multiplied by a
per-problem sign and divided by a normalization constant (the largest
training node count works well), which keeps Q targets near unit scale.

Everything is deterministic given the config seed: exploration, batch
sampling and parameter initialization all derive from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .embedding import (EmbedParams, Features, embed, feature_dims,
                        init_params, node_features, q_values)
from .errors import ArgumentError, InfeasibleError, TrainingError
from .graphs import WeightedGraph, rng_stream
from .problems import (EpisodeState, Problem, apply, candidates, init_state,
                       restore_state, solution_value, terminated)


@dataclass
class TrainConfig:
    """Knobs of the learning loop.  See default_config for presets."""

    episodes: int
    n_step: int = 1
    batch_size: int = 64
    capacity: int = 10000
    gamma: float = 1.0
    lr0: float = 1e-3
    lr_decay_factor: float = 0.95
    lr_decay_steps: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_anneal_steps: int | None = None
    reward_sign: float = 1.0
    reward_norm: float = 20.0
    target_sync_interval: int = 500
    momentum: float = 0.0
    embed_p: int = 64
    embed_T: int = 5
    extra_layer: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.episodes < 0:
            raise ArgumentError("episodes must be >= 0")
        if self.n_step < 1:
            raise ArgumentError("n_step must be >= 1")
        if self.batch_size < 1 or self.capacity < 1:
            raise ArgumentError("batch_size and capacity must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ArgumentError("gamma must lie in [0, 1]")
        if self.reward_norm <= 0:
            raise ArgumentError("reward_norm must be positive")
        if self.reward_sign not in (1.0, -1.0):
            raise ArgumentError("reward_sign must be +1 or -1")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ArgumentError("need 0 <= eps_end <= eps_start <= 1")
        if self.target_sync_interval < 1:
            raise ArgumentError("target_sync_interval must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ArgumentError("momentum must lie in [0, 1)")


# per-problem presets: sweep count T, lookahead n, batch size, discount,
# reward sign
_PRESETS = {
    Problem.MVC: dict(embed_T=5, n_step=5, batch_size=128),
    Problem.MAXCUT: dict(embed_T=3, n_step=1, batch_size=64),
    Problem.TSP: dict(embed_T=4, n_step=1, batch_size=64, gamma=0.1,
                      reward_sign=-1.0),
    Problem.SCP: dict(embed_T=5, n_step=2, batch_size=64),
}


def default_config(kind: Problem, episodes: int, **overrides) -> TrainConfig:
    """Preset config for a problem; keyword arguments override fields."""
    kw = dict(_PRESETS[Problem(kind)])
    kw.update(overrides)
    cfg = TrainConfig(episodes=episodes, **kw)
    cfg.validate()
    return cfg


def epsilon_at(step: int, anneal_steps: int, cfg: TrainConfig) -> float:
    """Linearly annealed exploration rate at a global step index."""
    frac = min(1.0, step / max(1, anneal_steps))
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def learning_rate_at(update: int, cfg: TrainConfig) -> float:
    """Exponentially decayed learning rate at an update index."""
    return cfg.lr0 * cfg.lr_decay_factor ** (update // cfg.lr_decay_steps)


@dataclass(eq=False)
class ReplayTuple:
    """One n-step transition, tied to the graph it was played on."""

    uid: int
    graph: WeightedGraph
    kind: Problem
    solution: tuple
    tags: np.ndarray
    action: int
    ret: float
    next_solution: tuple
    next_tags: np.ndarray
    terminal: bool


class ReplayMemory:
    """Bounded ring buffer of replay tuples."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ArgumentError("capacity must be >= 1")
        self.capacity = capacity
        self.items: list = []
        self._pos = 0

    def __len__(self) -> int:
        return len(self.items)

    def push(self, item: ReplayTuple) -> ReplayTuple | None:
        """Store an item; returns the evicted one once full."""
        if len(self.items) < self.capacity:
            self.items.append(item)
            return None
        evicted = self.items[self._pos]
        self.items[self._pos] = item
        self._pos = (self._pos + 1) % self.capacity
        return evicted

    def sample(self, rng: np.random.Generator, k: int) -> list:
        """k items drawn i.i.d. with replacement."""
        if not self.items:
            raise ArgumentError("cannot sample from an empty memory")
        idx = rng.integers(0, len(self.items), size=k)
        return [self.items[int(i)] for i in idx]


def state_q(state: EpisodeState, params: EmbedParams,
            feats: Features | None = None):
    """Q values of every node of the state's graph, plus the forward pass."""
    if feats is None:
        feats = node_features(state)
    result = embed(feats, params)
    return q_values(result), result


def max_candidate_q(state: EpisodeState, params: EmbedParams) -> float:
    cand = candidates(state)
    if cand.size == 0:
        raise ArgumentError("state has no candidates")
    q, _ = state_q(state, params)
    return float(q[cand].max())


def n_step_target(tup: ReplayTuple, cfg: TrainConfig, qmax_fn) -> float:
    """Regression target R + gamma * qmax(S_{t+n}); qmax_fn is pluggable."""
    if tup.terminal:
        return tup.ret
    nxt = restore_state(tup.graph, tup.kind, tup.next_solution)
    if terminated(nxt) or candidates(nxt).size == 0:
        return tup.ret
    return tup.ret + cfg.gamma * float(qmax_fn(nxt))


def td_target(tup: ReplayTuple, target_params: EmbedParams,
              cfg: TrainConfig) -> float:
    """n-step target evaluated with the target network."""
    return n_step_target(tup, cfg,
                         lambda st: max_candidate_q(st, target_params))


def batch_loss_and_grads(params: EmbedParams, target_params: EmbedParams,
                         batch: list, cfg: TrainConfig,
                         feature_cache: dict | None = None,
                         target_cache: dict | None = None):
    """Mean squared TD error of the batch and its exact gradient."""
    from .embedding import backward

    grads = params.zeros_like()
    loss = 0.0
    inv = 1.0 / len(batch)
    for tup in batch:
        if target_cache is not None and tup.uid in target_cache:
            y = target_cache[tup.uid]
        else:
            y = td_target(tup, target_params, cfg)
            if target_cache is not None:
                target_cache[tup.uid] = y
        feats = None if feature_cache is None else feature_cache.get(tup.uid)
        if feats is None:
            state = restore_state(tup.graph, tup.kind, tup.solution)
            feats = node_features(state)
            if feature_cache is not None:
                feature_cache[tup.uid] = feats
        result = embed(feats, params)
        q = q_values(result)
        diff = float(q[tup.action]) - y
        loss += diff * diff * inv
        grads.add_scaled(backward(result, tup.action, 2.0 * diff * inv), 1.0)
    return loss, grads


def sgd_step(params: EmbedParams, target_params: EmbedParams, batch: list,
             lr: float, cfg: TrainConfig,
             velocity: EmbedParams | None = None,
             feature_cache: dict | None = None,
             target_cache: dict | None = None) -> float:
    """One (momentum) SGD update in place.  Returns the pre-step loss."""
    loss, grads = batch_loss_and_grads(params, target_params, batch, cfg,
                                       feature_cache, target_cache)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    if velocity is not None and cfg.momentum > 0.0:
        for name in params.array_names():
            vel = getattr(velocity, name)
            vel *= cfg.momentum
            vel -= lr * getattr(grads, name)
            getattr(params, name).__iadd__(vel)
    else:
        params.add_scaled(grads, -lr)
    return loss


@dataclass
class LogRow:
    """One line of the training log (written to CSV by the harness)."""

    episode: int
    step: int
    update: int
    epsilon: float
    lr: float
    loss: float
    val: float | None = None


@dataclass
class TrainResult:
    params: EmbedParams          # parameters after the last episode
    best_params: EmbedParams     # best validation checkpoint (or final)
    best_val: float | None
    log: list
    episodes_played: int
    updates: int


def train(sampler, kind: Problem, cfg: TrainConfig,
          params: EmbedParams | None = None, validate_fn=None,
          validate_every: int = 0, on_episode_end=None) -> TrainResult:
    """Run the full learning loop.

    sampler(i) must return the WeightedGraph for episode i; episodes
    are independent draws in the usual case and the same graph every
    time for active search.  A warm-start parameter set may be passed;
    otherwise parameters are drawn from the config seed.  validate_fn,
    if given, is called as validate_fn(params, episode) every
    validate_every episodes and must return a float where lower is
    better; the best checkpoint is kept.
    """
    kind = Problem(kind)
    cfg.validate()
    d_node, d_edge = feature_dims(kind)
    if params is None:
        params = init_params(cfg.embed_p, d_node, d_edge, cfg.embed_T,
                             cfg.seed, cfg.extra_layer)
    else:
        params = params.copy()
        if (params.d_node, params.d_edge) != (d_node, d_edge):
            raise ArgumentError(
                f"warm-start parameters expect features "
                f"({params.d_node}, {params.d_edge}), problem needs "
                f"({d_node}, {d_edge})")
    target = params.copy()
    velocity = params.zeros_like()
    memory = ReplayMemory(cfg.capacity)
    rng = rng_stream(cfg.seed, 0xE9)
    # default anneal horizon: the planned step budget, taking the
    # reward normalizer (max training node count) as the per-episode
    # worst case
    anneal = cfg.eps_anneal_steps
    if anneal is None:
        anneal = max(1, cfg.episodes * max(1, int(round(cfg.reward_norm))))

    log: list = []
    feature_cache: dict = {}
    target_cache: dict = {}
    uid = 0
    gstep = 0
    updates = 0
    best_params = params.copy()
    best_val = None

    def push_and_learn(tup, episode):
        nonlocal updates
        evicted = memory.push(tup)
        if evicted is not None:
            feature_cache.pop(evicted.uid, None)
            target_cache.pop(evicted.uid, None)
        batch = memory.sample(rng, cfg.batch_size)
        lr = learning_rate_at(updates, cfg)
        eps = epsilon_at(gstep, anneal, cfg)
        loss = sgd_step(params, target, batch, lr, cfg, velocity,
                        feature_cache, target_cache)
        updates += 1
        log.append(LogRow(episode, gstep, updates, eps, lr, loss))
        if not params.all_finite():
            err = TrainingError(f"parameters diverged at update {updates}")
            err.last_params = best_params
            raise err
        if updates % cfg.target_sync_interval == 0:
            target_assign(target, params)
            target_cache.clear()

    def target_assign(dst, src):
        for name in dst.array_names():
            getattr(dst, name)[:] = getattr(src, name)

    for episode in range(cfg.episodes):
        g = sampler(episode)
        state = init_state(g, kind)
        snaps = []     # (solution, tags) per step
        rewards = []   # normalized signed rewards per step
        while not terminated(state):
            cand = candidates(state)
            if cand.size == 0:
                raise InfeasibleError(
                    f"episode {episode} stuck with no candidates")
            eps = epsilon_at(gstep, anneal, cfg)
            if rng.random() < eps:
                action = int(cand[rng.integers(cand.size)])
            else:
                q, _ = state_q(state, params)
                action = int(cand[int(np.argmax(q[cand]))])
            snaps.append((state.solution, state.tags))
            nxt, raw = apply(state, action)
            rewards.append(cfg.reward_sign * raw / cfg.reward_norm)
            state = nxt
            gstep += 1
            done = len(snaps)
            if done >= cfg.n_step:
                t = done - cfg.n_step
                sol, tags = snaps[t]
                tup = ReplayTuple(uid, g, kind, sol, tags,
                                  state.solution[t], sum(rewards[t:done]),
                                  state.solution, state.tags,
                                  terminated(state))
                uid += 1
                push_and_learn(tup, episode)
        length = len(snaps)
        for t in range(max(0, length - cfg.n_step + 1), length):
            sol, tags = snaps[t]
            tup = ReplayTuple(uid, g, kind, sol, tags, state.solution[t],
                              sum(rewards[t:]), state.solution, state.tags,
                              True)
            uid += 1
            push_and_learn(tup, episode)
        if on_episode_end is not None:
            on_episode_end(episode, state, params)
        if (validate_fn is not None and validate_every > 0
                and (episode + 1) % validate_every == 0):
            val = float(validate_fn(params, episode))
            if log:
                log[-1] = replace(log[-1], val=val)
            if best_val is None or val < best_val:
                best_val = val
                best_params = params.copy()
    if best_val is None:
        best_params = params.copy()
    return TrainResult(params=params, best_params=best_params,
                       best_val=best_val, log=log, episodes_played=cfg.episodes,
                       updates=updates)


def greedy_rollout(g: WeightedGraph, kind: Problem,
                   params: EmbedParams) -> EpisodeState:
    """Play one episode picking the highest-Q candidate at every step.

    Ties go to the lowest node id.  Returns the terminal state.
    """
    state = init_state(g, Problem(kind))
    while not terminated(state):
        cand = candidates(state)
        if cand.size == 0:
            raise InfeasibleError("rollout stuck with no candidates")
        q, _ = state_q(state, params)
        state, _ = apply(state, int(cand[int(np.argmax(q[cand]))]))
    return state


@dataclass
class ActiveSearchResult:
    best_state: EpisodeState
    best_value: float
    params: EmbedParams
    log: list


def active_search(g: WeightedGraph, kind: Problem, cfg: TrainConfig,
                  params: EmbedParams | None = None) -> ActiveSearchResult:
    """Keep learning on one fixed instance; return the best episode.

    Every training episode is itself a candidate solution: the best
    terminal state over all episodes is returned (first one found on
    ties).  Lower solution_value wins except for maxcut.
    """
    kind = Problem(kind)
    if cfg.episodes < 1:
        raise ArgumentError("active search needs at least one episode")
    sense = -1.0 if kind is Problem.MAXCUT else 1.0
    best: list = [None, None]

    def track(episode, state, _params):
        val = solution_value(state)
        if best[1] is None or sense * val < sense * best[1]:
            best[0], best[1] = state, val

    result = train(lambda _i: g, kind, cfg, params=params,
                   on_episode_end=track)
    return ActiveSearchResult(best_state=best[0], best_value=float(best[1]),
                              params=result.params, log=result.log)
