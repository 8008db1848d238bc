"""
Training a vertex cover policy at desk scale
============================================

A complete, honest training run takes a while on one CPU; this demo
shrinks everything (tiny graphs, narrow embedding, few episodes) so the
whole loop finishes in about a minute and still visibly beats random.

The loop is n-step fitted Q-learning: play episodes with an epsilon-
greedy policy, store (state, action, n-step return, state') tuples in a
replay memory, and after every step fit the value network to bootstrapped
targets with one SGD step on a sampled batch.
"""

import numpy as np

from greedyq import baselines, exact, graphs, learning
from greedyq.problems import Problem


def sampler(episode):
    return graphs.gen_erdos_renyi(10 + episode % 4, 0.25,
                                  seed=50000 + episode)


val = [graphs.gen_erdos_renyi(10 + i % 4, 0.25, seed=60000 + i)
       for i in range(30)]
refs = [exact.mvc_exact(g).value for g in val]


def val_ratio(params, episode):
    total = 0.0
    for g, ref in zip(val, refs):
        state = learning.greedy_rollout(g, Problem.MVC, params)
        total += len(state.solution) / ref
    return total / len(val)


cfg = learning.default_config(
    Problem.MVC, episodes=120, seed=3,
    embed_p=16, batch_size=32, lr0=1e-3, reward_norm=14.0,
    eps_anneal_steps=500)

print(f"training: {cfg.episodes} episodes, embedding width {cfg.embed_p}, "
      f"{cfg.n_step}-step returns")
result = learning.train(sampler, Problem.MVC, cfg,
                        validate_fn=val_ratio, validate_every=30)

for row in result.log:
    if row.val is not None:
        print(f"  episode {row.episode + 1:3d}: "
              f"validation ratio {row.val:.4f}")

greedy = np.mean([len(baselines.mvc_approx_greedy(g)) / r
                  for g, r in zip(val, refs)])
print(f"best validation ratio {result.best_val:.4f} "
      f"(classical greedy: {greedy:.4f}, optimum: 1.0)")
print(f"{result.updates} SGD updates over {result.episodes_played} episodes")

# The best-by-validation parameters, not the last ones, are what an
# experiment would save; learning curves wobble.
state = learning.greedy_rollout(val[0], Problem.MVC, result.best_params)
print("cover found on the first validation graph:",
      sorted(state.solution), f"(optimum {int(refs[0])})")
