"""
Inside the graph value network
==============================

The model scores every candidate node with a value network built from T
rounds of neighborhood message passing.  Each node keeps a p-dimensional
embedding; one round mixes its own features, the sum of its neighbors'
embeddings, and the sum of transformed edge weights.  A final linear head
turns (pooled graph embedding, node embedding) into a scalar Q.

This script walks through one forward pass on a toy graph and shows the
two properties the learning loop depends on: Q reacts to the partial
solution through the node features, and relabeling nodes permutes the
outputs without changing them.
"""

import numpy as np

from greedyq import embedding, graphs, problems
from greedyq.problems import Problem

# star: node 2 in the middle, leaves 0, 1, 3, 4
g = graphs.WeightedGraph.from_edges(
    5, [(2, v, 1.0) for v in (0, 1, 3, 4)])

params = embedding.init_params(p=16, d_node=1, d_edge=1, T=3, seed=42)
state = problems.init_state(g, Problem.MVC)

feats = embedding.node_features(state)
result = embedding.embed(feats, params)
q = embedding.q_values(result)
print("Q at the empty solution:", np.round(q, 3))
print("hub Q minus mean leaf Q: %.3f" % (q[2] - q[[0, 1, 3, 4]].mean()))

# Tagging the hub changes its feature, and through message passing the
# leaves' embeddings too.
state2, reward = problems.apply(state, 2)
q2 = embedding.q_values(embedding.embed(embedding.node_features(state2),
                                        params))
print("after taking the hub (reward %.2f): Q =" % reward,
      np.round(q2, 3))

# Relabeling the graph permutes embeddings and Q values exactly; the
# network cannot smuggle in node identity.
perm = np.array([3, 0, 4, 1, 2])
gp = graphs.relabel(g, perm)
qp = embedding.q_values(embedding.embed(
    embedding.node_features(problems.init_state(gp, Problem.MVC)), params))
print("relabeled Q matches bit for bit:",
      bool((qp[perm] == q).all()))

# The greedy meta-algorithm is just argmax over candidates, repeated.
sol = []
st = problems.init_state(g, Problem.MVC)
while not problems.terminated(st):
    cands = problems.candidates(st)
    res = embedding.embed(embedding.node_features(st), params)
    best = cands[int(np.argmax(embedding.q_values(res)[cands]))]
    st, _r = problems.apply(st, int(best))
    sol.append(int(best))
print("greedy rollout with random parameters picks:", sol)
print("(a trained model would stop after the hub; see demo 04)")
