"""
Instance generators and exact references
========================================

Every experiment in this package starts from seeded random instances:
Erdos-Renyi and Barabasi-Albert graphs for vertex cover and max cut,
planar point sets for the TSP, and bipartite incidence graphs for set
cover.  This script draws a few of each, saves one to disk and reloads
it, and asks the desk-scale exact solvers for ground truth.
"""

import numpy as np

from greedyq import exact, graphs

# Erdos-Renyi: every pair joined with probability p.  The same
# (n, p, seed) always gives the same graph.
g = graphs.gen_erdos_renyi(18, 0.15, seed=7)
print(f"ER(18, 0.15): {g.edge_count} edges, "
      f"mean degree {g.degrees().mean():.2f}")

# Barabasi-Albert: preferential attachment, m edges per new node.
# Degree distribution is heavy-tailed, which matters for cover problems.
b = graphs.gen_barabasi_albert(18, 4, seed=7)
print(f"BA(18, 4):    {b.edge_count} edges, "
      f"max degree {b.degrees().max()}")

# The exact solvers return the optimum plus a feasible certificate.
res = exact.mvc_exact(g)
print(f"minimum vertex cover of the ER graph: {int(res.value)} nodes "
      f"(proved in {res.elapsed * 1000:.1f} ms)")
print("  cover:", res.certificate)

cut = exact.maxcut_exact(graphs.gen_maxcut_weights(g, seed=7))
print(f"maximum cut with U[0,1] weights: {cut.value:.4f}")

# TSP points live on a grid of the given extent; the exact solver is a
# Held-Karp dynamic program, fine up to ~17 points.
ps = graphs.gen_tsp_points(12, "clustered", seed=7, extent=1e6)
tour = exact.tsp_exact(ps)
print(f"optimal tour over 12 clustered points: {tour.value:.1f}")

# Set cover instances are bipartite: cover nodes on one side, universe
# elements on the other.
s = graphs.gen_scp(20, 0.15, seed=7)
opt = exact.scp_exact(s)
print(f"SCP with {s.cover_count} sets over "
      f"{s.node_count - s.cover_count} elements: optimum {int(opt.value)}")

# Round trip through the text format is exact.
graphs.save_graph(g, "/tmp/demo_er.graph")
h = graphs.load_graph("/tmp/demo_er.graph")
assert np.array_equal(g.edge_u, h.edge_u)
assert np.array_equal(g.edge_v, h.edge_v)
print("saved and reloaded the ER graph bit for bit")
