"""
Classical heuristics against the exact optimum
==============================================

The learned model only matters relative to what cheap classical rules
already achieve.  This script runs each baseline on a batch of seeded
instances and prints mean approximation ratios (solution / optimum for
minimization, optimum / solution for max cut, so >= 1 always).
"""

import numpy as np

from greedyq import baselines, exact, graphs
from greedyq.problems import cut_value, tour_length

COUNT = 30

# --- minimum vertex cover on ER(15-20, 0.15) ------------------------------
rows = {"matching (2-approx)": [], "greedy degree": []}
for i in range(COUNT):
    g = graphs.gen_erdos_renyi(15 + i % 6, 0.15, seed=100 + i)
    opt = exact.mvc_exact(g).value
    rows["matching (2-approx)"].append(
        len(baselines.mvc_approx(g, seed=i)) / opt)
    rows["greedy degree"].append(len(baselines.mvc_approx_greedy(g)) / opt)
print("vertex cover, mean ratio over", COUNT, "instances:")
for name, vals in rows.items():
    print(f"  {name:22s} {np.mean(vals):.4f}")

# --- max cut with uniform weights ------------------------------------------
ratios = []
for i in range(COUNT):
    g = graphs.gen_maxcut_weights(
        graphs.gen_erdos_renyi(14, 0.3, seed=200 + i), seed=i)
    opt = exact.maxcut_exact(g).value
    side = baselines.maxcut_approx(g)
    ratios.append(opt / cut_value(g, side))
print(f"max cut, local search: mean ratio {np.mean(ratios):.4f}")

# --- TSP construction heuristics -------------------------------------------
names = ["nearest-neighbor", "mst", "two-opt"] + [
    f"{s}-insertion" for s in baselines.INSERTION_STRATEGIES]
sums = {n: 0.0 for n in names}
for i in range(COUNT):
    ps = graphs.gen_tsp_points(12, "random", seed=300 + i)
    opt = exact.tsp_exact(ps).value
    sums["nearest-neighbor"] += tour_length(
        ps, baselines.tsp_nearest_neighbor(ps)) / opt
    sums["mst"] += tour_length(ps, baselines.tsp_mst(ps)) / opt
    sums["two-opt"] += tour_length(
        ps, baselines.tsp_two_opt(baselines.tsp_nearest_neighbor(ps), ps)) / opt
    for s in baselines.INSERTION_STRATEGIES:
        sums[f"{s}-insertion"] += tour_length(
            ps, baselines.tsp_insertion(ps, s)) / opt
print("TSP at 12 points, mean ratio:")
for n in names:
    print(f"  {n:22s} {sums[n] / COUNT:.4f}")

# --- set cover greedy -------------------------------------------------------
ratios = []
for i in range(COUNT):
    g = graphs.gen_scp(20, 0.15, seed=400 + i)
    ratios.append(len(baselines.scp_greedy(g)) / exact.scp_exact(g).value)
print(f"set cover, greedy max-coverage: mean ratio {np.mean(ratios):.4f}")
