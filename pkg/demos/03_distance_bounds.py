# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Distances before and after embedding
#
# With an exact edit distance the embedding is 1-Lipschitz in the sup norm,
# and a Mahalanobis distance between embeddings never exceeds the graph
# distance once scaled by the smallest covariance eigenvalue.  For graphs on
# a fixed vertex set the Frobenius distance is pinned between two multiples
# of the embedded distance.

# %%
import numpy as np

from graphdrift.datasets import random_graph
from graphdrift.embedding import PrototypeSet, embed
from graphdrift.ged import GraphDistance, bipartite_ged, exact_ged
from graphdrift.graph_core import random_identified_graph
from graphdrift.theory import (check_frobenius_bounds, check_mahalanobis_lower_bound,
                               frobenius_bound_setup)

rng = np.random.default_rng(0)
d = GraphDistance("exact")
gs = [random_graph(rng, (1, 4)) for _ in range(200)]
R = PrototypeSet.from_graphs(gs[:3], d)
sigma = np.cov(np.array([embed(g, R, d) for g in gs]), rowvar=False)
pairs = list(zip(gs[::2], gs[1::2]))
print(check_mahalanobis_lower_bound(pairs, R, sigma, d))
print(check_mahalanobis_lower_bound(pairs, R, sigma, GraphDistance("bipartite")))

# %% [markdown]
# The assignment-based distance is an upper bound of the exact one.

# %%
gap = [bipartite_ged(g, f) - exact_ged(g, f) for g, f in pairs]
print("largest overestimate", max(gap), "mean", np.mean(gap))

# %%
protos, model, sig, rng = frobenius_bound_setup(N=6, M=20, seed=0)
ip = [(random_identified_graph(rng, 6), random_identified_graph(rng, 6)) for _ in range(200)]
rep = check_frobenius_bounds(ip, protos, model, sig)
print(rep.violations, rep.constants["c"], rep.constants["C"])
