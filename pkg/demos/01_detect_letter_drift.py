# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Detecting a change in a stream of letter-like graphs
#
# Two groups of synthetic letter drawings form the nominal and the shifted
# populations.  Graphs are embedded by their edit distance to four prototypes
# and a cumulative-sum test runs on windows of 25 graphs.

# %%
import numpy as np

from graphdrift.datasets import SyntheticLetterSpec, generate_synthetic
from graphdrift.detector import calibrate_thresholds, fit_baseline, run_detector
from graphdrift.embedding import embed_many, k_centres
from graphdrift.stream_sim import StreamConfig, bootstrap_indices, compute_metrics

coll = generate_synthetic(SyntheticLetterSpec(num_classes=8, graphs_per_class=100), seed=0)
nominal = coll["A"] + coll["E"]
shifted = coll["F"] + coll["H"]

# %% [markdown]
# Prototypes come from a k-Centres cover of a training draw; the baseline
# mean and covariance from a second draw.

# %%
rng = np.random.default_rng(1)
T_c = [nominal[i] for i in rng.integers(0, len(nominal), 100)]
R = k_centres(T_c, M=4, repeats=10, seed=2)
print("covering radius", round(R.covering_radius, 3))

n, arl0 = 25, 200
Y_nom = embed_many(nominal, R)
Y_new = embed_many(shifted, R)
model = fit_baseline(Y_nom[rng.integers(0, len(nominal), 300)], n)

# %% [markdown]
# Thresholds target one false alarm every 200 windows on average.
# A smaller simulation count keeps the demo fast.

# %%
table = calibrate_thresholds(M=4, arl0=arl0, num_sims=100_000, seed=0)

cfg = StreamConfig(nominal, shifted, n=n, arl0_target=arl0, seed=3)
src, idx = bootstrap_indices(cfg)
stream = np.empty((src.size, 4))
stream[src == 0] = Y_nom[idx[src == 0]]
stream[src == 1] = Y_new[idx[src == 1]]
trace = run_detector(stream, model, table, n, return_trace=True)
m = compute_metrics(trace.alarms, cfg.tau_window, cfg.num_windows, n)
print(f"false-alarm spacing {m.arl0_observed:.0f} windows, delay {m.dod:.1f}, detected {m.detected}")

# %%
import matplotlib.pyplot as plt

w = np.arange(1, trace.S.size + 1)
plt.plot(w, trace.S, lw=0.6)
plt.plot(w, trace.h, "--", lw=0.6)
plt.axvline(cfg.tau_window, color="k")
plt.xlim(cfg.tau_window - 600, cfg.tau_window + 50)
plt.show()
