# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # How the time-varying thresholds behave
#
# Under the null the window statistic squared is chi-square with M degrees
# of freedom.  Thresholds are conditional quantiles of the cumulative sum, so
# every step carries the same alarm probability.

# %%
import matplotlib.pyplot as plt
import numpy as np

from graphdrift.detector import calibrate_thresholds, first_threshold_closed_form, run_cusum

tables = {a: calibrate_thresholds(4, a, 100_000, horizon=400, seed=0) for a in (50, 100, 200)}
for a, t in tables.items():
    plt.plot(t.h, label=f"ARL0 = {a}")
plt.xlabel("windows since restart")
plt.legend()
plt.show()

print("first threshold", tables[200].h[0], "closed form", first_threshold_closed_form(4, 200))

# %% [markdown]
# Fresh null trajectories should alarm every ARL0 windows on average.

# %%
t = calibrate_thresholds(4, 100, 100_000, seed=1)
rng = np.random.default_rng(0)
gaps = []
for _ in range(200):
    alarms = run_cusum(np.sqrt(rng.chisquare(4, 2000)), t, t.q).alarms
    gaps += list(np.diff([0] + alarms))
print("mean gap", np.mean(gaps))
