"""Evaluation helpers on a small synthetic study.

Four baselines with fixed strengths play each other; Elo should recover
their order, and a noisy score should still rank-correlate with strength.
"""
# %%
import itertools

import numpy as np

from luban.metrics import EloParams, MatchRecord, elo, spearman, winning_rates

rng = np.random.default_rng(0)
strength = {"ours": 3.0, "b1": 2.0, "b2": 1.0, "b3": 0.0}
matches = []
for task in ("bridge", "stair"):
    for a, b in itertools.combinations(strength, 2):
        for seed in range(3):
            p = 1 / (1 + np.exp(strength[b] - strength[a]))
            matches.append(MatchRecord(task, a, seed, b, seed, "e1", "A" if rng.random() < p else "B"))

# %%
for (task, name), rate in winning_rates(matches).items():
    print(f"{task:8s} {name:5s} {rate:6.2f}%")
res = elo(matches, EloParams(shuffles=100, seed=1))
for name, r in sorted(res.ratings.items(), key=lambda kv: -kv[1]):
    print(f"{name:5s} {r:8.2f}")

# %% [markdown]
# Spearman with few samples uses the exact permutation p-value; with more it
# switches to the t approximation.

# %%
xs = list(strength.values())
noisy = [s + rng.normal(0, 0.5) for s in xs]
print(spearman(xs, noisy))
many = rng.normal(size=30)
print(spearman(many, many + rng.normal(0, 1, 30)))
