"""Train the six entropy-probing variants on the standard task set and
compare their late-training entropy with a paired sign test.

    python3 demos/entropy_ordering.py [n_seeds]

Five seeds take a minute or two on one CPU core.
"""

# %%
import sys

import numpy as np

from grpolab.experiments import STANDARD_TRAIN, covariance_trend, entropy_experiment

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
entropy, tests, runs = entropy_experiment(seeds=range(n_seeds))

# %% Mean token entropy over the last 100 steps, per variant and seed.
for variant, values in sorted(entropy.items(), key=lambda kv: -np.mean(kv[1])):
    rewards = [np.mean([r.mean_train_reward for r in rec[-100:]]) for rec in runs[variant]]
    print(f"{variant:13s} entropy {np.mean(values):.3f}  reward {np.mean(rewards):.2f}  "
          f"per seed {np.round(values, 3).tolist()}")

# %% Paired sign tests.
for t in tests:
    flag = "significant" if t.significant else "not significant"
    print(f"{t.higher:>13s} > {t.lower:<13s} {t.wins}/{t.n}  p={t.p_value:.4f}  {flag}")

# %% Early covariance grows with group accuracy under GRPO.
rhos = [covariance_trend(rec, STANDARD_TRAIN.group_size) for rec in runs["grpo"]]
print("GRPO covariance-vs-accuracy Spearman per seed:", np.round(rhos, 2).tolist())
