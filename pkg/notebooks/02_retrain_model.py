# %% [markdown]
# # Retraining outcome model
#
# Validation accuracy after retraining on n labelled images is drawn
# uniformly around a logistic-shaped center whose spread shrinks as 0.95^n.
# A retrain succeeds at 85%.

# %%
import numpy as np

from tinyml_sim import RandomStream, StreamId
from tinyml_sim.core import EnergyTable
from tinyml_sim.retrain import (VALIDATION_THRESHOLD, accuracy_center, accuracy_halfwidth,
                                simulate_retrain)

for n in (1, 5, 10, 20, 25, 30, 35, 60):
    c, h = accuracy_center(n), accuracy_halfwidth(n)
    print(f"n={n:3d} center {c:.4f} +/- {h:.4f}  range [{max(0, c - h):.4f}, {min(1, c + h):.4f}]")

# %% [markdown]
# Empirical success rate per n, from the retrain stream. Below about 20
# images a retrain can never pass; from 30 on it always does.

# %%
stream = RandomStream(7, StreamId.RETRAIN)
table = EnergyTable()
for n in range(18, 32, 2):
    draws = [simulate_retrain(n, table, stream) for _ in range(4000)]
    rate = np.mean([d.v_accuracy >= VALIDATION_THRESHOLD for d in draws])
    print(n, f"{rate:.3f}", draws[0].e_consumed, "uWh")

# %% [markdown]
# The expected cost of waiting: each extra image is one more 3000 uWh upload
# and 556 uWh more training, against a higher chance of success.

# %%
ns = np.arange(15, 41)
p = np.clip(((np.array([accuracy_center(int(n)) for n in ns]) - 0.85)
             / np.array([accuracy_halfwidth(int(n)) for n in ns]) + 1) / 2, 0, 1)
for n, q in zip(ns[::3], p[::3]):
    print(n, round(float(q), 3))
