# %% [markdown]
# # Energy model and the no-anomaly baseline
#
# A node wakes once an hour, captures an image, runs inference and goes back
# to sleep. All costs are integer microwatt-hours, so battery arithmetic is
# exact.

# %%
from tinyml_sim import Battery, EnergyTable, SimConfig, run_episode
from tinyml_sim.engine import Episode, run_iteration

table = EnergyTable()
table, table.per_iteration

# %% [markdown]
# With no anomalies every iteration costs the same 247 uWh, so battery life is
# just capacity divided by that, rounded down.

# %%
cfg = SimConfig(anomaly_ratio=0.0)
life = run_episode(cfg).battery_life_hours
print(life, 17_500_000 // 247)

# %% [markdown]
# Single iterations, to see what each branch costs. An anomaly the onboard
# model cannot place is uploaded (3000 uWh) and the policy is asked whether
# to retrain.

# %%
world = Episode(SimConfig(anomaly_ratio=1.0))
for _ in range(3):
    out = run_iteration(world)
    print(out.sample.name, out.disposition.name, out.decision.name, out.energy)

# %%
world = Episode(SimConfig(anomaly_ratio=1.0))
world.n_classified = 34          # the next upload makes it 35 -> static retrains
out = run_iteration(world)
print(out.decision.name, out.retrain, out.energy)

# %% [markdown]
# A battery refuses draws it cannot fund; the iteration that hits the wall is
# not counted.

# %%
b = Battery(500)
b.consume(247)
try:
    b.consume(300)
except Exception as exc:
    print(type(exc).__name__, exc.requested, exc.remaining)

# %% [markdown]
# Where the energy goes at 5% anomalies, static policy.

# %%
r = run_episode(SimConfig(anomaly_ratio=0.05))
total = r.ledger.total
for k, v in r.ledger.as_dict().items():
    print(f"{k:8s} {v:>10d} uWh  {v / total:6.1%}")
print("life", r.battery_life_hours, "h =", round(r.battery_life_hours / 8766, 2), "years")
