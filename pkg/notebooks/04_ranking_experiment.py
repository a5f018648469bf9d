# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Ranking experiment
#
# Each set is ranked by AVD and by bAVD.  A good metric orders members by
# error count, so Kendall's tau against the true order should be 1.  A paired
# Wilcoxon test compares the per-set taus of the two metrics.
#
# The full run (10 phantoms at 128^3, 20 sets each) takes a couple of minutes;
# this one is smaller.

# %%
from bavd.pipeline import ExperimentConfig, run_experiment
from bavd.ranking import kendall_tau_b, summarize_experiment, wilcoxon_signed_rank

# %% [markdown]
# ## The statistics on their own

# %%
order = list(range(11))
swapped = order[:4] + [order[5], order[4]] + order[6:]
print(kendall_tau_b(order, swapped))           # 53/55
print(wilcoxon_signed_rank([(0, d) for d in [1, 2, 3, 4, 5, 6]]))

# %% [markdown]
# ## A small experiment

# %%
config = ExperimentConfig(seed=1, phantoms=2, dims=(96, 96, 96), n_sets=10)
results = run_experiment(config, workers=4)
summary = summarize_experiment(results)
for g in (*summary.phantoms, summary.pooled):
    print(f"{g.name:9s} tau AVD {g.mean_tau_avd:.3f} bAVD {g.mean_tau_bavd:.3f}  "
          f"imperfect {g.imperfect_avd}/{g.imperfect_bavd}  p={g.p_value:.3g}")

# %% [markdown]
# ## A set where AVD misorders
#
# Growing false positives near the vessels dilute AVD, so a member with more
# errors can score better than one with fewer.

# %%
bad = next((r for r in results if not r.avd.perfect), None)
if bad is not None:
    for row in bad.avd.rows:
        print(row.member, row.error_count, f"{row.value:.4f}", row.rank)
