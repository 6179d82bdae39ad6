"""How redundant do the keys become under each write policy?

Both policies see the same clustered stream from the same random start.
Lower aggregated correlation means the slots hold more diverse keys.
"""

import memdropout as md

config = md.ExperimentConfig(record_every=250)
curves = {}
for policy in md.Policy:
    curves[policy] = md.run_experiment(config.replace(policy=policy))

print(f"{'step':>6} " + " ".join(f"{p.value:>15}" for p in md.Policy))
for rows in zip(*curves.values()):
    print(f"{rows[0].step:>6} " + " ".join(f"{r.agg_correlation:>15.4f}" for r in rows))

for policy, records in curves.items():
    last = records[-1]
    print(f"{policy.value}: {last.overwrite_count} overwrites, mean age {last.mean_age:.1f}, "
          f"held-out retrieval F1 {last.retrieval_f1:.3f}")
