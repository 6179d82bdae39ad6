"""A tour of the memory: reads, merges, and the two write policies.

Run with ``python3 demos/01_memory_basics.py``.
"""

import numpy as np

import memdropout as md

rng = md.make_rng(0)

# %% A small memory with eight random unit keys and one-dimensional values.
mem = md.init_memory(rng, n_slots=8, key_dim=4, value_dim=1)
mem.values[:, 0] = np.arange(8)
mem.ages[:] = rng.integers(0, 10, size=8)
print("key norms:", np.round(np.linalg.norm(mem.keys, axis=1), 6))

# %% Reading returns the nearest slot by dot product plus a softmax attention.
query = mem.keys[5] + 0.05 * rng.standard_normal(4)
slot, value, attention = md.read(mem, query)
print(f"query near key 5 -> slot {slot}, value {value[0]:.0f}, attention peak {attention.max():.3f}")

# %% The greedy writer merges a new vector into its nearest key.
h = mem.keys[2] + 0.3 * rng.standard_normal(4)
before = mem.keys[2].copy()
out = md.write_greedy(mem, rng, h, [42.0], epsilon=0.0)
print(f"greedy: {out.branch.name} into slot {out.slot}, "
      f"moved by {np.linalg.norm(mem.keys[out.slot] - before):.3f}")

# %% Memory dropout samples a surrogate from the neighborhood mixture, merges
# it into the nearest slot, and ages the rest of the neighborhood so those
# redundant keys are the next to be replaced.
ages_before = mem.ages.copy()
out = md.write_memory_dropout(mem, rng, h, [43.0], epsilon=0.0, p=3)
print(f"dropout: {out.branch.name} into slot {out.slot}, neighborhood {out.neighborhood.indices.tolist()}")
print("ages before:", ages_before.tolist())
print("ages after: ", mem.ages.tolist())
print("variance recorded at the written slot:", np.round(mem.variances[out.slot], 4).tolist())

# %% With probability epsilon the oldest slot is simply overwritten.
oldest = int(np.argmax(mem.ages))
out = md.write_memory_dropout(mem, rng, rng.standard_normal(4), [7.0], epsilon=1.0)
print(f"forced overwrite: {out.branch.name}, slot {out.slot} (oldest was {oldest})")
