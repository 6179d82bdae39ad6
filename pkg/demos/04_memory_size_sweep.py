"""Retrieval F1 as the memory grows, on a KB stream with heavily repeated facts.

A handful of popular facts are written over and over.  Greedy merging lets
their copies crowd out rarer facts; memory dropout ages the redundant copies
so the space is reused.
"""

import numpy as np

import memdropout as md

sizes = [16, 32, 64, 128]
seeds = range(5)
print(f"{'slots':>6} {'greedy':>8} {'dropout':>8}")
for n in sizes:
    scores = {
        policy: np.mean([
            md.kb_retrieval_eval(md.duplicate_heavy_kb(seed=s), policy, memory_slots=n, seed=s).f1
            for s in seeds
        ])
        for policy in md.Policy
    }
    print(f"{n:>6} {scores[md.Policy.GREEDY]:>8.3f} {scores[md.Policy.MEMORY_DROPOUT]:>8.3f}")
