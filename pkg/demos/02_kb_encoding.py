"""Turning a knowledge-base row into key-value facts and reading them back."""

import numpy as np

import memdropout as md

row = md.KBRow(("event", "date", "time", "party"), ("dentist", "the 19th", "5pm", "Mike"))
triplets = md.expand_row(row)
print(f"{len(triplets)} triplets from one row of {len(row.columns)} columns:")
for t in triplets:
    print(f"  ({t.subject}, {t.relation}, {t.object})")

# Hashed embeddings need no download; a GloVe text file works the same way
# through md.load_embedding_file(path).
emb = md.EmbeddingProvider(dim=64, seed=0)
pairs = [md.triplet_to_kv(t, emb) for t in triplets]

mem = md.init_memory(0, n_slots=16, key_dim=64, value_dim=64, empty=True)
rng = md.make_rng(1)
for p in pairs:
    md.write_memory_dropout(mem, rng, p.key, p.value, epsilon=0.0)

objects = {p.provenance.object: p.value for p in pairs}
names = list(objects)
table = np.array([objects[n] for n in names])
# the key depends only on subject and relation, so the answer is not needed to ask
key = md.triplet_to_kv(md.Triplet("dentist", "time", "unknown"), emb).key
_, value, _ = md.read(mem, key)
print("when is the dentist?", names[int(np.argmax(table @ value))])
