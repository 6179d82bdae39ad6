"""Memory dropout for key-value external memories.

Content-addressed memories with a greedy baseline writer and the
memory-dropout writer (Gaussian-mixture neighborhood sampling plus age-based
forgetting of redundant keys), knowledge-base triplet encoding, redundancy
and retrieval metrics, and a synthetic-stream experiment harness.
"""

from .kb import (
    EmbeddingProvider,
    KBRow,
    KeyValuePair,
    Triplet,
    expand_row,
    hashed_embedding,
    load_embedding_file,
    triplet_to_kv,
)
from .memory import (
    Branch,
    MemoryModule,
    MixtureModel,
    Neighborhood,
    WriteOutcome,
    augment,
    gmm_sample,
    init_memory,
    make_rng,
    merge_key,
    mixing_coefficients,
    nearest_neighbors,
    read,
    similarities,
    write_greedy,
    write_memory_dropout,
)
from .metrics import (
    CorrelationSummary,
    F1Report,
    aggregated_correlation,
    corpus_entity_f1,
    entity_f1,
    pearson_matrix,
)
from .simulator import (
    Axis,
    ExperimentConfig,
    Policy,
    StreamConfig,
    TrajectoryRecord,
    duplicate_heavy_kb,
    kb_retrieval_eval,
    run_experiment,
    sweep,
    synth_stream,
)

__version__ = "0.1.0"
