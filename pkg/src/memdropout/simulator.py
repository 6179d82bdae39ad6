"""Synthetic-stream harness comparing the greedy and memory-dropout write policies."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .kb import EmbeddingProvider, KBRow, KeyValuePair, encode_rows
from .memory import (
    MemoryModule,
    WriteOutcome,
    init_memory,
    read,
    write_greedy,
    write_memory_dropout,
)
from .metrics import F1Report, aggregated_correlation, corpus_entity_f1


class Policy(str, enum.Enum):
    GREEDY = "greedy"
    MEMORY_DROPOUT = "memory_dropout"


class Axis(str, enum.Enum):
    MEMORY_SLOTS = "memory"
    NEIGHBORHOOD = "neighborhood"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class StreamConfig:
    n_clusters: int = 4
    dim: int = 64
    noise_sigma: float = 0.1
    steps: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ConfigError("n_clusters", "must be >= 1")
        if self.dim < 1:
            raise ConfigError("dim", "must be >= 1")
        if not self.noise_sigma >= 0:
            raise ConfigError("noise_sigma", "must be >= 0")
        if self.steps < 1:
            raise ConfigError("steps", "must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ExperimentConfig:
    policy: Policy = Policy.MEMORY_DROPOUT
    memory_slots: int = 64
    neighborhood: int = 8
    epsilon: float = 0.1
    stream: StreamConfig = StreamConfig()
    record_every: int = 100
    eval_queries: int = 500

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.memory_slots < 1:
            raise ConfigError("memory_slots", "must be >= 1")
        if self.neighborhood < 1:
            raise ConfigError("neighborhood", "must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon", "must lie in [0, 1]")
        if self.record_every < 1:
            raise ConfigError("record_every", "must be >= 1")
        if self.eval_queries < 1:
            raise ConfigError("eval_queries", "must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        stream_fields = {f.name for f in dataclasses.fields(StreamConfig)}
        stream_changes = {k: changes.pop(k) for k in list(changes) if k in stream_fields}
        if stream_changes:
            changes["stream"] = dataclasses.replace(self.stream, **stream_changes)
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int
    policy: Policy
    memory_slots: int
    neighborhood: int
    epsilon: float
    seed: int
    agg_correlation: float
    overwrite_count: float
    mean_age: float
    retrieval_f1: Optional[float] = None


CSV_FIELDS = [f.name for f in dataclasses.fields(TrajectoryRecord)]


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("centroids", "stream", "memory", "policy", "queries")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.Generator(np.random.PCG64(c)) for n, c in zip(names, children)}


def draw_centroids(rng: np.random.Generator, n_clusters: int, dim: int) -> np.ndarray:
    c = rng.standard_normal((n_clusters, dim))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def _noisy(rng: np.random.Generator, center: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0:
        return center.copy()
    h = center + sigma * rng.standard_normal(center.shape)
    n = np.linalg.norm(h)
    return h / n if n > 1e-12 else center.copy()


def synth_stream(config: StreamConfig) -> Iterator[tuple[np.ndarray, int, np.ndarray]]:
    """Yield ``(h, label, v)`` for ``config.steps`` steps.

    ``h`` is a cluster centroid plus isotropic noise, renormalized; ``v`` is
    the one-hot vector of the cluster label.
    """
    rngs = _streams(config.seed)
    centroids = draw_centroids(rngs["centroids"], config.n_clusters, config.dim)
    eye = np.eye(config.n_clusters)
    rng = rngs["stream"]
    for _ in range(config.steps):
        label = int(rng.integers(config.n_clusters))
        yield _noisy(rng, centroids[label], config.noise_sigma), label, eye[label]


def write(
    mem: MemoryModule,
    rng: np.random.Generator,
    h,
    v,
    policy: Policy,
    epsilon: float,
    neighborhood: int,
) -> WriteOutcome:
    if policy is Policy.GREEDY:
        return write_greedy(mem, rng, h, v, epsilon)
    return write_memory_dropout(mem, rng, h, v, epsilon, neighborhood)


def _check_aging(before: np.ndarray, mem: MemoryModule, outcome: WriteOutcome) -> None:
    mem.check()
    i = outcome.slot
    if mem.ages[i] != 1 or mem.ages.min() != 1:
        raise AssertionError("aging law violated: written slot must end with age 1")
    touched = np.zeros(mem.n_slots, dtype=bool)
    touched[i] = True
    if outcome.neighborhood is not None:
        touched[outcome.neighborhood.indices] = True
    if not np.array_equal(mem.ages[~touched], before[~touched] + 1):
        raise AssertionError("aging law violated: untouched slots must age by exactly one")


def _nearest_label(v: np.ndarray, table: np.ndarray) -> int:
    return int(np.argmin(((table - v) ** 2).sum(axis=1)))


def stream_retrieval(
    mem: MemoryModule, centroids: np.ndarray, sigma: float, n_queries: int, rng: np.random.Generator
) -> F1Report:
    """Held-out noisy queries drawn from the stream distribution; a hit means the
    returned value is nearest to the query's own one-hot label vector."""
    eye = np.eye(len(centroids))
    cases = []
    for _ in range(n_queries):
        label = int(rng.integers(len(centroids)))
        _, value, _ = read(mem, _noisy(rng, centroids[label], sigma))
        cases.append(({_nearest_label(value, eye)}, {label}))
    return corpus_entity_f1(cases)


def run_experiment(config: ExperimentConfig, check_invariants: bool = False) -> list[TrajectoryRecord]:
    return simulate(config, check_invariants)[0]


def simulate(
    config: ExperimentConfig, check_invariants: bool = False
) -> tuple[list[TrajectoryRecord], MemoryModule]:
    """Write the synthetic stream into a seeded random memory and record the
    trajectory at step 0, every ``record_every`` steps, and at the last step.
    Returns the records and the final memory.

    The last record carries the held-out retrieval F1.  With
    ``check_invariants`` the unit-key and aging laws are asserted after every
    write.
    """
    s = config.stream
    rngs = _streams(s.seed)
    centroids = draw_centroids(rngs["centroids"], s.n_clusters, s.dim)
    mem = init_memory(rngs["memory"], config.memory_slots, s.dim, s.n_clusters)
    policy_rng = rngs["policy"]
    overwrites = 0

    def record(step: int, f1: Optional[float] = None) -> TrajectoryRecord:
        return TrajectoryRecord(
            step=step,
            policy=config.policy,
            memory_slots=config.memory_slots,
            neighborhood=config.neighborhood,
            epsilon=config.epsilon,
            seed=s.seed,
            agg_correlation=aggregated_correlation(mem.keys) if mem.n_slots >= 2 and s.dim >= 2 else 0.0,
            overwrite_count=overwrites,
            mean_age=float(mem.ages.mean()),
            retrieval_f1=f1,
        )

    records = [record(0)]
    for step, (h, _, v) in enumerate(synth_stream(s), start=1):
        before = mem.ages.copy() if check_invariants else None
        outcome = write(mem, policy_rng, h, v, config.policy, config.epsilon, config.neighborhood)
        overwrites += outcome.branch.is_overwrite
        if check_invariants:
            _check_aging(before, mem, outcome)
        if step == s.steps:
            f1 = stream_retrieval(mem, centroids, s.noise_sigma, config.eval_queries, rngs["queries"])
            records.append(record(step, f1.f1))
        elif step % config.record_every == 0:
            records.append(record(step))
    return records, mem


def kb_retrieval_eval(
    pairs: Sequence[KeyValuePair],
    policy: Policy = Policy.MEMORY_DROPOUT,
    memory_slots: int = 64,
    neighborhood: int = 8,
    epsilon: float = 0.1,
    query_noise: float = 0.1,
    n_queries: int = 300,
    seed: int = 0,
) -> F1Report:
    """Write ``pairs`` in order into a fresh (empty) memory, then query it.

    Each query perturbs the key of a uniformly chosen distinct triplet with
    Gaussian noise ``query_noise`` and counts a hit when the value read back is
    nearest to the gold object's embedding among all distinct objects.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    policy = Policy(policy)
    rngs = _streams(seed)
    d, dv = len(pairs[0].key), len(pairs[0].value)
    mem = init_memory(rngs["memory"], memory_slots, d, dv, empty=True)
    for p in pairs:
        write(mem, rngs["policy"], p.key, p.value, policy, epsilon, neighborhood)

    distinct: dict = {}
    objects: dict = {}
    for p in pairs:
        distinct.setdefault(p.provenance, p)
        objects.setdefault(p.provenance.object.casefold(), p.value)
    queryable = list(distinct.values())
    names = list(objects)
    table = np.array([objects[n] for n in names])

    rng = rngs["queries"]
    cases = []
    for _ in range(n_queries):
        gold = queryable[int(rng.integers(len(queryable)))]
        _, value, _ = read(mem, _noisy(rng, gold.key, query_noise))
        cases.append(({names[_nearest_label(value, table)]}, {gold.provenance.object.casefold()}))
    return corpus_entity_f1(cases)


CALENDAR_COLUMNS = ("event", "date", "time", "party")


def duplicate_heavy_kb(
    n_rows: int = 8, repeats: int = 8, dim: int = 64, seed: int = 0
) -> list[KeyValuePair]:
    """Calendar-style KB whose write stream is dominated by a few hot facts.

    Every distinct triplet appears once; ``(repeats - 1)`` times as many extra
    writes are drawn from a Zipf(1) popularity over a random ranking of the
    triplets.  The result is shuffled.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD0B1]))
    rows = [
        KBRow(CALENDAR_COLUMNS, tuple(f"{c}-{seed}-{r}" for c in CALENDAR_COLUMNS)) for r in range(n_rows)
    ]
    base = encode_rows(rows, EmbeddingProvider(dim, seed=seed))
    u = len(base)
    weights = 1.0 / np.arange(1, u + 1)
    weights /= weights.sum()
    ranking = rng.permutation(u)
    extra = ranking[rng.choice(u, size=u * (repeats - 1), p=weights)]
    order = np.concatenate([np.arange(u), extra])
    rng.shuffle(order)
    return [base[k] for k in order]


def _final_record(config: ExperimentConfig) -> TrajectoryRecord:
    return run_experiment(config)[-1]


def _mean_record(records: Sequence[TrajectoryRecord], seed: int) -> TrajectoryRecord:
    if len(records) == 1:
        return records[0]
    first = records[0]
    return dataclasses.replace(
        first,
        seed=seed,
        agg_correlation=float(np.mean([r.agg_correlation for r in records])),
        overwrite_count=float(np.mean([r.overwrite_count for r in records])),
        mean_age=float(np.mean([r.mean_age for r in records])),
        retrieval_f1=float(np.mean([r.retrieval_f1 for r in records])),
    )


def sweep(
    base: ExperimentConfig,
    axis: Axis,
    values: Sequence[int],
    n_seeds: int = 1,
    policies: Sequence[Policy] = (Policy.GREEDY, Policy.MEMORY_DROPOUT),
    workers: int = 1,
) -> list[TrajectoryRecord]:
    """One summary row (the final trajectory record) per (value, policy).

    Runs use seeds ``base_seed + r`` for ``r < n_seeds``; with several seeds
    the numeric columns are averaged and the row carries the base seed.  Rows
    come back in (value, policy) order whatever ``workers`` is.
    """
    if not values:
        raise ValueError("sweep needs at least one value")
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    axis = Axis(axis)
    field = "memory_slots" if axis is Axis.MEMORY_SLOTS else "neighborhood"
    grid = []
    for value in values:
        for policy in policies:
            for r in range(n_seeds):
                grid.append(base.replace(**{field: int(value)}, policy=policy, seed=base.stream.seed + r))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(_final_record, grid))
    else:
        finals = [_final_record(c) for c in grid]
    return [
        _mean_record(finals[k : k + n_seeds], base.stream.seed) for k in range(0, len(finals), n_seeds)
    ]


# --- text formats -----------------------------------------------------------

CONFIG_FIELDS = {
    "policy": str,
    "memory_slots": int,
    "neighborhood": int,
    "epsilon": float,
    "record_every": int,
    "eval_queries": int,
    "n_clusters": int,
    "dim": int,
    "noise_sigma": float,
    "steps": int,
    "seed": int,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).  Every field in
    :data:`CONFIG_FIELDS` is required; unknown or repeated keys are errors."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_FIELDS:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "given more than once")
        raw[key] = value
    for key in CONFIG_FIELDS:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    parsed = {}
    for key, kind in CONFIG_FIELDS.items():
        try:
            parsed[key] = kind(raw[key])
        except ValueError:
            raise ConfigError(key, f"cannot parse {raw[key]!r} as {kind.__name__}") from None
    try:
        parsed["policy"] = Policy(parsed["policy"])
    except ValueError:
        raise ConfigError("policy", f"expected one of {[p.value for p in Policy]}") from None
    stream = StreamConfig(
        n_clusters=parsed["n_clusters"],
        dim=parsed["dim"],
        noise_sigma=parsed["noise_sigma"],
        steps=parsed["steps"],
        seed=parsed["seed"],
    )
    return ExperimentConfig(
        policy=parsed["policy"],
        memory_slots=parsed["memory_slots"],
        neighborhood=parsed["neighborhood"],
        epsilon=parsed["epsilon"],
        stream=stream,
        record_every=parsed["record_every"],
        eval_queries=parsed["eval_queries"],
    )


def format_config(config: ExperimentConfig) -> str:
    s = config.stream
    values = {
        "policy": config.policy.value,
        "memory_slots": config.memory_slots,
        "neighborhood": config.neighborhood,
        "epsilon": repr(config.epsilon),
        "record_every": config.record_every,
        "eval_queries": config.eval_queries,
        "n_clusters": s.n_clusters,
        "dim": s.dim,
        "noise_sigma": repr(s.noise_sigma),
        "steps": s.steps,
        "seed": s.seed,
    }
    return "".join(f"{k} = {v}\n" for k, v in values.items())


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Policy):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6f}"


def write_trajectory_csv(records: Sequence[TrajectoryRecord], fh=None) -> str:
    """Render records with the fixed column order; also writes to ``fh`` if given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_cell(getattr(r, name)) for name in CSV_FIELDS])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
