"""Key-value external memory with greedy and memory-dropout write policies.

A memory holds four parallel arrays: unit-norm keys ``K`` (N x d), values
``V`` (N x d_v), integer ages ``A`` (N,) and per-dimension key variances
``S`` (N x d).  All writes mutate the memory in place and must be serialized
by the caller; reads never mutate.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

DEGENERATE_NORM = 1e-8

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a PCG64 generator for an unsigned 64-bit seed (generators pass through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = np.linalg.norm(x)
    if n < DEGENERATE_NORM:
        raise ValueError("cannot normalize a (near) zero vector")
    return x / n


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


class Branch(enum.Enum):
    FILL = "fill"
    OVERWRITE_OLDEST = "overwrite_oldest"
    DROPOUT_UPDATE = "dropout_update"
    # greedy baseline branches
    OVERWRITE_RANDOM = "overwrite_random"
    MERGE = "merge"

    @property
    def is_overwrite(self) -> bool:
        return self in (Branch.OVERWRITE_OLDEST, Branch.OVERWRITE_RANDOM)


@dataclass(frozen=True)
class Neighborhood:
    indices: np.ndarray
    similarities: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class MixtureModel:
    """Diagonal Gaussian mixture: component means, variances and weights."""

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.means.shape != self.variances.shape:
            raise ValueError("means and variances must have the same shape")
        if self.weights.shape != (self.means.shape[0],):
            raise ValueError("one weight per component required")
        if np.any(self.variances < 0):
            raise ValueError("variances must be non-negative")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.means


@dataclass(frozen=True)
class WriteOutcome:
    branch: Branch
    slot: int
    sampled: Optional[np.ndarray] = None
    neighborhood: Optional[Neighborhood] = None


@dataclass(eq=False)
class MemoryModule:
    """The memory ``M = (K, V, A, S)``.

    ``occupied`` flags slots holding real content.  It defaults to all-True
    (a full memory); free slots are filled in index order before either
    replacement policy runs.
    """

    keys: np.ndarray
    values: np.ndarray
    ages: np.ndarray
    variances: np.ndarray
    occupied: np.ndarray = field(default=None)

    def __post_init__(self):
        self.keys = np.array(self.keys, dtype=np.float64, ndmin=2)
        n = self.keys.shape[0]
        self.values = np.array(self.values, dtype=np.float64).reshape(n, -1)
        self.ages = np.array(self.ages, dtype=np.int64).reshape(n)
        self.variances = np.array(self.variances, dtype=np.float64).reshape(self.keys.shape)
        if self.occupied is None:
            self.occupied = np.ones(n, dtype=bool)
        else:
            self.occupied = np.array(self.occupied, dtype=bool).reshape(n)
        self.check()

    @property
    def n_slots(self) -> int:
        return self.keys.shape[0]

    @property
    def key_dim(self) -> int:
        return self.keys.shape[1]

    @property
    def value_dim(self) -> int:
        return self.values.shape[1]

    @property
    def is_full(self) -> bool:
        return bool(self.occupied.all())

    def check(self, atol: float = 1e-6) -> None:
        """Raise AssertionError if any structural invariant is violated."""
        if self.n_slots < 1 or self.key_dim < 1:
            raise AssertionError("memory needs N >= 1 and d >= 1")
        for name in ("keys", "values", "variances"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise AssertionError(f"non-finite entries in {name}")
        norms = np.linalg.norm(self.keys, axis=1)
        if np.any(np.abs(norms - 1.0) > atol):
            raise AssertionError(f"key norms off unit: max dev {np.abs(norms - 1).max():.3g}")
        if np.any(self.ages < 0):
            raise AssertionError("negative age")
        if np.any(self.variances < 0):
            raise AssertionError("negative variance")

    def copy(self) -> "MemoryModule":
        return copy.deepcopy(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MemoryModule):
            return NotImplemented
        return (
            np.array_equal(self.keys, other.keys)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.ages, other.ages)
            and np.array_equal(self.variances, other.variances)
            and np.array_equal(self.occupied, other.occupied)
        )


def init_memory(
    rng: SeedLike, n_slots: int, key_dim: int, value_dim: int, *, empty: bool = False
) -> MemoryModule:
    """Random unit keys with zero values, ages and variances.

    By default every slot counts as occupied, so the replacement policies act
    from the first write.  ``empty=True`` marks the slots as free: writes then
    land in free slots (lowest index first) until the memory is full.
    """
    if n_slots < 1 or key_dim < 1 or value_dim < 0:
        raise ValueError("need n_slots >= 1, key_dim >= 1, value_dim >= 0")
    rng = make_rng(rng)
    keys = rng.standard_normal((n_slots, key_dim))
    norms = np.linalg.norm(keys, axis=1, keepdims=True)
    # resample (practically never) rows too short to normalize safely
    while np.any(norms < DEGENERATE_NORM):
        bad = norms[:, 0] < DEGENERATE_NORM
        keys[bad] = rng.standard_normal((int(bad.sum()), key_dim))
        norms = np.linalg.norm(keys, axis=1, keepdims=True)
    keys /= norms
    return MemoryModule(
        keys=keys,
        values=np.zeros((n_slots, value_dim)),
        ages=np.zeros(n_slots, dtype=np.int64),
        variances=np.zeros((n_slots, key_dim)),
        occupied=np.full(n_slots, not empty),
    )


def _as_query(mem: MemoryModule, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (mem.key_dim,):
        raise ValueError(f"query has shape {h.shape}, memory expects ({mem.key_dim},)")
    if not np.all(np.isfinite(h)):
        raise ValueError("query has non-finite entries")
    return h


def _as_value(mem: MemoryModule, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (mem.value_dim,):
        raise ValueError(f"value has shape {v.shape}, memory expects ({mem.value_dim},)")
    return v


def similarities(keys, h) -> np.ndarray:
    """Row-wise ``K[i] . h``.

    A BLAS matrix-vector product can give identical rows different last-bit
    results, which would break lowest-index tie-breaking; a per-row reduction
    of the elementwise product cannot.
    """
    return (np.asarray(keys, dtype=np.float64) * np.asarray(h, dtype=np.float64)).sum(axis=1)


def read(mem: MemoryModule, h) -> tuple[int, np.ndarray, np.ndarray]:
    """Content lookup: ``(index, V[index], attention)``.

    ``index`` is the argmax of ``h . K[i]`` (ties go to the lowest index) and
    ``attention`` is the softmax over all N dot products.
    """
    h = _as_query(mem, h)
    scores = similarities(mem.keys, h)
    i = int(np.argmax(scores))
    return i, mem.values[i].copy(), softmax(scores)


def merge_key(k, h) -> np.ndarray:
    """``(k + h) / ||k + h||``; falls back to ``h`` normalized when the sum vanishes."""
    s = np.asarray(k, dtype=np.float64) + np.asarray(h, dtype=np.float64)
    n = np.linalg.norm(s)
    if n < DEGENERATE_NORM:
        return normalize(h)
    return s / n


def nearest_neighbors(mem: MemoryModule, h, p: int) -> Neighborhood:
    if p < 1:
        raise ValueError("neighborhood size must be >= 1")
    h = _as_query(mem, h)
    scores = similarities(mem.keys, h)
    # stable sort on negated scores keeps lowest index first among ties
    order = np.argsort(-scores, kind="stable")[: min(p, mem.n_slots)]
    return Neighborhood(indices=order, similarities=scores[order])


def mixing_coefficients(h, neighbor_keys) -> np.ndarray:
    return softmax(similarities(neighbor_keys, h))


def gmm_sample(rng: SeedLike, mix: MixtureModel) -> np.ndarray:
    """Draw one vector: pick a component by its weight, then sample its diagonal Gaussian.

    Always consumes exactly one uniform and ``d`` normals from ``rng``.
    """
    rng = make_rng(rng)
    u = rng.random()
    cdf = np.cumsum(mix.weights)
    j = min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(cdf) - 1)
    noise = rng.standard_normal(mix.means.shape[1])
    return mix.means[j] + noise * np.sqrt(mix.variances[j])


def augment(h, v) -> np.ndarray:
    return np.concatenate([np.asarray(h, dtype=np.float64), np.asarray(v, dtype=np.float64)])


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")


def _fill_free_slot(mem: MemoryModule, h: np.ndarray, v: np.ndarray) -> Optional[WriteOutcome]:
    free = np.flatnonzero(~mem.occupied)
    if free.size == 0:
        return None
    i = int(free[0])
    mem.keys[i] = normalize(h)
    mem.values[i] = v
    mem.variances[i] = 0.0
    mem.ages[i] = 0
    mem.occupied[i] = True
    mem.ages += 1
    return WriteOutcome(Branch.FILL, i)


def write_memory_dropout(
    mem: MemoryModule,
    rng: SeedLike,
    h,
    v,
    epsilon: float = 0.1,
    p: int = 8,
    sample_on_sphere: bool = True,
) -> WriteOutcome:
    """Write ``(h, v)`` with the memory-dropout policy.

    With probability ``epsilon`` the oldest slot is overwritten.  Otherwise a
    surrogate ``h'`` is sampled from the Gaussian mixture over the ``p`` keys
    nearest to ``h``, merged with ``h`` into the nearest slot, and the other
    neighbors inherit the current maximum age so they are overwritten first
    later on.  Every slot then ages by one.

    ``sample_on_sphere`` projects ``h'`` back onto the unit sphere before it
    is merged and before the variance ``(h - h')**2`` is stored, which keeps
    every variance entry <= 4.  Without it the stored variance feeds the next
    draw and grows without bound on frequently written slots.
    """
    _check_epsilon(epsilon)
    if p < 1:
        raise ValueError("neighborhood size must be >= 1")
    h = _as_query(mem, h)
    v = _as_value(mem, v)
    filled = _fill_free_slot(mem, h, v)
    if filled is not None:
        return filled
    rng = make_rng(rng)

    if rng.random() < epsilon:
        i = int(np.argmax(mem.ages))
        mem.keys[i] = normalize(h)
        mem.values[i] = v
        mem.variances[i] = 0.0
        mem.ages[i] = 0
        mem.ages += 1
        return WriteOutcome(Branch.OVERWRITE_OLDEST, i)

    hood = nearest_neighbors(mem, h, p)
    knn = hood.indices
    mix = MixtureModel(
        means=mem.keys[knn].copy(),
        variances=mem.variances[knn].copy(),
        weights=mixing_coefficients(h, mem.keys[knn]),
    )
    h_prime = gmm_sample(rng, mix)
    if sample_on_sphere:
        n = np.linalg.norm(h_prime)
        if n >= DEGENERATE_NORM:
            h_prime = h_prime / n
    i = int(knn[0])
    mem.keys[i] = merge_key(h_prime, h)
    mem.ages[knn] = mem.ages.max()
    mem.variances[i] = (h - h_prime) ** 2
    mem.ages[i] = 0
    mem.values[i] = v
    mem.ages += 1
    return WriteOutcome(Branch.DROPOUT_UPDATE, i, sampled=h_prime, neighborhood=hood)


def write_greedy(mem: MemoryModule, rng: SeedLike, h, v, epsilon: float = 0.1) -> WriteOutcome:
    """Baseline: overwrite a uniformly random slot with probability ``epsilon``,
    otherwise merge ``h`` into the most similar key."""
    _check_epsilon(epsilon)
    h = _as_query(mem, h)
    v = _as_value(mem, v)
    filled = _fill_free_slot(mem, h, v)
    if filled is not None:
        return filled
    rng = make_rng(rng)

    if rng.random() < epsilon:
        i = int(rng.integers(mem.n_slots))
        mem.keys[i] = normalize(h)
        mem.variances[i] = 0.0
        branch = Branch.OVERWRITE_RANDOM
    else:
        i = int(np.argmax(similarities(mem.keys, h)))
        mem.keys[i] = merge_key(mem.keys[i], h)
        branch = Branch.MERGE
    mem.values[i] = v
    mem.ages[i] = 0
    mem.ages += 1
    return WriteOutcome(branch, i)
