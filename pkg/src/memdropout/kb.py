"""Knowledge-base rows -> (subject, relation, object) triplets -> key-value pairs."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class KBRow:
    columns: tuple[str, ...]
    cells: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "cells", tuple(self.cells))
        if len(self.columns) != len(self.cells):
            raise ValueError("columns and cells must have equal length")
        if len(self.columns) < 2:
            raise ValueError("a KB row needs at least two columns")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"duplicate column names in {self.columns}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "KBRow":
        return cls(tuple(mapping), tuple(mapping.values()))


@dataclass(frozen=True)
class Triplet:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True, eq=False)
class KeyValuePair:
    key: np.ndarray
    value: np.ndarray
    provenance: Triplet


def expand_row(row: KBRow) -> list[Triplet]:
    """All ``c * (c - 1)`` triplets of a row: each cell paired with every other
    column, ordered by (subject position, object position)."""
    c = len(row.cells)
    return [
        Triplet(row.cells[a], row.columns[b], row.cells[b])
        for a in range(c)
        for b in range(c)
        if a != b
    ]


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def hashed_embedding(token: str, dim: int, seed: int = 0) -> np.ndarray:
    """Unit vector for ``token``: FNV-1a 64 of its UTF-8 bytes, mixed with ``seed``
    through a numpy SeedSequence, drives ``dim`` standard normals."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([fnv1a_64(token.encode("utf-8")), seed])))
    x = rng.standard_normal(dim)
    return x / np.linalg.norm(x)


class EmbeddingProvider:
    """Deterministic token -> vector map.

    Hashed mode (``vocab is None``) draws every word from
    :func:`hashed_embedding`.  File-backed mode looks tokens up in ``vocab`` and
    falls back to hashed vectors for unknown words.  Multi-word tokens not
    found verbatim embed as the normalized sum of their words.
    """

    def __init__(self, dim: int, seed: int = 0, vocab: Optional[dict[str, np.ndarray]] = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.vocab = vocab
        self._warned: set[str] = set()

    @property
    def mode(self) -> str:
        return "hashed" if self.vocab is None else "file"

    def _word(self, word: str) -> np.ndarray:
        if self.vocab is not None:
            vec = self.vocab.get(word)
            if vec is not None:
                return vec
            if word not in self._warned:
                self._warned.add(word)
                logger.warning("token %r not in embedding file; using hashed fallback", word)
        return hashed_embedding(word, self.dim, self.seed)

    def __call__(self, token: str) -> np.ndarray:
        if self.vocab is not None and token in self.vocab:
            return self.vocab[token].copy()
        words = token.split()
        if len(words) <= 1:
            return self._word(token.strip() or token).copy()
        total = np.sum([self._word(w) for w in words], axis=0)
        n = np.linalg.norm(total)
        if n < 1e-12:
            raise ValueError(f"word embeddings of {token!r} cancel out")
        return total / n


def load_embedding_file(path, seed: int = 0) -> EmbeddingProvider:
    """Read GloVe-style text (``token f1 ... fd`` per line, no header)."""
    vocab: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if len(parts) < 2:
                raise EmbeddingFormatError(f"{path}:{lineno}: expected a token followed by floats")
            token, fields = parts[0], parts[1:]
            try:
                vec = np.array([float(f) for f in fields], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite value")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise EmbeddingFormatError(f"{path}:{lineno}: dimension {len(vec)} differs from {dim}")
            if token in vocab:
                logger.warning("%s:%d: duplicate token %r, keeping the later vector", path, lineno, token)
            vocab[token] = vec
    if dim is None:
        raise EmbeddingFormatError(f"{path}: no embeddings found")
    return EmbeddingProvider(dim, seed=seed, vocab=vocab)


def triplet_to_kv(t: Triplet, emb: EmbeddingProvider) -> KeyValuePair:
    """Key = normalized sum of subject and relation embeddings; value = object embedding.

    Subject and object are case-folded; the relation (a column name) is used as is.
    """
    s = emb(t.subject.casefold()) + emb(t.relation)
    n = np.linalg.norm(s)
    if n < 1e-8:
        raise ValueError(f"subject and relation embeddings cancel for {t}")
    return KeyValuePair(key=s / n, value=emb(t.object.casefold()), provenance=t)


def read_kb_csv(path) -> list[KBRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty KB file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
            rows.append(KBRow(tuple(header), tuple(c.strip() for c in cells)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def encode_rows(rows: Iterable[KBRow], emb: EmbeddingProvider) -> list[KeyValuePair]:
    return [triplet_to_kv(t, emb) for row in rows for t in expand_row(row)]


def write_triplets(path, triplets: Sequence[Triplet]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for t in triplets:
            w.writerow([t.subject, t.relation, t.object])


def write_kv_dump(path, pairs: Sequence[KeyValuePair]) -> None:
    """Text dump: a ``count key_dim value_dim`` header, then one line per pair
    holding the key floats followed by the value floats (repr precision)."""
    path = Path(path)
    d = len(pairs[0].key) if pairs else 0
    dv = len(pairs[0].value) if pairs else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(pairs)} {d} {dv}\n")
        for p in pairs:
            fh.write(" ".join(repr(float(x)) for x in np.concatenate([p.key, p.value])) + "\n")


def read_kv_dump(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        count, d, dv = (int(x) for x in fh.readline().split())
        data = np.array([[float(x) for x in line.split()] for line in fh if line.strip()])
    data = data.reshape(count, d + dv)
    return data[:, :d], data[:, d:]
