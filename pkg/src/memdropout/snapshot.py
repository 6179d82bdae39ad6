"""Lossless text snapshots of a :class:`~memdropout.memory.MemoryModule`.

Layout::

    memdropout-snapshot 1
    <N> <d> <d_v>
    keys
    <N lines of d floats>
    values
    <N lines of d_v floats>
    ages
    <N integers on one line>
    variances
    <N lines of d floats>
    occupied
    <N 0/1 flags on one line>

Floats are written with ``repr`` so they round-trip exactly.  The
``occupied`` section is optional on read (absent means a full memory).
"""

from __future__ import annotations

import io

import numpy as np

from .memory import MemoryModule

MAGIC = "memdropout-snapshot 1"


class SnapshotError(ValueError):
    pass


def _rows(a: np.ndarray) -> str:
    return "".join(" ".join(repr(float(x)) for x in row) + "\n" for row in a)


def dumps(mem: MemoryModule) -> str:
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(f"{mem.n_slots} {mem.key_dim} {mem.value_dim}\n")
    out.write("keys\n" + _rows(mem.keys))
    out.write("values\n" + _rows(mem.values))
    out.write("ages\n" + " ".join(str(int(a)) for a in mem.ages) + "\n")
    out.write("variances\n" + _rows(mem.variances))
    out.write("occupied\n" + " ".join("1" if o else "0" for o in mem.occupied) + "\n")
    return out.getvalue()


def save(mem: MemoryModule, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(mem))


def loads(text: str) -> MemoryModule:
    lines = text.splitlines()
    pos = 0

    def take(label: str) -> None:
        nonlocal pos
        if pos >= len(lines) or lines[pos].strip() != label:
            found = lines[pos].strip() if pos < len(lines) else "end of file"
            raise SnapshotError(f"line {pos + 1}: expected {label!r}, found {found!r}")
        pos += 1

    def matrix(n: int, width: int) -> np.ndarray:
        nonlocal pos
        rows = []
        for _ in range(n):
            if pos >= len(lines):
                raise SnapshotError("unexpected end of snapshot")
            fields = lines[pos].split()
            if len(fields) != width:
                raise SnapshotError(f"line {pos + 1}: expected {width} numbers, got {len(fields)}")
            try:
                rows.append([float(x) for x in fields])
            except ValueError as exc:
                raise SnapshotError(f"line {pos + 1}: {exc}") from None
            pos += 1
        return np.array(rows, dtype=np.float64).reshape(n, width)

    take(MAGIC)
    try:
        n, d, dv = (int(x) for x in lines[pos].split())
    except (IndexError, ValueError):
        raise SnapshotError(f"line {pos + 1}: expected 'N d d_v'") from None
    pos += 1
    take("keys")
    keys = matrix(n, d)
    take("values")
    values = matrix(n, dv)
    take("ages")
    ages = matrix(1, n).astype(np.int64)[0]
    take("variances")
    variances = matrix(n, d)
    occupied = None
    if pos < len(lines) and lines[pos].strip() == "occupied":
        pos += 1
        occupied = matrix(1, n)[0] != 0
    try:
        return MemoryModule(keys, values, ages, variances, occupied)
    except (AssertionError, ValueError) as exc:
        raise SnapshotError(f"snapshot violates memory invariants: {exc}") from None


def load(path) -> MemoryModule:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
