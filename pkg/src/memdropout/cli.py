"""``memdropout`` command line: run, sweep, expand-kb, correlate, snapshot.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration
error.  Data goes to stdout or ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import snapshot
from .kb import (
    EmbeddingFormatError,
    EmbeddingProvider,
    encode_rows,
    expand_row,
    load_embedding_file,
    read_kb_csv,
    write_kv_dump,
    write_triplets,
)
from .metrics import aggregated_correlation, pearson_matrix
from .simulator import (
    Axis,
    ConfigError,
    parse_config,
    simulate,
    sweep,
    write_trajectory_csv,
)

log = logging.getLogger("memdropout")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_config(path: str, seed):
    text = Path(path).read_text(encoding="utf-8")
    try:
        config = parse_config(text)
        if seed is not None:
            config = config.replace(seed=seed)
    except ConfigError as exc:
        raise UsageError(f"config error in {path}: {exc}") from None
    return config


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    config = _load_config(args.config, args.seed)
    records, mem = simulate(config)
    _emit(write_trajectory_csv(records), args.out)
    if args.snapshot:
        snapshot.save(mem, args.snapshot)
    return EXIT_OK


def _parse_values(text: str) -> list[int]:
    parts = [p.strip() for p in text.split(",")]
    if not text.strip() or any(not p for p in parts):
        raise UsageError("--values must be a non-empty comma-separated list of positive integers")
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"--values: cannot parse {text!r} as integers") from None
    if any(v < 1 for v in values):
        raise UsageError("--values must all be positive")
    return values


def cmd_sweep(args) -> int:
    values = _parse_values(args.values)
    config = _load_config(args.config, args.seed)
    rows = sweep(config, Axis(args.axis), values, n_seeds=args.seeds, workers=args.workers)
    _emit(write_trajectory_csv(rows), args.out)
    return EXIT_OK


def _embedding(spec: str, dim: int, seed: int) -> EmbeddingProvider:
    if spec == "hashed":
        return EmbeddingProvider(dim, seed=seed)
    if spec.startswith("file:"):
        try:
            return load_embedding_file(spec[5:], seed=seed)
        except EmbeddingFormatError as exc:
            raise UsageError(str(exc)) from None
    raise UsageError(f"--emb must be 'hashed' or 'file:PATH', got {spec!r}")


def cmd_expand_kb(args) -> int:
    try:
        rows = read_kb_csv(args.csv)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    emb = _embedding(args.emb, args.dim, args.seed)
    triplets = [t for row in rows for t in expand_row(row)]
    pairs = encode_rows(rows, emb)
    out = Path(args.out)
    write_triplets(out, triplets)
    write_kv_dump(out.with_name(out.name + ".kv"), pairs)
    print(f"{len(rows)} rows -> {len(triplets)} triplets", file=sys.stderr)
    return EXIT_OK


def _load_snapshot(path: str):
    try:
        return snapshot.load(path)
    except snapshot.SnapshotError as exc:
        raise UsageError(f"malformed snapshot {path}: {exc}") from None


def cmd_correlate(args) -> int:
    mem = _load_snapshot(args.snapshot)
    try:
        agg = aggregated_correlation(mem.keys)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{agg:.6f}")
    if args.full:
        corr = pearson_matrix(mem.keys)
        lines = "".join(",".join(f"{x:.6f}" for x in row) + "\n" for row in corr)
        _emit(lines, None if args.full == "-" else args.full)
    return EXIT_OK


def cmd_snapshot(args) -> int:
    mem = _load_snapshot(args.snapshot)
    lines = [f"slots={mem.n_slots} key_dim={mem.key_dim} value_dim={mem.value_dim}"]
    lines.append("slot,age,occupied,key_norm,variance_sum,variance_max")
    norms = np.linalg.norm(mem.keys, axis=1)
    for i in range(mem.n_slots):
        s = mem.variances[i]
        lines.append(
            f"{i},{int(mem.ages[i])},{int(mem.occupied[i])},{norms[i]:.6f},{s.sum():.6f},{s.max():.6f}"
        )
    print("\n".join(lines))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memdropout", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one experiment and write its trajectory CSV")
    p.add_argument("config")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--snapshot", help="also save the final memory to this path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep memory size or neighborhood for both policies")
    p.add_argument("config")
    p.add_argument("--axis", required=True, choices=[a.value for a in Axis])
    p.add_argument("--values", required=True, help="comma-separated positive integers")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, default=1, help="seeds averaged per row")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("expand-kb", help="expand a KB CSV into triplets and key-value pairs")
    p.add_argument("csv")
    p.add_argument("--emb", default="hashed", help="'hashed' or 'file:PATH' (GloVe text)")
    p.add_argument("--dim", type=int, default=64, help="dimension for hashed embeddings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="triplet CSV; key-value dump goes to OUT.kv")
    p.set_defaults(func=cmd_expand_kb)

    p = sub.add_parser("correlate", help="aggregated key correlation of a memory snapshot")
    p.add_argument("snapshot")
    p.add_argument("--full", nargs="?", const="-", help="also dump the matrix as CSV (to PATH or stdout)")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("snapshot", help="dump per-slot ages and variances of a snapshot")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_snapshot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        if getattr(args, "dim", 1) < 1:
            raise UsageError("--dim must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"memdropout: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"memdropout: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
