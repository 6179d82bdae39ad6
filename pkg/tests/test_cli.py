import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from memdropout import MemoryModule, init_memory
from memdropout.cli import main
from memdropout.simulator import CSV_FIELDS
from memdropout.snapshot import save

DATA = Path(__file__).parent / "data"
DEFAULT_CFG = (DATA / "default.cfg").read_text()


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(DEFAULT_CFG.replace("steps = 2000", "steps = 400").replace("dim = 64", "dim = 16"))
    return path


def test_run_writes_trajectory(small_cfg, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["run", str(small_cfg), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert len(lines) == 1 + 5  # steps 0, 100, 200, 300, 400


def test_run_to_stdout_and_seed_override(small_cfg, capsys):
    assert main(["run", str(small_cfg), "--seed", "7"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert all(r.split(",")[5] == "7" for r in rows)


def test_run_missing_key_names_it(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(DEFAULT_CFG.replace("epsilon = 0.1\n", ""))
    assert main(["run", str(cfg)]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_run_missing_file_is_io_error(tmp_path):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 1


def test_run_unwritable_output(small_cfg, tmp_path):
    assert main(["run", str(small_cfg), "--out", str(tmp_path / "no" / "dir.csv")]) == 1


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["sweep", "x.cfg", "--axis", "width", "--values", "1"]) == 2


def test_sweep_row_count(small_cfg, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(small_cfg), "--axis", "memory", "--values", "16,32", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 4
    assert [r.split(",")[2] for r in rows] == ["16", "16", "32", "32"]


@pytest.mark.parametrize("values", ["", "16,,32", "a,b", "0,4"])
def test_sweep_bad_values(small_cfg, values):
    assert main(["sweep", str(small_cfg), "--axis", "memory", "--values", values]) == 2


@pytest.mark.slow
def test_default_neighborhood_sweep_is_fast(tmp_path):
    cfg = tmp_path / "d.cfg"
    cfg.write_text(DEFAULT_CFG)
    start = time.perf_counter()
    assert main(["sweep", str(cfg), "--axis", "neighborhood", "--values", "5,10,15", "--out", str(tmp_path / "s.csv")]) == 0
    assert time.perf_counter() - start < 60


@pytest.mark.parametrize("name, rows, per_row", [("dentist", 1, 12), ("navigation", 8, 20), ("calendar", 6, 12)])
def test_expand_kb_counts(tmp_path, capsys, name, rows, per_row):
    out = tmp_path / "triplets.csv"
    assert main(["expand-kb", str(DATA / f"{name}.csv"), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == rows * per_row
    kv = (tmp_path / "triplets.csv.kv").read_text().splitlines()
    assert kv[0].split()[0] == str(rows * per_row)
    assert f"{rows * per_row} triplets" in capsys.readouterr().err


def test_expand_kb_with_embedding_file(tmp_path):
    emb = tmp_path / "emb.txt"
    emb.write_text("dentist 1 0 0\nmike 0 1 0\n")
    out = tmp_path / "t.csv"
    assert main(["expand-kb", str(DATA / "dentist.csv"), "--emb", f"file:{emb}", "--out", str(out)]) == 0
    assert (tmp_path / "t.csv.kv").read_text().splitlines()[0] == "12 3 3"


def test_expand_kb_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("event,date\n")
    assert main(["expand-kb", str(empty), "--out", str(tmp_path / "o.csv")]) == 2
    bad_emb = tmp_path / "emb.txt"
    bad_emb.write_text("a 1 x\n")
    args = ["expand-kb", str(DATA / "dentist.csv"), "--out", str(tmp_path / "o.csv")]
    assert main(args + ["--emb", f"file:{bad_emb}"]) == 2
    assert main(args + ["--emb", "glove"]) == 2
    assert main(args + ["--dim", "0"]) == 2
    assert main(["expand-kb", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o.csv")]) == 1


def _snapshot(tmp_path, mem):
    path = tmp_path / "m.snap"
    save(mem, path)
    return str(path)


def test_correlate_identical_keys(tmp_path, capsys):
    key = np.array([0.1, 0.5, -0.3, 0.7])
    key /= np.linalg.norm(key)
    mem = MemoryModule(np.tile(key, (3, 1)), np.zeros((3, 1)), np.zeros(3), np.zeros((3, 4)))
    assert main(["correlate", _snapshot(tmp_path, mem)]) == 0
    assert capsys.readouterr().out == "1.000000\n"


def test_correlate_random_memory(tmp_path, capsys):
    assert main(["correlate", _snapshot(tmp_path, init_memory(0, 32, 64, 1))]) == 0
    assert float(capsys.readouterr().out) < 0.3


def test_correlate_full_matrix(tmp_path, capsys):
    assert main(["correlate", _snapshot(tmp_path, init_memory(1, 4, 8, 1)), "--full"]) == 0
    lines = capsys.readouterr().out.splitlines()
    corr = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    assert corr.shape == (4, 4)
    np.testing.assert_array_equal(corr, corr.T)
    np.testing.assert_array_equal(np.diag(corr), 1.0)


def test_correlate_malformed(tmp_path):
    bad = tmp_path / "bad.snap"
    bad.write_text("not a snapshot\n")
    assert main(["correlate", str(bad)]) == 2
    assert main(["snapshot", str(bad)]) == 2
    assert main(["correlate", str(tmp_path / "absent.snap")]) == 1


def test_snapshot_dump(small_cfg, tmp_path, capsys):
    snap = tmp_path / "final.snap"
    assert main(["run", str(small_cfg), "--out", str(tmp_path / "t.csv"), "--snapshot", str(snap)]) == 0
    assert main(["snapshot", str(snap)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "slots=64 key_dim=16 value_dim=4"
    assert len(lines) == 2 + 64
    assert all(line.split(",")[3] == "1.000000" for line in lines[2:])


def test_console_entry_point(small_cfg):
    proc = subprocess.run(
        [sys.executable, "-m", "memdropout.cli", "run", str(small_cfg), "--seed", "1"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("step,policy")
