import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memdropout import (
    EmbeddingProvider,
    KBRow,
    Triplet,
    expand_row,
    hashed_embedding,
    init_memory,
    load_embedding_file,
    make_rng,
    read,
    triplet_to_kv,
    write_memory_dropout,
)
from memdropout.kb import EmbeddingFormatError, fnv1a_64, read_kb_csv, read_kv_dump, write_kv_dump

DENTIST = KBRow(("event", "date", "time", "party"), ("dentist", "the 19th", "5pm", "Mike"))

# the twelve triplets listed for the dentist appointment
DENTIST_TRIPLETS = {
    ("dentist", "time", "5pm"),
    ("dentist", "party", "Mike"),
    ("dentist", "date", "the 19th"),
    ("Mike", "time", "5pm"),
    ("Mike", "event", "dentist"),
    ("Mike", "date", "the 19th"),
    ("the 19th", "event", "dentist"),
    ("the 19th", "party", "Mike"),
    ("the 19th", "time", "5pm"),
    ("5pm", "event", "dentist"),
    ("5pm", "date", "the 19th"),
    ("5pm", "party", "Mike"),
}


def test_dentist_row_expands_to_listed_triplets():
    triplets = expand_row(DENTIST)
    assert len(triplets) == 12
    assert {(t.subject, t.relation, t.object) for t in triplets} == DENTIST_TRIPLETS


def test_two_column_row():
    row = KBRow(("a", "b"), ("x", "y"))
    assert expand_row(row) == [Triplet("x", "b", "y"), Triplet("y", "a", "x")]


def test_five_column_row_enumeration():
    row = KBRow(tuple("abcde"), ("c0", "c1", "c2", "c3", "c4"))
    triplets = expand_row(row)
    pairs = {(t.subject, t.object) for t in triplets}
    assert len(triplets) == 20
    assert pairs == {(f"c{i}", f"c{j}") for i, j in itertools.permutations(range(5), 2)}


@given(st.lists(st.text(min_size=1, max_size=5), min_size=2, max_size=7, unique=True))
def test_expand_count_property(columns):
    row = KBRow(tuple(columns), tuple(f"cell{i}" for i in range(len(columns))))
    triplets = expand_row(row)
    c = len(columns)
    assert len(triplets) == c * (c - 1)
    assert all(t.subject != t.object for t in triplets)


def test_row_validation():
    with pytest.raises(ValueError):
        KBRow(("a", "a"), ("x", "y"))
    with pytest.raises(ValueError):
        KBRow(("a",), ("x",))
    with pytest.raises(ValueError):
        KBRow(("a", "b"), ("x",))


def test_fnv1a_known_vectors():
    # published FNV-1a 64 test values
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_hashed_embedding_deterministic_and_unit():
    a = hashed_embedding("dentist", 32, seed=7)
    np.testing.assert_array_equal(a, hashed_embedding("dentist", 32, seed=7))
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
    assert not np.array_equal(a, hashed_embedding("dentist", 32, seed=8))


@settings(max_examples=50)
@given(st.text(max_size=20), st.integers(1, 64))
def test_hashed_embedding_unit_norm(token, d):
    assert abs(np.linalg.norm(hashed_embedding(token, d)) - 1.0) < 1e-6


def test_hashed_embeddings_nearly_orthogonal():
    g = np.random.default_rng(0)
    cos = []
    for _ in range(1000):
        a, b = (f"tok{g.integers(10**9)}" for _ in range(2))
        cos.append(abs(hashed_embedding(a, 64) @ hashed_embedding(b, 64)))
    assert np.mean(cos) < 0.15


def test_triplet_to_kv_symmetric_sum():
    emb = EmbeddingProvider(2, vocab={"s": np.array([1.0, 0.0]), "r": np.array([0.0, 1.0]), "o": np.array([2.0, 2.0])})
    kv = triplet_to_kv(Triplet("s", "r", "o"), emb)
    np.testing.assert_allclose(kv.key, [2**-0.5, 2**-0.5])
    np.testing.assert_array_equal(kv.value, [2.0, 2.0])


def test_triplet_to_kv_deterministic_and_distinct():
    emb = EmbeddingProvider(64, seed=3)
    t1, t2 = Triplet("dentist", "time", "5pm"), Triplet("dentist", "date", "the 19th")
    a = triplet_to_kv(t1, emb)
    b = triplet_to_kv(t1, EmbeddingProvider(64, seed=3))
    np.testing.assert_array_equal(a.key, b.key)
    np.testing.assert_array_equal(a.value, b.value)
    assert np.linalg.norm(a.key) == pytest.approx(1.0, abs=1e-6)
    assert not np.allclose(a.key, triplet_to_kv(t2, emb).key)


def test_triplet_to_kv_rejects_cancelling_sum():
    emb = EmbeddingProvider(2, vocab={"s": np.array([1.0, 0.0]), "r": np.array([-1.0, 0.0])})
    with pytest.raises(ValueError):
        triplet_to_kv(Triplet("s", "r", "s"), emb)


def test_case_folding_and_multiword():
    emb = EmbeddingProvider(16, seed=1)
    a = triplet_to_kv(Triplet("Mike", "party", "The 19th"), emb)
    b = triplet_to_kv(Triplet("mike", "party", "the 19th"), emb)
    np.testing.assert_array_equal(a.key, b.key)
    words = hashed_embedding("the", 16, 1) + hashed_embedding("19th", 16, 1)
    np.testing.assert_allclose(a.value, words / np.linalg.norm(words))
    # relations keep their case
    c = triplet_to_kv(Triplet("mike", "Party", "the 19th"), emb)
    assert not np.allclose(a.key, c.key)


def test_load_embedding_file(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("a 1 0\nb 0 1\n")
    emb = load_embedding_file(path)
    assert emb.dim == 2 and emb.mode == "file"
    np.testing.assert_array_equal(emb("a"), [1.0, 0.0])


def test_load_embedding_file_empty(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("")
    with pytest.raises(EmbeddingFormatError):
        load_embedding_file(path)


def test_load_embedding_duplicate_last_wins(tmp_path, caplog):
    path = tmp_path / "emb.txt"
    path.write_text("a 1 0\nb 0 1\na 2 2\n")
    with caplog.at_level(logging.WARNING, logger="memdropout.kb"):
        emb = load_embedding_file(path)
    np.testing.assert_array_equal(emb("a"), [2.0, 2.0])
    assert any("duplicate token 'a'" in r.message for r in caplog.records)


@pytest.mark.parametrize(
    "text, lineno", [("a 1 0\nb 0 x\n", 2), ("a 1 0\nb 0 1 2\n", 2), ("a\n", 1)]
)
def test_load_embedding_errors_name_line(tmp_path, text, lineno):
    path = tmp_path / "emb.txt"
    path.write_text(text)
    with pytest.raises(EmbeddingFormatError, match=f":{lineno}:"):
        load_embedding_file(path)


def test_unknown_token_falls_back_with_warning(tmp_path, caplog):
    path = tmp_path / "emb.txt"
    path.write_text("a 1 0 0\n")
    emb = load_embedding_file(path, seed=4)
    with caplog.at_level(logging.WARNING, logger="memdropout.kb"):
        vec = emb("zebra")
    np.testing.assert_array_equal(vec, hashed_embedding("zebra", 3, 4))
    assert "zebra" in caplog.text


def test_read_kb_csv(tmp_path):
    path = tmp_path / "kb.csv"
    path.write_text("event,date,time,party\ndentist,the 19th,5pm,Mike\n")
    assert read_kb_csv(path) == [DENTIST]
    (tmp_path / "hdr.csv").write_text("event,date\n")
    with pytest.raises(ValueError):
        read_kb_csv(tmp_path / "hdr.csv")
    (tmp_path / "bad.csv").write_text("a,b\nx,y,z\n")
    with pytest.raises(ValueError, match=":2:"):
        read_kb_csv(tmp_path / "bad.csv")


def test_kv_dump_round_trip(tmp_path):
    emb = EmbeddingProvider(8, seed=2)
    pairs = [triplet_to_kv(t, emb) for t in expand_row(DENTIST)]
    write_kv_dump(tmp_path / "d.kv", pairs)
    keys, values = read_kv_dump(tmp_path / "d.kv")
    np.testing.assert_array_equal(keys, [p.key for p in pairs])
    np.testing.assert_array_equal(values, [p.value for p in pairs])


def test_kb_round_trip_exact_keys():
    emb = EmbeddingProvider(32, seed=5)
    pairs = [triplet_to_kv(t, emb) for t in expand_row(DENTIST)]
    mem = init_memory(0, len(pairs) + 4, 32, 32, empty=True)
    g = make_rng(1)
    for p in pairs:
        write_memory_dropout(mem, g, p.key, p.value, epsilon=0.0)
    for p in pairs:
        np.testing.assert_array_equal(read(mem, p.key)[1], p.value)
