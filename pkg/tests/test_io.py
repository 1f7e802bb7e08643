import json

import numpy as np
import pytest

from arsvd.io import (
    DataError,
    read_genotypes,
    read_groups,
    read_json,
    read_matrix,
    read_vector,
    write_genotypes,
    write_json,
    write_matrix,
    write_vector,
)


def test_matrix_round_trip(tmp_path, rng):
    a = rng.standard_normal((7, 4)) * 10.0 ** rng.integers(-200, 200, (7, 4))
    write_matrix(tmp_path / "a.tsv", a, header=["c0", "c1", "c2", "c3"])
    assert np.array_equal(read_matrix(tmp_path / "a.tsv"), a)


def test_vector_round_trip(tmp_path):
    v = np.array([1.0, -2.5, 1e-300])
    write_vector(tmp_path / "v.tsv", v)
    assert np.array_equal(read_vector(tmp_path / "v.tsv"), v)


def test_comments_and_blank_lines(tmp_path):
    (tmp_path / "m.tsv").write_text("# header\n1\t2\n\n3\t4\n")
    assert np.array_equal(read_matrix(tmp_path / "m.tsv"), [[1, 2], [3, 4]])


@pytest.mark.parametrize(
    "text,match",
    [
        ("1\t2\n3\n", "line 2: expected 2 columns"),
        ("1\tx\n", "line 1, column 2"),
        ("1\tnan\n", "non-finite"),
        ("# only\n", "no data"),
    ],
)
def test_matrix_errors(tmp_path, text, match):
    (tmp_path / "bad.tsv").write_text(text)
    with pytest.raises(DataError, match=match):
        read_matrix(tmp_path / "bad.tsv")


def test_vector_shape_error(tmp_path):
    write_matrix(tmp_path / "m.tsv", np.ones((3, 2)))
    with pytest.raises(DataError):
        read_vector(tmp_path / "m.tsv")


def test_genotype_round_trip(tmp_path, rng):
    raw = rng.integers(0, 3, (5, 8)).astype(np.int8)
    ids = [f"rs{j}" for j in range(8)]
    write_genotypes(tmp_path / "g.tsv", raw, ids)
    back, back_ids = read_genotypes(tmp_path / "g.tsv")
    assert back_ids == ids and np.array_equal(back, raw)


def test_genotype_bad_entry(tmp_path):
    (tmp_path / "g.tsv").write_text("a\t0\t1\nb\t2\t3\n")
    with pytest.raises(DataError, match="line 2, column 3"):
        read_genotypes(tmp_path / "g.tsv")


def test_groups(tmp_path):
    (tmp_path / "groups.tsv").write_text("a\tchr1\nb\tchr2\n")
    assert read_groups(tmp_path / "groups.tsv") == {"a": "chr1", "b": "chr2"}
    (tmp_path / "bad.tsv").write_text("a\n")
    with pytest.raises(DataError):
        read_groups(tmp_path / "bad.tsv")


def test_json_lossless(tmp_path):
    obj = {"x": np.float64(0.1) + np.float64(0.2), "n": np.int64(3), "arr": np.arange(3.0), "bad": float("inf")}
    write_json(tmp_path / "o.json", obj)
    back = read_json(tmp_path / "o.json")
    assert back["x"] == 0.1 + 0.2 and back["n"] == 3 and back["arr"] == [0.0, 1.0, 2.0]
    assert back["bad"] == "inf"
    json.loads((tmp_path / "o.json").read_text())
