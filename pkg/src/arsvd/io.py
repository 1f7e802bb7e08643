"""TSV matrices, genotype/phenotype/group files and JSON manifests."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input file; the message names file, line and column."""


def _clean_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def _to_float(text, path, lineno, col):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}: line {lineno}, column {col}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"{path}: line {lineno}, column {col}: non-finite value {text!r}")
    return value


def read_matrix(path) -> np.ndarray:
    """Dense TSV matrix; blank lines and lines starting with ``#`` are skipped."""
    rows = []
    width = None
    for lineno, fields in _clean_lines(path):
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataError(f"{path}: line {lineno}: expected {width} columns, found {len(fields)}")
        rows.append([_to_float(f, path, lineno, c) for c, f in enumerate(fields, start=1)])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def write_matrix(path, a, header=None):
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write("#" + "\t".join(header) + "\n")
        np.savetxt(fh, a, fmt="%.17g", delimiter="\t")


def read_vector(path) -> np.ndarray:
    m = read_matrix(path)
    if m.shape[1] != 1 and m.shape[0] != 1:
        raise DataError(f"{path}: expected a single column, got shape {m.shape}")
    return m.ravel()


def write_vector(path, v, header=None):
    write_matrix(path, np.asarray(v, dtype=np.float64).reshape(-1, 1), header)


def read_genotypes(path):
    """Genotype TSV: ``variant_id`` then one 0/1/2 column per individual.

    Returns ``(raw, variant_ids)`` with ``raw`` individuals x variants.
    """
    ids, rows = [], []
    width = None
    for lineno, fields in _clean_lines(path):
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise DataError(f"{path}: line {lineno}: expected {width} columns, found {len(fields)}")
        if width < 2:
            raise DataError(f"{path}: line {lineno}: need a variant id and at least one genotype")
        row = []
        for c, text in enumerate(fields[1:], start=2):
            if text not in ("0", "1", "2"):
                raise DataError(f"{path}: line {lineno}, column {c}: genotype must be 0, 1 or 2, got {text!r}")
            row.append(int(text))
        ids.append(fields[0])
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no variants")
    return np.array(rows, dtype=np.int8).T.copy(), ids


def write_genotypes(path, raw, variant_ids):
    raw = np.asarray(raw)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#variant_id\t" + "\t".join(f"i{i}" for i in range(raw.shape[0])) + "\n")
        for j, vid in enumerate(variant_ids):
            fh.write(vid + "\t" + "\t".join(str(int(v)) for v in raw[:, j]) + "\n")


def read_groups(path) -> dict:
    """``variant_id<TAB>group`` lines into a dict."""
    groups = {}
    for lineno, fields in _clean_lines(path):
        if len(fields) != 2:
            raise DataError(f"{path}: line {lineno}: expected 'variant_id<TAB>group'")
        groups[fields[0]] = fields[1]
    return groups


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj):
    # float repr is the shortest string that round-trips (at most 17 significant digits)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
