"""Loading, validating and persisting sample-by-feature matrices and results.

CSV is the only ingestion format: samples are rows, features are columns,
with an optional header row carrying the feature identifiers. Values are
written with 17 significant digits so a save/load cycle is bit-exact.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import AlignmentError, ParseError, ShapeError, InputError

FLOAT_FMT = "%.17g"


def default_feature_ids(p: int) -> list[str]:
    width = max(4, len(str(p)))
    return [f"f{i:0{width}d}" for i in range(1, p + 1)]


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x p`` matrix of samples (rows) by features (columns).

    The array is copied to float64 and made read-only on construction.
    """

    values: np.ndarray
    feature_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-d matrix, got shape {values.shape}")
        n, p = values.shape
        if n < 2 or p < 2:
            raise ShapeError(f"need at least 2 samples and 2 features, got {n}x{p}")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise InputError(f"non-finite value at row {r}, column {c}")
        ids = tuple(self.feature_ids) if len(self.feature_ids) else tuple(default_feature_ids(p))
        if len(ids) != p:
            raise ShapeError(f"{len(ids)} feature ids for {p} columns")
        if len(set(ids)) != p:
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise InputError(f"duplicate feature ids: {dup}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_ids", ids)

    @property
    def sample_count(self) -> int:
        return self.values.shape[0]

    @property
    def feature_count(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def select_columns(self, order: Sequence[int]) -> "DataMatrix":
        order = np.asarray(order, dtype=int)
        return DataMatrix(self.values[:, order], tuple(self.feature_ids[i] for i in order))


@dataclass(frozen=True)
class FeatureAlignment:
    """Column permutation taking dataset B's columns onto A's feature order.

    ``b.values[:, permutation]`` has the same feature ids, in the same order,
    as ``a``.
    """

    permutation: np.ndarray

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.permutation, np.arange(len(self.permutation))))

    def apply(self, b: DataMatrix) -> DataMatrix:
        if self.is_identity:
            return b
        return b.select_columns(self.permutation)


def load_csv(path, has_header: bool = True) -> DataMatrix:
    """Read a numeric CSV file into a :class:`DataMatrix`.

    Raises
    ------
    ParseError
        A cell is not a number; the message gives the 1-based file line
        and column.
    ShapeError
        Rows have differing lengths or the file is too small.
    InputError
        A value is NaN or infinite.
    """
    path = Path(path)
    rows: list[list[float]] = []
    ids = None
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if has_header and ids is None:
                ids = [c.strip() for c in row]
                width = len(ids)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ShapeError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {width}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                for col, cell in enumerate(row, start=1):
                    try:
                        float(cell)
                    except ValueError:
                        raise ParseError(
                            f"{path}: non-numeric value {cell!r} at line {lineno}, column {col}"
                        ) from None
                raise
    if not rows:
        raise ShapeError(f"{path}: no data rows")
    values = np.array(rows, dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise InputError(
            f"{path}: non-finite value at data row {r + 1}, column {c + 1}"
        )
    return DataMatrix(values, tuple(ids) if ids is not None else ())


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_rows(header: Sequence[str], rows, leading=None) -> str:
    lines = [",".join(header)]
    for i, row in enumerate(rows):
        cells = [FLOAT_FMT % x for x in row]
        if leading is not None:
            cells.insert(0, leading[i])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_csv(data: DataMatrix, path) -> None:
    _atomic_write(Path(path), _format_rows(data.feature_ids, data.values))


def write_matrix(path, matrix: np.ndarray, row_ids: Sequence[str], column_names: Sequence[str],
                 id_header: str = "feature_id") -> None:
    """Write a matrix with an identifier column (e.g. a weight-matrix dump)."""
    matrix = np.asarray(matrix)
    _atomic_write(Path(path), _format_rows([id_header, *column_names], matrix, leading=list(row_ids)))


def save_result(result, directory, tag: str = "a", feature_ids: Sequence[str] | None = None,
                summary: dict | None = None) -> dict[str, Path]:
    """Persist a differential result as ``v_<tag>.csv`` and ``sigma_<tag>.csv``.

    The vector file has one row per feature (identifier first) and one column
    per differential vector. When ``summary`` is given it is merged into
    ``summary.json`` in the same directory. An empty result (r = 0) produces
    header-only files.
    """
    directory = Path(directory)
    V = np.asarray(result.vectors, dtype=np.float64)
    sigma = np.asarray(result.significance, dtype=np.float64)
    r = sigma.shape[0]
    if feature_ids is None:
        feature_ids = getattr(result, "feature_ids", None) or default_feature_ids(V.shape[0])
    names = [f"v{i}" for i in range(1, r + 1)]
    v_path = directory / f"v_{tag}.csv"
    s_path = directory / f"sigma_{tag}.csv"
    if r == 0:
        _atomic_write(v_path, "feature_id\n")
        _atomic_write(s_path, "index,sigma\n")
    else:
        write_matrix(v_path, V, feature_ids, names)
        _atomic_write(
            s_path,
            "index,sigma\n" + "".join(f"{i},{FLOAT_FMT % s}\n" for i, s in enumerate(sigma, 1)),
        )
    out = {"vectors": v_path, "significance": s_path}
    if summary is not None:
        out["summary"] = update_summary(directory, summary)
    return out


def load_result(directory, tag: str = "a"):
    """Inverse of :func:`save_result`."""
    from .spectral import DifferentialResult

    directory = Path(directory)
    with open(directory / f"v_{tag}.csv", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    ids = [row[0] for row in rows[1:]]
    r = len(rows[0]) - 1
    V = np.array([[float(c) for c in row[1:]] for row in rows[1:]], dtype=np.float64).reshape(len(ids), r)
    with open(directory / f"sigma_{tag}.csv", newline="") as fh:
        srows = [row for row in csv.reader(fh) if row][1:]
    sigma = np.array([float(row[1]) for row in srows], dtype=np.float64)
    return DifferentialResult(V, sigma, feature_ids=tuple(ids))


def read_summary(directory) -> dict:
    path = Path(directory) / "summary.json"
    if not path.exists():
        return {}
    with open(path) as fh:
        return json.load(fh)


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def update_summary(directory, updates: dict) -> Path:
    """Merge ``updates`` into ``<directory>/summary.json`` (atomic rewrite)."""
    summary = read_summary(directory)
    summary.update(_jsonable(updates))
    path = Path(directory) / "summary.json"
    _atomic_write(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


def write_labels(path, feature_ids: Sequence[str], labels) -> None:
    lines = ["feature_id,label"] + [f"{fid},{int(lab)}" for fid, lab in zip(feature_ids, labels)]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def read_labels(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row][1:]
    return [r[0] for r in rows], np.array([int(r[1]) for r in rows], dtype=int)


def write_table(path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Plain CSV table; floats use the round-trip format."""
    def cell(x):
        if isinstance(x, (float, np.floating)):
            return FLOAT_FMT % x
        return str(x)

    lines = [",".join(header)] + [",".join(cell(x) for x in row) for row in rows]
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def align(a: DataMatrix, b: DataMatrix) -> FeatureAlignment:
    """Find the column permutation of ``b`` matching ``a``'s feature ids."""
    ids_a, ids_b = a.feature_ids, b.feature_ids
    missing = set(ids_a) - set(ids_b)
    extra = set(ids_b) - set(ids_a)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing from B: {sorted(missing)}")
        if extra:
            parts.append(f"not in A: {sorted(extra)}")
        raise AlignmentError("feature sets differ; " + "; ".join(parts))
    where = {fid: j for j, fid in enumerate(ids_b)}
    return FeatureAlignment(np.array([where[fid] for fid in ids_a], dtype=int))
