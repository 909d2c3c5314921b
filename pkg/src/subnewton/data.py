"""Row-sparse datasets: container, LIBSVM text I/O, synthetic generation."""

from __future__ import annotations

import bz2
import gzip
import lzma
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy import sparse

__all__ = [
    "DataError",
    "SparseDataset",
    "parse_libsvm",
    "serialize_libsvm",
    "load_dataset",
    "save_dataset",
    "generate_synthetic",
    "margins",
    "add_intercept",
]


class DataError(ValueError):
    """Malformed input data: bad LIBSVM text, inconsistent shapes, bad labels."""


_OPENERS = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open}


@dataclass(eq=False)
class SparseDataset:
    """Fixed design matrix in CSR form plus one label per row.

    Feature indices are 0-based internally and strictly increasing within
    each row.  ``w_true`` is only set by :func:`generate_synthetic` and is
    carried for diagnostics; nothing in the solvers reads it.

    Parameters
    ----------
    n, d:
        Row and column counts.  ``d`` may exceed the largest stored index
        (padding columns are implicitly zero).
    indptr, indices, values:
        CSR arrays; ``indptr`` has length ``n + 1``.
    labels:
        Float array of length ``n``.  Classification losses expect +-1.
    w_true:
        Optional generating weight vector for synthetic instances.
    """

    n: int
    d: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    w_true: np.ndarray | None = None
    _matrix: sparse.csr_matrix | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if self.indptr.shape != (self.n + 1,):
            raise DataError(f"indptr length {self.indptr.shape[0]} != n+1 = {self.n + 1}")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise DataError("indptr does not span the index array")
        if np.any(np.diff(self.indptr) < 0):
            raise DataError("indptr must be non-decreasing")
        if len(self.indices) != len(self.values):
            raise DataError("indices and values length mismatch")
        if self.labels.shape != (self.n,):
            raise DataError(f"labels length {self.labels.shape[0]} != n = {self.n}")
        if len(self.indices):
            if self.indices.min() < 0 or self.indices.max() >= self.d:
                raise DataError("feature index out of range")
            # Strictly increasing within each row: the only non-positive jumps
            # in the concatenated index array must sit at row boundaries.
            jumps = np.flatnonzero(np.diff(self.indices) <= 0) + 1
            boundaries = self.indptr[1:-1]
            if not np.all(np.isin(jumps, boundaries)):
                raise DataError("feature indices must be strictly increasing within a row")
        if not np.all(np.isfinite(self.values)):
            raise DataError("non-finite feature value")
        if not np.all(np.isfinite(self.labels)):
            raise DataError("non-finite label")

    @property
    def nnz(self) -> int:
        return int(len(self.indices))

    @property
    def matrix(self) -> sparse.csr_matrix:
        """The design matrix as ``scipy.sparse.csr_matrix`` (built lazily, cached)."""
        if self._matrix is None:
            self._matrix = sparse.csr_matrix(
                (self.values, self.indices, self.indptr), shape=(self.n, self.d)
            )
        return self._matrix

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(indices, values)`` views of row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def iter_rows(self) -> Iterator[list[tuple[int, float]]]:
        for i in range(self.n):
            idx, val = self.row(i)
            yield list(zip(idx.tolist(), val.tolist()))

    def row_norms_sq(self) -> np.ndarray:
        """Squared Euclidean norm of every row."""
        out = np.zeros(self.n)
        np.add.at(out, np.repeat(np.arange(self.n), np.diff(self.indptr)), self.values**2)
        return out

    @classmethod
    def from_rows(
        cls,
        rows: Iterable[Iterable[tuple[int, float]]],
        labels: Iterable[float],
        d: int | None = None,
        w_true: np.ndarray | None = None,
    ) -> "SparseDataset":
        """Build from per-row ``(index, value)`` pairs (0-based indices)."""
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for entry in rows:
            for j, v in entry:
                indices.append(j)
                values.append(v)
            indptr.append(len(indices))
        labels_arr = np.asarray(list(labels), dtype=np.float64)
        n = len(indptr) - 1
        if d is None:
            d = (max(indices) + 1) if indices else 0
        return cls(
            n=n,
            d=d,
            indptr=np.asarray(indptr),
            indices=np.asarray(indices, dtype=np.int64),
            values=np.asarray(values),
            labels=labels_arr,
            w_true=w_true,
        )


def parse_libsvm(text: str | Iterable[str], d: int | None = None) -> SparseDataset:
    """Parse LIBSVM-format text: ``<label> <index>:<value> ...`` per line.

    Indices are 1-based in the text and must be strictly increasing within a
    line.  Blank lines and ``#`` comment suffixes are ignored.  A line with a
    label and no features is a valid all-zero row.

    Raises
    ------
    DataError
        With the 1-based line number, on any malformed token or on
        non-increasing indices.
    """
    if isinstance(text, str):
        lines: Iterable[str] = text.splitlines()
    else:
        lines = text
    rows: list[list[tuple[int, float]]] = []
    labels: list[float] = []
    max_index = -1
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise DataError(f"bad label {tokens[0]!r} at line {lineno}") from None
        entries: list[tuple[int, float]] = []
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DataError(f"bad feature token {tok!r} at line {lineno}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataError(f"bad feature token {tok!r} at line {lineno}") from None
            if idx < 1:
                raise DataError(f"feature index {idx} < 1 at line {lineno}")
            if idx <= prev:
                raise DataError(f"indices not increasing at line {lineno}")
            prev = idx
            entries.append((idx - 1, val))
            max_index = max(max_index, idx - 1)
        rows.append(entries)
        labels.append(label)
    if d is None:
        d = max_index + 1
    elif max_index >= d:
        raise DataError(f"feature index {max_index + 1} exceeds declared dimension {d}")
    return SparseDataset.from_rows(rows, labels, d=d)


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".17g")


def serialize_libsvm(data: SparseDataset) -> str:
    """Inverse of :func:`parse_libsvm`; floats round-trip exactly."""
    out = []
    for i in range(data.n):
        idx, val = data.row(i)
        parts = [_fmt(float(data.labels[i]))]
        parts.extend(f"{j + 1}:{_fmt(float(v))}" for j, v in zip(idx, val))
        out.append(" ".join(parts))
    return "\n".join(out) + ("\n" if out else "")


def load_dataset(path: str | Path, d: int | None = None) -> SparseDataset:
    """Read a LIBSVM file; ``.gz``/``.bz2``/``.xz`` suffixes open compressed."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such data file: {path}")
    opener = _OPENERS.get(path.suffix, open)
    with opener(path, "rt", encoding="utf-8") as fh:  # type: ignore[operator]
        return parse_libsvm(fh, d=d)


def save_dataset(data: SparseDataset, path: str | Path) -> None:
    path = Path(path)
    opener = _OPENERS.get(path.suffix, open)
    with opener(path, "wt", encoding="utf-8") as fh:  # type: ignore[operator]
        fh.write(serialize_libsvm(data))


def generate_synthetic(
    n: int,
    d: int,
    density: float = 1.0,
    label_noise: float = 0.0,
    seed: int = 0,
    *,
    feature_scale: float = 1.0,
    column_scales: np.ndarray | None = None,
) -> SparseDataset:
    """Random classification instance with planted weights.

    Entries are included i.i.d. with probability ``density`` and drawn from a
    standard normal, so a row carries ``density * d`` nonzeros in expectation.
    Labels are ``sign(x_i @ w_true)`` (zero margin counts as +1), then flipped
    independently with probability ``label_noise``.

    The draw order (w_true, inclusion mask, values, flips) is fixed, so one
    seed gives bit-identical output across runs.

    Parameters
    ----------
    feature_scale:
        Multiplies all feature values.  Labels are unaffected (sign is
        scale-invariant).
    column_scales:
        Optional length-``d`` positive multipliers applied per column, for
        instances with decaying spectra.
    """
    if not 0.0 < density <= 1.0:
        raise DataError(f"density must be in (0, 1], got {density}")
    if not 0.0 <= label_noise <= 1.0:
        raise DataError(f"label_noise must be in [0, 1], got {label_noise}")
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(d)
    if density < 1.0:
        mask = rng.random((n, d)) < density
    else:
        mask = np.ones((n, d), dtype=bool)
    dense = np.zeros((n, d))
    dense[mask] = rng.standard_normal(int(mask.sum()))
    dense *= feature_scale
    if column_scales is not None:
        scales = np.asarray(column_scales, dtype=np.float64)
        if scales.shape != (d,) or np.any(scales <= 0):
            raise DataError("column_scales must be d positive floats")
        dense *= scales
    u = dense @ w_true
    y = np.where(u >= 0, 1.0, -1.0)
    flips = rng.random(n) < label_noise
    y[flips] = -y[flips]
    mat = sparse.csr_matrix(dense)
    mat.sort_indices()
    return SparseDataset(
        n=n,
        d=d,
        indptr=mat.indptr,
        indices=mat.indices,
        values=mat.data,
        labels=y,
        w_true=w_true,
    )


def margins(data: SparseDataset, w: np.ndarray) -> np.ndarray:
    """Per-row inner products ``X @ w``."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.d,):
        raise DataError(f"weight length {w.shape} does not match d = {data.d}")
    return data.matrix @ w


def add_intercept(data: SparseDataset) -> SparseDataset:
    """Append a constant-1 feature as the new last column.

    ``w_true`` is dropped: the planted model did not include the intercept.
    """
    ones = sparse.csr_matrix(np.ones((data.n, 1)))
    mat = sparse.hstack([data.matrix, ones], format="csr")
    mat.sort_indices()
    return SparseDataset(
        n=data.n,
        d=data.d + 1,
        indptr=mat.indptr,
        indices=mat.indices,
        values=mat.data,
        labels=data.labels.copy(),
    )
