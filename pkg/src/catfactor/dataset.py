"""Categorical datasets: CSV ingestion, encoding and marginal count tables.

Every variable is encoded to integer indices ``0 .. cardinality-1`` in the
order its categories first appear in the source.  Marginal tables for a
block of variables are flattened in mixed-radix row-major order with the
lowest variable index as the most significant digit, so for four binary
variables the block ``(0, 1)`` reads its bins as ``00, 01, 10, 11``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Sequence, Union

import numpy as np

MISSING_POLICIES = ("error", "drop", "category")

# Raw label used for the dedicated missing category under policy="category".
MISSING_LABEL = ""

# Mixed-radix codes are packed into int64 below this many bins.
_MAX_PACKED_BINS = 2**62


class DatasetError(ValueError):
    """Raised for malformed input data or invalid dataset queries."""


@dataclass(frozen=True)
class VariableSchema:
    name: str
    categories: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if len(self.categories) < 1:
            raise DatasetError(f"variable {self.name!r} has no categories")
        if len(set(self.categories)) != len(self.categories):
            raise DatasetError(f"variable {self.name!r} has duplicate categories")

    @property
    def cardinality(self) -> int:
        return len(self.categories)

    @property
    def has_missing(self) -> bool:
        return MISSING_LABEL in self.categories

    def index(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise DatasetError(
                f"unknown category {label!r} for variable {self.name!r}"
            ) from None

    def to_dict(self) -> dict:
        return {"name": self.name, "categories": list(self.categories)}

    @classmethod
    def from_dict(cls, obj: dict) -> "VariableSchema":
        return cls(name=str(obj["name"]), categories=tuple(obj["categories"]))


@dataclass(frozen=True)
class GroupCounts:
    """Flattened marginal contingency table for one block of variables."""

    variable_indices: tuple[int, ...]
    counts: np.ndarray
    radices: tuple[int, ...] = field(default=())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return len(self.counts)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded categorical samples plus a per-column schema.

    ``rows`` is a read-only ``(sample_count, n_vars)`` integer array.
    """

    schemas: tuple[VariableSchema, ...]
    rows: np.ndarray
    label_column: Optional[str] = None

    def __post_init__(self):
        schemas = tuple(self.schemas)
        rows = np.array(self.rows, dtype=np.int64, copy=True)
        if rows.size == 0:
            rows = rows.reshape(0, len(schemas))
        if rows.ndim != 2 or rows.shape[1] != len(schemas):
            raise DatasetError(
                f"rows must have shape (n, {len(schemas)}), got {rows.shape}"
            )
        names = [s.name for s in schemas]
        if len(set(names)) != len(names):
            raise DatasetError("duplicate variable names")
        if len(rows):
            cards = np.array([s.cardinality for s in schemas], dtype=np.int64)
            if rows.min() < 0 or np.any(rows.max(axis=0) >= cards):
                raise DatasetError("encoded value out of range for its schema")
        if self.label_column is not None and self.label_column not in names:
            raise DatasetError(f"label column {self.label_column!r} not found")
        rows.flags.writeable = False
        object.__setattr__(self, "schemas", schemas)
        object.__setattr__(self, "rows", rows)

    @property
    def sample_count(self) -> int:
        return self.rows.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.schemas)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.schemas]

    @property
    def cardinalities(self) -> list[int]:
        return [s.cardinality for s in self.schemas]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"no column named {name!r}") from None

    def select(self, columns: Sequence[int]) -> "Dataset":
        """Return a dataset restricted to ``columns`` (in the given order)."""
        columns = list(columns)
        return Dataset(
            schemas=tuple(self.schemas[c] for c in columns),
            rows=self.rows[:, columns],
        )

    def subset_rows(self, mask: np.ndarray) -> "Dataset":
        return Dataset(schemas=self.schemas, rows=self.rows[mask])

    def decode_row(self, r: int) -> list[str]:
        return [s.categories[v] for s, v in zip(self.schemas, self.rows[r])]


def _check_block(d: Dataset, block: Sequence[int]) -> tuple[int, ...]:
    block = tuple(int(i) for i in block)
    if not block:
        raise DatasetError("block must be non-empty")
    for i in block:
        if not 0 <= i < d.n_vars:
            raise DatasetError(f"variable index {i} out of range")
    if len(set(block)) != len(block):
        raise DatasetError(f"duplicate variable index in block {block}")
    if list(block) != sorted(block):
        raise DatasetError(f"block indices must be strictly increasing: {block}")
    return block


def block_bins(d: Dataset, block: Sequence[int]) -> int:
    """Number of bins (product of cardinalities) spanned by ``block``."""
    eta = 1
    for i in block:
        eta *= d.schemas[i].cardinality
    return eta


def bin_codes(d: Dataset, block: Sequence[int]) -> np.ndarray:
    """Mixed-radix bin index of every row restricted to ``block``.

    Only valid while the block's bin count fits in an int64.
    """
    codes = np.zeros(d.sample_count, dtype=np.int64)
    for i in block:
        codes = codes * d.schemas[i].cardinality + d.rows[:, i]
    return codes


def nonzero_bin_counts(d: Dataset, block: Sequence[int]) -> np.ndarray:
    """Counts of the occupied bins of ``block``, in increasing bin order.

    Empty bins are omitted; this is all the scorer needs and stays cheap
    for blocks whose full table would not fit in memory.
    """
    if d.sample_count == 0:
        return np.zeros(0, dtype=np.int64)
    if block_bins(d, block) < _MAX_PACKED_BINS:
        _, counts = np.unique(bin_codes(d, block), return_counts=True)
    else:
        _, counts = np.unique(d.rows[:, list(block)], axis=0, return_counts=True)
    return counts.astype(np.int64)


def group_counts(d: Dataset, block: Sequence[int]) -> GroupCounts:
    """Dense marginal count table for ``block``.

    ``counts[i]`` is the number of rows whose values on ``block``, read as
    a mixed-radix number with the first listed variable most significant,
    equal ``i``.
    """
    block = _check_block(d, block)
    eta = block_bins(d, block)
    counts = np.bincount(bin_codes(d, block), minlength=eta).astype(np.int64)
    counts.flags.writeable = False
    return GroupCounts(
        variable_indices=block,
        counts=counts,
        radices=tuple(d.schemas[i].cardinality for i in block),
    )


def decode_bin(code: int, radices: Sequence[int]) -> list[int]:
    """Inverse of the mixed-radix packing used by :func:`group_counts`."""
    digits = []
    for r in reversed(radices):
        code, v = divmod(code, r)
        digits.append(v)
    return digits[::-1]


def _read_records(source) -> list[list[str]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"input is not valid UTF-8: {exc}") from None
    if not text.strip():
        raise DatasetError("empty input")
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        records = [rec for rec in reader if rec]
    except csv.Error as exc:
        raise DatasetError(f"malformed CSV at line {reader.line_num}: {exc}") from None
    return records


def load_csv(
    source: Union[str, os.PathLike, bytes, BinaryIO],
    header: bool = True,
    label_column: Optional[str] = None,
    missing_policy: str = "error",
    schemas: Optional[Sequence[VariableSchema]] = None,
    unknown_policy: str = "error",
) -> Dataset:
    """Load a categorical CSV into an encoded :class:`Dataset`.

    Parameters
    ----------
    source
        Path, raw bytes, or a binary file object holding UTF-8 CSV text.
    header
        Whether the first record names the columns.  Without a header the
        columns are named ``X1 .. XN``.
    label_column
        Optional column that must be present; recorded on the dataset.
    missing_policy
        ``"error"`` rejects empty cells, ``"drop"`` omits rows containing
        one, ``"category"`` encodes them as an extra category labelled ``""``.
    schemas
        Encode against these fixed schemas (matched by column name) instead
        of inferring categories; columns without a schema are dropped.  Used
        to read data for a trained model.
    unknown_policy
        With fixed schemas, ``"error"`` rejects labels outside the schema and
        ``"missing"`` maps them to the schema's missing category.
    """
    if missing_policy not in MISSING_POLICIES:
        raise DatasetError(f"unknown missing policy {missing_policy!r}")
    records = _read_records(source)

    if header:
        names = [h.strip() for h in records[0]]
        body = records[1:]
        if any(not n for n in names):
            raise DatasetError("empty column name in header")
        if len(set(names)) != len(names):
            raise DatasetError("duplicate column names in header")
    else:
        names = [f"X{i + 1}" for i in range(len(records[0]))]
        body = records
    width = len(names)
    first_line = 2 if header else 1
    for k, rec in enumerate(body):
        if len(rec) != width:
            raise DatasetError(
                f"malformed CSV: record {k + first_line} has {len(rec)} fields, "
                f"expected {width}"
            )
    if label_column is not None and label_column not in names:
        raise DatasetError(f"label column {label_column!r} not found")

    kept = []
    for k, rec in enumerate(body):
        missing = [j for j, cell in enumerate(rec) if cell == ""]
        if missing:
            if missing_policy == "error":
                raise DatasetError(
                    f"missing value at row {k + 1}, column {missing[0] + 1} "
                    f"({names[missing[0]]!r})"
                )
            if missing_policy == "drop":
                continue
        kept.append(rec)

    if schemas is not None:
        return _encode_fixed(names, kept, schemas, label_column, unknown_policy)

    if not body:
        # Header-only file: zero samples, each column a single placeholder
        # category so the dataset stays scoreable (every score is 0).
        inferred = tuple(VariableSchema(n, (MISSING_LABEL,)) for n in names)
        return Dataset(inferred, np.zeros((0, width), dtype=np.int64), label_column)

    lookups: list[dict[str, int]] = [{} for _ in names]
    encoded = np.empty((len(kept), width), dtype=np.int64)
    for r, rec in enumerate(kept):
        for j, cell in enumerate(rec):
            encoded[r, j] = lookups[j].setdefault(cell, len(lookups[j]))
    for j, lk in enumerate(lookups):
        if not lk:
            raise DatasetError(f"column {names[j]!r} has zero distinct values")
    inferred = tuple(VariableSchema(n, tuple(lk)) for n, lk in zip(names, lookups))
    return Dataset(inferred, encoded, label_column)


def _encode_fixed(names, records, schemas, label_column, unknown_policy) -> Dataset:
    if unknown_policy not in ("error", "missing"):
        raise DatasetError(f"unknown policy {unknown_policy!r}")
    by_name = {s.name: s for s in schemas}
    keep = [j for j, n in enumerate(names) if n in by_name]
    encoded = np.empty((len(records), len(keep)), dtype=np.int64)
    out_schemas = []
    for k, j in enumerate(keep):
        n = names[j]
        schema = by_name[n]
        lookup = {c: i for i, c in enumerate(schema.categories)}
        fallback = lookup.get(MISSING_LABEL) if unknown_policy == "missing" else None
        for r, rec in enumerate(records):
            v = lookup.get(rec[j], fallback)
            if v is None:
                raise DatasetError(
                    f"unseen category {rec[j]!r} at row {r + 1}, column {n!r}"
                )
            encoded[r, k] = v
        out_schemas.append(schema)
    return Dataset(tuple(out_schemas), encoded, label_column)


def write_csv(d: Dataset, dest: Union[str, os.PathLike, None] = None) -> str:
    """Serialise ``d`` (decoded labels, with header) and return the text."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(d.names)
    cats = [s.categories for s in d.schemas]
    for row in d.rows:
        writer.writerow([c[v] for c, v in zip(cats, row)])
    text = buf.getvalue()
    if dest is not None:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def from_labels(
    names: Sequence[str], records: Iterable[Sequence[str]]
) -> Dataset:
    """Build a dataset from in-memory label records (categories inferred)."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    writer.writerows(records)
    return load_csv(buf.getvalue().encode("utf-8"))
