"""Bayes classifier over a factorization of the class-conditional features.

``P(x | y)`` is written as a product over the blocks of a set partition of
the features, each block a full categorical table.  Probabilities are
posterior means under flat Dirichlet priors, ``(n + 1) / (N_y + eta)``,
and the class prior is add-one smoothed the same way.  All-singleton
blocks reduce to Laplace-smoothed naive Bayes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset, DatasetError, VariableSchema, bin_codes, group_counts
from .partitions import SetPartition, format_partition, parse_partition
from .scoring import BlockScorer
from .search import SearchConfig, search

FORMAT_VERSION = 1
PARTITION_MODES = ("shared", "per_class")


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FactoredClassifierModel:
    label_schema: VariableSchema
    feature_schemas: tuple[VariableSchema, ...]
    class_counts: tuple[int, ...]
    partition_mode: str
    partitions: tuple[SetPartition, ...]
    block_tables: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        if self.partition_mode not in PARTITION_MODES:
            raise ValueError(f"unknown partition mode {self.partition_mode!r}")
        n_classes = self.label_schema.cardinality
        if len(self.class_counts) != n_classes or len(self.block_tables) != n_classes:
            raise ValueError("class count mismatch")
        expected = 1 if self.partition_mode == "shared" else n_classes
        if len(self.partitions) != expected:
            raise ValueError(f"{self.partition_mode} mode needs {expected} partition(s)")
        for p in self.partitions:
            if p.n != len(self.feature_schemas):
                raise ValueError("partition does not cover the features")
        for y in range(n_classes):
            p = self.partition_for(y)
            tables = self.block_tables[y]
            if len(tables) != p.n_blocks:
                raise ValueError(f"class {y}: expected {p.n_blocks} block tables")
            for block, t in zip(p.blocks, tables):
                eta = math.prod(self.feature_schemas[i].cardinality for i in block)
                if len(t) != eta:
                    raise ValueError(f"class {y}: table for block {block} has wrong size")
                if int(t.sum()) != self.class_counts[y]:
                    raise ValueError(f"class {y}: block table does not sum to N_y")

    @property
    def n_classes(self) -> int:
        return self.label_schema.cardinality

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.feature_schemas]

    def partition_for(self, y: int) -> SetPartition:
        return self.partitions[0 if self.partition_mode == "shared" else y]


def _split_by_class(d: Dataset, label: str) -> tuple[VariableSchema, Dataset, list[Dataset]]:
    li = d.column_index(label)
    label_schema = d.schemas[li]
    if label_schema.cardinality < 2:
        raise DatasetError(f"label column {label!r} needs at least 2 classes")
    features = [j for j in range(d.n_vars) if j != li]
    if not features:
        raise DatasetError("no feature columns")
    fd = d.select(features)
    y = d.rows[:, li]
    per_class = [fd.subset_rows(y == c) for c in range(label_schema.cardinality)]
    return label_schema, fd, per_class


def train(
    d: Dataset,
    label: str,
    search_cfg: Optional[SearchConfig] = None,
    mode: str = "shared",
    partition: Union[SetPartition, Sequence[SetPartition], None] = None,
) -> FactoredClassifierModel:
    """Fit a factored Bayes classifier.

    In ``shared`` mode one partition maximising the summed per-class score
    is used for every class; in ``per_class`` mode each class gets its own.
    ``partition`` skips the search and forces the structure (one partition,
    or one per class in ``per_class`` mode).
    """
    if mode not in PARTITION_MODES:
        raise ValueError(f"mode must be one of {PARTITION_MODES}")
    cfg = search_cfg or SearchConfig()
    label_schema, fd, per_class = _split_by_class(d, label)

    if partition is not None:
        if isinstance(partition, SetPartition):
            partitions = [partition] * (1 if mode == "shared" else len(per_class))
        else:
            partitions = list(partition)
    elif mode == "shared":
        partitions = [search(BlockScorer(per_class), cfg).partition]
    else:
        partitions = [search(BlockScorer(dy), cfg).partition for dy in per_class]

    tables = []
    for c, dy in enumerate(per_class):
        p = partitions[0 if mode == "shared" else c]
        tables.append(tuple(group_counts(dy, b).counts for b in p.blocks))
    return FactoredClassifierModel(
        label_schema=label_schema,
        feature_schemas=fd.schemas,
        class_counts=tuple(dy.sample_count for dy in per_class),
        partition_mode=mode,
        partitions=tuple(partitions),
        block_tables=tuple(tables),
    )


def _check_rows(m: FactoredClassifierModel, rows: np.ndarray, unknown: str) -> np.ndarray:
    rows = np.array(rows, dtype=np.int64, ndmin=2)
    if rows.shape[1] != len(m.feature_schemas):
        raise DatasetError(
            f"expected {len(m.feature_schemas)} feature values, got {rows.shape[1]}"
        )
    for j, s in enumerate(m.feature_schemas):
        bad = (rows[:, j] < 0) | (rows[:, j] >= s.cardinality)
        if bad.any():
            if unknown == "missing" and s.has_missing:
                rows[bad, j] = s.categories.index("")
            else:
                r = int(np.argmax(bad))
                raise DatasetError(
                    f"value {rows[r, j]} out of range for feature {s.name!r} at row {r}"
                )
    return rows


def joint_log_scores(m: FactoredClassifierModel, rows, unknown: str = "error") -> np.ndarray:
    """Unnormalised ``log P(y, x)`` for each row and class, shape (R, C)."""
    rows = _check_rows(m, rows, unknown)
    n_total = sum(m.class_counts)
    C = m.n_classes
    probe = Dataset(m.feature_schemas, rows)
    out = np.empty((rows.shape[0], C))
    for y in range(C):
        n_y = m.class_counts[y]
        score = np.full(rows.shape[0], math.log((n_y + 1) / (n_total + C)))
        for block, table in zip(m.partition_for(y).blocks, m.block_tables[y]):
            logp = np.log((table + 1.0) / (n_y + len(table)))
            score = score + logp[bin_codes(probe, block)]
        out[:, y] = score
    return out


def predict_proba(m: FactoredClassifierModel, rows, unknown: str = "error") -> np.ndarray:
    """Posterior class probabilities for each encoded feature row."""
    s = joint_log_scores(m, rows, unknown)
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def predict(m: FactoredClassifierModel, row: Sequence[int], unknown: str = "error") -> np.ndarray:
    """Posterior vector for a single encoded row."""
    return predict_proba(m, [row], unknown)[0]


def feature_rows(m: FactoredClassifierModel, d: Dataset) -> np.ndarray:
    """Pull the model's feature columns out of ``d``, checking schemas."""
    cols = []
    for s in m.feature_schemas:
        j = d.column_index(s.name)
        if d.schemas[j].categories != s.categories:
            raise DatasetError(f"schema mismatch for feature {s.name!r}")
        cols.append(j)
    return d.rows[:, cols]


def evaluate(m: FactoredClassifierModel, d: Dataset) -> dict:
    """Accuracy, mean log-loss and confusion matrix (rows = true class)."""
    if d.sample_count == 0:
        raise DatasetError("cannot evaluate on an empty dataset")
    li = d.column_index(m.label_schema.name)
    if d.schemas[li].categories != m.label_schema.categories:
        raise DatasetError("schema mismatch for the label column")
    truth = d.rows[:, li]
    post = predict_proba(m, feature_rows(m, d))
    pred = np.argmax(post, axis=1)
    confusion = np.zeros((m.n_classes, m.n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    p_true = post[np.arange(len(truth)), truth]
    return {
        "accuracy": float(np.mean(pred == truth)),
        "log_loss": float(-np.mean(np.log(p_true))),
        "confusion": confusion.tolist(),
    }


def model_to_dict(m: FactoredClassifierModel) -> dict:
    names = m.feature_names
    return {
        "format_version": FORMAT_VERSION,
        "label_schema": m.label_schema.to_dict(),
        "feature_schemas": [s.to_dict() for s in m.feature_schemas],
        "partition_mode": m.partition_mode,
        "partitions": [format_partition(p, names) for p in m.partitions],
        "class_counts": list(m.class_counts),
        "block_tables": [[t.tolist() for t in tables] for tables in m.block_tables],
    }


def model_from_dict(obj: dict) -> FactoredClassifierModel:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} (expected {FORMAT_VERSION})"
        )
    try:
        features = tuple(VariableSchema.from_dict(s) for s in obj["feature_schemas"])
        names = [s.name for s in features]
        return FactoredClassifierModel(
            label_schema=VariableSchema.from_dict(obj["label_schema"]),
            feature_schemas=features,
            class_counts=tuple(int(c) for c in obj["class_counts"]),
            partition_mode=obj["partition_mode"],
            partitions=tuple(parse_partition(t, names) for t in obj["partitions"]),
            block_tables=tuple(
                tuple(np.asarray(t, dtype=np.int64) for t in tables)
                for tables in obj["block_tables"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from exc


def save_model(m: FactoredClassifierModel, path: Union[str, os.PathLike]) -> None:
    for name in m.feature_names:
        if any(ch in name for ch in "(),") or name != name.strip():
            raise ModelFormatError(f"feature name {name!r} cannot be written in partition syntax")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(m), fh, indent=2)
        fh.write("\n")


def load_model(path: Union[str, os.PathLike]) -> FactoredClassifierModel:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(obj)
