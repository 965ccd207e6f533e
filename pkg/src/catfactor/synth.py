"""Sample datasets from a known factorized categorical distribution.

Randomness comes from numpy's PCG64 bit generator seeded with the spec's
integer seed.  Draw order is fixed: the label column first (one uniform per
row, when a label is configured), then for each class in index order and
each block in canonical order, one uniform per row of that class.  Each
uniform is mapped to a bin by inverse-CDF lookup and the bin is decoded to
per-variable values in mixed-radix order (first variable most significant).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset, VariableSchema
from .partitions import SetPartition, format_partition, parse_partition


class GeneratorSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ClassSpec:
    partition: SetPartition
    block_distributions: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class GeneratorSpec:
    """Ground truth for synthetic data.

    Without a label, features follow ``true_partition`` with one probability
    vector per block.  With a label, each class has its own
    :class:`ClassSpec` and the label is drawn from ``class_probs``.
    """

    schemas: tuple[VariableSchema, ...]
    true_partition: Optional[SetPartition] = None
    block_distributions: tuple[np.ndarray, ...] = ()
    seed: int = 0
    label_schema: Optional[VariableSchema] = None
    class_probs: Optional[np.ndarray] = None
    class_specs: tuple[ClassSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "schemas", tuple(self.schemas))
        object.__setattr__(
            self, "block_distributions",
            tuple(np.asarray(p, dtype=np.float64) for p in self.block_distributions),
        )
        if self.label_schema is None:
            if self.true_partition is None:
                raise GeneratorSpecError("a partition is required when no label is set")
            _check_blocks(self.schemas, self.true_partition, self.block_distributions)
        else:
            C = self.label_schema.cardinality
            probs = np.asarray(self.class_probs, dtype=np.float64)
            _check_distribution(probs, C, "class probabilities")
            object.__setattr__(self, "class_probs", probs)
            if len(self.class_specs) != C:
                raise GeneratorSpecError(f"expected {C} class specs, got {len(self.class_specs)}")
            specs = []
            for cs in self.class_specs:
                dists = tuple(np.asarray(p, dtype=np.float64) for p in cs.block_distributions)
                _check_blocks(self.schemas, cs.partition, dists)
                specs.append(ClassSpec(cs.partition, dists))
            object.__setattr__(self, "class_specs", tuple(specs))


def _check_distribution(p: np.ndarray, size: int, what: str) -> None:
    if p.ndim != 1 or len(p) != size:
        raise GeneratorSpecError(f"{what}: expected length {size}, got {p.shape}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise GeneratorSpecError(f"{what}: entries must be finite and non-negative")
    if abs(math.fsum(p.tolist()) - 1.0) > 1e-12:
        raise GeneratorSpecError(f"{what}: must sum to 1")


def _check_blocks(schemas, partition: SetPartition, dists) -> None:
    if partition.n != len(schemas):
        raise GeneratorSpecError("partition does not match the variable list")
    if len(dists) != partition.n_blocks:
        raise GeneratorSpecError(
            f"expected {partition.n_blocks} block distributions, got {len(dists)}"
        )
    for block, p in zip(partition.blocks, dists):
        eta = math.prod(schemas[i].cardinality for i in block)
        _check_distribution(p, eta, f"block {block}")


def _draw(rng: np.random.Generator, p: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(size), side="right")


def _fill_block(out: np.ndarray, rows: np.ndarray, block, radices, bins: np.ndarray) -> None:
    for i, r in zip(reversed(block), reversed(radices)):
        out[rows, i] = bins % r
        bins = bins // r


def _sample_features(rng, schemas, partition, dists, out, rows) -> None:
    for block, p in zip(partition.blocks, dists):
        bins = _draw(rng, p, len(rows))
        _fill_block(out, rows, block, [schemas[i].cardinality for i in block], bins)


def generate(spec: GeneratorSpec, n: int, seed: Optional[int] = None) -> Dataset:
    """Draw ``n`` rows; ``seed`` overrides ``spec.seed``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.Generator(np.random.PCG64(spec.seed if seed is None else seed))
    nf = len(spec.schemas)
    if spec.label_schema is None:
        out = np.zeros((n, nf), dtype=np.int64)
        _sample_features(rng, spec.schemas, spec.true_partition,
                         spec.block_distributions, out, np.arange(n))
        return Dataset(spec.schemas, out)

    out = np.zeros((n, nf + 1), dtype=np.int64)
    labels = _draw(rng, spec.class_probs, n)
    out[:, nf] = labels
    for c, cs in enumerate(spec.class_specs):
        rows = np.flatnonzero(labels == c)
        _sample_features(rng, spec.schemas, cs.partition, cs.block_distributions, out, rows)
    return Dataset(spec.schemas + (spec.label_schema,), out,
                   label_column=spec.label_schema.name)


def spec_from_dict(obj: dict) -> GeneratorSpec:
    """Parse the JSON generator-spec layout (see README)."""
    try:
        schemas = tuple(VariableSchema.from_dict(v) for v in obj["variables"])
        names = [s.name for s in schemas]
        seed = int(obj.get("seed", 0))
        label = obj.get("label")
        if label is None:
            return GeneratorSpec(
                schemas=schemas,
                true_partition=parse_partition(obj["partition"], names),
                block_distributions=tuple(obj["blocks"]),
                seed=seed,
            )
        return GeneratorSpec(
            schemas=schemas,
            seed=seed,
            label_schema=VariableSchema.from_dict(label),
            class_probs=label["probs"],
            class_specs=tuple(
                ClassSpec(parse_partition(c["partition"], names), tuple(c["blocks"]))
                for c in label["classes"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise GeneratorSpecError(f"invalid generator spec: {exc}") from exc


def spec_to_dict(spec: GeneratorSpec) -> dict:
    names = [s.name for s in spec.schemas]
    obj: dict = {
        "seed": spec.seed,
        "variables": [s.to_dict() for s in spec.schemas],
    }
    if spec.label_schema is None:
        obj["partition"] = format_partition(spec.true_partition, names)
        obj["blocks"] = [p.tolist() for p in spec.block_distributions]
    else:
        label = spec.label_schema.to_dict()
        label["probs"] = spec.class_probs.tolist()
        label["classes"] = [
            {"partition": format_partition(cs.partition, names),
             "blocks": [p.tolist() for p in cs.block_distributions]}
            for cs in spec.class_specs
        ]
        obj["label"] = label
    return obj


def load_spec(path: Union[str, os.PathLike]) -> GeneratorSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            return spec_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise GeneratorSpecError(f"spec file is not valid JSON: {exc}") from None


def binary_schemas(n: int, prefix: str = "X") -> tuple[VariableSchema, ...]:
    """``n`` binary variables named ``X1 .. Xn`` with categories ``0``/``1``."""
    return tuple(VariableSchema(f"{prefix}{i + 1}", ("0", "1")) for i in range(n))


def paired_spec(
    pair_joint: Sequence[float] = (0.4, 0.1, 0.1, 0.4), n_pairs: int = 2, seed: int = 0
) -> GeneratorSpec:
    """Binary variables in dependent consecutive pairs ``(X1,X2),(X3,X4),...``."""
    n = 2 * n_pairs
    return GeneratorSpec(
        schemas=binary_schemas(n),
        true_partition=SetPartition(tuple(i // 2 for i in range(n))),
        block_distributions=tuple([pair_joint] * n_pairs),
        seed=seed,
    )


def independent_spec(
    n_vars: int, marginal: Sequence[float] = (0.5, 0.5), seed: int = 0
) -> GeneratorSpec:
    """Mutually independent binary variables sharing one marginal."""
    return GeneratorSpec(
        schemas=binary_schemas(n_vars),
        true_partition=SetPartition.singletons(n_vars),
        block_distributions=tuple([marginal] * n_vars),
        seed=seed,
    )
