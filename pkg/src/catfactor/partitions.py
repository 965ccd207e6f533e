"""Set partitions of variable indices in restricted-growth-string form."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

DEFAULT_EXHAUSTIVE_CAP = 12


class PartitionError(ValueError):
    pass


class CapExceeded(PartitionError):
    """Variable count is above the exhaustive cap; use greedy search."""


@dataclass(frozen=True, order=True)
class SetPartition:
    """A grouping of ``0 .. n-1`` into disjoint non-empty blocks.

    ``assignment[i]`` is the block number of variable ``i``; blocks are
    numbered by first occurrence, so ``assignment[0] == 0`` and each entry
    is at most one more than the running maximum.
    """

    assignment: tuple[int, ...]

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignment)
        top = -1
        for x in a:
            if x < 0 or x > top + 1:
                raise PartitionError(f"not a restricted growth string: {a}")
            top = max(top, x)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def n_blocks(self) -> int:
        return max(self.assignment) + 1 if self.assignment else 0

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        out: list[list[int]] = [[] for _ in range(self.n_blocks)]
        for i, b in enumerate(self.assignment):
            out[b].append(i)
        return [tuple(b) for b in out]

    @classmethod
    def singletons(cls, n: int) -> "SetPartition":
        return cls(tuple(range(n)))

    @classmethod
    def full(cls, n: int) -> "SetPartition":
        return cls((0,) * n)

    def format(self, names: Sequence[str]) -> str:
        return format_partition(self, names)


def canonicalize(blocks: Sequence[Sequence[int]], n: int | None = None) -> SetPartition:
    """Turn any list of blocks into its restricted-growth-string form.

    >>> canonicalize([[2], [0, 1]]).assignment
    (0, 0, 1)
    """
    blocks = [list(b) for b in blocks]
    if any(not b for b in blocks):
        raise PartitionError("empty block")
    flat = [i for b in blocks for i in b]
    if len(set(flat)) != len(flat):
        raise PartitionError("blocks overlap")
    if n is None:
        n = len(flat)
    if sorted(flat) != list(range(n)):
        raise PartitionError(f"blocks do not cover 0..{n - 1} exactly")
    owner = [0] * n
    for k, b in enumerate(blocks):
        for i in b:
            owner[i] = k
    relabel: dict[int, int] = {}
    return SetPartition(tuple(relabel.setdefault(o, len(relabel)) for o in owner))


def bell_number(n: int) -> int:
    """Number of set partitions of an ``n``-element set (Bell triangle)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def iter_assignments(n: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length ``n`` in lexicographic order."""
    if n == 0:
        yield ()
        return
    a = [0] * n
    m = [0] * n  # m[i] = max(a[0..i-1]) for i >= 1
    while True:
        yield tuple(a)
        i = n - 1
        while i > 0 and a[i] == m[i] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        top = max(m[i], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            m[j] = top


def enumerate_partitions(n: int, cap: int = DEFAULT_EXHAUSTIVE_CAP) -> Iterator[SetPartition]:
    """Yield every partition of ``0 .. n-1`` once, lexicographic in RGS order."""
    if n < 1:
        raise PartitionError("n must be positive")
    if n > cap:
        raise CapExceeded(
            f"{n} variables exceed the exhaustive cap of {cap} "
            f"({bell_number(n)} partitions); use greedy search"
        )
    for a in iter_assignments(n):
        yield SetPartition(a)


_BLOCK_RE = re.compile(r"\(([^()]*)\)")


def format_partition(p: SetPartition, names: Sequence[str]) -> str:
    """Render as ``(a,b),(c),(d)`` with blocks in canonical order."""
    if len(names) != p.n:
        raise PartitionError("name count does not match partition size")
    return ",".join("(" + ",".join(names[i] for i in b) + ")" for b in p.blocks)


def parse_partition(text: str, names: Sequence[str]) -> SetPartition:
    """Parse the ``(a,b),(c)`` syntax against a list of variable names."""
    index = {name: i for i, name in enumerate(names)}
    blocks = []
    pos = 0
    for m in _BLOCK_RE.finditer(text):
        gap = text[pos:m.start()].strip()
        if gap != ("," if blocks else ""):
            raise PartitionError(f"unexpected text {gap!r} in partition {text!r}")
        block = []
        for tok in m.group(1).split(","):
            tok = tok.strip()
            if tok not in index:
                raise PartitionError(f"unknown variable {tok!r} in partition {text!r}")
            block.append(index[tok])
        blocks.append(block)
        pos = m.end()
    if text[pos:].strip() or not blocks:
        raise PartitionError(f"cannot parse partition {text!r}")
    return canonicalize(blocks, n=len(names))
