"""Search for the best-scoring factorization.

Exhaustive search scores every set partition (feasible up to the Bell
cap); greedy search merges blocks agglomeratively beyond it.  Ties are
broken towards more blocks, then the lexicographically smallest
restricted growth string, so results never depend on evaluation order.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

from .dataset import Dataset
from .partitions import (
    DEFAULT_EXHAUSTIVE_CAP,
    CapExceeded,
    SetPartition,
    bell_number,
    canonicalize,
)
from .scoring import (
    BlockScorer,
    LogPrior,
    ScoredPartition,
    log_multinomial_coefficient,
)

MODES = ("exhaustive", "greedy", "auto")


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "auto"
    exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP
    tie_epsilon: float = 0.0
    parallelism: int = 1
    prior: Optional[LogPrior] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.exhaustive_cap < 1:
            raise ValueError("exhaustive_cap must be >= 1")
        if not self.tie_epsilon >= 0:
            raise ValueError("tie_epsilon must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


Source = Union[Dataset, BlockScorer]


def _scorer_of(source: Source) -> BlockScorer:
    return source if isinstance(source, BlockScorer) else BlockScorer(source)


def _result(source: Source, scorer: BlockScorer, p: SetPartition) -> ScoredPartition:
    score = scorer.partition_score(p)
    full = None
    if isinstance(source, Dataset):
        full = score + log_multinomial_coefficient(source)
    return ScoredPartition(p, score, full)


def _prior_term(cfg: SearchConfig, p: SetPartition) -> float:
    if cfg.prior is None:
        return 0.0
    w = float(cfg.prior(p))
    if not math.isfinite(w):
        raise ValueError(f"log-prior is not finite for {p.assignment}")
    return w


def _better(score, nblocks, assignment, best, eps) -> bool:
    """Is (score, nblocks, assignment) preferred over ``best``?"""
    if best is None:
        return True
    b_score, b_nblocks, b_assignment = best
    if score > b_score + eps:
        return True
    if score < b_score - eps:
        return False
    if nblocks != b_nblocks:
        return nblocks > b_nblocks
    return assignment < b_assignment


def _mask_blocks(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def block_score_table(scorer: BlockScorer, parallelism: int = 1) -> list[float]:
    """Scores of all ``2**n - 1`` non-empty blocks, indexed by bitmask."""
    n = scorer.n_vars
    masks = range(1, 1 << n)
    blocks = [_mask_blocks(m) for m in masks]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            values = list(pool.map(scorer, blocks, chunksize=32))
    else:
        values = [scorer(b) for b in blocks]
    return [0.0] + values


def _walk(n: int, table: list[float], visit) -> None:
    """Depth-first walk over all partitions in lexicographic RGS order.

    ``visit(assignment, nblocks, score)`` is called at every leaf with the
    live assignment list; ``score`` sums block scores in block order.
    """
    a = [0] * n
    masks = [0] * n

    def rec(i, top):
        if i == n:
            score = 0.0
            for k in range(top + 1):
                score += table[masks[k]]
            visit(a, top + 1, score)
            return
        bit = 1 << i
        for b in range(top + 2):
            a[i] = b
            masks[b] |= bit
            rec(i + 1, top if b <= top else b)
            masks[b] ^= bit

    a[0] = 0
    masks[0] = 1
    rec(1, 0)


def _check_cap(n: int, cfg: SearchConfig) -> None:
    if n > cfg.exhaustive_cap:
        raise CapExceeded(
            f"{n} variables exceed the exhaustive cap of {cfg.exhaustive_cap} "
            f"({bell_number(n)} partitions); use greedy search"
        )


def exhaustive_search(source: Source, cfg: Optional[SearchConfig] = None) -> ScoredPartition:
    """Best partition over all ``B(n)`` candidates."""
    cfg = cfg or SearchConfig(mode="exhaustive")
    scorer = _scorer_of(source)
    n = scorer.n_vars
    if n < 1:
        raise ValueError("nothing to factor: no variables")
    _check_cap(n, cfg)
    table = block_score_table(scorer, cfg.parallelism)
    eps = cfg.tie_epsilon
    best = [None]

    def visit(a, nblocks, score):
        if cfg.prior is not None:
            score = score + _prior_term(cfg, SetPartition(a))
        cur = best[0]
        if cur is not None and score < cur[0] - eps:
            return
        t = tuple(a)
        if _better(score, nblocks, t, cur, eps):
            best[0] = (score, nblocks, t)

    _walk(n, table, visit)
    _, _, assignment = best[0]
    p = SetPartition(assignment)
    return _result(source, scorer, p)


def rank_partitions(
    source: Source, cfg: Optional[SearchConfig] = None, top: Optional[int] = None
) -> list[ScoredPartition]:
    """The ``top`` best partitions, best first (all of them if ``top`` is None).

    Ordering is by posterior score, then more blocks, then smaller RGS.
    """
    cfg = cfg or SearchConfig(mode="exhaustive")
    scorer = _scorer_of(source)
    n = scorer.n_vars
    if n < 1:
        raise ValueError("nothing to factor: no variables")
    _check_cap(n, cfg)
    table = block_score_table(scorer, cfg.parallelism)
    heap: list = []

    # Heap holds the current best `top`, smallest (= worst) at heap[0].
    def visit(a, nblocks, score):
        if cfg.prior is not None:
            score = score + _prior_term(cfg, SetPartition(a))
        item = (score, nblocks, tuple(-x for x in a))
        if top is None or len(heap) < top:
            heapq.heappush(heap, item)
        elif item > heap[0]:
            heapq.heapreplace(heap, item)

    if top is not None and top < 1:
        return []
    _walk(n, table, visit)
    out = []
    for _, _, neg in sorted(heap, reverse=True):
        p = SetPartition(tuple(-x for x in neg))
        out.append(_result(source, scorer, p))
    return out


def greedy_search(
    source: Source, cfg: Optional[SearchConfig] = None, trace: Optional[list] = None
) -> ScoredPartition:
    """Agglomerative merging from all singletons.

    Each round scores every pairwise merge and applies the one with the
    largest gain, as long as that gain exceeds ``tie_epsilon`` (strictly
    positive by default).  If ``trace`` is given, the accepted gains are
    appended to it.
    """
    cfg = cfg or SearchConfig(mode="greedy")
    scorer = _scorer_of(source)
    n = scorer.n_vars
    eps = cfg.tie_epsilon
    blocks: list[tuple[int, ...]] = [(i,) for i in range(n)]
    current = canonicalize(blocks, n)
    current_prior = _prior_term(cfg, current)
    pool = ThreadPoolExecutor(max_workers=cfg.parallelism) if cfg.parallelism > 1 else None
    try:
        while len(blocks) > 1:
            pairs = [
                (i, j) for i in range(len(blocks)) for j in range(i + 1, len(blocks))
            ]
            merged = [tuple(sorted(blocks[i] + blocks[j])) for i, j in pairs]
            if pool is not None:
                list(pool.map(scorer, merged))
            best = None
            for (i, j), m in zip(pairs, merged):
                gain = scorer(m) - scorer(blocks[i]) - scorer(blocks[j])
                cand_blocks = [b for k, b in enumerate(blocks) if k not in (i, j)] + [m]
                cand = canonicalize(cand_blocks, n)
                if cfg.prior is not None:
                    gain += _prior_term(cfg, cand) - current_prior
                # All candidates have the same block count; tie -> smaller RGS.
                if best is None or _better(gain, 0, cand.assignment, best[:3], eps):
                    best = (gain, 0, cand.assignment, i, j, m)
            gain, _, _, i, j, m = best
            if not gain > eps:
                break
            blocks = [b for k, b in enumerate(blocks) if k not in (i, j)] + [m]
            blocks.sort()
            current = canonicalize(blocks, n)
            current_prior = _prior_term(cfg, current)
            if trace is not None:
                trace.append(gain)
    finally:
        if pool is not None:
            pool.shutdown()
    return _result(source, scorer, current)


def search(source: Source, cfg: Optional[SearchConfig] = None) -> ScoredPartition:
    """Dispatch on ``cfg.mode``; auto is exhaustive up to the cap, else greedy."""
    cfg = cfg or SearchConfig()
    n = source.n_vars
    if cfg.mode == "greedy" or (cfg.mode == "auto" and n > cfg.exhaustive_cap):
        return greedy_search(source, cfg)
    return exhaustive_search(source, cfg)
