"""Dirichlet-multinomial marginal likelihood of a factorization.

Under a flat Dirichlet prior on each block's bin probabilities the
marginal likelihood of factorization ``M`` has the closed form::

    P(D | M) = N! / prod_i n_i!  *  prod_{g in M} B(1 + n_g) / B(1)

with ``B`` the multivariate Beta function, ``n_i`` the full joint counts
and ``n_g`` the marginal counts of block ``g``.  Everything here is done in
log space through ``lgamma``; the multinomial coefficient depends only on
the joint counts, so it is dropped from the *comparable* score used to rank
factorizations and added back for the *full* score.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .dataset import Dataset, block_bins, nonzero_bin_counts
from .partitions import PartitionError, SetPartition

LogPrior = Callable[[SetPartition], float]


@dataclass(frozen=True)
class ScoredPartition:
    partition: SetPartition
    comparable_log_score: float
    full_log_marginal: Optional[float] = None


def _lgamma_sum(values) -> float:
    return math.fsum(gammaln(np.asarray(values, dtype=np.float64)).tolist())


def log_beta_one_plus(counts: Sequence[int]) -> float:
    """``log B(1 + counts)`` for the multivariate Beta function.

    >>> round(log_beta_one_plus([1, 1]), 7)   # B(2, 2) = 1/6
    -1.7917595
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or len(counts) == 0:
        raise ValueError("counts must be a non-empty vector")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    return _lgamma_sum(counts + 1.0) - math.lgamma(float(counts.sum()) + len(counts))


def block_log_score(nonzero_counts: np.ndarray, n_bins: int, alpha: float = 1.0) -> float:
    """``log B(alpha + n_g) - log B(alpha)`` for one block.

    Only occupied bins are passed in: an empty bin contributes
    ``lgamma(alpha) - lgamma(alpha) = 0``.
    """
    total = float(np.sum(nonzero_counts))
    a_all = alpha * n_bins
    if alpha == 1.0:
        s = _lgamma_sum(np.asarray(nonzero_counts, dtype=np.float64) + 1.0)
    else:
        k = len(nonzero_counts)
        s = _lgamma_sum(np.asarray(nonzero_counts, dtype=np.float64) + alpha) - k * math.lgamma(alpha)
    return s - math.lgamma(total + a_all) + math.lgamma(a_all)


def log_multinomial_coefficient(d: Dataset) -> float:
    """``log(N! / prod_i n_i!)`` over the full joint bins of ``d``."""
    if d.sample_count == 0 or d.n_vars == 0:
        return 0.0
    joint = nonzero_bin_counts(d, range(d.n_vars))
    return math.lgamma(d.sample_count + 1.0) - _lgamma_sum(joint + 1.0)


class BlockScorer:
    """Memoised block scores for one or more datasets over shared variables.

    With several datasets (one per class, say) a block's score is the sum of
    its per-dataset scores, taken in dataset order.  The memo key is the
    sorted tuple of variable indices.  Entries are deterministic, so
    concurrent writers racing on the same key are harmless.

    ``alpha`` other than 1 is experimental.
    """

    def __init__(self, datasets: Dataset | Sequence[Dataset], alpha: float = 1.0):
        if isinstance(datasets, Dataset):
            datasets = [datasets]
        self.datasets = list(datasets)
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        n = self.datasets[0].n_vars
        cards = self.datasets[0].cardinalities
        for d in self.datasets[1:]:
            if d.n_vars != n or d.cardinalities != cards:
                raise ValueError("datasets must share a schema")
        self.n_vars = n
        self.alpha = float(alpha)
        self._memo: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()

    def __call__(self, block: Sequence[int]) -> float:
        key = tuple(block)
        v = self._memo.get(key)
        if v is None:
            v = 0.0
            for d in self.datasets:
                v += block_log_score(nonzero_bin_counts(d, key), block_bins(d, key), self.alpha)
            with self._lock:
                self._memo[key] = v
        return v

    def __len__(self) -> int:
        return len(self._memo)

    def partition_score(self, p: SetPartition) -> float:
        if p.n != self.n_vars:
            raise PartitionError(
                f"partition covers {p.n} variables, dataset has {self.n_vars}"
            )
        score = 0.0
        for b in p.blocks:
            score += self(b)
        return score


def log_marginal_likelihood(
    d: Dataset,
    p: SetPartition,
    include_coefficient: bool = True,
    variables: Optional[Sequence[int]] = None,
    scorer: Optional[BlockScorer] = None,
) -> ScoredPartition:
    """Score factorization ``p`` of the dataset's variables.

    ``variables`` restricts scoring to a subset of columns (partition index
    ``i`` then refers to column ``variables[i]``).  A pre-built ``scorer``
    over the same data may be passed to share its memo table.
    """
    if variables is not None:
        d = d.select(variables)
    if p.n != d.n_vars:
        raise PartitionError(
            f"partition covers {p.n} variables, dataset has {d.n_vars}"
        )
    scorer = scorer if scorer is not None else BlockScorer(d)
    comparable = scorer.partition_score(p)
    full = comparable + log_multinomial_coefficient(d) if include_coefficient else None
    return ScoredPartition(p, comparable, full)


def two_binary_scores(n1: int, n2: int, n3: int, n4: int) -> tuple[float, float]:
    """Closed-form log marginal likelihoods for a 2x2 table.

    Counts are laid out as ``n1=(0,0), n2=(0,1), n3=(1,0), n4=(1,1)``.
    Returns ``(log P(D|independent), log P(D|dependent))``, coefficient
    included.
    """
    ns = [n1, n2, n3, n4]
    if any(int(x) != x or x < 0 for x in ns):
        raise ValueError("counts must be non-negative integers")
    n1, n2, n3, n4 = (int(x) for x in ns)
    N = n1 + n2 + n3 + n4
    lg = math.lgamma
    log_ind = (
        lg(n1 + n2 + 1) + lg(n1 + n3 + 1) + lg(n2 + n4 + 1) + lg(n3 + n4 + 1)
        - (lg(n1 + 1) + lg(n2 + 1) + lg(n3 + 1) + lg(n4 + 1))
        - math.log(N + 1) - lg(N + 2)
    )
    # 6 / ((N+3)(N+2)(N+1)) written as 3! N! / (N+3)!
    log_dep = lg(4) + lg(N + 1) - lg(N + 4)
    return log_ind, log_dep


def bayes_factor_two_binary(n1: int, n2: int, n3: int, n4: int) -> float:
    """``K = P(D|independent) / P(D|dependent)``; ``K < 1`` favours dependence."""
    log_ind, log_dep = two_binary_scores(n1, n2, n3, n4)
    return math.exp(log_ind - log_dep)


def uniform_log_prior(p: SetPartition) -> float:
    return 0.0


def log_posterior_score(sp: ScoredPartition, prior: Optional[LogPrior] = None) -> float:
    """Unnormalised log posterior: comparable score plus ``log P(M)``."""
    if prior is None:
        return sp.comparable_log_score
    w = float(prior(sp.partition))
    if not math.isfinite(w):
        raise ValueError(f"log-prior is not finite for {sp.partition.assignment}")
    return sp.comparable_log_score + w
