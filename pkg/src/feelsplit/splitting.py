"""Diversity-maximizing split of a local dataset into ``k`` sub-datasets.

:func:`split` is the greedy heuristic run on every device: ``k`` random seed
samples open the sub-datasets, then every other sample (in seeded random order)
joins the sub-dataset it is least similar to.  :func:`split_exact` enumerates
every admissible partition of a small dataset and is the quality reference for
the greedy pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .similarity import SimilarityConfig, jaccard_matrix, pairwise_objective, token_matrix

EXACT_LIMIT = 12


@dataclass(frozen=True)
class Partition:
    subset_count: int
    assignment: tuple[int, ...]

    def __post_init__(self):
        if self.subset_count < 1:
            raise ValueError("subset_count must be >= 1")
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        if any(a < 0 or a >= self.subset_count for a in self.assignment):
            raise ValueError("assignment index out of range")

    def __len__(self) -> int:
        return len(self.assignment)

    def members(self, d: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) == d)

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.assignment, dtype=np.int64), minlength=self.subset_count)


@dataclass(frozen=True)
class SubDatasetSummary:
    device_id: int
    subset_index: int
    size: int
    internal_similarity: float


def constraint_violations(partition: Partition, n: int) -> list[str]:
    """Names of the violated partition constraints (empty when feasible).

    ``single_assignment``: each sample sits in exactly one subset.
    ``min_size``: every subset has two or more samples whenever ``n >= 2k``.
    ``coverage``: the assignment covers all ``n`` samples.
    """
    out = []
    assignment = partition.assignment
    if any(not 0 <= a < partition.subset_count for a in assignment):
        out.append("single_assignment")
    if n >= 2 * partition.subset_count and partition.sizes().min() < 2:
        out.append("min_size")
    if len(assignment) != n:
        out.append("coverage")
    return out


def _check_k(n: int, k: int) -> None:
    if n < 1:
        raise ValueError("cannot split an empty dataset")
    if k < 1 or (k > 1 and 2 * k > n):
        raise ValueError(f"k={k} out of range for {n} samples (need 1 <= k <= n/2)")


def _similarity(data: Dataset, cfg: SimilarityConfig) -> np.ndarray:
    return jaccard_matrix(token_matrix(data, cfg))


def _score(sim_row_sum, sim_row_max, counts, cfg):
    if cfg.subset_aggregation == "max":
        return sim_row_max
    return sim_row_sum / counts


def split(data: Dataset, k: int, cfg: SimilarityConfig, seed: int) -> Partition:
    n = len(data)
    _check_k(n, k)
    if k == 1:
        return Partition(1, (0,) * n)
    sim = _similarity(data, cfg)
    rng = np.random.default_rng(seed)

    seeds = rng.choice(n, size=k, replace=False)
    rest = np.setdiff1d(np.arange(n), seeds)
    order = rng.permutation(rest)

    assignment = np.full(n, -1, dtype=np.int64)
    # running per-subset similarity of every sample to the members so far
    sums = np.zeros((n, k))
    maxes = np.zeros((n, k))
    counts = np.zeros(k)

    def place(v: int, d: int) -> None:
        assignment[v] = d
        sums[:, d] += sim[:, v]
        np.maximum(maxes[:, d], sim[:, v], out=maxes[:, d])
        counts[d] += 1

    for d, v in enumerate(seeds):
        place(int(v), d)
    for v in order:
        scores = _score(sums[v], maxes[v], counts, cfg)
        place(int(v), int(np.argmin(scores)))

    _repair(assignment, sim, k, cfg)
    return Partition(k, assignment)


def _repair(assignment: np.ndarray, sim: np.ndarray, k: int, cfg: SimilarityConfig) -> None:
    """Refill subsets holding fewer than two samples from subsets holding three or more."""
    while True:
        sizes = np.bincount(assignment, minlength=k)
        short = np.flatnonzero(sizes < 2)
        if short.size == 0:
            return
        d = int(short[0])
        donors = np.flatnonzero(sizes[assignment] >= 3)
        members = np.flatnonzero(assignment == d)
        block = sim[np.ix_(donors, members)]
        scores = block.max(axis=1) if cfg.subset_aggregation == "max" else block.mean(axis=1)
        assignment[donors[int(np.argmin(scores))]] = d


def split_exact(data: Dataset, k: int, cfg: SimilarityConfig) -> Partition:
    """Minimum-objective partition by branch-and-bound over restricted growth strings.

    Only partitions with exactly ``k`` subsets of two or more samples are
    admissible.  Among optimal partitions the lexicographically smallest
    canonical assignment is returned.
    """
    n = len(data)
    if n > EXACT_LIMIT:
        raise ValueError(f"instance too large for exhaustive search ({n} > {EXACT_LIMIT} samples)")
    _check_k(n, k)
    if k == 1:
        return Partition(1, (0,) * n)
    return Partition(k, exact_assignment(_similarity(data, cfg), k))


def exact_assignment(sim: np.ndarray, k: int, min_size: int = 2) -> tuple[int, ...]:
    n = sim.shape[0]
    sim = sim.tolist()
    best_val = float("inf")
    best: tuple[int, ...] | None = None
    assignment = [0] * n
    sizes = [0] * k

    def feasible_rest(i: int, used: int) -> bool:
        # samples left must open the missing subsets and top every subset up to min_size
        left = n - i
        need = sum(max(0, min_size - sizes[d]) for d in range(used))
        need += (k - used) * min_size
        return left >= need

    def rec(i: int, used: int, value: float) -> None:
        nonlocal best_val, best
        if value >= best_val and best is not None:
            return
        if i == n:
            if used == k and value < best_val:
                best_val = value
                best = tuple(assignment)
            return
        row = sim[i]
        for d in range(min(used + 1, k)):
            added = 0.0
            for j in range(i):
                if assignment[j] == d:
                    added += row[j]
            assignment[i] = d
            sizes[d] += 1
            nused = max(used, d + 1)
            if feasible_rest(i + 1, nused):
                rec(i + 1, nused, value + added)
            sizes[d] -= 1

    rec(0, 0, 0.0)
    if best is None:
        raise ValueError("no admissible partition exists")
    return best


def random_partition(n: int, k: int, rng: np.random.Generator, max_tries: int = 1000) -> Partition:
    """Uniformly random labeled assignment subject to the size constraint (rejection sampling)."""
    _check_k(n, k)
    for _ in range(max_tries):
        assignment = rng.integers(0, k, size=n)
        if k == 1 or np.bincount(assignment, minlength=k).min() >= 2:
            return Partition(k, assignment)
    # rejection keeps failing only for n close to 2k; fall back to a shuffled balanced fill
    assignment = np.concatenate([np.repeat(np.arange(k), 2), rng.integers(0, k, size=n - 2 * k)])
    return Partition(k, rng.permutation(assignment))


def objective(partition: Partition, data: Dataset, cfg: SimilarityConfig) -> float:
    return pairwise_objective(np.asarray(partition.assignment), _similarity(data, cfg))


def summarize(partition: Partition, data: Dataset, cfg: SimilarityConfig, device_id: int = 0) -> list[SubDatasetSummary]:
    sim = _similarity(data, cfg)
    out = []
    for d in range(partition.subset_count):
        members = partition.members(d)
        m = len(members)
        if m < 2:
            internal = 0.0
        else:
            block = sim[np.ix_(members, members)]
            internal = float(np.triu(block, k=1).sum() / (m * (m - 1) / 2))
        out.append(SubDatasetSummary(device_id, d, int(m), internal))
    return out


def subsets(partition: Partition, data: Dataset) -> list[Dataset]:
    return [data.take(partition.members(d)) for d in range(partition.subset_count)]


def objectives(parts: Sequence[Partition], data: Dataset, cfg: SimilarityConfig) -> list[float]:
    sim = _similarity(data, cfg)
    return [pairwise_objective(np.asarray(p.assignment), sim) for p in parts]
