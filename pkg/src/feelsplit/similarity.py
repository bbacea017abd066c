"""Sample tokenization and Jaccard similarity.

A sample becomes a set of token ids: the indices of features at or above the
binarization threshold, plus (optionally) one token ``feature_dim + label``.
Set-level functions work on ``frozenset`` token sets; the matrix helpers do the
same arithmetic on boolean token matrices for whole datasets at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset, Sample

TokenSet = frozenset

AGGREGATIONS = ("mean", "max")


@dataclass(frozen=True)
class SimilarityConfig:
    binarize_threshold: float = 0.5
    include_label_token: bool = True
    subset_aggregation: str = "mean"

    def __post_init__(self):
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ValueError("binarize_threshold must lie strictly inside (0, 1)")
        if self.subset_aggregation not in AGGREGATIONS:
            raise ValueError(f"subset_aggregation must be one of {AGGREGATIONS}")


def tokenize(sample: Sample, cfg: SimilarityConfig) -> frozenset[int]:
    feats = np.asarray(sample.features)
    tokens = set(np.flatnonzero(feats >= cfg.binarize_threshold).tolist())
    if cfg.include_label_token:
        tokens.add(feats.shape[0] + int(sample.label))
    return frozenset(tokens)


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def similarity_to_subset(candidate: frozenset, subset: Sequence[frozenset], cfg: SimilarityConfig) -> float:
    if not subset:
        raise ValueError("similarity to an empty subset is undefined")
    scores = [jaccard(candidate, m) for m in subset]
    if cfg.subset_aggregation == "max":
        return max(scores)
    return sum(scores) / len(scores)


def p1_objective(partition, tokens: Sequence[frozenset]) -> float:
    """Sum of Jaccard over every unordered same-subset pair."""
    assignment = np.asarray(partition.assignment)
    if assignment.shape[0] != len(tokens):
        raise IndexError(f"partition covers {assignment.shape[0]} samples, got {len(tokens)} token sets")
    total = 0.0
    for d in range(partition.subset_count):
        members = np.flatnonzero(assignment == d)
        for i, u in enumerate(members):
            for v in members[i + 1 :]:
                total += jaccard(tokens[u], tokens[v])
    return total


# ---------------------------------------------------------------------------
# vectorized forms


def token_matrix(data: Dataset, cfg: SimilarityConfig, class_count: int | None = None) -> np.ndarray:
    """Boolean ``(n, F + C)`` matrix whose row ``i`` is the token set of sample ``i``."""
    if class_count is None:
        class_count = int(data.labels.max()) + 1 if len(data) else 0
    n, dim = data.features.shape
    out = np.zeros((n, dim + class_count), dtype=bool)
    out[:, :dim] = data.features >= cfg.binarize_threshold
    if cfg.include_label_token:
        out[np.arange(n), dim + data.labels] = True
    return out


def jaccard_matrix(tokens: np.ndarray) -> np.ndarray:
    """Pairwise Jaccard for the rows of a boolean token matrix."""
    t = tokens.astype(np.float64)
    inter = t @ t.T
    sizes = t.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return sim


def tokens_to_matrix(tokens: Sequence[frozenset], width: int | None = None) -> np.ndarray:
    if width is None:
        width = max((max(t) for t in tokens if t), default=-1) + 1
    out = np.zeros((len(tokens), width), dtype=bool)
    for i, t in enumerate(tokens):
        out[i, list(t)] = True
    return out


def pairwise_objective(assignment: np.ndarray, sim: np.ndarray) -> float:
    """Matrix form of :func:`p1_objective` given a precomputed similarity matrix."""
    assignment = np.asarray(assignment)
    same = assignment[:, None] == assignment[None, :]
    return float(np.triu(np.where(same, sim, 0.0), k=1).sum())
