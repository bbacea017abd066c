import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feelsplit.data import Dataset, Sample
from feelsplit.similarity import (
    SimilarityConfig,
    jaccard,
    jaccard_matrix,
    p1_objective,
    pairwise_objective,
    similarity_to_subset,
    token_matrix,
    tokenize,
    tokens_to_matrix,
)
from feelsplit.splitting import Partition

token_sets = st.frozensets(st.integers(0, 15), max_size=10)


def test_tokenize_rule():
    s = Sample(np.array([0.9, 0.1, 0.6]), 2)
    assert tokenize(s, SimilarityConfig()) == {0, 2, 5}


def test_tokenize_all_zero_without_labels():
    s = Sample(np.zeros(4), 1)
    assert tokenize(s, SimilarityConfig(include_label_token=False)) == frozenset()
    assert tokenize(s, SimilarityConfig()) == {5}


def test_tokenize_deterministic():
    s = Sample(np.array([0.5, 0.49, 1.0]), 0)
    assert tokenize(s, SimilarityConfig()) == tokenize(s, SimilarityConfig())


def test_config_bounds():
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            SimilarityConfig(binarize_threshold=bad)
    with pytest.raises(ValueError):
        SimilarityConfig(subset_aggregation="median")


def test_jaccard_values():
    assert jaccard(frozenset({1, 2}), frozenset({1, 2})) == 1.0
    assert jaccard(frozenset({1}), frozenset({2})) == 0.0
    assert jaccard(frozenset({1, 2, 3}), frozenset({2, 3, 4})) == 0.5
    assert jaccard(frozenset(), frozenset()) == 1.0


@given(token_sets, token_sets)
def test_jaccard_symmetric_and_bounded(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0


@given(st.lists(token_sets, min_size=1, max_size=6))
def test_matrix_matches_set_form(sets):
    sim = jaccard_matrix(tokens_to_matrix(sets, 16))
    for i, j in itertools.product(range(len(sets)), repeat=2):
        assert sim[i, j] == pytest.approx(jaccard(sets[i], sets[j]), abs=1e-15)


def test_token_matrix_matches_tokenize():
    rng = np.random.default_rng(1)
    data = Dataset(rng.uniform(size=(10, 5)), rng.integers(0, 3, size=10))
    cfg = SimilarityConfig()
    tm = token_matrix(data, cfg, class_count=3)
    for i, s in enumerate(data):
        assert set(np.flatnonzero(tm[i]).tolist()) == tokenize(s, cfg)


def test_similarity_to_subset():
    cfg = SimilarityConfig()
    c = frozenset({1, 2})
    assert similarity_to_subset(c, [c], cfg) == 1.0
    assert similarity_to_subset(c, [frozenset({3}), frozenset({4})], cfg) == 0.0
    assert similarity_to_subset(c, [frozenset({1, 2}), frozenset({3, 4})], cfg) == 0.5
    with pytest.raises(ValueError):
        similarity_to_subset(c, [], cfg)


@given(token_sets, st.lists(token_sets, min_size=1, max_size=5))
def test_max_aggregation_dominates_mean(c, subset):
    mean = similarity_to_subset(c, subset, SimilarityConfig())
    top = similarity_to_subset(c, subset, SimilarityConfig(subset_aggregation="max"))
    assert top >= mean


def test_p1_small_cases():
    disjoint = [frozenset({0}), frozenset({1}), frozenset({2}), frozenset({3})]
    assert p1_objective(Partition(2, (0, 0, 1, 1)), disjoint) == 0.0
    same = [frozenset({1, 2})] * 3
    assert p1_objective(Partition(1, (0, 0, 0)), same) == 3.0
    with pytest.raises(IndexError):
        p1_objective(Partition(1, (0, 0)), same)


def _double_loop(assignment, sets):
    total = 0.0
    for u in range(len(sets)):
        for v in range(len(sets)):
            if u < v and assignment[u] == assignment[v]:
                total += jaccard(sets[u], sets[v])
    return total


def test_p1_matches_double_loop_on_random_partitions():
    rng = np.random.default_rng(5)
    for _ in range(50):
        sets = [frozenset(rng.choice(10, size=rng.integers(0, 6), replace=False).tolist()) for _ in range(12)]
        k = int(rng.integers(1, 5))
        assignment = tuple(int(a) for a in rng.integers(0, k, size=12))
        part = Partition(k, assignment)
        expected = _double_loop(assignment, sets)
        assert p1_objective(part, sets) == pytest.approx(expected, rel=1e-12)
        assert pairwise_objective(np.array(assignment), jaccard_matrix(tokens_to_matrix(sets, 10))) == pytest.approx(expected, rel=1e-12)
        sizes = np.bincount(assignment, minlength=k)
        assert 0.0 <= expected <= sum(s * (s - 1) / 2 for s in sizes)
