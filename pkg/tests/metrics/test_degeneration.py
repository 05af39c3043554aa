import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.errors import ContractViolation
from src.metrics.degeneration import (
    REP_ORDERS, TextMetrics, distinct_n, diversity, ngrams, rep_n
)

SAMPLE = ["the", "cat", "sat", "the", "cat", "ran"]


def test_worked_example():
    """5 биграмм, 4 уникальных"""
    assert rep_n(SAMPLE, 2) == pytest.approx(0.2)
    assert rep_n(SAMPLE, 3) == 0.0
    assert rep_n(SAMPLE, 4) == 0.0
    assert diversity(SAMPLE) == pytest.approx(0.8)
    assert distinct_n(SAMPLE, 2) == pytest.approx(4 / 6)
    assert distinct_n(SAMPLE, 2, denominator="ngrams") == pytest.approx(4 / 5)


def test_all_distinct_tokens():
    tokens = [f"w{i}" for i in range(10)]
    assert distinct_n(tokens, 2) == pytest.approx(0.9)
    assert rep_n(tokens, 2) == 0.0
    assert diversity(tokens) == 1.0


def test_fully_repetitive_text():
    tokens = ["la"] * 8
    assert rep_n(tokens, 2) == pytest.approx(1 - 1 / 7)
    assert diversity(tokens) < 0.01


@pytest.mark.parametrize("tokens", [[], ["one"], ["a", "b", "c"]])
def test_too_short_for_ngrams(tokens):
    """Текст короче n: rep-n = 0"""
    assert rep_n(tokens, 4) == 0.0


def test_distinct_of_empty_text():
    assert distinct_n([], 2) is None


def test_invalid_arguments():
    with pytest.raises(ContractViolation):
        ngrams(["a"], 0)
    with pytest.raises(ContractViolation):
        distinct_n(["a"], 2, denominator="chars")


def test_text_metrics():
    m = TextMetrics.compute("x", SAMPLE)
    assert m.tokens == 6
    assert m.diversity == pytest.approx(diversity(SAMPLE))
    assert m.distinct_2 == pytest.approx(4 / 6)


def _brute_rep(tokens, n):
    grams = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            grams.append(" ".join(tokens[i:i + n]))
    if not grams:
        return 0.0
    unique = []
    for g in grams:
        if g not in unique:
            unique.append(g)
    return 1.0 - len(unique) / len(grams)


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=30), st.integers(1, 5))
def test_rep_matches_brute_force(tokens, n):
    assert rep_n(tokens, n) == pytest.approx(_brute_rep(tokens, n))
    assert 0.0 <= rep_n(tokens, n) < 1.0


@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=30))
def test_diversity_bounds(tokens):
    value = diversity(tokens)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(
        (1 - _brute_rep(tokens, 2)) * (1 - _brute_rep(tokens, 3)) * (1 - _brute_rep(tokens, 4))
    )


def _sorted_counts(tokens, n):
    """Число всех и уникальных n-грамм через сортировку, без множеств"""
    grams = sorted(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    unique = sum(1 for i, g in enumerate(grams) if i == 0 or g != grams[i - 1])
    return len(grams), unique


def test_exact_match_on_random_corpus():
    """1000 текстов длины 1..200 над словарём из 50 слов: точное совпадение с подсчётом"""
    rng = np.random.default_rng(2024)
    words = [f"w{k}" for k in range(50)]
    for _ in range(1000):
        length = int(rng.integers(1, 201))
        # часть текстов с узким словарём, чтобы повторы встречались часто
        width = int(rng.choice([2, 5, 50]))
        tokens = [words[k] for k in rng.integers(0, width, size=length)]
        for n in REP_ORDERS:
            total, unique = _sorted_counts(tokens, n)
            expected = 1.0 - unique / total if total else 0.0
            assert rep_n(tokens, n) == expected
        total, unique = _sorted_counts(tokens, 2)
        assert distinct_n(tokens, 2) == unique / length
        assert distinct_n(tokens, 2, denominator="ngrams") == (unique / total if total else 0.0)
