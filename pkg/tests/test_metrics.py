import math
import random

import pytest
from hypothesis import given, strategies as st

from utility_rank.errors import ValidationError
from utility_rank.metrics import (
    aggregate,
    exact_match,
    ndcg_at_k,
    normalize_answer,
    prf_at_k,
    question_metrics,
)


# --- independent brute-force oracles (kept free of package internals) -------

def brute_prf(ranked, gold, k):
    top = list(ranked)[: min(k, len(ranked))]
    hits = 0
    for pid in top:
        if pid in gold:
            hits += 1
    precision = hits / len(top)
    recall = hits / len(gold)
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def brute_ndcg(ranked, gold, k):
    dcg = 0.0
    for position, pid in enumerate(list(ranked)[: min(k, len(ranked))], start=1):
        gain = 1.0 if pid in gold else 0.0
        dcg += gain / math.log2(position + 1)
    idcg = 0.0
    for position in range(1, min(k, len(gold)) + 1):
        idcg += 1.0 / math.log2(position + 1)
    return dcg / idcg


def random_instances(count, seed, max_n=10, max_gold=4):
    rng = random.Random(seed)
    for _ in range(count):
        n = rng.randint(2, max_n)
        ids = [f"d{i}" for i in range(n)]
        rng.shuffle(ids)
        gold = set(rng.sample(ids, rng.randint(1, min(max_gold, n))))
        yield ids, gold


class TestPRF:
    def test_perfect_top2(self):
        assert prf_at_k(["A", "B"], {"A", "B"}, 2) == (1.0, 1.0, 1.0)

    def test_half_right(self):
        assert prf_at_k(["A", "X"], {"A", "B"}, 2) == (0.5, 0.5, 0.5)

    def test_three_of_four_gold_in_top5(self):
        ranked = ["g1", "x1", "g2", "g3", "x2"]
        p, r, f1 = prf_at_k(ranked, {"g1", "g2", "g3", "g4"}, 5)
        assert p == pytest.approx(0.6)
        assert r == pytest.approx(0.75)
        assert f1 == pytest.approx(2 * 0.6 * 0.75 / 1.35)

    def test_matches_brute_force(self):
        for ids, gold in random_instances(300, seed=4):
            for k in range(1, len(ids) + 1):
                assert prf_at_k(ids, gold, k) == pytest.approx(brute_prf(ids, gold, k), abs=1e-12)

    def test_empty_gold_rejected(self):
        with pytest.raises(ValidationError):
            prf_at_k(["A"], set(), 1)

    def test_k_equals_gold_size_identity(self):
        # |gold| = 2, k = 2 forces P = R = F1 exactly
        for ids, _ in random_instances(200, seed=8):
            gold = set(random.Random(len(ids)).sample(ids, 2))
            p, r, f1 = prf_at_k(ids, gold, 2)
            assert p == r == f1


class TestNDCG:
    def test_derived_example(self):
        # DCG = 1 + 1/log2(4) = 1.5; IDCG = 1 + 1/log2(3) = 1.6309297535714575
        value = ndcg_at_k(["A", "X", "B", "Y", "Z"], {"A", "B"}, 5)
        assert value == pytest.approx(1.5 / (1 + 1 / math.log2(3)), abs=1e-12)
        assert value == pytest.approx(0.9197207891481876, abs=1e-9)

    def test_gold_at_rank_one(self):
        assert ndcg_at_k(["A", "X"], {"A"}, 1) == 1.0

    def test_no_gold_in_top_k(self):
        assert ndcg_at_k(["X", "Y", "A"], {"A"}, 2) == 0.0

    def test_matches_brute_force(self):
        for ids, gold in random_instances(300, seed=6):
            for k in range(1, len(ids) + 1):
                assert ndcg_at_k(ids, gold, k) == pytest.approx(
                    brute_ndcg(ids, gold, k), abs=1e-9
                )

    def test_one_exactly_when_prefix_is_gold(self):
        for ids, gold in random_instances(200, seed=14):
            for k in range(1, len(ids) + 1):
                prefix_gold = all(pid in gold for pid in ids[: min(k, len(gold))])
                if prefix_gold:
                    assert ndcg_at_k(ids, gold, k) == pytest.approx(1.0, abs=1e-12)
                else:
                    assert ndcg_at_k(ids, gold, k) < 1.0


class TestNormalizeAnswer:
    def test_article_and_punctuation(self):
        assert normalize_answer("The Beatles!") == "beatles"

    def test_article_whitespace(self):
        assert normalize_answer("a  b") == "b"

    def test_identity_on_alphanumerics(self):
        assert normalize_answer("42") == "42"

    def test_inner_articles_removed(self):
        assert normalize_answer("Return of the King") == "return of king"


class TestExactMatch:
    def test_normalized_equality(self):
        assert exact_match("the beatles.", ["The Beatles"]) == 1

    def test_inequality(self):
        assert exact_match("42 km", ["42"]) == 0

    def test_empty_prediction(self):
        assert exact_match("", ["x"]) == 0

    def test_any_gold_matches(self):
        assert exact_match("Delta Station", ["the Delta Station", "nothing"]) == 1

    def test_empty_gold_rejected(self):
        with pytest.raises(ValidationError):
            exact_match("x", [])

    @given(st.text(max_size=40), st.text(max_size=40))
    def test_symmetry(self, a, b):
        assert exact_match(a, [b]) == exact_match(b, [a])


class TestAggregate:
    def test_mean_em(self):
        per_question = {f"q{i}": {"EM": v} for i, v in enumerate([1.0, 0.0, 1.0, 1.0])}
        report = aggregate(per_question)
        assert report.macro["EM"] == pytest.approx(0.75)

    def test_single_question_identity(self):
        values = {"P@2": 0.5, "R@2": 0.5, "EM": 1.0}
        report = aggregate({"q0": values})
        assert report.macro == values
        assert report.evaluated == 1

    def test_all_ones(self):
        report = aggregate({f"q{i}": {"NDCG@1": 1.0} for i in range(7)})
        assert report.macro["NDCG@1"] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            aggregate({})

    def test_mismatched_metric_sets_rejected(self):
        with pytest.raises(ValidationError):
            aggregate({"q0": {"EM": 1.0}, "q1": {"P@2": 1.0}})

    def test_excluded_recorded(self):
        report = aggregate({"q0": {"EM": 1.0}}, excluded=["q2", "q1"])
        assert report.excluded == ("q1", "q2")


class TestQuestionMetrics:
    def test_default_key_set(self):
        values = question_metrics(["g", "x", "y", "z", "w"], {"g"}, em=1.0)
        assert set(values) == {
            "P@1", "R@1", "F1@1", "P@2", "R@2", "F1@2", "P@5", "R@5", "F1@5",
            "NDCG@1", "NDCG@5", "EM",
        }

    def test_values_in_unit_interval(self):
        for ids, gold in random_instances(100, seed=3):
            values = question_metrics(ids, gold, em=0.0)
            assert all(0.0 <= v <= 1.0 for v in values.values())
