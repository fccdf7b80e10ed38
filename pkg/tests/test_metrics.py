import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import levenshtein
from utrnet.exceptions import ContractError
from utrnet.metrics import EvalReport, align, char_accuracy, edit_distance, per_char_accuracy

words = st.text(alphabet="abc ", max_size=8)


def test_known_distances():
    assert edit_distance("kitten", "sitting") == 3
    assert edit_distance("", "abc") == 3
    assert edit_distance("abc", "abc") == 0
    assert edit_distance("flaw", "lawn") == 2


def test_matches_recursive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(300):
        a = "".join(rng.choice(list("abcd"), size=rng.integers(0, 8)))
        b = "".join(rng.choice(list("abcd"), size=rng.integers(0, 8)))
        assert edit_distance(a, b) == levenshtein(a, b)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(words, words, words)
def test_metric_axioms(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
    assert (edit_distance(a, b) == 0) == (a == b)


def test_corpus_accuracy_is_not_mean_of_lines():
    pairs = [("a", "ab"), ("abcdefgh", "abcdefgh")]
    # corpus: (10 - 1) / 10; line mean would be (0.5 + 1.0) / 2
    assert char_accuracy(pairs) == pytest.approx(0.9)
    assert char_accuracy(pairs) != pytest.approx(0.75)


def test_accuracy_can_be_negative():
    assert char_accuracy([("xxxxx", "a")]) == -4.0  # 1 substitution + 4 insertions


def test_empty_ground_truth_corpus_rejected():
    with pytest.raises(ContractError):
        char_accuracy([("abc", "")])


def test_alignment_cost_equals_distance():
    rng = np.random.default_rng(1)
    for _ in range(200):
        gt = "".join(rng.choice(list("abc"), size=rng.integers(0, 7)))
        pred = "".join(rng.choice(list("abc"), size=rng.integers(0, 7)))
        steps = align(gt, pred)
        cost = sum(1 for i, j in steps if i < 0 or j < 0 or gt[i] != pred[j])
        assert cost == edit_distance(gt, pred)
        assert [i for i, _ in steps if i >= 0] == list(range(len(gt)))
        assert [j for _, j in steps if j >= 0] == list(range(len(pred)))


def test_alignment_prefers_diagonal_then_insertion():
    assert align("ab", "ab") == [(0, 0), (1, 1)]
    # the backtrace starts at the end, so the diagonal claims the last symbols
    assert align("a", "aa") == [(-1, 0), (0, 1)]
    assert align("aa", "a") == [(0, -1), (1, 0)]
    # substitution vs insertion + deletion: diagonal wins
    assert align("ab", "ac") == [(0, 0), (1, 1)]
    assert align("ab", "ba") == [(0, 0), (1, 1)]
    # at the last cell only insertion and deletion tie; insertion is taken
    assert align("aba", "bab") == [(0, -1), (1, 0), (2, 1), (-1, 2)]


def test_per_char_accuracy_counts_matches_only():
    acc = per_char_accuracy([("ab", "ac"), ("c", "c")])
    assert acc == {"a": 1.0, "c": 0.5}


def test_report_tsv_summary_row():
    pairs = [("ab", "ab"), ("b", "a b")]
    report = EvalReport.from_pairs(pairs)
    lines = report.to_tsv().splitlines()
    assert lines[0] == "char\thits\ttotal\taccuracy"
    assert lines[-1] == "#summary\t3\t5\t0.600000"
    assert "<space>\t0\t1\t0.000000" in lines
    assert report.accuracy == char_accuracy(pairs)
