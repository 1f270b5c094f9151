import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_rationales.metrics import corpus_token_f1, rationale_size, token_f1


def test_token_f1_half():
    e = token_f1([1, 1, 0, 0], [1, 0, 1, 0])
    assert (e.precision, e.recall, e.token_f1) == (0.5, 0.5, 0.5)
    assert e.avg_rationale_size == 0.5


def test_token_f1_perfect_and_empty():
    assert token_f1([0, 1, 1], [0, 1, 1]).token_f1 == 1.0
    e = token_f1([0, 0, 0], [1, 0, 0])
    assert (e.precision, e.recall, e.token_f1) == (0.0, 0.0, 0.0)


def test_relaxed_masks_use_threshold():
    assert token_f1([0.3, 1e-4, 0.0], [1, 1, 0]).token_f1 == 1.0
    assert token_f1([0.3, 1e-4, 0.0], [1, 1, 0], threshold=0.01).recall == 0.5
    with pytest.raises(ValueError):
        token_f1([1], [1], threshold=-0.1)


def test_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        token_f1([1, 0], [1, 0, 0])
    with pytest.raises(ValueError):
        corpus_token_f1([[1]], [[1], [0]])
    with pytest.raises(ValueError):
        corpus_token_f1([], [])


def test_rationale_size_examples():
    assert rationale_size([[1, 0, 1, 0]]) == 0.5
    assert rationale_size([[0, 0], [0, 0, 0]]) == 0.0
    assert rationale_size([[1, 1], [0, 0, 0, 0]]) == 0.5
    with pytest.raises(ValueError):
        rationale_size([])


def test_corpus_is_macro_average():
    e = corpus_token_f1([[1, 1, 0, 0], [1, 0]], [[1, 0, 1, 0], [1, 0]])
    assert e.token_f1 == pytest.approx(0.75)
    assert e.avg_rationale_size == pytest.approx(0.5)
    assert set(e.to_dict()) == {"token_f1", "precision", "recall", "avg_rationale_size"}


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_f1_is_harmonic_mean(pairs):
    pred, gold = (np.array(x, dtype=float) for x in zip(*pairs))
    e = token_f1(pred, gold)
    assert 0 <= e.token_f1 <= 1
    if e.precision + e.recall > 0:
        assert e.token_f1 == pytest.approx(2 * e.precision * e.recall / (e.precision + e.recall))
    else:
        assert e.token_f1 == 0
    assert token_f1(gold, gold).token_f1 == (1.0 if gold.any() else 0.0)
