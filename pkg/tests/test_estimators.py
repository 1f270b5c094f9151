import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sparse_rationales import HighlightRationalizer, MatchingRationalizer
from sparse_rationales.rationalizers import highlight_embeddings, make_highlight_data, make_matching_data


@pytest.fixture(scope="module")
def highlight_fit():
    data = make_highlight_data(600, seed=0)
    X = [ex.tokens for ex in data]
    y = np.array(["neg", "pos"])[[ex.label for ex in data]]
    est = HighlightRationalizer(embeddings=highlight_embeddings(), epochs=3).fit(X, y)
    test = make_highlight_data(100, seed=1)
    return est, test


def test_highlight_fit_predict(highlight_fit):
    est, test = highlight_fit
    X = [ex.tokens for ex in test]
    y = np.array(["neg", "pos"])[[ex.label for ex in test]]
    assert list(est.classes_) == ["neg", "pos"]
    assert set(est.predict(X)) <= {"neg", "pos"}
    assert est.score(X, y) >= 0.9
    proba = est.predict_proba(X)
    assert proba.shape == (100, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1)
    assert len(est.loss_curve_) == 3


def test_highlight_rationales(highlight_fit):
    est, test = highlight_fit
    X = [ex.tokens for ex in test]
    Z = est.transform(X)
    assert Z.shape == (100, 20)
    assert np.all(Z.sum(axis=1) <= 4 + 1e-3)
    assert est.rationale_score(X, [ex.rationale for ex in test]).token_f1 >= 0.8
    ragged = [X[0], X[1][:10]]
    assert [r.size for r in est.rationales(ragged)] == [20, 10]
    with pytest.raises(ValueError, match="equal-length"):
        est.transform(ragged)


def test_matching_fit_predict():
    data = make_matching_data(150, seed=0)
    X = [ex.tokens for ex in data]
    y = [ex.label for ex in data]
    est = MatchingRationalizer(dim=8, epochs=1, variant="AtMostOne2").fit(X, y)
    assert list(est.classes_) == [0, 1, 2]
    proba = est.predict_proba(X[:5])
    assert proba.shape == (5, 3)
    alignments = est.transform(X[:5])
    assert all(Z.shape == (3, 4) for Z in alignments)
    assert all(np.all(Z.sum(axis=0) <= 1 + 1e-3) for Z in alignments)


def test_budget_variant_reaches_the_model():
    data = make_matching_data(20, seed=0)
    X = [ex.tokens for ex in data]
    est = MatchingRationalizer(dim=4, epochs=1, variant="Budget", budget=1).fit(X, [ex.label for ex in data])
    assert all(Z.sum() <= 1 + 1e-3 for Z in est.transform(X))


def test_params_and_clone():
    est = MatchingRationalizer(variant="Budget", budget=4, faithful=True)
    params = est.get_params()
    assert params["budget"] == 4 and params["faithful"] is True
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(dim=4)
    assert est.dim == 4 and twin.dim == 16


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        HighlightRationalizer().predict([[1, 2, 3]])


def test_fit_is_reproducible():
    data = make_highlight_data(40, seed=0)
    X, y = [ex.tokens for ex in data], [ex.label for ex in data]
    a = HighlightRationalizer(epochs=1, random_state=3).fit(X, y)
    b = HighlightRationalizer(epochs=1, random_state=3).fit(X, y)
    assert a.loss_curve_ == b.loss_curve_
    np.testing.assert_array_equal(a.model_.predictor_weights, b.model_.predictor_weights)


@pytest.mark.parametrize(
    "X, y, message",
    [
        ([[1, 2], [3, 4]], [0], "labels"),
        ([[1, 2], [3, 4], [5, 6]], [0, 1, 2], "classes"),
        ([[1, 2], [60, 4]], [0, 1], "outside"),
        ([[1, 2], []], [0, 1], "non-empty"),
        ([[1.5, 2], [3, 4]], [0, 1], "integer"),
        ([], [], "no documents"),
    ],
)
def test_highlight_input_validation(X, y, message):
    with pytest.raises(ValueError, match=message):
        HighlightRationalizer(epochs=1).fit(X, y)


def test_matching_input_validation():
    with pytest.raises(ValueError, match="pair"):
        MatchingRationalizer(epochs=1).fit([([1, 2],)], [0])
    with pytest.raises(ValueError, match="classes"):
        MatchingRationalizer(epochs=1).fit([([1], [2])] * 4, [0, 1, 2, 3])
