"""scikit-learn style wrappers around the toy rationalizers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..metrics import RationaleEval, corpus_token_f1
from . import highlights, matchings
from .model import HIGHLIGHT, MATCHING, N_MATCHING_CLASSES, SyntheticExample, init_model
from .training import train_toy
from .validation import check_labels, check_token_pairs, check_token_sequences

_SOLVER_PARAMS = ("temperature", "test_temperature", "train_iters", "test_iters")
_TRAIN_PARAMS = ("learning_rate", "batch_size", "warmup_epochs", "freeze_embeddings")


class _ToyRationalizer(ClassifierMixin, BaseEstimator):
    _kind = ""
    _max_classes = 0
    _task_params: tuple[str, ...] = ()

    def _hyperparams(self) -> dict:
        names = self._task_params + _SOLVER_PARAMS + _TRAIN_PARAMS
        hp = {name: getattr(self, name) for name in names}
        hp["seed"] = self.random_state
        return hp

    def _check_X(self, X, vocab_size=None):
        raise NotImplementedError

    def _examples(self, X, labels):
        raise NotImplementedError

    def fit(self, X, y):
        X = self._check_X(X, self.vocab_size)
        self.classes_, labels = check_labels(y, len(X), self._max_classes)
        model = init_model(
            self._kind, self.vocab_size, self.dim, self.random_state, self._hyperparams(), embeddings=self.embeddings
        )
        self.model_, self.loss_curve_ = train_toy(model, self._examples(X, labels), self.epochs)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        proba = np.array([self._proba(x) for x in self._check_X(X, self.model_.vocab_size)])
        return proba[:, : self.classes_.size] / proba[:, : self.classes_.size].sum(axis=1, keepdims=True)

    def rationales(self, X) -> list[np.ndarray]:
        check_is_fitted(self, "model_")
        return [self._extract(x) for x in self._check_X(X, self.model_.vocab_size)]

    def rationale_score(self, X, gold, threshold: float = 0.0) -> RationaleEval:
        """Token-level F1 of the extracted rationales against gold masks, averaged over samples."""
        preds = [np.ravel(r) for r in self.rationales(X)]
        return corpus_token_f1(preds, [np.ravel(g) for g in gold], threshold)


class HighlightRationalizer(_ToyRationalizer):
    """Binary classifier that reads only a budgeted, contiguity-rewarding highlight of each document.

    ``X`` is a list of token-id sequences and ``y`` holds two classes.
    ``transform`` returns the relaxed highlights of equal-length documents as
    a 2-D array; :meth:`rationales` handles ragged input.
    """

    _kind = HIGHLIGHT
    _max_classes = 2
    _task_params = ("budget_pct", "transition")

    def __init__(
        self,
        vocab_size=50,
        dim=16,
        budget_pct=20.0,
        transition=0.005,
        temperature=0.1,
        test_temperature=1e-3,
        train_iters=10,
        test_iters=1000,
        learning_rate=0.05,
        batch_size=16,
        epochs=4,
        warmup_epochs=1,
        freeze_embeddings=True,
        embeddings=None,
        random_state=0,
    ):
        self.vocab_size = vocab_size
        self.dim = dim
        self.budget_pct = budget_pct
        self.transition = transition
        self.temperature = temperature
        self.test_temperature = test_temperature
        self.train_iters = train_iters
        self.test_iters = test_iters
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.freeze_embeddings = freeze_embeddings
        self.embeddings = embeddings
        self.random_state = random_state

    def _check_X(self, X, vocab_size=None):
        return check_token_sequences(X, vocab_size)

    def _examples(self, X, labels):
        return [SyntheticExample(x, int(c), np.zeros(x.size)) for x, c in zip(X, labels)]

    def _extract(self, tokens):
        return highlights.extract_highlight(self.model_, tokens)[0]

    def _proba(self, tokens):
        p = highlights.predict_highlight(self.model_, tokens, self._extract(tokens))
        return np.array([1.0 - p, p])

    def transform(self, X) -> np.ndarray:
        masks = self.rationales(X)
        if len({m.size for m in masks}) != 1:
            raise ValueError("transform needs equal-length documents; use rationales() for ragged input")
        return np.vstack(masks)


class MatchingRationalizer(_ToyRationalizer):
    """Up-to-3-class pair classifier that reads premise/hypothesis through a constrained alignment.

    ``X`` is a list of ``(premise, hypothesis)`` token-id pairs. ``variant`` is
    one of ``"XorAtMostOne"``, ``"AtMostOne2"`` or ``"Budget"`` (with
    ``budget``). With ``faithful=True`` the premise reaches the classifier only
    through the alignment. ``transform`` returns the list of alignment matrices.
    """

    _kind = MATCHING
    _max_classes = N_MATCHING_CLASSES
    _task_params = ("variant", "budget", "faithful")

    def __init__(
        self,
        vocab_size=50,
        dim=16,
        variant="XorAtMostOne",
        budget=None,
        faithful=False,
        temperature=0.1,
        test_temperature=1e-3,
        train_iters=10,
        test_iters=1000,
        learning_rate=0.05,
        batch_size=16,
        epochs=4,
        warmup_epochs=0,
        freeze_embeddings=False,
        embeddings=None,
        random_state=0,
    ):
        self.vocab_size = vocab_size
        self.dim = dim
        self.variant = variant
        self.budget = budget
        self.faithful = faithful
        self.temperature = temperature
        self.test_temperature = test_temperature
        self.train_iters = train_iters
        self.test_iters = test_iters
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.freeze_embeddings = freeze_embeddings
        self.embeddings = embeddings
        self.random_state = random_state

    def _check_X(self, X, vocab_size=None):
        return check_token_pairs(X, vocab_size)

    def _examples(self, X, labels):
        return [SyntheticExample(pair, int(c), np.zeros((pair[0].size, pair[1].size))) for pair, c in zip(X, labels)]

    def _extract(self, pair):
        return matchings.extract_matching(self.model_, *pair)[0]

    def _proba(self, pair):
        return matchings.predict_matching(self.model_, *pair, self._extract(pair), faithful=self.faithful)

    def transform(self, X) -> list[np.ndarray]:
        return self.rationales(X)
