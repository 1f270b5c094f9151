"""Toy model parameters, synthetic planted-rationale datasets and their JSON form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..graph import budget_from_percentage

HIGHLIGHT = "highlight"
MATCHING = "matching"
N_MATCHING_CLASSES = 3
ENTAIL, NEUTRAL, CONTRADICT = 0, 1, 2


@dataclass
class ToyModel:
    """Embedding table plus linear generator and predictor.

    For highlights the generator scores token ``v`` as
    ``embeddings[v] @ generator_weights + generator_bias`` and the predictor is
    a logistic regression on the masked bag of embeddings
    (``predictor_weights`` has shape ``(D,)``). For matchings the generator
    encodes tokens as ``embeddings[v] * generator_weights`` and the predictor is
    a 3-way softmax over a ``8 D`` feature vector (``predictor_weights`` has
    shape ``(3, 8 D)``).
    """

    kind: str
    embeddings: np.ndarray
    generator_weights: np.ndarray
    generator_bias: float
    predictor_weights: np.ndarray
    predictor_bias: np.ndarray | float
    hyperparams: dict[str, Any] = field(default_factory=dict)

    PARAM_NAMES = ("embeddings", "generator_weights", "generator_bias", "predictor_weights", "predictor_bias")

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name), dtype=np.float64) for name in self.PARAM_NAMES}

    def copy(self) -> "ToyModel":
        return ToyModel(self.kind, **{k: v.copy() for k, v in self.params().items()}, hyperparams=dict(self.hyperparams))

    def apply_update(self, grads: dict[str, np.ndarray], learning_rate: float) -> None:
        for name in self.PARAM_NAMES:
            new = np.asarray(getattr(self, name), dtype=np.float64) - learning_rate * grads[name]
            setattr(self, name, new)

    def check(self) -> None:
        if self.kind not in (HIGHLIGHT, MATCHING):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.embeddings.ndim != 2 or min(self.embeddings.shape) < 1:
            raise ValueError("embeddings must be a non-empty V x D table")
        for name, value in self.params().items():
            if not np.all(np.isfinite(value)):
                raise ValueError(f"parameter {name} is not finite")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "params": {k: np.asarray(v).tolist() for k, v in self.params().items()},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToyModel":
        try:
            p = d["params"]
            model = cls(
                kind=d["kind"],
                embeddings=np.asarray(p["embeddings"], dtype=np.float64),
                generator_weights=np.asarray(p["generator_weights"], dtype=np.float64),
                generator_bias=float(p["generator_bias"]),
                predictor_weights=np.asarray(p["predictor_weights"], dtype=np.float64),
                predictor_bias=np.asarray(p["predictor_bias"], dtype=np.float64),
                hyperparams=dict(d.get("hyperparams", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed model checkpoint: {exc}") from None
        model.check()
        return model


HIGHLIGHT_DEFAULTS = {
    "budget_pct": 20.0,
    "transition": 0.005,
    "temperature": 0.1,
    "learning_rate": 0.05,
    "batch_size": 16,
    "warmup_epochs": 1,
    "freeze_embeddings": True,
}
MATCHING_DEFAULTS = {
    "variant": "XorAtMostOne",
    "faithful": False,
    "temperature": 0.1,
    "learning_rate": 0.05,
    "batch_size": 16,
    "warmup_epochs": 0,
    "freeze_embeddings": False,
}


def default_hyperparams(kind: str) -> dict[str, Any]:
    if kind == HIGHLIGHT:
        return dict(HIGHLIGHT_DEFAULTS)
    if kind == MATCHING:
        return dict(MATCHING_DEFAULTS)
    raise ValueError(f"unknown model kind {kind!r}")


def init_model(
    kind: str,
    vocab_size: int,
    dim: int,
    seed: int,
    hyperparams: dict | None = None,
    embeddings: np.ndarray | None = None,
) -> ToyModel:
    """Fresh model; ``hyperparams`` override :func:`default_hyperparams`.

    Highlight heads start at zero with a small positive generator bias, so the
    first extractions spread the budget uniformly. Matching models start with
    an identity encoder and a small random classifier.
    """
    if vocab_size < 1 or dim < 1:
        raise ValueError("vocab_size and dim must be >= 1")
    hp = default_hyperparams(kind)
    hp.update(hyperparams or {})
    hp.setdefault("seed", seed)
    rng = np.random.default_rng(seed)
    if embeddings is None:
        E = rng.normal(scale=1.0 / np.sqrt(dim), size=(vocab_size, dim))
    else:
        E = np.array(embeddings, dtype=np.float64)
        if E.shape != (vocab_size, dim):
            raise ValueError(f"embeddings have shape {E.shape}, expected {(vocab_size, dim)}")
    if kind == HIGHLIGHT:
        model = ToyModel(kind, E, np.zeros(dim), 0.1, np.zeros(dim), 0.0, hp)
    else:
        W = rng.normal(scale=0.1, size=(N_MATCHING_CLASSES, 8 * dim))
        model = ToyModel(kind, E, np.ones(dim), 0.0, W, np.zeros(N_MATCHING_CLASSES), hp)
    model.check()
    return model


@dataclass
class SyntheticExample:
    """Token ids, label and the planted gold rationale.

    For highlights ``tokens`` is one sequence and ``rationale`` a binary mask;
    for matchings ``tokens`` is ``(premise, hypothesis)`` and ``rationale`` a
    binary ``L_P x L_H`` alignment.
    """

    tokens: Any
    label: int
    rationale: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        if isinstance(self.tokens, tuple):
            tokens = [np.asarray(t).tolist() for t in self.tokens]
        else:
            tokens = np.asarray(self.tokens).tolist()
        return {"tokens": tokens, "label": int(self.label), "rationale": np.asarray(self.rationale).astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SyntheticExample":
        tokens = d["tokens"]
        if tokens and isinstance(tokens[0], list):
            tokens = (np.asarray(tokens[0], dtype=np.int64), np.asarray(tokens[1], dtype=np.int64))
        else:
            tokens = np.asarray(tokens, dtype=np.int64)
        return cls(tokens, int(d["label"]), np.asarray(d["rationale"], dtype=np.float64))


def highlight_vocabulary(vocab_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split token ids into positive, negative and neutral groups (1/5, 1/5, rest)."""
    n_polar = max(1, vocab_size // 5)
    if 2 * n_polar >= vocab_size:
        raise ValueError("vocabulary too small for the highlights task")
    ids = np.arange(vocab_size)
    return ids[:n_polar], ids[n_polar : 2 * n_polar], ids[2 * n_polar :]


def highlight_embeddings(vocab_size: int = 50, dim: int = 16, seed: int = 0, noise: float = 1.0) -> np.ndarray:
    """A fixed "pretrained" table for the highlights vocabulary.

    Two random orthonormal directions carry polarity (+1 / -1 for positive /
    negative tokens) and salience (1 for polar tokens, 0 for neutral ones);
    every row also gets isotropic noise of scale ``noise / sqrt(dim)``.
    """
    if dim < 2:
        raise ValueError("need dim >= 2 for the polarity and salience directions")
    rng = np.random.default_rng(seed)
    pos, neg, _ = highlight_vocabulary(vocab_size)
    E = rng.normal(scale=noise / np.sqrt(dim), size=(vocab_size, dim))
    polarity, salience = np.linalg.qr(rng.normal(size=(dim, 2)))[0].T
    E[pos] += polarity + salience
    E[neg] += salience - polarity
    return E


def make_highlight_data(
    n: int, vocab_size: int = 50, length: int = 20, budget_pct: float = 20.0, seed: int = 0
) -> list[SyntheticExample]:
    """Documents with a planted contiguous span of polar tokens.

    The span has ``ceil(budget_pct / 100 * length)`` tokens; a strict majority
    carries the label's polarity and the remainder the opposite one. Every
    other token is neutral, so the label is the majority polarity of the span.
    """
    rng = np.random.default_rng(seed)
    pos, neg, neutral = highlight_vocabulary(vocab_size)
    k = budget_from_percentage(length, budget_pct)
    data = []
    for _ in range(n):
        label = int(rng.integers(2))
        n_minority = int(rng.integers((k - 1) // 2 + 1))
        same, other = (pos, neg) if label == 1 else (neg, pos)
        span = np.concatenate([rng.choice(same, k - n_minority), rng.choice(other, n_minority)])
        rng.shuffle(span)
        tokens = rng.choice(neutral, length)
        start = int(rng.integers(length - k + 1))
        tokens[start : start + k] = span
        mask = np.zeros(length)
        mask[start : start + k] = 1.0
        data.append(SyntheticExample(tokens.astype(np.int64), label, mask))
    return data


def matching_vocabulary(vocab_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Content words, their negations (``v + n_content``) and fillers."""
    n_content = vocab_size * 2 // 5
    if n_content < 2 or 2 * n_content >= vocab_size:
        raise ValueError("vocabulary too small for the matchings task")
    ids = np.arange(vocab_size)
    return ids[:n_content], ids[n_content : 2 * n_content], ids[2 * n_content :]


def make_matching_data(
    n: int, vocab_size: int = 50, n_premise: int = 3, n_hypothesis: int = 4, seed: int = 0
) -> list[SyntheticExample]:
    """Premise/hypothesis pairs whose label hinges on one planted hypothesis token.

    The premise holds distinct content words. One hypothesis position carries
    a copy of a premise word (entail), its negation (contradict) or an unseen
    content word (neutral); the other hypothesis positions are fillers. The
    gold alignment links that hypothesis token to its premise source.
    """
    rng = np.random.default_rng(seed)
    content, negations, fillers = matching_vocabulary(vocab_size)
    n_content = content.size
    if n_premise + 1 > n_content:
        raise ValueError("premise longer than the content vocabulary allows")
    data = []
    for _ in range(n):
        words = rng.choice(content, n_premise + 1, replace=False)
        premise, unseen = words[:n_premise], words[n_premise]
        hypothesis = rng.choice(fillers, n_hypothesis)
        label = int(rng.integers(N_MATCHING_CLASSES))
        i, j = int(rng.integers(n_premise)), int(rng.integers(n_hypothesis))
        gold = np.zeros((n_premise, n_hypothesis))
        if label == ENTAIL:
            hypothesis[j] = premise[i]
            gold[i, j] = 1.0
        elif label == CONTRADICT:
            hypothesis[j] = premise[i] + n_content
            gold[i, j] = 1.0
        else:
            hypothesis[j] = unseen
        data.append(SyntheticExample((premise.astype(np.int64), hypothesis.astype(np.int64)), label, gold))
    return data
