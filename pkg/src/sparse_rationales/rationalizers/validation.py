"""Input checks for the estimator front end."""

from __future__ import annotations

import numpy as np


def _as_tokens(seq, vocab_size: int | None, what: str) -> np.ndarray:
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-D sequence of token ids")
    if not (np.issubdtype(arr.dtype, np.integer) or (np.issubdtype(arr.dtype, np.floating) and np.all(arr == np.round(arr)))):
        raise ValueError(f"{what} must contain integer token ids")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or (vocab_size is not None and arr.max() >= vocab_size):
        raise ValueError(f"{what} has token ids outside [0, {vocab_size})")
    return arr


def check_token_sequences(X, vocab_size: int | None = None) -> list[np.ndarray]:
    """List of documents (ragged allowed) as int64 arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = list(X)
    if len(X) == 0:
        raise ValueError("no documents given")
    return [_as_tokens(doc, vocab_size, f"document {i}") for i, doc in enumerate(X)]


def check_token_pairs(X, vocab_size: int | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """List of ``(premise, hypothesis)`` pairs as int64 arrays."""
    if len(X) == 0:
        raise ValueError("no pairs given")
    pairs = []
    for i, pair in enumerate(X):
        if len(pair) != 2:
            raise ValueError(f"pair {i} must be (premise, hypothesis)")
        pairs.append(
            (_as_tokens(pair[0], vocab_size, f"premise {i}"), _as_tokens(pair[1], vocab_size, f"hypothesis {i}"))
        )
    return pairs


def check_labels(y, n: int, max_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct classes and the label index of every sample."""
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    classes, index = np.unique(y, return_inverse=True)
    if classes.size > max_classes:
        raise ValueError(f"at most {max_classes} classes supported, got {classes.size}")
    return classes, index.astype(np.int64)
