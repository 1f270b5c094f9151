"""Rationale quality metrics: token-level F1 and rationale size."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class RationaleEval:
    token_f1: float
    precision: float
    recall: float
    avg_rationale_size: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


def _binarize(mask, threshold: float) -> np.ndarray:
    return np.asarray(mask, dtype=np.float64).reshape(-1) > threshold


def token_f1(pred, gold, threshold: float = 0.0) -> RationaleEval:
    """Precision, recall and F1 of ``pred > threshold`` against a binary ``gold`` mask.

    Precision (recall) is 0 when nothing is predicted (nothing is gold), and F1
    is 0 when both are 0.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    p = _binarize(pred, threshold)
    g = _binarize(gold, 0.5)
    if p.size != g.size:
        raise ValueError(f"length mismatch: prediction has {p.size} tokens, gold has {g.size}")
    tp = float(np.sum(p & g))
    precision = tp / p.sum() if p.any() else 0.0
    recall = tp / g.sum() if g.any() else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RationaleEval(f1, precision, recall, float(p.mean()) if p.size else 0.0)


def rationale_size(masks, threshold: float = 0.0) -> float:
    """Mean over documents of the fraction of tokens not zeroed out."""
    masks = list(masks)
    if not masks:
        raise ValueError("need at least one mask")
    return float(np.mean([_binarize(m, threshold).mean() for m in masks]))


def corpus_token_f1(preds, golds, threshold: float = 0.0) -> RationaleEval:
    """Macro average over documents of :func:`token_f1`."""
    preds, golds = list(preds), list(golds)
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions but {len(golds)} gold masks")
    if not preds:
        raise ValueError("need at least one document")
    evals = [token_f1(p, g, threshold) for p, g in zip(preds, golds)]
    return RationaleEval(
        token_f1=float(np.mean([e.token_f1 for e in evals])),
        precision=float(np.mean([e.precision for e in evals])),
        recall=float(np.mean([e.recall for e in evals])),
        avg_rationale_size=rationale_size(preds, threshold),
    )
