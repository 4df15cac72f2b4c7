"""
Supervised contrastive loss and cross-entropy, both differentiable.

supervised_contrastive_loss_reference is a plain double loop kept as an
independent oracle for the vectorized contrastive loss.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor
from .autodiff import functional as F
from .errors import FactualError, ShapeError

DEFAULT_TEMPERATURE = 0.1
UNIT_NORM_TOLERANCE = 1e-9


@dataclass
class SclBatch:
    """Representations (B x D, unit rows), their labels and the temperature."""

    representations: Tensor
    labels: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE


def _positive_mask(labels: np.ndarray) -> np.ndarray:
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    return same


def supervised_contrastive_loss(batch: SclBatch) -> Tensor:
    """
    Mean over anchors with at least one positive of
    -1/|P(i)| * sum_p log( exp(f_i.f_p/tau) / sum_{a != i} exp(f_i.f_a/tau) ).

    Anchors without positives are left out of the mean.

    Args:
        batch: SclBatch with L2-normalized representations

    Returns:
        Scalar loss tensor

    Raises:
        ValueError: If tau <= 0 or the batch holds fewer than two samples
        ShapeError: If labels do not match the representations
        FactualError: If rows are not unit-norm or no anchor has a positive
    """
    features, labels, tau = batch.representations, np.asarray(batch.labels), float(batch.temperature)
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise ShapeError("supervised_contrastive_loss", features.shape, labels.shape)
    size = features.shape[0]
    if size < 2:
        raise ValueError("supervised contrastive loss needs at least two samples")
    norms = np.linalg.norm(features.data, axis=1)
    if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOLERANCE:
        raise FactualError("supervised contrastive loss expects unit-norm representations")

    positives = _positive_mask(labels)
    counts = positives.sum(axis=1)
    anchors = counts > 0
    if not anchors.any():
        raise FactualError("no positive pairs")

    others = ~np.eye(size, dtype=bool)
    similarity = F.scale(F.matmul(features, features, transpose_b=True), 1.0 / tau)
    # constant shift for a stable log-sum-exp; the diagonal is excluded from it
    shift = np.where(others, similarity.data, -np.inf).max(axis=1, keepdims=True)
    shifted = F.sub(similarity, shift)
    # +inf on the diagonal sends exp() to exactly zero for a == i
    excluded = F.sub(similarity, shift + np.where(others, 0.0, np.inf))
    denominator = F.tsum(F.exp(excluded), axis=1, keepdims=True)
    log_prob = F.sub(shifted, F.log(denominator))

    weights = np.zeros((size, size))
    weights[anchors] = positives[anchors] / counts[anchors, None]
    weights /= anchors.sum()
    return F.scale(F.tsum(F.mul(log_prob, weights)), -1.0)


def supervised_contrastive_loss_reference(representations: np.ndarray, labels: Sequence[int], temperature: float = DEFAULT_TEMPERATURE) -> float:
    """Double-loop evaluation of the same loss, straight from its definition."""
    f = np.asarray(representations, dtype=np.float64)
    labels = list(labels)
    n = len(labels)
    terms = []
    for i in range(n):
        positives = [p for p in range(n) if p != i and labels[p] == labels[i]]
        if not positives:
            continue
        denominator = sum(math.exp(float(f[i] @ f[a]) / temperature) for a in range(n) if a != i)
        total = 0.0
        for p in positives:
            total += math.log(math.exp(float(f[i] @ f[p]) / temperature) / denominator)
        terms.append(-total / len(positives))
    if not terms:
        raise FactualError("no positive pairs")
    return sum(terms) / len(terms)


def cross_entropy_loss(logits: Tensor, labels: Sequence[int], reduction: str = "mean") -> Tensor:
    """
    Softmax cross-entropy with a stable log-sum-exp.

    Args:
        logits: B x C tensor, C >= 2
        labels: B class indices
        reduction: 'mean' (default) or 'sum'

    Returns:
        Scalar loss tensor

    Raises:
        ValueError: If C < 2, a label is out of range or reduction is unknown
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy_loss", logits.shape, labels.shape)
    classes = logits.shape[1]
    if classes < 2:
        raise ValueError("cross entropy needs at least two classes")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"label out of range for {classes} classes")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"Invalid reduction '{reduction}'. Must be one of: mean, sum")

    shifted = F.sub(logits, logits.data.max(axis=1, keepdims=True))
    log_norm = F.log(F.tsum(F.exp(shifted), axis=1, keepdims=True))
    log_prob = F.sub(shifted, log_norm)
    picked = F.gather_rows(log_prob, np.arange(labels.size), labels)
    reduced = F.mean(picked) if reduction == "mean" else F.tsum(picked)
    return F.scale(reduced, -1.0)
