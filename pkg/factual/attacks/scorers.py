"""
Differentiable scorers: the loss J an attack maximizes, as a function of the
input image batch.
"""

from typing import Callable, Tuple

import numpy as np

from ..autodiff import Tensor, backward
from ..autodiff import functional as F
from ..errors import NumericalError
from ..losses import SclBatch, cross_entropy_loss, supervised_contrastive_loss
from ..model import ModelParams, classify, encode, project

Scorer = Callable[[Tensor, np.ndarray], Tensor]


def classifier_scorer(params: ModelParams) -> Scorer:
    """Summed cross-entropy of encoder + linear classifier; per-sample gradients stay independent."""

    def score(images: Tensor, labels: np.ndarray) -> Tensor:
        return cross_entropy_loss(classify(params, encode(params, images)), labels, reduction="sum")

    return score


def contrastive_scorer(params: ModelParams, anchors: np.ndarray, anchor_labels: np.ndarray, temperature: float) -> Scorer:
    """
    Supervised contrastive loss of the attacked views against fixed clean anchors.

    The anchors' projections are computed once and enter as constants.
    """
    anchor_features = project(params, encode(params, anchors)).detach()
    anchor_labels = np.asarray(anchor_labels)

    def score(images: Tensor, labels: np.ndarray) -> Tensor:
        features = F.stack_rows([anchor_features, project(params, encode(params, images))])
        batch = SclBatch(features, np.concatenate([anchor_labels, np.asarray(labels)]), temperature)
        return supervised_contrastive_loss(batch)

    return score


def linear_scorer(weights: np.ndarray) -> Scorer:
    """J(x) = sum over the batch of w . x."""
    flat = np.asarray(weights, dtype=np.float64).reshape(1, -1)

    def score(images: Tensor, labels: np.ndarray) -> Tensor:
        return F.tsum(F.mul(F.flatten(images), flat))

    return score


def linear_softmax_scorer(weights: np.ndarray, bias: np.ndarray) -> Scorer:
    """Cross-entropy of a linear softmax model on flattened pixels, weights (H*W, C)."""

    def score(images: Tensor, labels: np.ndarray) -> Tensor:
        return cross_entropy_loss(F.dense(F.flatten(images), weights, bias), labels, reduction="sum")

    return score


def input_gradient(scorer: Scorer, images: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Evaluate J and dJ/dx for an (B, H, W) batch.

    Raises:
        NumericalError: If the loss or its gradient is not finite
    """
    leaf = Tensor(np.asarray(images, dtype=np.float64)[:, None], requires_grad=True)
    loss = scorer(leaf, labels)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericalError(f"non-finite loss {value}")
    backward(loss)
    grad = leaf.grad[:, 0]
    if not np.isfinite(grad).all():
        raise NumericalError("non-finite input gradient")
    return value, grad
