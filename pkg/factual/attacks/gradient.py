"""
L-infinity gradient attacks: FGSM and PGD with random start.

Attacks run on whole (B, H, W) batches; a single (H, W) image is treated as a
batch of one and the perturbation comes back in its shape.
"""

import numpy as np

from ..config import logger
from ..errors import AttackError, NumericalError
from .config import AttackConfig, Perturbation
from .scorers import Scorer, input_gradient


def _as_batch(x: np.ndarray, y):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    return x, np.atleast_1d(np.asarray(y, dtype=np.int64)), single


def _result(delta: np.ndarray, single: bool) -> Perturbation:
    support = np.ones(delta.shape, dtype=bool)
    return Perturbation(delta[0], support[0]) if single else Perturbation(delta, support)


def project_linf(candidate: np.ndarray, origin: np.ndarray, epsilon: float) -> np.ndarray:
    """
    Project candidate onto {origin + d : |d| <= epsilon} intersected with [0, 1].

    The box is separable, so the projection clamps every coordinate to
    [max(origin - eps, 0), min(origin + eps, 1)].
    """
    candidate = np.asarray(candidate, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    if candidate.shape != origin.shape:
        raise ValueError(f"candidate {candidate.shape} and origin {origin.shape} must have equal shapes")
    lower = np.maximum(origin - epsilon, 0.0)
    upper = np.minimum(origin + epsilon, 1.0)
    return np.clip(candidate, lower, upper)


def fgsm(x: np.ndarray, y, scorer: Scorer, epsilon: float) -> Perturbation:
    """
    One signed-gradient step of size epsilon.

    Args:
        x: (H, W) image or (B, H, W) batch in [0, 1]
        y: Label(s)
        scorer: Differentiable loss J to increase
        epsilon: L-infinity budget

    Raises:
        ValueError: If epsilon is negative
        AttackError: If the loss or its gradient is not finite
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    x, y, single = _as_batch(x, y)
    if epsilon == 0:
        return _result(np.zeros_like(x), single)
    try:
        _, grad = input_gradient(scorer, x, y)
    except NumericalError as e:
        raise AttackError(f"fgsm: {e}", {"iteration": 0}) from e
    adversarial = project_linf(x + epsilon * np.sign(grad), x, epsilon)
    return _result(adversarial - x, single)


def pgd(x: np.ndarray, y, scorer: Scorer, cfg: AttackConfig) -> Perturbation:
    """
    Projected gradient ascent with sign steps.

    x0 = x, or a uniform draw in the budget when cfg.random_start; every step
    moves cfg.resolved_step_size along sign(grad J) and projects back.

    Raises:
        AttackError: With the iteration index if the loss is not finite
    """
    cfg.validate()
    x, y, single = _as_batch(x, y)
    eps = cfg.epsilon
    if eps == 0:
        return _result(np.zeros_like(x), single)

    adversarial = x.copy()
    if cfg.random_start:
        rng = np.random.default_rng(cfg.rng_seed)
        adversarial = project_linf(x + rng.uniform(-eps, eps, size=x.shape), x, eps)

    step = cfg.resolved_step_size
    for iteration in range(cfg.steps):
        try:
            loss, grad = input_gradient(scorer, adversarial, y)
        except NumericalError as e:
            raise AttackError(f"pgd: {e} at iteration {iteration}", {"iteration": iteration}) from e
        logger.debug(f"pgd iteration {iteration}: loss {loss:.6f}")
        adversarial = project_linf(adversarial + step * np.sign(grad), x, eps)
    return _result(adversarial - x, single)
