"""
Central finite-difference check of reverse-mode gradients.
"""

from typing import Callable

import numpy as np

from ..errors import NumericalError, ShapeError
from .tensor import ArrayLike, Tensor, backward


def finite_difference_check(f: Callable[[Tensor], Tensor], x: ArrayLike, step: float = 1e-5) -> float:
    """
    Compare the analytic gradient of a scalar function against central differences.

    Args:
        f: Deterministic scalar-valued tensor function
        x: Point to check at
        step: Difference step, within [1e-7, 1e-3]

    Returns:
        max over coordinates of |analytic - numeric| / max(1, |analytic|)

    Raises:
        ValueError: If step is out of range
        NumericalError: If f or its gradient produce non-finite values
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError(f"step must lie in [1e-7, 1e-3], got {step}")

    point = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(point, requires_grad=True)
    out = f(leaf)
    if out.size != 1:
        raise ShapeError("finite_difference_check", out.shape, (), "f must return a scalar")
    if not np.isfinite(out.data).all():
        raise NumericalError("finite_difference_check: f(x) is not finite")
    backward(out)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(point)
    if not np.isfinite(analytic).all():
        raise NumericalError("finite_difference_check: analytic gradient is not finite")

    numeric = np.zeros_like(point)
    shifted = point.copy()
    for index in np.ndindex(point.shape):
        original = shifted[index]
        shifted[index] = original + step
        upper = f(Tensor(shifted)).item()
        shifted[index] = original - step
        lower = f(Tensor(shifted)).item()
        shifted[index] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericalError(f"finite_difference_check: f is not finite near coordinate {index}")
        numeric[index] = (upper - lower) / (2.0 * step)

    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
