"""
Base class for every differentiable operation kind.
"""

from typing import Any, Optional, Sequence, Tuple

import numpy as np


class Op:
    """
    Base class for all tensor operations.

    An instance is created per application, so forward() may stash whatever
    backward() needs on self. Inputs arrive as float64 numpy arrays.
    """

    kind: str = ""
    differentiable: bool = True

    def __init__(self, **attrs: Any):
        """
        Initialize the operation with its attributes.

        Args:
            **attrs: Operation attributes (stride, axis, bounds, ...)
        """
        self.attrs = attrs

    def check(self, *shapes: Tuple[int, ...]) -> None:
        """Validate input shapes; raise ShapeError on mismatch. Default accepts anything."""

    def forward(self, *inputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} does not implement forward()")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        """
        Map the gradient w.r.t. the output onto gradients w.r.t. each input.

        Args:
            grad: dRoot/dOutput, same shape as the forward output

        Returns:
            One entry per input, None where no gradient flows
        """
        raise NotImplementedError(f"{type(self).__name__} does not implement backward()")

    @staticmethod
    def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so grad matches shape again."""
        if grad.shape == shape:
            return grad
        while grad.ndim > len(shape):
            grad = grad.sum(axis=0)
        for axis, extent in enumerate(shape):
            if extent == 1 and grad.shape[axis] != 1:
                grad = grad.sum(axis=axis, keepdims=True)
        return grad

    @classmethod
    def register(cls, kind: str):
        """
        Decorator to register an operation kind with the Tensor dispatcher.

        Usage:
            @Op.register('relu')
            class Relu(Op):
                pass

        Args:
            kind: The name used with forward_op to select this operation
        """
        def decorator(op_class):
            from .tensor import Tensor
            op_class.kind = kind
            Tensor.register_op(kind, op_class)
            return op_class
        return decorator
