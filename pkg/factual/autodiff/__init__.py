"""
Reverse-mode automatic differentiation over dense float64 tensors.

Importing this package registers every operation kind with the Tensor dispatcher.
"""

from .tensor import ComputationGraph, Node, Tensor, as_tensor, backward, forward_op
from . import ops, conv
from .gradcheck import finite_difference_check
from .optim import SGDMomentum, sgd_momentum_update

__all__ = [
    "Tensor",
    "Node",
    "ComputationGraph",
    "as_tensor",
    "forward_op",
    "backward",
    "finite_difference_check",
    "SGDMomentum",
    "sgd_momentum_update",
]
