"""
SGD with momentum and L2 weight decay.
"""

from typing import Dict, Iterable, Mapping, MutableMapping, Optional

import numpy as np

from ..errors import ShapeError

DEFAULT_LR = 0.01
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 1e-4


class SGDMomentum:
    """
    Stateful optimizer: v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.

    Velocity buffers persist across step() calls, keyed by parameter name.
    """

    def __init__(self, lr: float = DEFAULT_LR, momentum: float = DEFAULT_MOMENTUM, weight_decay: float = DEFAULT_WEIGHT_DECAY):
        self.velocity: Dict[str, np.ndarray] = {}
        self.configure(lr, momentum, weight_decay)

    def configure(self, lr: float, momentum: float, weight_decay: float) -> "SGDMomentum":
        """Set the hyperparameters; velocity buffers are kept."""
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0 <= momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {weight_decay}")
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        return self

    def step(self, params: MutableMapping[str, np.ndarray], grads: Mapping[str, np.ndarray], names: Optional[Iterable[str]] = None):
        """
        Apply one update to the named parameters.

        Args:
            params: Parameter arrays by name; updated in place
            grads: Gradient arrays by name
            names: Subset to update (default: every name in grads)

        Returns:
            params, for chaining

        Raises:
            ShapeError: If a gradient does not match its parameter
        """
        for name in (names if names is not None else list(grads)):
            param, grad = params[name], grads[name]
            if param.shape != grad.shape:
                raise ShapeError(f"sgd_momentum_update[{name}]", param.shape, grad.shape)
            velocity = self.velocity.get(name)
            update = grad + self.weight_decay * param
            velocity = update if velocity is None else self.momentum * velocity + update
            self.velocity[name] = velocity
            params[name] = param - self.lr * velocity
        return params


def sgd_momentum_update(
    params: MutableMapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    lr: Optional[float] = None,
    momentum: Optional[float] = None,
    weight_decay: Optional[float] = None,
    state: Optional[SGDMomentum] = None,
):
    """
    Functional form of SGDMomentum.step.

    Pass the returned optimizer back in as `state` to keep velocity across calls.
    Hyperparameters given explicitly replace the state's; omitted ones keep the
    state's values, or the module defaults for a fresh state.

    Returns:
        (params, state)
    """
    if state is None:
        state = SGDMomentum(
            DEFAULT_LR if lr is None else lr,
            DEFAULT_MOMENTUM if momentum is None else momentum,
            DEFAULT_WEIGHT_DECAY if weight_decay is None else weight_decay,
        )
    else:
        state.configure(
            state.lr if lr is None else lr,
            state.momentum if momentum is None else momentum,
            state.weight_decay if weight_decay is None else weight_decay,
        )
    return state.step(params, grads), state
