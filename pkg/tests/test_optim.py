"""
Tests for SGD with momentum and weight decay.
"""

import numpy as np
import pytest

from factual.autodiff import SGDMomentum, sgd_momentum_update
from factual.errors import ShapeError


class TestSGDMomentum:
    """Test cases for the SGDMomentum optimizer."""

    def test_momentum_accumulates(self):
        """Test two steps against hand-computed values."""
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        opt = SGDMomentum(lr=0.1, momentum=0.9, weight_decay=0.0)

        opt.step(params, grads)
        assert np.isclose(params["w"][0], 0.95)

        opt.step(params, grads)
        # v = 0.9 * 0.5 + 0.5
        assert np.isclose(params["w"][0], 0.95 - 0.1 * 0.95)

    def test_weight_decay(self):
        """Test that weight decay shrinks parameters with zero gradient."""
        params = {"w": np.array([2.0])}
        SGDMomentum(lr=0.1, momentum=0.0, weight_decay=0.1).step(params, {"w": np.array([0.0])})

        assert np.isclose(params["w"][0], 1.98)

    def test_named_subset(self):
        """Test that only the named parameters move."""
        params = {"a": np.ones(2), "b": np.ones(2)}
        grads = {"a": np.ones(2), "b": np.ones(2)}
        SGDMomentum(lr=0.5, weight_decay=0.0).step(params, grads, names=["a"])

        assert np.allclose(params["a"], 0.5)
        assert np.array_equal(params["b"], np.ones(2))

    def test_shape_mismatch(self):
        """Test that a gradient of the wrong shape raises ShapeError."""
        with pytest.raises(ShapeError):
            SGDMomentum().step({"w": np.ones(3)}, {"w": np.ones(2)})

    @pytest.mark.parametrize(
        "kwargs",
        [{"lr": 0.0}, {"momentum": 1.0}, {"momentum": -0.1}, {"weight_decay": -1e-3}],
    )
    def test_invalid_hyperparameters(self, kwargs):
        """Test that invalid hyperparameters are rejected."""
        with pytest.raises(ValueError):
            SGDMomentum(**kwargs)

    def test_functional_form_keeps_state(self):
        """Test that passing the returned state back continues the momentum."""
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        params, state = sgd_momentum_update(params, grads, lr=0.1, momentum=0.9, weight_decay=0.0)
        params, again = sgd_momentum_update(params, grads, state=state)

        assert again is state
        assert np.isclose(params["w"][0], 0.95 - 0.1 * 0.95)

    def test_functional_form_applies_new_hyperparameters(self):
        """Test that explicit hyperparameters replace the state's while velocity carries over."""
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([0.5])}
        params, state = sgd_momentum_update(params, grads, lr=0.1, momentum=0.9, weight_decay=0.0)
        params, state = sgd_momentum_update(params, grads, lr=0.2, momentum=0.5, state=state)

        assert state.lr == 0.2
        assert state.momentum == 0.5
        assert state.weight_decay == 0.0
        # v = 0.5 * 0.5 + 0.5
        assert np.isclose(params["w"][0], 0.95 - 0.2 * 0.75)

    def test_functional_form_rejects_invalid_override(self):
        """Test that an invalid hyperparameter is rejected even with an existing state."""
        params, state = sgd_momentum_update({"w": np.array([1.0])}, {"w": np.array([0.5])})
        with pytest.raises(ValueError):
            sgd_momentum_update(params, {"w": np.array([0.5])}, momentum=1.0, state=state)
