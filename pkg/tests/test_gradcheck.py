"""
Finite-difference checks of every differentiable operation.
"""

import numpy as np
import pytest

from factual.autodiff import Tensor, finite_difference_check
from factual.autodiff import functional as F
from factual.errors import NumericalError
from factual.selftest import GRADIENT_CASES, GRADIENT_TOLERANCE, NETWORK_CASES, NETWORK_STEP


class TestFiniteDifferenceCheck:
    """Test cases for finite_difference_check."""

    @pytest.mark.parametrize("name", sorted(GRADIENT_CASES))
    def test_operation_gradients(self, name):
        """Test analytic gradients against central differences."""
        f, x = GRADIENT_CASES[name](np.random.default_rng(0))
        assert finite_difference_check(f, x, step=1e-5) < GRADIENT_TOLERANCE

    def test_wrong_gradient_detected(self):
        """Test that a function whose gradient is cut reports a large error."""
        def cut(t):
            # the detached copy carries the value but no gradient
            return F.tsum(F.mul(t, t.detach()))

        assert finite_difference_check(cut, np.array([1.0, 2.0])) > 0.1

    def test_step_range(self):
        """Test that steps outside [1e-7, 1e-3] are rejected."""
        with pytest.raises(ValueError):
            finite_difference_check(lambda t: F.tsum(t), np.ones(2), step=1e-2)

    def test_non_finite_function(self):
        """Test that non-finite values raise NumericalError."""
        def blow_up(t):
            return F.tsum(F.scale(t, float("inf")))

        with pytest.raises(NumericalError):
            finite_difference_check(blow_up, np.ones(2))

    def test_tensor_input_accepted(self):
        """Test that a Tensor point is accepted like an array."""
        assert finite_difference_check(lambda t: F.tsum(F.exp(t)), Tensor([0.1, 0.2])) < GRADIENT_TOLERANCE


class TestNetworkGradients:
    """Finite-difference checks through the encoder, projector and classifier."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("name", sorted(NETWORK_CASES))
    def test_network_gradients(self, name, seed):
        """Test input and parameter gradients of encode, project and the classifier loss."""
        f, x = NETWORK_CASES[name](np.random.default_rng(seed))
        assert finite_difference_check(f, x, step=NETWORK_STEP) < GRADIENT_TOLERANCE

    def test_classifier_loss_gradients_cover_trainables(self):
        """Test that the classifier loss yields a finite gradient for each encoder and classifier parameter."""
        from factual.autodiff import backward
        from factual.losses import cross_entropy_loss
        from factual.model import classify, encode, init_params
        from factual.selftest import GRADCHECK_ARCH

        params = init_params(GRADCHECK_ARCH, 0)
        bound = params.bind(params.names("encoder") + params.names("classifier"))
        images = np.random.default_rng(0).uniform(size=(2, 8, 8))
        backward(cross_entropy_loss(classify(bound, encode(bound, images)), [0, 2]))

        grads = bound.grads()
        assert sorted(grads) == sorted(params.names("encoder") + params.names("classifier"))
        assert all(np.isfinite(grad).all() for grad in grads.values())
        assert np.any(grads["classifier.bias"] != 0)
