"""
Tests for scatterer rendering and the target-confined scatterer attack.
"""

import math

import numpy as np
import pytest

from factual.attacks import (
    AttackConfig,
    ScattererConfig,
    ScattererSet,
    classifier_scorer,
    nearest_mask_pixel,
    otsa_attack,
    render_scatterers,
)
from factual.attacks.scatterers import _initial_set
from factual.errors import AttackError
from factual.selftest import dilate


def single(row, col, amplitude, sigma=1.0):
    return ScattererSet(np.array([[[row, col]]], dtype=float), np.array([[amplitude]]), sigma)


class TestRenderScatterers:
    """Test cases for render_scatterers."""

    def test_unit_peak_gaussian(self):
        """Test the peak value and the falloff of one scatterer."""
        delta = render_scatterers(single(8.0, 8.0, 0.5), (16, 16)).delta[0]

        assert np.isclose(delta[8, 8], 0.5)
        assert np.isclose(delta[8, 9], 0.5 * math.exp(-0.5))
        assert np.isclose(delta[8, 11], 0.5 * math.exp(-4.5))

    def test_truncated_at_radius(self):
        """Test that nothing is rendered beyond R = ceil(3 sigma)."""
        rendered = render_scatterers(single(8.0, 8.0, 0.5), (16, 16))

        assert rendered.delta[0, 8, 12] == 0.0
        assert rendered.delta[0, 11, 11] == 0.0
        assert not rendered.delta[0][~rendered.support[0]].any()
        # lattice points with dr^2 + dc^2 <= 9
        assert rendered.support[0].sum() == 29

    def test_amplitudes_add(self):
        """Test that overlapping scatterers sum."""
        pair = ScattererSet(np.array([[[5.0, 5.0], [5.0, 6.0]]]), np.array([[0.2, 0.1]]), 1.0)
        delta = render_scatterers(pair, (12, 12)).delta[0]

        assert np.isclose(delta[5, 5], 0.2 + 0.1 * math.exp(-0.5))

    def test_out_of_bounds(self):
        """Test that positions outside the image are rejected."""
        with pytest.raises(ValueError):
            render_scatterers(single(16.2, 3.0, 0.5), (16, 16))

    def test_rounding_halves_up(self):
        """Test that x.5 positions round to the next pixel."""
        assert single(2.5, 3.49, 0.1).rounded().tolist() == [[[3, 3]]]


class TestNearestMaskPixel:
    """Test cases for nearest_mask_pixel."""

    def test_closest(self):
        """Test that the Euclidean closest cell is chosen."""
        cells = np.array([[0, 0], [4, 4], [9, 9]])
        assert nearest_mask_pixel(np.array([5.0, 3.0]), cells).tolist() == [4.0, 4.0]

    def test_tie_picks_first_in_row_major_order(self):
        """Test that equidistant cells resolve to the first one."""
        cells = np.array([[0, 2], [2, 0]])
        assert nearest_mask_pixel(np.array([1.0, 1.0]), cells).tolist() == [0.0, 2.0]


class TestOtsaAttack:
    """Test cases for otsa_attack."""

    def test_locality(self, linear_problem, block_masks):
        """Test that the perturbation vanishes outside the dilated target mask."""
        scorer, images, labels = linear_problem
        config = ScattererConfig()
        delta, state = otsa_attack(images, labels, block_masks, scorer, AttackConfig(steps=10, rng_seed=1), config)

        outside = ~dilate(block_masks, config.radius)
        assert not delta.delta[outside].any()
        assert state.on_mask(block_masks)

    def test_amplitude_bounds(self, linear_problem, block_masks):
        """Test that amplitudes stay within [0, a_max]."""
        scorer, images, labels = linear_problem
        _, state = otsa_attack(images, labels, block_masks, scorer, AttackConfig(steps=6), ScattererConfig(amplitude_max=0.2))

        assert state.amplitudes.shape == (12, 3)
        assert state.amplitudes.min() >= 0.0 and state.amplitudes.max() <= 0.2

    def test_range(self, linear_problem, block_masks):
        """Test that perturbed images stay within [0, 1]."""
        scorer, images, labels = linear_problem
        delta, _ = otsa_attack(images, labels, block_masks, scorer, AttackConfig(steps=3))
        perturbed = delta.apply(images)

        assert perturbed.min() >= 0.0 and perturbed.max() <= 1.0

    def test_deterministic_per_seed(self, linear_problem, block_masks):
        """Test that a fixed seed reproduces positions and perturbation bitwise."""
        scorer, images, labels = linear_problem
        cfg = AttackConfig(steps=4, rng_seed=21)
        first, first_state = otsa_attack(images, labels, block_masks, scorer, cfg)
        second, second_state = otsa_attack(images, labels, block_masks, scorer, cfg)

        assert np.array_equal(first.delta, second.delta)
        assert np.array_equal(first_state.positions, second_state.positions)

    def test_zero_budget_disables(self, linear_problem, block_masks):
        """Test that epsilon == 0 yields an exactly zero perturbation."""
        scorer, images, labels = linear_problem
        delta, state = otsa_attack(images, labels, block_masks, scorer, AttackConfig(epsilon=0.0, steps=3))

        assert not delta.delta.any()
        assert not state.amplitudes.any()

    def test_zero_amplitude_keeps_positions(self, linear_problem, block_masks):
        """Test that with a_max == 0 the scatterers never move from their start pixels."""
        scorer, images, labels = linear_problem
        config = ScattererConfig(amplitude_max=0.0)
        delta, state = otsa_attack(images, labels, block_masks, scorer, AttackConfig(steps=5, rng_seed=8), config)

        start = _initial_set(block_masks, config, np.random.default_rng(8))
        assert np.array_equal(state.positions, start.positions)
        assert not delta.delta.any()

    def test_empty_mask(self, linear_problem, block_masks):
        """Test that an image without target pixels raises AttackError naming it."""
        scorer, images, labels = linear_problem
        masks = block_masks.copy()
        masks[4] = False

        with pytest.raises(AttackError) as exc_info:
            otsa_attack(images, labels, masks, scorer, AttackConfig(steps=2))
        assert exc_info.value.details["sample"] == 4

    def test_mask_shape(self, linear_problem, block_masks):
        """Test that masks must match the images."""
        scorer, images, labels = linear_problem
        with pytest.raises(ValueError):
            otsa_attack(images, labels, block_masks[:, :8], scorer, AttackConfig(steps=2))

    def test_single_image(self, linear_problem, block_masks):
        """Test that one (H, W) image gives an (H, W) perturbation and one scatterer row."""
        scorer, images, labels = linear_problem
        delta, state = otsa_attack(images[0], labels[0], block_masks[0], scorer, AttackConfig(steps=2))

        assert delta.delta.shape == (16, 16)
        assert state.positions.shape == (1, 3, 2)

    def test_against_model(self, tiny_params, train_set):
        """Test the attack against the network's classifier loss on real target masks."""
        images, labels, masks = train_set.pixels()[:4], train_set.labels()[:4], train_set.masks()[:4]
        delta, state = otsa_attack(images, labels, masks, classifier_scorer(tiny_params), AttackConfig(steps=2))

        assert state.on_mask(masks)
        assert not delta.delta[~dilate(masks, 3)].any()
