"""
Tests for two-view augmentation.
"""

from dataclasses import replace

import numpy as np

from factual.data import MIN_MASK_PIXELS, AugmentConfig, LabeledImage, random_augment
from factual.data.augment import adjust_brightness, adjust_contrast, resized_crop


class TestRandomAugment:
    """Test cases for random_augment."""

    def test_identity_config(self, train_set):
        """Test that the identity configuration returns the input unchanged."""
        image = train_set[0]
        assert random_augment(image, 123, AugmentConfig.identity()) == image

    def test_deterministic_per_seed(self, train_set):
        """Test that equal seeds give equal views and different seeds differ."""
        image = train_set[1]
        assert random_augment(image, 5) == random_augment(image, 5)
        views = {random_augment(image, seed).pixels.tobytes() for seed in range(6)}
        assert len(views) > 1

    def test_view_invariants(self, train_set):
        """Test that views keep the label, shape, range and enough target pixels."""
        for seed in range(10):
            view = random_augment(train_set[2], seed)

            assert view.label == train_set[2].label
            assert view.shape == (16, 16)
            assert view.pixels.min() >= 0.0 and view.pixels.max() <= 1.0
            assert view.mask.sum() >= MIN_MASK_PIXELS

    def test_flip_only(self, train_set):
        """Test that a certain flip with everything else off mirrors pixels and mask."""
        image = train_set[3]
        view = random_augment(image, 0, replace(AugmentConfig.identity(), flip_prob=1.0))

        assert np.array_equal(view.pixels, image.pixels[:, ::-1])
        assert np.array_equal(view.mask, image.mask[:, ::-1])


class TestAugmentPrimitives:
    """Test cases for the crop and jitter primitives."""

    def test_full_crop_is_identity(self):
        """Test that a crop of the whole image changes nothing."""
        pixels = np.random.default_rng(0).uniform(size=(8, 8))
        mask = pixels > 0.5
        cropped, cropped_mask = resized_crop(pixels, mask, 0, 0, 8)

        assert np.array_equal(cropped, pixels)
        assert np.array_equal(cropped_mask, mask)

    def test_crop_resamples_to_full_size(self):
        """Test that a smaller window is resampled back to the input size."""
        pixels = np.random.default_rng(1).uniform(size=(8, 8))
        cropped, cropped_mask = resized_crop(pixels, pixels > 0.5, 2, 2, 4)

        assert cropped.shape == (8, 8)
        assert cropped_mask.shape == (8, 8)
        assert cropped.min() >= pixels[2:6, 2:6].min() - 1e-12
        assert cropped.max() <= pixels[2:6, 2:6].max() + 1e-12

    def test_contrast_keeps_mean_without_clipping(self):
        """Test that contrast scales about the image mean."""
        pixels = np.full((4, 4), 0.5)
        pixels[0, 0] = 0.6
        adjusted = adjust_contrast(pixels, 2.0)

        assert np.isclose(adjusted.mean(), pixels.mean())

    def test_brightness_shift(self):
        """Test that a +0.1 brightness shift turns a constant 0.5 image into 0.6 and clips at 1."""
        assert np.allclose(adjust_brightness(np.full((16, 16), 0.5), 0.1), 0.6)
        assert np.array_equal(adjust_brightness(np.full((4, 4), 0.95), 0.1), np.ones((4, 4)))

    def test_brightness_only_view(self, mocker):
        """Test that a brightness-only view shifts every pixel by the drawn offset."""
        mask = np.zeros((16, 16), dtype=bool)
        mask[4:12, 4:12] = True
        image = LabeledImage(np.full((16, 16), 0.5), 1, mask)
        config = AugmentConfig(crop_scale=(1.0, 1.0), flip_prob=0.0, brightness=0.1, contrast=(1.0, 1.0), jitter_prob=1.0)
        spy = mocker.patch("factual.data.augment.adjust_brightness", wraps=adjust_brightness)

        view = random_augment(image, 7, config)
        offset = spy.call_args.args[1]

        assert spy.call_count == 1
        assert abs(offset) <= 0.1
        assert np.allclose(view.pixels, 0.5 + offset, atol=1e-6)
        assert np.array_equal(view.mask, mask)
