"""
Tests for pre-training, fine-tuning and the baselines.
"""

import numpy as np
import pytest

from factual.data import Dataset, build_triples, perturb_dataset
from factual.errors import FactualError, InvariantViolation, NumericalError
from factual.model import ArchitectureConfig, init_params, load_checkpoint
from factual.model.params import CLASSIFIER, ENCODER, PROJECTOR, BoundParams
from factual.pipeline import (
    TrainConfig,
    TrainingResult,
    ViewBatch,
    check_batch_composition,
    finetune,
    pretrain,
    run_adversarial_training,
    run_standard_training,
)
from factual.pipeline.training import batch_indices


def group_equal(a, b, prefix):
    return all(np.array_equal(a[name], b[name]) for name in a.names(prefix))


def views(tags, origins, labels):
    size = len(tags)
    return ViewBatch(np.zeros((size, 16, 16)), np.array(labels), np.array(tags), np.array(origins))


class TestBatchComposition:
    """Test cases for check_batch_composition."""

    def test_complete_batch_passes(self):
        """Test that every original contributing clean, z_obj and z_img passes."""
        batch = views([0, 0, 1, 1, 2, 2], [5, 6, 5, 6, 5, 6], [1, 2, 1, 2, 1, 2])
        assert check_batch_composition(batch) is batch

    def test_missing_view(self):
        """Test that an original without its z_img view is rejected."""
        batch = views([0, 0, 1, 1, 2], [5, 6, 5, 6, 5], [1, 2, 1, 2, 1])
        with pytest.raises(InvariantViolation):
            check_batch_composition(batch)

    def test_mislabeled_view(self):
        """Test that views of one original must share its label."""
        batch = views([0, 1, 2], [5, 5, 5], [1, 1, 3])
        with pytest.raises(InvariantViolation):
            check_batch_composition(batch)


class TestBatchIndices:
    """Test cases for batch_indices."""

    def test_covers_every_index_once(self):
        """Test that an epoch visits every index once, the last batch short."""
        batches = batch_indices(10, 4, seed=1, stage="pretrain", epoch=0)

        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    def test_shuffle_depends_on_epoch(self):
        """Test that the order is reproducible per epoch and changes across epochs."""
        first = np.concatenate(batch_indices(20, 5, 1, "pretrain", 0))
        again = np.concatenate(batch_indices(20, 5, 1, "pretrain", 0))
        other = np.concatenate(batch_indices(20, 5, 1, "pretrain", 1))

        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)


class TestPretrain:
    """Test cases for supervised adversarial contrastive pre-training."""

    def test_one_epoch(self, train_set, tiny_arch, fast_config):
        """Test that 8 originals in batches of 4 give 2 steps and a finite loss."""
        start = init_params(tiny_arch, 0)
        result = pretrain(train_set, fast_config, params=start)

        assert isinstance(result, TrainingResult)
        assert result.steps == 2
        assert len(result.history) == 1
        assert np.isfinite(result.history[0])
        assert not group_equal(result.params, start, ENCODER)
        assert not group_equal(result.params, start, PROJECTOR)

    def test_classifier_untouched(self, train_set, tiny_arch, fast_config):
        """Test that pre-training does not change the classifier."""
        start = init_params(tiny_arch, 0)
        params, _ = pretrain(train_set, fast_config, params=start)

        assert group_equal(params, start, CLASSIFIER)
        assert start.equals(init_params(tiny_arch, 0))

    def test_default_architecture_fits_dataset(self, train_set, fast_config):
        """Test that fresh parameters are sized to the dataset."""
        mismatched = ArchitectureConfig(image_size=32, channels=(4, 8), representation_dim=8)
        with pytest.raises(ValueError):
            pretrain(train_set, fast_config, mismatched)

    def test_deterministic(self, train_set, tiny_arch, fast_config):
        """Test that equal seeds give bitwise-equal parameters."""
        first, _ = pretrain(train_set, fast_config, tiny_arch)
        second, _ = pretrain(train_set, fast_config, tiny_arch)
        assert first.equals(second)

    def test_saves_checkpoint(self, train_set, tiny_arch, fast_config, tmp_path):
        """Test that a checkpoint directory receives the stage checkpoint."""
        result = pretrain(train_set, fast_config.with_changes(checkpoint_dir=str(tmp_path)), tiny_arch)
        assert load_checkpoint(tmp_path / "pretrain.fctc").equals(result.params)

    def test_single_class_rejected(self, train_set, tiny_arch, fast_config):
        """Test that a training set with one class is rejected."""
        with pytest.raises(FactualError):
            pretrain(train_set.subset([0, 4]), fast_config, tiny_arch)

    def test_empty_rejected(self, tiny_arch, fast_config):
        """Test that an empty training set is rejected."""
        with pytest.raises(FactualError):
            pretrain(Dataset([], 4), fast_config, tiny_arch)


class TestRegeneration:
    """Test cases for the attack regeneration policies."""

    @pytest.mark.parametrize("policy, expected", [("per-batch", 4), ("per-epoch", 2), ("once", 1)])
    def test_attack_calls(self, mocker, train_set, tiny_params, fast_config, policy, expected):
        """Test how often triples are rebuilt over two epochs of two batches."""
        spy = mocker.patch("factual.pipeline.training.build_triples", wraps=build_triples)
        finetune(tiny_params, train_set, fast_config.with_changes(epochs=2, regeneration=policy))

        assert spy.call_count == expected


class TestFinetune:
    """Test cases for adversarial fine-tuning."""

    def test_projector_never_touched(self, train_set, tiny_params, fast_config):
        """Test that fine-tuning neither reads nor changes projector parameters."""
        result = finetune(tiny_params, train_set, fast_config)

        assert result.steps == 2
        assert group_equal(result.params, tiny_params, PROJECTOR)
        assert not any(name.startswith(PROJECTOR) for name in result.params.access_log)
        assert not group_equal(result.params, tiny_params, CLASSIFIER)

    def test_input_params_not_modified(self, train_set, tiny_arch, fast_config):
        """Test that the pre-trained params are copied, not updated in place."""
        params = init_params(tiny_arch, 0)
        finetune(params, train_set, fast_config)
        assert params.equals(init_params(tiny_arch, 0))

    def test_freeze_encoder(self, train_set, tiny_params, fast_config):
        """Test that a frozen encoder stays bitwise unchanged."""
        result = finetune(tiny_params, train_set, fast_config.with_changes(freeze_encoder=True))

        assert group_equal(result.params, tiny_params, ENCODER)
        assert not group_equal(result.params, tiny_params, CLASSIFIER)

    def test_stored_triples(self, train_set, tiny_params, fast_config, mocker):
        """Test fine-tuning on a stored triple set without regenerating attacks."""
        columns = perturb_dataset(train_set, tiny_params, fast_config.pgd, fast_config.otsa)
        spy = mocker.patch("factual.pipeline.training.build_triples", wraps=build_triples)
        result = finetune(tiny_params, columns, fast_config)

        assert result.steps == 2
        assert spy.call_count == 0

    def test_clean_only(self, train_set, tiny_params, fast_config, mocker):
        """Test that clean-only fine-tuning never attacks."""
        spy = mocker.patch("factual.pipeline.training.build_triples", wraps=build_triples)
        result = finetune(tiny_params, train_set, fast_config.with_changes(clean_only=True, finetune_epochs=2))

        assert result.steps == 4
        assert spy.call_count == 0

    def test_classifier_only_loss_is_monotone(self, train_set, tiny_params, fast_config):
        """Test that full-batch clean fine-tuning of the classifier alone lowers CE every epoch."""
        linear = fast_config.with_changes(
            clean_only=True,
            freeze_encoder=True,
            finetune_epochs=5,
            batch_size=len(train_set),
            lr=0.05,
            momentum=0.0,
            weight_decay=0.0,
        )
        history = finetune(tiny_params, train_set, linear).history

        assert len(history) == 5
        assert all(later < earlier for earlier, later in zip(history, history[1:]))


class TestBaselines:
    """Test cases for standard and adversarial training."""

    def test_standard_training(self, train_set, tiny_arch, fast_config, tmp_path):
        """Test the clean baseline and its checkpoint."""
        result = run_standard_training(train_set, fast_config.with_changes(checkpoint_dir=str(tmp_path)), tiny_arch)

        assert result.steps == 2
        assert (tmp_path / "standard.fctc").exists()

    def test_adversarial_training(self, train_set, tiny_arch, fast_config, mocker):
        """Test that the adversarial baseline attacks every batch."""
        from factual.attacks import pgd

        spy = mocker.patch("factual.pipeline.training.pgd", wraps=pgd)
        result = run_adversarial_training(train_set, fast_config, tiny_arch)

        assert result.steps == 2
        assert spy.call_count == 2
        assert np.isfinite(result.history).all()

    def test_non_finite_loss_names_batch(self, train_set, tiny_arch, fast_config):
        """Test that a NaN loss stops training with the stage, epoch and batch."""
        images = [image.with_pixels(image.pixels.copy()) for image in train_set.images]
        images[0].pixels[0, 0] = np.nan
        broken = Dataset(images, train_set.class_count)

        with pytest.raises(NumericalError, match="standard epoch 0 batch"):
            run_standard_training(broken, fast_config, tiny_arch)

    def test_non_finite_gradient_stops_before_step(self, mocker, train_set, tiny_params, fast_config):
        """Test that a NaN gradient behind a finite loss raises before the optimizer runs."""
        real_grads = BoundParams.grads

        def poisoned(self):
            grads = real_grads(self)
            name = sorted(grads)[0]
            grads[name] = np.full_like(grads[name], np.nan)
            return grads

        mocker.patch.object(BoundParams, "grads", poisoned)
        step = mocker.patch("factual.pipeline.training.SGDMomentum.step")

        with pytest.raises(NumericalError, match="finetune epoch 0 batch 0: non-finite gradient") as exc_info:
            finetune(tiny_params, train_set, fast_config.with_changes(clean_only=True))

        assert exc_info.value.details["batch"] == 0
        step.assert_not_called()


class TestTrainConfig:
    """Test cases for TrainConfig."""

    @pytest.mark.parametrize(
        "changes",
        [{"epochs": 0}, {"batch_size": 1}, {"lr": 0.0}, {"temperature": 0.0},
         {"regeneration": "never"}, {"attack_loss": "hinge"}],
    )
    def test_invalid(self, changes):
        """Test that invalid settings are rejected."""
        with pytest.raises(ValueError):
            TrainConfig(**changes).validate()

    def test_finetune_epochs_default(self):
        """Test that fine-tuning reuses the pre-training epoch count by default."""
        assert TrainConfig(epochs=3).resolved_finetune_epochs == 3
        assert TrainConfig(epochs=3, finetune_epochs=1).resolved_finetune_epochs == 1
