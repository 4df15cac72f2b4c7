"""
Training stages: supervised adversarial contrastive pre-training, adversarial
fine-tuning, and the standard / adversarial training baselines.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Union

import numpy as np

from ..attacks import classifier_scorer, pgd
from ..autodiff import SGDMomentum, Tensor, backward
from ..config import logger
from ..data import VIEW_TAGS, AugmentedTriple, Dataset, TripleSet, build_triples
from ..errors import AttackError, FactualError, InvariantViolation, NumericalError
from ..losses import SclBatch, cross_entropy_loss, supervised_contrastive_loss
from ..model import ArchitectureConfig, ModelParams, classify, encode, init_params, project, save_checkpoint
from ..model.params import CLASSIFIER, ENCODER, PROJECTOR
from ..rng import derive_seed, generator
from .config import TrainConfig


@dataclass
class TrainingResult:
    """Trained parameters with per-epoch mean losses; unpacks as (params, history)."""

    params: ModelParams
    history: List[float] = field(default_factory=list)
    steps: int = 0

    def __iter__(self) -> Iterator:
        return iter((self.params, self.history))


@dataclass
class ViewBatch:
    """Flat batch of training views with their provenance tags."""

    pixels: np.ndarray
    labels: np.ndarray
    tags: np.ndarray
    origins: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


def check_batch_composition(batch: ViewBatch) -> ViewBatch:
    """
    Every original in the batch must contribute exactly its clean, z_obj and
    z_img views, all carrying the original's label.

    Raises:
        InvariantViolation: On a missing, duplicated or mislabeled view
    """
    expected = sorted(VIEW_TAGS.values())
    for origin in np.unique(batch.origins):
        members = batch.origins == origin
        if sorted(batch.tags[members].tolist()) != expected:
            raise InvariantViolation(
                f"batch holds views {sorted(batch.tags[members].tolist())} of original {int(origin)}, expected {expected}",
                {"origin": int(origin)},
            )
        if len(np.unique(batch.labels[members])) != 1:
            raise InvariantViolation(f"views of original {int(origin)} carry different labels", {"origin": int(origin)})
    return batch


def triple_batch(triples: Sequence[AugmentedTriple], origins: Sequence[int]) -> ViewBatch:
    """Flatten triples into [clean..., z_obj..., z_img...] views."""
    pixels, labels, tags, owners = [], [], [], []
    for name, picker in (("clean", lambda t: t.clean), ("z_obj", lambda t: t.z_obj), ("z_img", lambda t: t.z_img)):
        for triple, origin in zip(triples, origins):
            image = picker(triple)
            pixels.append(image.pixels)
            labels.append(image.label)
            tags.append(VIEW_TAGS[name])
            owners.append(origin)
    return ViewBatch(
        np.stack(pixels).astype(np.float64),
        np.array(labels, dtype=np.int64),
        np.array(tags, dtype=np.int64),
        np.array(owners, dtype=np.int64),
    )


def column_batch(columns: TripleSet, indices: Sequence[int]) -> ViewBatch:
    """Same layout as triple_batch, read from stored triple columns."""
    pixels, labels, tags, owners = [], [], [], []
    for name, column in (("clean", columns.clean), ("z_obj", columns.z_obj), ("z_img", columns.z_img)):
        for index in indices:
            image = column[index]
            pixels.append(image.pixels)
            labels.append(image.label)
            tags.append(VIEW_TAGS[name])
            owners.append(index)
    return ViewBatch(
        np.stack(pixels).astype(np.float64),
        np.array(labels, dtype=np.int64),
        np.array(tags, dtype=np.int64),
        np.array(owners, dtype=np.int64),
    )


def clean_batch(dataset: Dataset, indices: Sequence[int]) -> ViewBatch:
    images = [dataset[i] for i in indices]
    return ViewBatch(
        np.stack([image.pixels for image in images]).astype(np.float64),
        np.array([image.label for image in images], dtype=np.int64),
        np.full(len(images), VIEW_TAGS["clean"], dtype=np.int64),
        np.asarray(indices, dtype=np.int64),
    )


def batch_indices(count: int, batch_size: int, seed: int, stage: str, epoch: int) -> List[np.ndarray]:
    """Shuffled index batches for one epoch; the last batch may be short."""
    order = generator(seed, stage, "shuffle", epoch).permutation(count)
    return [order[start:start + batch_size] for start in range(0, count, batch_size)]


class TripleSource:
    """
    Supplies attacked triples for a batch under a regeneration policy.

    per-batch attacks each batch against the current params; per-epoch attacks
    the whole dataset at the start of each epoch; once attacks it before the
    first epoch and reuses the result.
    """

    def __init__(self, dataset: Dataset, cfg: TrainConfig, stage: str, loss_mode: str):
        self.dataset = dataset
        self.cfg = cfg
        self.stage = stage
        self.pgd = cfg.pgd.with_changes(loss_mode=loss_mode)
        self.otsa = cfg.otsa.with_changes(loss_mode=loss_mode)
        self._cached: Optional[List[AugmentedTriple]] = None

    def _build(self, dataset: Dataset, params: ModelParams, seed: int, chunk: int) -> List[AugmentedTriple]:
        return build_triples(
            dataset,
            params,
            self.pgd,
            self.otsa,
            seed,
            augment=self.cfg.augment,
            scatterers=self.cfg.scatterers,
            temperature=self.cfg.temperature,
            chunk=chunk,
            threads=self.cfg.threads,
        )

    def start_epoch(self, params: ModelParams, epoch: int):
        policy = self.cfg.regeneration
        if policy == "per-epoch" or (policy == "once" and self._cached is None):
            seed = derive_seed(self.cfg.seed, self.stage, "triples", epoch)
            self._cached = self._build(self.dataset, params, seed, self.cfg.batch_size)

    def batch(self, params: ModelParams, indices: np.ndarray, epoch: int, number: int) -> ViewBatch:
        if self.cfg.regeneration == "per-batch":
            seed = derive_seed(self.cfg.seed, self.stage, "triples", epoch, number)
            triples = self._build(self.dataset.subset(indices), params, seed, len(indices))
        else:
            triples = [self._cached[i] for i in indices]
        return triple_batch(triples, indices)


LossFn = Callable[[Dict[str, Tensor], ViewBatch], Tensor]


def _contrastive_loss(temperature: float) -> LossFn:
    def loss(bound, batch: ViewBatch) -> Tensor:
        features = project(bound, encode(bound, batch.pixels))
        return supervised_contrastive_loss(SclBatch(features, batch.labels, temperature))

    return loss


def _classification_loss(bound, batch: ViewBatch) -> Tensor:
    return cross_entropy_loss(classify(bound, encode(bound, batch.pixels)), batch.labels)


def _run_epochs(
    params: ModelParams,
    stage: str,
    epochs: int,
    cfg: TrainConfig,
    count: int,
    make_batch: Callable[[ModelParams, np.ndarray, int, int], ViewBatch],
    loss_fn: LossFn,
    trainable: Sequence[str],
    start_epoch: Optional[Callable[[ModelParams, int], None]] = None,
) -> TrainingResult:
    optimizer = SGDMomentum(cfg.lr, cfg.momentum, cfg.weight_decay)
    result = TrainingResult(params)
    for epoch in range(epochs):
        if start_epoch is not None:
            start_epoch(params, epoch)
        losses = []
        for number, indices in enumerate(batch_indices(count, cfg.batch_size, cfg.seed, stage, epoch)):
            try:
                batch = make_batch(params, indices, epoch, number)
                bound = params.bind(trainable)
                loss = loss_fn(bound, batch)
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericalError(f"non-finite loss {value}")
                backward(loss)
                grads = bound.grads()
                for name, grad in grads.items():
                    if not np.all(np.isfinite(grad)):
                        raise NumericalError(f"non-finite gradient for {name}", {"parameter": name})
            except (AttackError, NumericalError) as e:
                raise type(e)(f"{stage} epoch {epoch} batch {number}: {e}", {**e.details, "batch": number}) from e
            optimizer.step(params, grads)
            losses.append(value)
            result.steps += 1
        result.history.append(float(np.mean(losses)))
        logger.info(f"{stage} epoch {epoch + 1}/{epochs}: loss {result.history[-1]:.4f}")

    path = cfg.checkpoint_path(stage)
    if path is not None:
        save_checkpoint(params, path)
    return result


def _default_arch(dataset: Dataset, arch: Optional[ArchitectureConfig]) -> ArchitectureConfig:
    if arch is not None:
        if arch.class_count != dataset.class_count or arch.image_size != dataset.image_shape[0]:
            raise ValueError("architecture does not match the dataset's image size or class count")
        return arch
    return ArchitectureConfig(image_size=dataset.image_shape[0], class_count=dataset.class_count)


def _check_dataset(dataset: Dataset):
    if len(dataset) == 0:
        raise FactualError("empty training set")
    if len(np.unique(dataset.labels())) < 2:
        raise FactualError("training set must contain at least two classes")


def pretrain(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    arch: Optional[ArchitectureConfig] = None,
    params: Optional[ModelParams] = None,
) -> TrainingResult:
    """
    Supervised adversarial contrastive pre-training of encoder and projector.

    For every batch of originals the two augmented views are attacked (PGD on
    the first, scatterers on the second) against the current model, and the
    3B views are trained with the supervised contrastive loss.

    Args:
        dataset: Training originals (at least two classes)
        cfg: Training configuration
        arch: Architecture for fresh params (default sized to the dataset)
        params: Starting params instead of a fresh initialization

    Returns:
        TrainingResult with one mean loss per epoch
    """
    cfg.validate()
    _check_dataset(dataset)
    params = params.copy() if params is not None else init_params(_default_arch(dataset, arch), derive_seed(cfg.seed, "init"))
    source = TripleSource(dataset, cfg, "pretrain", cfg.attack_loss)

    def make_batch(current, indices, epoch, number):
        return check_batch_composition(source.batch(current, indices, epoch, number))

    trainable = params.names(ENCODER) + params.names(PROJECTOR)
    return _run_epochs(
        params, "pretrain", cfg.epochs, cfg, len(dataset), make_batch,
        _contrastive_loss(cfg.temperature), trainable, source.start_epoch,
    )


def finetune(params: ModelParams, data: Union[Dataset, TripleSet], cfg: TrainConfig = TrainConfig()) -> TrainingResult:
    """
    Cross-entropy fine-tuning of encoder and linear classifier on 3-view batches.

    Args:
        params: Pre-trained params (copied, never modified)
        data: Originals, attacked per cfg.regeneration with the classifier loss,
            or stored triples used as they are
        cfg: Training configuration; freeze_encoder trains only the classifier,
            clean_only drops the perturbed views

    Returns:
        TrainingResult; projector parameters are never read or changed
    """
    cfg.validate()
    params = params.copy()
    trainable = params.names(CLASSIFIER) if cfg.freeze_encoder else params.names(ENCODER) + params.names(CLASSIFIER)
    start_epoch = None

    if isinstance(data, TripleSet):
        count = len(data)
        if cfg.clean_only:
            def make_batch(current, indices, epoch, number):
                return clean_batch(data.clean, indices)
        else:
            def make_batch(current, indices, epoch, number):
                return check_batch_composition(column_batch(data, indices))
    else:
        _check_dataset(data)
        count = len(data)
        if cfg.clean_only:
            def make_batch(current, indices, epoch, number):
                return clean_batch(data, indices)
        else:
            source = TripleSource(data, cfg, "finetune", "classifier")
            start_epoch = source.start_epoch

            def make_batch(current, indices, epoch, number):
                return check_batch_composition(source.batch(current, indices, epoch, number))

    return _run_epochs(
        params, "finetune", cfg.resolved_finetune_epochs, cfg, count, make_batch,
        _classification_loss, trainable, start_epoch,
    )


def run_standard_training(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    arch: Optional[ArchitectureConfig] = None,
) -> TrainingResult:
    """Baseline: encoder + classifier trained with cross-entropy on clean images only."""
    cfg.validate()
    _check_dataset(dataset)
    params = init_params(_default_arch(dataset, arch), derive_seed(cfg.seed, "init"))

    def make_batch(current, indices, epoch, number):
        return clean_batch(dataset, indices)

    trainable = params.names(ENCODER) + params.names(CLASSIFIER)
    return _run_epochs(params, "standard", cfg.epochs, cfg, len(dataset), make_batch, _classification_loss, trainable)


def run_adversarial_training(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    arch: Optional[ArchitectureConfig] = None,
) -> TrainingResult:
    """Baseline: cross-entropy on PGD examples regenerated every batch against the current model."""
    cfg.validate()
    _check_dataset(dataset)
    params = init_params(_default_arch(dataset, arch), derive_seed(cfg.seed, "init"))
    attack = cfg.pgd.with_changes(loss_mode="classifier")

    def make_batch(current, indices, epoch, number):
        batch = clean_batch(dataset, indices)
        seeded = attack.with_changes(rng_seed=derive_seed(cfg.seed, "adversarial", epoch, number))
        delta = pgd(batch.pixels, batch.labels, classifier_scorer(current), seeded)
        batch.pixels = delta.apply(batch.pixels)
        return batch

    trainable = params.names(ENCODER) + params.names(CLASSIFIER)
    return _run_epochs(params, "adversarial", cfg.epochs, cfg, len(dataset), make_batch, _classification_loss, trainable)
