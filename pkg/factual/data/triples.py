"""
Triple construction: every original x becomes (x, z_obj, z_img), where
z_img is a PGD-perturbed augmented view and z_obj a scatterer-perturbed one.
"""

from typing import List, Optional, Sequence

import numpy as np

from ..attacks import (
    AttackConfig,
    ScattererConfig,
    classifier_scorer,
    contrastive_scorer,
    otsa_attack,
    pgd,
)
from ..attacks.config import OTSA_STEPS
from ..config import logger
from ..errors import AttackError, NumericalError
from ..losses import DEFAULT_TEMPERATURE
from ..model import ModelParams
from ..parallel import parallel_map
from ..rng import derive_seed
from .augment import AugmentConfig, random_augment
from .images import AugmentedTriple, Dataset, LabeledImage, TripleSet, to_storage

DEFAULT_CHUNK = 32
DEFAULT_OBJ_ATTACK = AttackConfig(steps=OTSA_STEPS)


def make_scorer(params: ModelParams, cfg: AttackConfig, anchors: Sequence[LabeledImage], temperature: float):
    """Loss J for cfg.loss_mode; contrastive mode scores views against the clean anchors."""
    if cfg.loss_mode == "contrastive":
        pixels = np.stack([image.pixels for image in anchors]).astype(np.float64)
        labels = np.array([image.label for image in anchors], dtype=np.int64)
        return contrastive_scorer(params, pixels, labels, temperature)
    return classifier_scorer(params)


def _attack_views(params, originals, view1, view2, img_attack, obj_attack, scatterers, temperature, seed):
    labels = np.array([image.label for image in originals], dtype=np.int64)
    x1 = np.stack([image.pixels for image in view1]).astype(np.float64)
    x2 = np.stack([image.pixels for image in view2]).astype(np.float64)
    masks2 = np.stack([image.mask for image in view2])

    img_cfg = img_attack.with_changes(rng_seed=derive_seed(seed, "pgd"))
    obj_cfg = obj_attack.with_changes(rng_seed=derive_seed(seed, "otsa"))
    delta_img = pgd(x1, labels, make_scorer(params, img_cfg, originals, temperature), img_cfg)
    delta_obj, _ = otsa_attack(x2, labels, masks2, make_scorer(params, obj_cfg, originals, temperature), obj_cfg, scatterers)
    return delta_img.apply(x1), delta_obj.apply(x2), img_cfg, obj_cfg


def build_triples(
    dataset: Dataset,
    params: ModelParams,
    img_attack: AttackConfig = AttackConfig(),
    obj_attack: AttackConfig = DEFAULT_OBJ_ATTACK,
    rng_seed: int = 0,
    augment: AugmentConfig = AugmentConfig(),
    scatterers: ScattererConfig = ScattererConfig(),
    temperature: float = DEFAULT_TEMPERATURE,
    chunk: int = DEFAULT_CHUNK,
    threads: Optional[int] = 1,
) -> List[AugmentedTriple]:
    """
    Augment every image twice and attack both views.

    Args:
        dataset: Originals I_ori
        params: Model the attacks are generated against (read only)
        img_attack: PGD configuration for z_img
        obj_attack: Iteration count and loss for the scatterer attack on z_obj
        rng_seed: Seed; view and attack seeds derive from it and the sample index
        augment: Augmentation strengths
        scatterers: Scatterer count, width and amplitude bound
        temperature: Contrastive temperature when an attack maximizes SCL
        chunk: Samples attacked together in one vectorized pass
        threads: Worker cap over chunks

    Returns:
        One AugmentedTriple per original, in dataset order

    Raises:
        AttackError: Naming the sample index when an attack hits a non-finite loss
    """
    if chunk < 1:
        raise ValueError(f"chunk must be positive, got {chunk}")
    img_attack.validate()
    obj_attack.validate()
    scatterers.validate()
    images = dataset.images
    starts = list(range(0, len(images), chunk))

    def run(start: int) -> List[AugmentedTriple]:
        indices = range(start, min(start + chunk, len(images)))
        originals = [images[i] for i in indices]
        view1 = [random_augment(images[i], derive_seed(rng_seed, "view1", i), augment) for i in indices]
        view2 = [random_augment(images[i], derive_seed(rng_seed, "view2", i), augment) for i in indices]
        seed = derive_seed(rng_seed, "attack", start)
        try:
            z1, z2, img_cfg, obj_cfg = _attack_views(
                params, originals, view1, view2, img_attack, obj_attack, scatterers, temperature, seed
            )
        except (AttackError, NumericalError) as e:
            raise _locate_failure(params, originals, view1, view2, img_attack, obj_attack, scatterers, temperature, seed, start, e)

        triples = []
        for offset, index in enumerate(indices):
            z_img = view1[offset].with_pixels(to_storage(z1[offset], view1[offset].pixels, img_cfg.epsilon))
            z_obj = view2[offset].with_pixels(to_storage(z2[offset]))
            provenance = {
                "index": index,
                "view1_seed": derive_seed(rng_seed, "view1", index),
                "view2_seed": derive_seed(rng_seed, "view2", index),
                "img_attack": img_cfg.to_dict(),
                "obj_attack": obj_cfg.to_dict(),
                "scatterers": scatterers.to_dict(),
            }
            triples.append(AugmentedTriple(originals[offset], view1[offset], view2[offset], z_img, z_obj, provenance))
        return triples

    chunks = parallel_map(run, starts, threads)
    triples = [triple for part in chunks for triple in part]
    logger.debug(f"Built {len(triples)} triples ({3 * len(triples)} training views)")
    return triples


def _locate_failure(params, originals, view1, view2, img_attack, obj_attack, scatterers, temperature, seed, start, error):
    """Re-run a failed chunk one sample at a time to name the offending index."""
    for offset in range(len(originals)):
        try:
            _attack_views(
                params,
                originals[offset:offset + 1],
                view1[offset:offset + 1],
                view2[offset:offset + 1],
                img_attack,
                obj_attack,
                scatterers,
                temperature,
                seed,
            )
        except (AttackError, NumericalError) as e:
            index = start + offset
            return AttackError(f"attack failed for sample {index}: {e}", {"sample": index})
    index = start
    return AttackError(f"attack failed for samples starting at {index}: {error}", {"sample": index})


def perturb_dataset(
    dataset: Dataset,
    params: ModelParams,
    img_attack: AttackConfig = AttackConfig(),
    obj_attack: AttackConfig = DEFAULT_OBJ_ATTACK,
    rng_seed: int = 0,
    scatterers: ScattererConfig = ScattererConfig(),
    temperature: float = DEFAULT_TEMPERATURE,
    threads: Optional[int] = 1,
) -> TripleSet:
    """Attack the un-augmented images and collect (clean, z_obj, z_img) columns."""
    triples = build_triples(
        dataset,
        params,
        img_attack,
        obj_attack,
        rng_seed,
        augment=AugmentConfig.identity(),
        scatterers=scatterers,
        temperature=temperature,
        threads=threads,
    )
    return TripleSet.from_triples(triples, dataset.class_count, dataset.split)
