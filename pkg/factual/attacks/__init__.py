"""
Adversarial perturbations: FGSM, PGD and the target-confined scatterer attack.
"""

from .config import DEFAULT_EPSILON, LOSS_MODES, OTSA_STEPS, PGD_STEPS, AttackConfig, Perturbation, ScattererConfig
from .scorers import (
    Scorer,
    classifier_scorer,
    contrastive_scorer,
    input_gradient,
    linear_scorer,
    linear_softmax_scorer,
)
from .gradient import fgsm, pgd, project_linf
from .scatterers import ScattererSet, nearest_mask_pixel, otsa_attack, render_scatterers

__all__ = [
    "DEFAULT_EPSILON",
    "LOSS_MODES",
    "PGD_STEPS",
    "OTSA_STEPS",
    "AttackConfig",
    "ScattererConfig",
    "Perturbation",
    "ScattererSet",
    "Scorer",
    "classifier_scorer",
    "contrastive_scorer",
    "linear_scorer",
    "linear_softmax_scorer",
    "input_gradient",
    "project_linf",
    "fgsm",
    "pgd",
    "render_scatterers",
    "nearest_mask_pixel",
    "otsa_attack",
]
