"""
Built-in verification suite: finite-difference gradient checks, the
contrastive-loss oracle, attack budget / locality / degeneracy checks and the
metric identities.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from .attacks import AttackConfig, ScattererConfig, fgsm, linear_softmax_scorer, otsa_attack, pgd
from .autodiff import Tensor, finite_difference_check
from .autodiff import functional as F
from .config import logger
from .losses import SclBatch, cross_entropy_loss, supervised_contrastive_loss, supervised_contrastive_loss_reference
from .model import ArchitectureConfig, classify, encode, init_params, project
from .pipeline import MetricsReport, weighted_accuracy

GRADIENT_TOLERANCE = 1e-4
ORACLE_TOLERANCE = 1e-8
BUDGET_SLACK = 1e-12

Case = Callable[[np.random.Generator], Tuple[Callable[[Tensor], Tensor], np.ndarray]]


def _scalarize(rng: np.random.Generator, shape) -> Callable[[Tensor], Tensor]:
    weights = rng.normal(size=shape)
    return lambda out: F.tsum(F.mul(out, weights))


def _unary(op: Callable[[Tensor], Tensor], shape, low: float = -1.0, high: float = 1.0) -> Case:
    def case(rng):
        x = rng.uniform(low, high, size=shape)
        reduce = _scalarize(rng, op(Tensor(x)).shape)
        return (lambda t: reduce(op(t))), x

    return case


def _with_constant(op: Callable[[Tensor, np.ndarray], Tensor], shape, other_shape) -> Case:
    def case(rng):
        x = rng.normal(size=shape)
        other = rng.normal(size=other_shape)
        reduce = _scalarize(rng, op(Tensor(x), other).shape)
        return (lambda t: reduce(op(t, other))), x

    return case


def _scl_case(rng):
    labels = np.array([0, 0, 1, 1, 2, 0])
    raw = rng.normal(size=(6, 4))
    return (lambda t: supervised_contrastive_loss(SclBatch(F.l2_normalize(t), labels, 0.5))), raw


def _ce_case(rng):
    labels = rng.integers(0, 3, size=5)
    return (lambda t: cross_entropy_loss(t, labels)), rng.normal(size=(5, 3))


GRADIENT_CASES: Dict[str, Case] = {
    "add": _with_constant(lambda t, c: F.add(t, c), (3, 4), (4,)),
    "sub": _with_constant(lambda t, c: F.sub(c, t), (3, 4), (3, 1)),
    "mul": _with_constant(lambda t, c: F.mul(t, c), (3, 4), (3, 4)),
    "scale": _unary(lambda t: F.scale(t, -2.5), (3, 4)),
    "matmul": _with_constant(lambda t, c: F.matmul(t, c), (3, 4), (4, 2)),
    "matmul_transpose": _with_constant(lambda t, c: F.matmul(t, c, transpose_b=True), (3, 4), (5, 4)),
    "dense": _with_constant(lambda t, c: F.dense(t, c, np.arange(2.0)), (3, 4), (4, 2)),
    "dense_weight": _with_constant(lambda t, c: F.dense(c, t, np.ones(2)), (4, 2), (3, 4)),
    "relu": _unary(F.relu, (4, 5)),
    "exp": _unary(F.exp, (4, 5)),
    "log": _unary(F.log, (4, 5), 0.5, 2.0),
    "sum": _unary(lambda t: F.tsum(t, axis=1, keepdims=True), (3, 4)),
    "mean": _unary(lambda t: F.mean(t, axis=0), (3, 4)),
    "softmax": _unary(F.softmax, (3, 4)),
    "l2_normalize": _unary(F.l2_normalize, (3, 4)),
    "flatten": _unary(F.flatten, (2, 1, 3, 3)),
    "gather_rows": _unary(lambda t: F.gather_rows(t, [0, 2, 2], [1, 0, 3]), (3, 4)),
    "clamp": _unary(lambda t: F.clamp(t, -0.5, 0.5), (4, 5)),
    "conv2d": _with_constant(lambda t, c: F.conv2d(t, c, np.zeros(2), pad=1), (2, 1, 5, 5), (2, 1, 3, 3)),
    "conv2d_weight": _with_constant(lambda t, c: F.conv2d(c, t, stride=2), (3, 2, 3, 3), (1, 2, 6, 6)),
    "maxpool2x2": _unary(F.maxpool2x2, (2, 2, 4, 5)),
    "global_avg_pool": _unary(F.global_avg_pool, (2, 3, 4, 4)),
    "stack_rows": _with_constant(lambda t, c: F.stack_rows([t, c, t]), (2, 3), (1, 3)),
    "supervised_contrastive_loss": _scl_case,
    "cross_entropy_loss": _ce_case,
}


# Small enough that every parameter coordinate can be differenced
GRADCHECK_ARCH = ArchitectureConfig(
    image_size=8, channels=(2, 3), representation_dim=4, projector_hidden=4, projector_dim=3, class_count=3
)
# ReLU and max-pool kinks stay out of reach of a step this small
NETWORK_STEP = 1e-7


def _encoded(bound, images):
    return encode(bound, images)


def _projected(bound, images):
    return project(bound, encode(bound, images))


def _network_case(forward, wrt: str, loss: str = "weighted") -> Case:
    """Differentiate a network map with respect to its input batch or one named parameter."""

    def case(rng):
        params = init_params(GRADCHECK_ARCH, int(rng.integers(2**31)))
        images = rng.uniform(0.0, 1.0, size=(2, 1, 8, 8))
        labels = np.array([0, 2])

        def run(t):
            bound = params.bind()
            if wrt == "input":
                out = forward(bound, t)
            else:
                out = forward(bound.substitute(wrt, t), images)
            if loss == "ce":
                return cross_entropy_loss(out, labels)
            return F.tsum(F.mul(out, weights))

        weights = rng.normal(size=forward(params.bind(), images).shape)
        return run, images if wrt == "input" else params[wrt]

    return case


def _classified(bound, images):
    return classify(bound, encode(bound, images))


NETWORK_CASES: Dict[str, Case] = {
    "encode:input": _network_case(_encoded, "input"),
    "encode:encoder.conv1.weight": _network_case(_encoded, "encoder.conv1.weight"),
    "encode:encoder.conv2.bias": _network_case(_encoded, "encoder.conv2.bias"),
    "encode:encoder.fc.weight": _network_case(_encoded, "encoder.fc.weight"),
    "project:input": _network_case(_projected, "input"),
    "project:projector.fc1.weight": _network_case(_projected, "projector.fc1.weight"),
    "project:projector.fc2.bias": _network_case(_projected, "projector.fc2.bias"),
    "classifier_ce:input": _network_case(_classified, "input", "ce"),
    "classifier_ce:encoder.conv1.weight": _network_case(_classified, "encoder.conv1.weight", "ce"),
    "classifier_ce:encoder.conv2.weight": _network_case(_classified, "encoder.conv2.weight", "ce"),
    "classifier_ce:classifier.weight": _network_case(_classified, "classifier.weight", "ce"),
    "classifier_ce:classifier.bias": _network_case(_classified, "classifier.bias", "ce"),
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SelftestReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> CheckResult:
        result = CheckResult(name, bool(passed), detail)
        self.checks.append(result)
        if result.passed:
            logger.info(f"selftest {name}: ok {detail}")
        else:
            logger.error(f"selftest {name}: FAILED {detail}")
        return result


def check_gradients(report: SelftestReport, seeds: int):
    for name, case in GRADIENT_CASES.items():
        worst = 0.0
        for seed in range(seeds):
            f, x = case(np.random.default_rng(seed))
            worst = max(worst, finite_difference_check(f, x, step=1e-5))
        report.add(f"gradient:{name}", worst < GRADIENT_TOLERANCE, f"max relative error {worst:.2e}")
    for name, case in NETWORK_CASES.items():
        worst = 0.0
        for seed in range(seeds):
            f, x = case(np.random.default_rng(seed))
            worst = max(worst, finite_difference_check(f, x, step=NETWORK_STEP))
        report.add(f"gradient:{name}", worst < GRADIENT_TOLERANCE, f"max relative error {worst:.2e}")


def random_scl_batch(rng: np.random.Generator):
    size = int(rng.integers(2, 17))
    dim = int(rng.integers(2, 9))
    classes = int(rng.integers(2, 5))
    labels = rng.integers(0, classes, size=size)
    if len(np.unique(labels)) == size:
        labels[1] = labels[0]
    features = rng.normal(size=(size, dim))
    return features / np.linalg.norm(features, axis=1, keepdims=True), labels


def check_scl_oracle(report: SelftestReport, batches: int):
    worst = 0.0
    rng = np.random.default_rng(1234)
    for _ in range(batches):
        features, labels = random_scl_batch(rng)
        fast = supervised_contrastive_loss(SclBatch(Tensor(features), labels, 0.1)).item()
        slow = supervised_contrastive_loss_reference(features, labels, 0.1)
        worst = max(worst, abs(fast - slow))
    report.add("scl:oracle", worst < ORACLE_TOLERANCE, f"max deviation {worst:.2e} over {batches} batches")

    unit = np.array([[0.6, 0.8], [0.6, 0.8]])
    identical = supervised_contrastive_loss(SclBatch(Tensor(unit), np.array([1, 1]), 0.1)).item()
    report.add("scl:identical-pair", identical == 0.0, f"loss {identical}")


def _linear_problem(rng: np.random.Generator, count: int, size: int, classes: int = 3):
    weights = rng.normal(size=(size * size, classes))
    bias = rng.normal(size=classes)
    images = rng.uniform(0.0, 1.0, size=(count, size, size))
    labels = rng.integers(0, classes, size=count)
    return linear_softmax_scorer(weights, bias), images, labels


def check_attacks(report: SelftestReport, perturbations: int):
    rng = np.random.default_rng(99)
    scorer, images, labels = _linear_problem(rng, perturbations, 8)
    cfg = AttackConfig(epsilon=8 / 255, steps=7, random_start=True, rng_seed=5)
    delta = pgd(images, labels, scorer, cfg)
    adversarial = delta.apply(images)
    budget_ok = delta.linf <= cfg.epsilon + BUDGET_SLACK
    range_ok = adversarial.min() >= 0.0 and adversarial.max() <= 1.0
    report.add("attack:pgd-budget", budget_ok and range_ok, f"max |delta| {delta.linf:.6f} over {perturbations} images")

    one_step = AttackConfig(epsilon=cfg.epsilon, steps=1, step_size=cfg.epsilon, random_start=False)
    same = np.array_equal(pgd(images, labels, scorer, one_step).delta, fgsm(images, labels, scorer, cfg.epsilon).delta)
    report.add("attack:pgd-fgsm-degeneracy", same)

    # two classes: the input gradient of the loss has the sign of w_other - w_label
    weights = rng.normal(size=(36, 2))
    interior = rng.uniform(0.2, 0.8, size=(20, 6, 6))
    y = rng.integers(0, 2, size=20)
    closed_cfg = AttackConfig(random_start=False)
    closed = pgd(interior, y, linear_softmax_scorer(weights, np.zeros(2)), closed_cfg)
    direction = np.sign(weights[:, 1 - y] - weights[:, y]).T.reshape(interior.shape)
    error = np.max(np.abs(closed.delta - closed_cfg.epsilon * direction))
    report.add("attack:linear-closed-form", error <= BUDGET_SLACK, f"max deviation {error:.2e}")

    masks = np.zeros((20, 16, 16), dtype=bool)
    for b in range(20):
        top, left = rng.integers(2, 10, size=2)
        masks[b, top:top + 5, left:left + 5] = True
    scorer16, images16, labels16 = _linear_problem(rng, 20, 16)
    scatterers = ScattererConfig()
    delta, state = otsa_attack(images16, labels16, masks, scorer16, AttackConfig(steps=10, rng_seed=3), scatterers)
    outside = ~dilate(masks, scatterers.radius)
    leaked = int(np.count_nonzero(delta.delta[outside]))
    report.add("attack:otsa-locality", leaked == 0 and state.on_mask(masks), f"{leaked} nonzero pixels outside the dilated mask")


def dilate(masks: np.ndarray, radius: int) -> np.ndarray:
    """Pixels within Euclidean distance radius of a mask pixel."""
    rows, cols = np.mgrid[0:masks.shape[1], 0:masks.shape[2]]
    grown = np.zeros_like(masks)
    for b, mask in enumerate(masks):
        cells = np.argwhere(mask)
        dist = (rows[..., None] - cells[:, 0]) ** 2 + (cols[..., None] - cells[:, 1]) ** 2
        grown[b] = (dist <= radius * radius).any(axis=-1)
    return grown


def check_metrics(report: SelftestReport):
    metrics = MetricsReport.from_counts((99, 100), (90, 100), (90, 100))
    metrics.validate()
    report.add("metrics:weighted-mean", metrics.aa == 93.0 and metrics.gap == metrics.ta - metrics.ra, f"aa {metrics.aa}")
    table = weighted_accuracy([(99.7, 1), (94.4, 2)])
    report.add("metrics:reported-row", abs(table - 96.1) <= 0.15, f"aa {table:.4f}")


def run_selftest(seeds: int = 10, oracle_batches: int = 100, perturbations: int = 1000) -> SelftestReport:
    """Run every check and collect the results; never raises on a failed check."""
    report = SelftestReport()
    check_gradients(report, seeds)
    check_scl_oracle(report, oracle_batches)
    check_attacks(report, perturbations)
    check_metrics(report)
    logger.info(f"selftest: {len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed")
    return report
