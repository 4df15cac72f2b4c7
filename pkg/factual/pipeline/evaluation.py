"""
Robustness evaluation: clean accuracy (TA), accuracy under fresh PGD and
scatterer attacks (RA), and accuracy over both (AA).
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..attacks import AttackConfig, ScattererConfig, classifier_scorer, otsa_attack, pgd
from ..attacks.config import OTSA_STEPS
from ..config import logger
from ..data import Dataset
from ..errors import FactualError, InvariantViolation
from ..model import ModelParams, predict
from ..parallel import parallel_map
from ..rng import derive_seed

EVAL_CHUNK = 64
TOLERANCE = 1e-9
REPORT_KEYS = ("ta", "ra", "aa", "gap", "ra_pgd", "ra_otsa", "n_clean", "n_perturbed", "seed", "config_hash")


def weighted_accuracy(buckets: Sequence[Tuple[float, int]]) -> float:
    """Count-weighted mean of per-bucket accuracies."""
    total = sum(count for _, count in buckets)
    if total == 0:
        return 0.0
    return sum(accuracy * count for accuracy, count in buckets) / total


def _percent(correct: int, count: int) -> float:
    return 100.0 * correct / count if count else 0.0


@dataclass(frozen=True)
class MetricsReport:
    """
    Accuracy metrics of one evaluation, in percent.

    Attributes:
        ta: Accuracy on clean test images
        ra: Accuracy over every perturbed image (PGD and scatterer)
        aa: Accuracy over clean and perturbed images together
        gap: ta - ra
        ra_pgd: Accuracy on PGD images
        ra_otsa: Accuracy on scatterer images
        n_clean: Clean images evaluated
        n_perturbed: Perturbed images evaluated (n_pgd + n_otsa)
        n_pgd: PGD images evaluated
        n_otsa: Scatterer images evaluated
        seed: Evaluation seed
        config_hash: Hash of the resolved run configuration
    """

    ta: float
    ra: float
    aa: float
    gap: float
    ra_pgd: float
    ra_otsa: float
    n_clean: int
    n_perturbed: int
    n_pgd: int
    n_otsa: int
    seed: int = 0
    config_hash: str = ""

    @classmethod
    def from_counts(
        cls,
        clean: Tuple[int, int],
        pgd_counts: Tuple[int, int],
        otsa_counts: Tuple[int, int],
        seed: int = 0,
        config_hash: str = "",
    ) -> "MetricsReport":
        """Build a report from (correct, total) pairs per bucket."""
        ta = _percent(*clean)
        ra_pgd = _percent(*pgd_counts)
        ra_otsa = _percent(*otsa_counts)
        n_perturbed = pgd_counts[1] + otsa_counts[1]
        ra = _percent(pgd_counts[0] + otsa_counts[0], n_perturbed)
        aa = _percent(clean[0] + pgd_counts[0] + otsa_counts[0], clean[1] + n_perturbed)
        return cls(
            ta=ta,
            ra=ra,
            aa=aa,
            gap=ta - ra,
            ra_pgd=ra_pgd,
            ra_otsa=ra_otsa,
            n_clean=clean[1],
            n_perturbed=n_perturbed,
            n_pgd=pgd_counts[1],
            n_otsa=otsa_counts[1],
            seed=seed,
            config_hash=config_hash,
        )

    def validate(self) -> "MetricsReport":
        """
        Check the metric identities.

        Raises:
            InvariantViolation: If a metric leaves [0, 100], gap != ta - ra, or
                aa / ra differ from the count-weighted bucket means by more than 1e-9
        """
        for name in ("ta", "ra", "aa", "ra_pgd", "ra_otsa"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise InvariantViolation(f"{name}={value} outside [0, 100]")
        if self.gap != self.ta - self.ra:
            raise InvariantViolation(f"gap {self.gap} != ta - ra {self.ta - self.ra}")
        if self.n_perturbed != self.n_pgd + self.n_otsa:
            raise InvariantViolation("n_perturbed must equal n_pgd + n_otsa")
        expected_ra = weighted_accuracy([(self.ra_pgd, self.n_pgd), (self.ra_otsa, self.n_otsa)])
        if abs(self.ra - expected_ra) > TOLERANCE:
            raise InvariantViolation(f"ra {self.ra} is not the weighted mean {expected_ra} of its attacks")
        expected_aa = weighted_accuracy([(self.ta, self.n_clean), (self.ra, self.n_perturbed)])
        if abs(self.aa - expected_aa) > TOLERANCE:
            raise InvariantViolation(f"aa {self.aa} is not the weighted mean {expected_aa} of its buckets")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """Flat key=value lines, the report keys first."""
        data = self.to_dict()
        keys = list(REPORT_KEYS) + [key for key in data if key not in REPORT_KEYS]
        return "".join(f"{key}={data[key]}\n" for key in keys)


def write_report(report: MetricsReport, out_dir: Union[str, Path]) -> Path:
    """Write metrics.txt and metrics.json into out_dir."""
    report.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.txt").write_text(report.to_text())
    (out_dir / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote metrics to {out_dir}")
    return out_dir


def evaluate(
    params: ModelParams,
    test: Dataset,
    pgd_cfg: AttackConfig = AttackConfig(),
    otsa_cfg: AttackConfig = AttackConfig(steps=OTSA_STEPS),
    scatterers: ScattererConfig = ScattererConfig(),
    seed: int = 0,
    threads: Optional[int] = 1,
    config_hash: str = "",
    chunk: int = EVAL_CHUNK,
) -> MetricsReport:
    """
    Measure TA, RA and AA of params on a test set.

    Every test image gets one PGD and one scatterer perturbation generated
    against params with the classifier loss and no random start.

    Raises:
        FactualError: On an empty test set
    """
    if len(test) == 0:
        raise FactualError("empty test set")
    pgd_cfg = pgd_cfg.with_changes(random_start=False, loss_mode="classifier").validate()
    otsa_cfg = otsa_cfg.with_changes(random_start=False, loss_mode="classifier").validate()
    scorer = classifier_scorer(params)
    images = test.pixels()
    labels = test.labels()
    masks = test.masks()

    def run(start: int) -> Tuple[int, int, int]:
        end = min(start + chunk, len(test))
        x, y = images[start:end], labels[start:end]
        pgd_seeded = pgd_cfg.with_changes(rng_seed=derive_seed(seed, "eval-pgd", start))
        otsa_seeded = otsa_cfg.with_changes(rng_seed=derive_seed(seed, "eval-otsa", start))
        z_pgd = pgd(x, y, scorer, pgd_seeded).apply(x)
        delta_otsa, _ = otsa_attack(x, y, masks[start:end], scorer, otsa_seeded, scatterers)
        z_otsa = delta_otsa.apply(x)
        return (
            int(np.sum(predict(params, x) == y)),
            int(np.sum(predict(params, z_pgd) == y)),
            int(np.sum(predict(params, z_otsa) == y)),
        )

    counts = np.array(parallel_map(run, range(0, len(test), chunk), threads)).sum(axis=0)
    total = len(test)
    report = MetricsReport.from_counts(
        (int(counts[0]), total), (int(counts[1]), total), (int(counts[2]), total), seed, config_hash
    ).validate()
    logger.info(
        f"TA {report.ta:.2f}  RA {report.ra:.2f} (pgd {report.ra_pgd:.2f}, otsa {report.ra_otsa:.2f})  "
        f"AA {report.aa:.2f}  gap {report.gap:.2f}"
    )
    return report
