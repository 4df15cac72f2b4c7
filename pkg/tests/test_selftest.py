"""
Tests for the built-in verification suite.
"""

import numpy as np

from factual.selftest import CheckResult, SelftestReport, dilate, run_selftest


class TestSelftestReport:
    """Test cases for SelftestReport."""

    def test_failures(self):
        """Test that one failed check fails the report."""
        report = SelftestReport()
        report.add("a", True)
        report.add("b", False, "off by one")

        assert not report.passed
        assert report.failures == [CheckResult("b", False, "off by one")]

    def test_empty_report_passes(self):
        assert SelftestReport().passed


class TestDilate:
    """Test cases for dilate."""

    def test_single_pixel(self):
        """Test that one pixel grows into a disc of the given radius."""
        masks = np.zeros((1, 9, 9), dtype=bool)
        masks[0, 4, 4] = True
        grown = dilate(masks, 2)

        assert grown[0, 4, 6] and grown[0, 2, 4]
        assert not grown[0, 2, 2]
        assert grown.sum() == 13

    def test_zero_radius(self):
        """Test that radius 0 leaves the mask unchanged."""
        masks = np.random.default_rng(0).random((2, 6, 6)) > 0.5
        assert np.array_equal(dilate(masks, 0), masks)


class TestRunSelftest:
    """Test cases for run_selftest."""

    def test_small_run_passes(self):
        """Test that every check passes on a reduced run."""
        report = run_selftest(seeds=1, oracle_batches=5, perturbations=20)

        assert report.passed, [f"{c.name}: {c.detail}" for c in report.failures]
        names = {check.name for check in report.checks}
        assert "scl:oracle" in names
        assert "attack:pgd-fgsm-degeneracy" in names
        assert "metrics:weighted-mean" in names
        assert any(name.startswith("gradient:") for name in names)
