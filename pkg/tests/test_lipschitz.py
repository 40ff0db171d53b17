import numpy as np
import pytest

from triobs.obsanalysis import SampleBox, Tube, kernel_condition_check, lipschitz_ratio_scan


def closed_form_sup(lo, hi, n=2001):
    # Example 1, order 3: |3a^2 - 3b^2| / |a^3 - b^3| = 3|a + b| / (a^2 + ab + b^2)
    a = np.linspace(lo, hi, n)
    A, B = np.meshgrid(a, a)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = 3 * np.abs(A + B) / (A * A + A * B + B * B)
    return float(np.nanmax(r))


def test_example1_bounded_region_close_to_analytic_sup(ex1):
    box = SampleBox((-1, -1, 0.5), (1, 1, 2), (11, 11, 31))
    scan = lipschitz_ratio_scan(ex1, 3, box, 0.05)
    ref = closed_form_sup(0.5, 2.0)
    assert ref == pytest.approx(4.0, rel=1e-3)
    assert scan.bounded
    assert abs(scan.estimate - ref) <= 0.1 * ref


def test_example1_blowup_localised_at_zero(ex1):
    box = SampleBox.cube(-1, 1, 3, 21)
    scan = lipschitz_ratio_scan(ex1, 3, box, 0.05)
    assert not scan.bounded
    flagged = scan.flagged_cells
    assert flagged
    for c in flagged:
        assert c.lower[2] <= 0 <= c.upper[2]
    for c in scan.cells:
        if abs(c.center[2]) > 0.3:
            assert not c.flagged


def test_example2_bounded_across_x1_zero(ex2):
    box = SampleBox((-1, -1, 0.5), (1, 1, 2), (11, 11, 11), exclude=(Tube((0, 1), 0.3),))
    scan = lipschitz_ratio_scan(ex2, 3, box, 0.05)
    assert scan.bounded
    assert np.isfinite(scan.estimate)


def test_estimate_is_a_running_max(ex2):
    box = SampleBox((-1, -1, 0.5), (1, 1, 2), (11, 11, 11))
    prev = 0.0
    for budget in (50, 200, 800):
        est = lipschitz_ratio_scan(ex2, 3, box, 0.05, cells=1, pair_samples=budget).estimate_r0
        assert est >= prev
        prev = est


def test_scan_rejects_bad_radius(ex1):
    with pytest.raises(ValueError):
        lipschitz_ratio_scan(ex1, 3, SampleBox.cube(-1, 1, 3, 3), 0.0)


def test_csv_rows(ex1):
    scan = lipschitz_ratio_scan(ex1, 3, SampleBox.cube(-1, 1, 3, 5), 0.05, cells=3)
    rows = list(scan.csv_rows())
    assert len(rows) == 27 and len(rows[0]) == 5


def test_kernel_condition_synthetic_violated(a3):
    (chk,) = kernel_condition_check(a3, 3, points=[[0.0, 0.0, 0.0]])
    assert np.allclose(np.abs(chk.kernel), [[0, 0, 1]])
    assert chk.magnitude == pytest.approx(2.0)
    assert chk.violated


def test_kernel_condition_example1_inconclusive(ex1):
    checks = kernel_condition_check(ex1, 3, points=[[0.3, -0.2, 0.0], [0.0, 0.0, 0.0]])
    assert len(checks) == 2
    for c in checks:
        assert np.allclose(np.abs(c.kernel), [[0, 0, 1]])
        assert c.magnitude == 0 and not c.violated


def test_kernel_condition_example2_inconclusive(ex2):
    (chk,) = kernel_condition_check(ex2, 3, points=[[1.0, 2.0, 0.0]])
    assert chk.magnitude == 0 and not chk.violated


def test_kernel_condition_skips_full_rank(ex1):
    assert kernel_condition_check(ex1, 3, points=[[0.1, 0.2, 0.5]]) == []
