import numpy as np
import pytest

from triobs.errors import IntegrationBlowup, TrajectoryLeftBox
from triobs.exprdsl import parse_system
from triobs.obsanalysis import SampleBox
from triobs.observsim import integrate_system
from triobs.signals import PiecewiseConstantInput, signal_from_config, time_grid


def example1_free(x0, t):
    # u = 0: x3 = c + t, x2 = b + ((c + t)^4 - c^4) / 4, x1 by one more integral
    a, b, c = x0
    x3 = c + t
    x2 = b + (x3**4 - c**4) / 4
    x1 = a + b * t + (x3**5 - c**5) / 20 - c**4 * t / 4
    return np.array([x1, x2, x3])


def test_example1_constant_x3(ex1):
    tr = integrate_system(ex1, (0, 0, 1), -1.0, 1.0, 1e-3)
    assert np.allclose(tr.final, [0.5, 1, 1], atol=1e-12)
    assert tr.t[-1] == 1.0 and len(tr.t) == 1001


def test_example2_frozen_x3(ex2):
    tr = integrate_system(ex2, (1, 2, 0), -1.0, 1.0, 1e-3)
    assert np.all(tr.x[:, 2] == 0) and np.allclose(tr.x[:, 1], 2)
    assert np.allclose(tr.x[:, 0], 1 + 2 * tr.t, atol=1e-12)


def test_rk4_fourth_order(ex1):
    x0 = (0.2, -0.3, 0.4)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = integrate_system(ex1, x0, 0.0, 1.0, dt)
        errs.append(np.abs(tr.final - example1_free(x0, 1.0)).max())
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(12 < r < 20 for r in ratios), ratios


def test_richardson_against_fine_reference(ex1):
    x0 = (0.2, -0.3, 0.4)
    ref = integrate_system(ex1, x0, 0.0, 1.0, 0.1 / 8).final
    e1 = np.abs(integrate_system(ex1, x0, 0.0, 1.0, 0.1).final - ref).max()
    e2 = np.abs(integrate_system(ex1, x0, 0.0, 1.0, 0.05).final - ref).max()
    assert 12 < e1 / e2 < 20


def test_deterministic(ex2):
    a = integrate_system(ex2, (1, 2, 1), "0.3*sin(t)", 0.5, 1e-3, observe=4)
    b = integrate_system(ex2, (1, 2, 1), "0.3*sin(t)", 0.5, 1e-3, observe=4)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)


def test_truncates_on_leaving_box(ex1):
    box = SampleBox.cube(-1, 1, 3, 3)
    tr = integrate_system(ex1, (0, 0, 0.5), 0.0, 2.0, 1e-3, box=box)
    assert tr.truncated and "left the box" in tr.reason
    assert np.all(box.contains(tr.x))
    with pytest.raises(TrajectoryLeftBox):
        integrate_system(ex1, (0, 0, 0.5), 0.0, 2.0, 1e-3, box=box, strict=True)
    with pytest.raises(TrajectoryLeftBox):
        integrate_system(ex1, (0, 0, 5), 0.0, 2.0, 1e-3, box=box)


def test_blowup_raises():
    sys = parse_system("states x1\ninputs u\nf = [x1^2]\ng = [[0]]\nh = x1\n")
    with pytest.raises(IntegrationBlowup):
        integrate_system(sys, (1.0,), 0.0, 2.0, 1e-3)


def test_domain_error_truncates():
    # x1 reaches 0 in finite time and log(x1) leaves its domain
    sys = parse_system("states x1\ninputs u\nf = [log(x1) - 1]\ng = [[0]]\nh = x1\n")
    tr = integrate_system(sys, (0.5,), 0.0, 1.0, 1e-3)
    assert tr.truncated and "domain" in tr.reason
    assert np.all(tr.x > 0)


def test_observe_stores_z(ex1):
    tr = integrate_system(ex1, (0, 0, 1), -1.0, 0.1, 1e-2, observe=3)
    assert np.allclose(tr.z[:, 2], tr.x[:, 2] ** 3)


def test_signals():
    pw = PiecewiseConstantInput([0.0, 0.5], [[1.0], [-1.0]])
    assert pw(0.2)[0] == 1.0 and pw(0.7)[0] == -1.0
    assert signal_from_config(2.0, 1)(3.0)[0] == 2.0
    assert signal_from_config("t^2", 1)(3.0)[0] == 9.0
    ts = time_grid(1.0, 0.1)
    assert len(ts) == 11 and ts[-1] == 1.0
    with pytest.raises(ValueError):
        time_grid(0.01, 0.1)
