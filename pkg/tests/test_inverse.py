import numpy as np
import pytest

from triobs.canonform import jacobian_condition, left_inverse, warm_inverse
from triobs.errors import AmbiguousInverse, NoConvergence
from triobs.liecalc import build_H
from triobs.obsanalysis import SampleBox, Tube

BOX2 = SampleBox((-1, -1, 0.5), (3, 4.5, 2), (5, 5, 5), exclude=(Tube((0, 1), 0.3),))


def inverse_h4_example2(z):
    # valid where x3 > 0 and (x1, x2) != 0
    z1, z2, z3, z4 = z
    top = (z4 - 3 * np.cbrt(z3) ** 2 * np.cbrt(z1)) ** 2 + z3**2
    return np.array([z1, z2, (top / (z1**2 + z2**2)) ** (1 / 6)])


def test_example2_reference_point(ex2):
    H = build_H(ex2, 4)
    res = left_inverse(H, (1, 2, 1, 5), box=BOX2)
    assert res.success and res.residual < 1e-9
    assert np.allclose(res.x, [1, 2, 1], atol=1e-7)
    assert np.allclose(res.x, inverse_h4_example2((1, 2, 1, 5)), atol=1e-7)


def test_example2_round_trips(ex2, rng):
    H = build_H(ex2, 4)
    X = BOX2.uniform(30, stream=5)
    for x in X:
        z = H(x)
        res = left_inverse(H, z, box=BOX2)
        assert np.linalg.norm(H(res.x) - z) <= 1e-9
        assert np.allclose(res.x, inverse_h4_example2(z), atol=1e-6)


def test_example1_cube_root(ex1):
    res = left_inverse(build_H(ex1, 3), (0.5, -1, 8), box=SampleBox.cube(-3, 3, 3, 3))
    assert np.allclose(res.x, [0.5, -1, 2], atol=1e-9)


def test_example1_order2_ambiguous(ex1):
    with pytest.raises(AmbiguousInverse) as info:
        left_inverse(build_H(ex1, 2), (0.5, -1), box=SampleBox.cube(-1, 1, 3, 3))
    assert info.value.result.alternatives is not None


def test_no_convergence_outside_image(ex1):
    # x3 in [0.5, 2] cannot produce L_f^3 h = 3 x3^2 < 0
    H = build_H(ex1, 4)
    with pytest.raises(NoConvergence):
        left_inverse(H, (0, 0, 1, -5), box=SampleBox((-1, -1, 0.5), (1, 1, 2), (3, 3, 3)))


def test_needs_guesses_or_box(ex1):
    with pytest.raises(ValueError):
        left_inverse(build_H(ex1, 3), (0, 0, 1))


def test_condition_number(ex1):
    H = build_H(ex1, 3)
    assert jacobian_condition(H, (0, 0, 1)) == pytest.approx(3.0)
    assert jacobian_condition(H, (0, 0, 0)) == float("inf")


def test_warm_inverse(ex2):
    H = build_H(ex2, 4)
    x, r = warm_inverse(H, H((1.0, 2.0, 1.0)), (1.05, 1.9, 0.95))
    assert r < 1e-12 and np.allclose(x, [1, 2, 1])
