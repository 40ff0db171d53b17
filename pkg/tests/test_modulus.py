import numpy as np
import pytest

from triobs.obsanalysis import SampleBox, Tube, fit_power_law, modulus_estimate

from . import oracles

S = np.logspace(-4, 0, 41)


# grid through x3 = 0 plus uniform points: the grid alone makes rho a
# staircase at its spacing, random points alone miss the singular slice
MIXED = SampleBox((-1, -1, -1), (1, 1, 1), (1, 1, 4001), n_random=4000, seed=0)


def test_example1_exponent_two_thirds(ex1):
    box = MIXED
    est = modulus_estimate(ex1, "3*x3^2", ["x1", "x2", "x3^3"], box, S)
    assert est.exponent == pytest.approx(2 / 3, abs=0.05)


def test_kernel_agrees_with_brute_force(ex1):
    box = SampleBox((-1, -1, -1), (1, 1, 1), (1, 1, 401))
    est = modulus_estimate(ex1, "3*x3^2", ["x1", "x2", "x3^3"], box, S)
    X = box.points
    G = np.column_stack([X[:, 0], X[:, 1], X[:, 2] ** 3])
    P = 3 * X[:, 2:3] ** 2
    ref = oracles.brute_modulus(G, P, S)
    assert np.allclose(est.rho, ref, rtol=1e-12, atol=1e-15)
    p_ref, _, _ = fit_power_law(S, ref)
    assert est.exponent == pytest.approx(p_ref, abs=1e-12)


def test_identity_pairing(ex1):
    box = MIXED
    est = modulus_estimate(ex1, ["x3"], ["x3"], box, S)
    assert np.all(est.rho <= S * (1 + 1e-12))
    assert est.exponent == pytest.approx(1.0, abs=0.02)


def test_pure_grid_identity_is_a_staircase(ex1):
    h = 2 / 4000
    est = modulus_estimate(ex1, ["x3"], ["x3"], SampleBox((-1,) * 3, (1,) * 3, (1, 1, 4001)), S)
    assert np.allclose(est.rho, h * np.floor(S / h + 1e-9), atol=1e-12)


def test_constant_map(ex1):
    est = modulus_estimate(ex1, "2", ["x3"], SampleBox.cube(-1, 1, 3, 5), S)
    assert np.all(est.rho == 0)


def test_monotone_in_s(ex2, rng):
    box = SampleBox((-1, -1, -1), (1, 1, 1), (7, 7, 7), n_random=300, seed=1)
    est = modulus_estimate(ex2, "3*x3^2*x1", ["x1", "x2", "x3^3*x1"], box, S)
    assert np.all(np.diff(est.rho) >= 0)


def test_example2_factorisation_modulus_shrinks(ex2):
    # g_3 factors through H_3 on this box, so rho(s) -> 0 as s -> 0
    box = SampleBox((-1, -1, 0.5), (1, 1, 1.5), (9, 9, 9), n_random=1500, seed=2, exclude=(Tube((0, 1), 0.3),))
    est = modulus_estimate(ex2, "3*x3^2*x1", ["x1", "x2", "x3^3*x1"], box, S)
    assert est.rho[0] < 0.05 * est.rho[-1]
    assert est.exponent > 0.5


def test_grid_validation(ex1):
    with pytest.raises(ValueError):
        modulus_estimate(ex1, "x1", ["x1"], SampleBox.cube(-1, 1, 3, 3), [0.1, 0.05])
