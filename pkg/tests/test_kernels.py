import importlib.util
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from triobs import _kernels as K

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba backend not active")

coords = st.floats(-3, 3, allow_subnormal=False)


def tables(max_n=40, dims=(1, 3)):
    return st.tuples(st.integers(2, max_n), st.integers(*dims), st.integers(1, 2)).flatmap(
        lambda t: st.tuples(
            hnp.arrays(np.float64, (t[0], t[1]), elements=coords),
            hnp.arrays(np.float64, (t[0], t[2]), elements=coords),
        )
    )


def with_ties(Z, V):
    # duplicate rows guarantee equal pair scores, exercising tie breaking
    return np.concatenate([Z, Z[:2]]), np.concatenate([V, V[:2]])


@needs_numba
@settings(max_examples=60)
@given(tables(), st.sampled_from([0.0, 1e-4, 0.5]))
def test_pair_ratio_max_backends_agree(tab, min_sep):
    Z, V = with_ties(*tab)
    assert K.pair_ratio_max_numpy(Z, Z, V, min_sep) == K.pair_ratio_max_numba(Z, Z, V, min_sep)


@needs_numba
@settings(max_examples=60)
@given(tables(), st.floats(0, 10), hnp.arrays(np.float64, (7, 3), elements=coords))
def test_mcshane_envelope_backends_agree(tab, L, Q):
    Z, V = tab
    Q = Q[:, : Z.shape[1]]
    up_a, lo_a = K.mcshane_envelope_numpy(Z, V, L, Q)
    up_b, lo_b = K.mcshane_envelope_numba(Z, V, L, Q)
    assert np.array_equal(up_a, up_b) and np.array_equal(lo_a, lo_b)


@needs_numba
@settings(max_examples=60)
@given(tables(), st.floats(0, 10))
def test_consistency_excess_backends_agree(tab, L):
    Z, V = with_ties(*tab)
    assert K.consistency_excess_numpy(Z, V, L) == K.consistency_excess_numba(Z, V, L)


@needs_numba
@settings(max_examples=60)
@given(tables())
def test_modulus_bins_backends_agree(tab):
    G, P = tab
    s = np.logspace(-3, 1, 9)
    assert np.array_equal(K.modulus_bins_numpy(G, P, s), K.modulus_bins_numba(G, P, s))


def test_pair_ratio_first_pair_wins():
    Z = np.array([[0.0], [1.0], [2.0]])
    V = np.array([[0.0], [1.0], [2.0]])
    best, i, j = K.pair_ratio_max_numpy(Z, Z, V, 0.0)
    assert (best, i, j) == (1.0, 0, 1)
    if K.HAVE_NUMBA:
        assert K.pair_ratio_max_numba(Z, Z, V, 0.0) == (1.0, 0, 1)


def test_pair_ratio_respects_separation():
    Z = np.array([[0.0], [1e-6], [1.0]])
    V = np.array([[0.0], [1.0], [0.5]])
    best, i, j = K.pair_ratio_max(Z, Z, V, 1e-4)
    assert (i, j) == (1, 2) and best == pytest.approx(0.5 / (1 - 1e-6))


def test_envelope_two_points():
    up, lo = K.mcshane_envelope([[0.0], [1.0]], [[0.0], [1.0]], 1.0, [[2.0], [0.5]])
    assert up[:, 0].tolist() == [2.0, 0.5] and lo[:, 0].tolist() == [0.0, 0.5]


def test_modulus_bins_brute_force(rng):
    G, P = rng.normal(size=(60, 2)), rng.normal(size=(60, 1))
    s = np.array([0.1, 0.5, 1.0, 5.0])
    dg = np.linalg.norm(G[:, None] - G[None], axis=-1)
    dp = np.abs(P[:, None, 0] - P[None, :, 0])
    ref = [dp[dg <= v].max() for v in s]
    assert np.allclose(K.modulus_bins(G, P, s), ref)


def test_env_flag_selects_numpy():
    code = "from triobs import _kernels as K; print(K.backend(), K.pair_ratio_max is K.pair_ratio_max_numpy)"
    env = dict(os.environ, TRIOBS_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
    env["TRIOBS_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    numba_installed = importlib.util.find_spec("numba") is not None
    assert out.stdout.split()[0] == ("numba" if numba_installed else "numpy")
