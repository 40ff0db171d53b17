import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from triobs.canonform import (
    MCSHANE,
    NEAREST,
    InconsistentSamples,
    SampledFunction,
    check_consistency,
    mcshane_extend,
    nearest_extend,
)


def test_two_point_extension():
    f = mcshane_extend([[0.0], [1.0]], [0.0, 1.0], 1.0)
    assert f(np.array([2.0]))[0] == 2.0
    assert f(np.array([0.5]))[0] == 0.5


def test_single_sample_cone():
    f = mcshane_extend([[0.0]], [0.0], 3.0)
    for z in (-2.0, -0.1, 0.0, 0.7):
        assert f(np.array([z]))[0] == pytest.approx(3 * abs(z))


def test_inconsistent_samples_rejected():
    with pytest.raises(InconsistentSamples):
        mcshane_extend([[0.0], [1.0]], [0.0, 5.0], 1.0)
    with pytest.raises(ValueError):
        mcshane_extend([[0.0]], [0.0], -1.0)


def test_nearest_mode():
    f = nearest_extend([[0.0], [1.0]], [10.0, 20.0])
    assert f.mode == NEAREST and not f.lipschitz
    assert f(np.array([0.4]))[0] == 10.0
    assert f(np.array([0.6]))[0] == 20.0


def test_batch_and_single_shapes():
    f = mcshane_extend(np.eye(3), np.arange(6.0).reshape(3, 2), 10.0)
    assert f(np.zeros(3)).shape == (2,)
    assert f(np.zeros((4, 3))).shape == (4, 2)


def test_dict_round_trip_is_exact(rng):
    Z = rng.normal(size=(30, 2))
    V = np.sin(Z[:, :1])
    f = mcshane_extend(Z, V, 2.0, name="t")
    g = SampledFunction.from_dict(f.to_dict())
    Q = rng.normal(size=(20, 2))
    assert np.array_equal(f(Q), g(Q))
    assert g.mode == MCSHANE and g.name == "t"


tables = st.integers(2, 25).flatmap(
    lambda N: st.tuples(
        hnp.arrays(np.float64, (N, 2), elements=st.floats(-5, 5)),
        hnp.arrays(np.float64, (N, 1), elements=st.floats(-5, 5)),
    )
)


@settings(max_examples=30)
@given(tables, st.floats(0.1, 10))
def test_extension_is_lipschitz_on_random_pairs(table, L_raw):
    Z, V = table
    # make the table consistent by taking L at least the sample ratio
    dz = np.linalg.norm(Z[:, None] - Z[None], axis=-1)
    dv = np.abs(V[:, None, 0] - V[None, :, 0])
    dup = (dz == 0) & (dv > 0)
    if dup.any():
        return
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.nanmax(np.where(dz > 0, dv / dz, 0.0))
    L = max(L_raw, need * (1 + 1e-9))
    f = mcshane_extend(Z, V, L)
    rng = np.random.default_rng(7)
    A = rng.uniform(-7, 7, (10_000, 2))
    B = A + rng.normal(scale=rng.choice([1e-3, 0.1, 3.0], size=(10_000, 1)), size=(10_000, 2))
    fa, fb = f(A)[:, 0], f(B)[:, 0]
    slack = 1e-12 * (1 + np.abs(fa) + np.abs(fb))
    assert np.all(np.abs(fa - fb) <= L * np.linalg.norm(A - B, axis=1) + slack)
    # exact at the samples
    assert np.allclose(f(Z)[:, 0], V[:, 0], rtol=0, atol=1e-12 * (1 + np.abs(V).max()))


def test_consistency_check_reports_pair():
    with pytest.raises(InconsistentSamples) as info:
        check_consistency([[0.0], [1.0], [3.0]], [[0.0], [0.5], [10.0]], 1.0)
    assert set(info.value.pair) == {1, 2}
    assert info.value.excess == pytest.approx(7.5)
