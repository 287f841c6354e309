"""Mutation models: closed forms, spectral exponentials, caching, properties."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from coalpgs.errors import ConfigError, InvariantError
from coalpgs.mutation import (MutationModel, make_binary_model, make_stepwise_model,
                              transition_matrix)


def _taylor_expm(A, terms=60):
    """Plain power-series matrix exponential; independent reference."""
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def test_binary_model_definition():
    m = make_binary_model()
    assert np.allclose(m.rate_matrix, [[-0.5, 0.5], [0.5, -0.5]])
    assert np.allclose(m.equilibrium, [0.5, 0.5])
    assert np.allclose(m.equilibrium @ m.rate_matrix, 0.0)


def test_binary_closed_form():
    m = make_binary_model()
    for tau in (0.01, 0.3, 1.0, 4.7, 25.0):
        e = np.exp(-tau)
        want = np.array([[(1 + e) / 2, (1 - e) / 2], [(1 - e) / 2, (1 + e) / 2]])
        got = m.trans(1.0, tau)
        assert np.max(np.abs(got - want)) < 1e-12


def test_trans_matches_taylor_series():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = make_stepwise_model(int(rng.integers(2, 8)))
        theta = float(rng.uniform(0.1, 3.0))
        dt = float(rng.uniform(0.0, 2.0))
        want = _taylor_expm(theta * dt * m.rate_matrix)
        assert np.max(np.abs(m.trans(theta, dt) - want)) < 1e-12


def test_trans_identity_at_zero_and_negative_dt():
    m = make_binary_model()
    assert np.array_equal(m.trans(2.0, 0.0), np.eye(2))
    with pytest.raises(InvariantError):
        m.trans(2.0, -0.1)


def test_transition_matrix_wrapper():
    m = make_binary_model()
    tm = transition_matrix(m, 3.0, 0.5)
    assert tm.branch_length == pytest.approx(1.5)
    assert np.allclose(tm.matrix.sum(axis=1), 1.0, atol=1e-10)
    with pytest.raises(ConfigError):
        transition_matrix(m, 0.0, 0.5)
    with pytest.raises(InvariantError):
        transition_matrix(m, 1.0, -1.0)


def test_trans_cache_quantization():
    m = make_binary_model()
    a = m.trans(1.0, 0.5)
    b = m.trans(1.0, 0.5 * (1 + 1e-14))  # same key after 12-digit quantization
    assert a is b
    c = m.trans(1.0, 0.5001)
    assert c is not a


def test_stepwise_structure():
    m = make_stepwise_model(20)
    R = m.rate_matrix
    assert R.shape == (20, 20)
    assert np.allclose(R.sum(axis=1), 0.0, atol=1e-12)
    assert R[0, 1] == 1.0 and R[19, 18] == 1.0
    for k in range(1, 19):
        assert R[k, k - 1] == 0.5 and R[k, k + 1] == 0.5
    # tridiagonal: nothing beyond the first off-diagonals
    assert np.count_nonzero(R - np.diag(np.diag(R))
                            - np.diag(np.diag(R, 1), 1)
                            - np.diag(np.diag(R, -1), -1)) == 0


def test_stepwise_two_states_matches_symmetric_pair():
    m = make_stepwise_model(2)
    assert np.allclose(m.rate_matrix, [[-1.0, 1.0], [1.0, -1.0]])
    assert np.allclose(m.equilibrium, [0.5, 0.5])


def test_stepwise_equilibrium_vs_long_time_limit():
    for K in (3, 5, 20):
        m = make_stepwise_model(K)
        # horizon scaled to the walk's relaxation time (gap shrinks like 1/K^2)
        limit = scipy.linalg.expm(30.0 * K ** 2 * m.rate_matrix)
        assert np.max(np.abs(limit - m.equilibrium[None, :])) < 1e-9
        # closed form: boundary mass half the interior mass
        want = np.ones(K)
        want[0] = want[-1] = 0.5
        assert np.allclose(m.equilibrium, want / want.sum(), atol=1e-12)


def test_stepwise_needs_two_states():
    with pytest.raises(ConfigError):
        make_stepwise_model(1)


def test_model_validation_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        MutationModel(2, np.array([[-1.0, 0.5], [0.5, -0.5]]), np.array([0.5, 0.5]))
    with pytest.raises(ConfigError):
        MutationModel(2, np.array([[-0.5, 0.5], [0.5, -0.5]]), np.array([0.9, 0.1]))
    with pytest.raises(ConfigError):
        MutationModel(2, np.array([[0.5, -0.5], [-0.5, 0.5]]), np.array([0.5, 0.5]))


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0.05, 10.0), a=st.floats(0.0, 20.0), b=st.floats(0.0, 20.0),
       K=st.integers(2, 10))
def test_semigroup_property(theta, a, b, K):
    m = make_stepwise_model(K)
    lhs = m.trans(theta, a + b)
    rhs = m.trans(theta, a) @ m.trans(theta, b)
    assert np.max(np.abs(lhs - rhs)) < 1e-8


@settings(max_examples=60, deadline=None)
@given(theta=st.floats(0.05, 10.0), dt=st.floats(0.0, 50.0), K=st.integers(2, 10))
def test_equilibrium_preserved(theta, dt, K):
    m = make_stepwise_model(K)
    T = m.trans(theta, dt)
    assert np.max(np.abs(m.equilibrium @ T - m.equilibrium)) < 1e-9
    assert np.all(T >= 0)
    assert np.max(np.abs(T.sum(axis=1) - 1.0)) < 1e-10


def test_long_time_convergence_to_equilibrium():
    m = make_binary_model()
    T = m.trans(1.0, 1000.0)
    assert np.max(np.abs(T - m.equilibrium[None, :])) < 1e-6


def test_trans_batch_matches_scalar():
    rng = np.random.default_rng(4)
    for K in (2, 6):
        m = make_stepwise_model(K)
        dts = rng.uniform(0.0, 5.0, size=17)
        batch = m.trans_batch(2.3, dts)
        for g, dt in enumerate(dts):
            assert np.max(np.abs(batch[g] - m.trans(2.3, dt))) < 1e-12


def test_fold_batch_matches_materialized_matrices():
    rng = np.random.default_rng(5)
    for K in (2, 7):
        m = make_stepwise_model(K)
        dts = rng.uniform(0.01, 4.0, size=9)
        lin = rng.uniform(0.0, 2.0, size=(3, K))
        T = m.trans_batch(1.7, dts)
        up = m.fold_to_parent_batch(1.7, dts, lin)
        down = m.fold_to_child_batch(1.7, dts, lin)
        assert np.max(np.abs(up - np.einsum("gyc,lc->gly", T, lin))) < 1e-12
        assert np.max(np.abs(down - np.einsum("lo,goy->gly", lin, T))) < 1e-12
