"""The oracles themselves: enumeration counts, quadrature self-consistency."""

import math

import numpy as np
import pytest

from coalpgs import genealogy as gn, oracle
from coalpgs.errors import ConfigError
from coalpgs.mutation import make_binary_model, make_stepwise_model


@pytest.mark.parametrize("n,count", [(2, 1), (3, 3), (4, 18), (5, 180), (6, 2700)])
def test_enumeration_counts(n, count):
    enum = oracle.enumerate_structures(n)
    assert len(enum.structures) == count
    assert count == math.factorial(n) * math.factorial(n - 1) // 2 ** (n - 1)
    # histories are distinct
    assert len({tuple(s) for s in enum.structures}) == count


def test_enumeration_guard():
    with pytest.raises(ConfigError):
        oracle.enumerate_structures(7)


def test_brute_force_guard():
    g = gn.Genealogy(6, [(0, 1), (2, 3), (4, 6), (5, 7), (8, 9)],
                     np.array([-0.1, -0.2, -0.3, -0.4, -0.5]))
    aln = gn.Alignment(np.zeros((6, 1), dtype=int))
    with pytest.raises(ConfigError):
        oracle.brute_force_likelihood(g, aln, make_stepwise_model(20), 1.0)


def test_brute_force_two_leaves_closed_form():
    # identical binary pair at depth d: p = (1 + e^{-2 theta d}) / 4
    model = make_binary_model()
    for theta, d in [(1.0, 0.5), (3.0, 1.2)]:
        g = gn.Genealogy(2, [(0, 1)], np.array([-d]))
        aln = gn.Alignment(np.array([[0], [0]]))
        got = oracle.brute_force_likelihood(g, aln, model, theta)
        assert got == pytest.approx((1 + np.exp(-2 * theta * d)) / 4, rel=1e-12)


def test_quadrature_n2_closed_form():
    # L(theta) for identical binary pair: (1 + 1/(1+2 theta)) / 4
    model = make_binary_model()
    aln = gn.Alignment(np.array([[0], [0]]))
    for theta in (0.2, 1.0, 5.0):
        got = oracle.quadrature_likelihood(aln, model, theta)
        want = (1 + 1 / (1 + 2 * theta)) / 4
        assert got == pytest.approx(want, rel=1e-5)


def test_quadrature_n3_vs_monte_carlo():
    model = make_binary_model()
    aln = gn.Alignment(np.array([[0], [0], [1]]))
    theta = 1.5
    quad = oracle.quadrature_likelihood(aln, model, theta)
    # independent check: average p(X | S, T) over prior draws of (S, T)
    rng = np.random.default_rng(0)
    N = 200000
    d1 = rng.exponential(1.0 / 3.0, size=N)
    d2 = rng.exponential(1.0, size=N)
    structs = rng.integers(0, 3, size=N)
    total = np.zeros(N)
    enum = oracle.enumerate_structures(3)
    for s, ev in enumerate(enum.structures):
        mask = structs == s
        (a, b) = ev[0]
        c = ({0, 1, 2} - {a, b}).pop()
        T1 = model.trans_batch(theta, d1[mask])
        T2 = model.trans_batch(theta, d2[mask])
        T12 = model.trans_batch(theta, d1[mask] + d2[mask])
        xa, xb, xc = aln.data[a, 0], aln.data[b, 0], aln.data[c, 0]
        P = T1[:, :, xa] * T1[:, :, xb]
        inner = np.einsum("gij,gj->gi", T2, P)
        total[mask] = (inner * model.equilibrium[None, :] * T12[:, :, xc]).sum(axis=1)
    mc = total.mean()  # E_{S,T~prior}[p(X|S,T)] = L(theta)
    se = total.std(ddof=1) / np.sqrt(N)
    assert abs(mc - quad) < 4 * se


def test_structure_posterior_given_times_normalized():
    model = make_binary_model()
    aln = gn.Alignment(np.array([[0], [0], [1], [1]]))
    times = np.array([-0.3, -0.7, -1.5])
    enum = oracle.structure_posterior_given_times(aln, model, 2.0, times)
    assert enum.values.sum() == pytest.approx(1.0)
    assert np.all(enum.values >= 0)


def test_structure_posterior_favors_identical_pair():
    model = make_binary_model()
    aln = gn.Alignment(np.array([[0], [0], [1]]))
    post = oracle.structure_posterior(aln, model, 1.5)
    idx = post.structures.index([(0, 1), (2, 3)])
    assert post.values[idx] == post.values.max()
    assert post.values.sum() == pytest.approx(1.0)


def test_quadrature_rejects_large_n():
    aln = gn.Alignment(np.zeros((4, 1), dtype=int))
    with pytest.raises(ConfigError):
        oracle.quadrature_likelihood(aln, make_binary_model(), 1.0)


def test_root_height_density_integrates_to_marginal():
    # integral over height of the joint-height density equals L(theta)
    model = make_binary_model()
    aln = gn.Alignment(np.array([[0], [0], [1]]))
    theta = 1.5
    hs = np.linspace(1e-6, 28.0, 2001)
    dens = oracle.root_height_density(aln, model, theta, hs)
    assert np.all(dens >= 0)
    total = np.trapezoid(dens, hs)
    assert total == pytest.approx(oracle.quadrature_likelihood(aln, model, theta),
                                  rel=1e-3)
