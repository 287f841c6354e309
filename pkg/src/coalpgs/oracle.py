"""Independent reference computations for small problems.

These deliberately avoid the message-passing machinery: likelihoods come from
exhaustive summation over hidden ancestral states, structure posteriors from
explicit enumeration of all ordered pairing histories, and theta surfaces from
tensor-grid quadrature over coalescent times.  They back the test suite and
the `oracle-check` CLI subcommand.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .genealogy import Alignment, Genealogy
from .mutation import MutationModel
from .util import binom2

MAX_BRUTE_ASSIGNMENTS = 10 ** 6
MAX_ENUMERATION_LEAVES = 6
# truncation points keep the ignored exponential prior tail below 1e-12
PRIOR_TAIL_LOG = 27.7


@dataclass
class EnumerationResult:
    """All ordered pairing histories for n leaves, with optional values."""

    structures: list  # each an event list [(a, b), ...]
    values: np.ndarray | None = None


def enumerate_structures(n: int) -> EnumerationResult:
    """Every ordered sequence of pairing events, each history exactly once."""
    if n > MAX_ENUMERATION_LEAVES:
        raise ConfigError(f"refusing to enumerate structures for n={n}")
    out = []

    def recurse(live, step, prefix):
        if len(live) == 1:
            out.append(list(prefix))
            return
        for a, b in itertools.combinations(sorted(live), 2):
            nxt = (live - {a, b}) | {n + step - 1}
            recurse(nxt, step + 1, prefix + [(a, b)])

    recurse(frozenset(range(n)), 1, [])
    expected = math.factorial(n) * math.factorial(n - 1) // 2 ** (n - 1)
    assert len(out) == expected
    return EnumerationResult(out)


def brute_force_likelihood(genealogy: Genealogy, alignment: Alignment,
                           model: MutationModel, theta: float) -> float:
    """p_theta(X | G) by summing over every hidden-state assignment."""
    n = genealogy.n
    K = model.num_states
    if K ** (n - 1) > MAX_BRUTE_ASSIGNMENTS:
        raise ConfigError("brute-force guard exceeded")
    edges = []
    for u in range(2 * n - 2):
        p = genealogy.parent(u)
        T = model.trans(theta, genealogy.node_time(u) - genealogy.node_time(p))
        edges.append((p, u, T))
    total = 1.0
    root = genealogy.root
    for l in range(alignment.num_loci):
        obs = alignment.data[:, l]
        locus = 0.0
        for hidden in itertools.product(range(K), repeat=n - 1):
            def state(u):
                return obs[u] if u < n else hidden[u - n]
            term = model.equilibrium[state(root)]
            for p, u, T in edges:
                term *= T[state(p), state(u)]
            locus += term
        total *= locus
    return total


def structure_posterior_given_times(alignment: Alignment, model: MutationModel,
                                    theta: float, times: np.ndarray):
    """p(S | X, T) over all enumerated structures (prior is flat over S)."""
    enum = enumerate_structures(alignment.n)
    liks = np.array([
        brute_force_likelihood(Genealogy(alignment.n, ev, times), alignment, model, theta)
        for ev in enum.structures
    ])
    enum.values = liks / liks.sum()
    return enum


# -- quadrature over times (n = 2 or 3) -------------------------------------

def _pair_likelihood_curve(x1, x2, model, theta, deltas):
    """Per-locus-product likelihood of two leaves joined at depth delta."""
    T = model.trans_batch(theta, deltas)
    out = np.ones(len(deltas))
    for a, b in zip(x1, x2):
        out *= (model.equilibrium[None, :] * T[:, :, a] * T[:, :, b]).sum(axis=1)
    return out


def _three_leaf_likelihood_grid(xa, xb, xc, model, theta, d1, d2):
    """Likelihood of ((a,b),c) on the tensor grid d1 x d2 of waiting times."""
    G1, G2 = len(d1), len(d2)
    T1 = model.trans_batch(theta, d1)
    T2 = model.trans_batch(theta, d2)
    T12 = model.trans_batch(theta, (d1[:, None] + d2[None, :]).ravel())
    T12 = T12.reshape(G1, G2, model.num_states, model.num_states)
    out = np.ones((G1, G2))
    for a, b, c in zip(xa, xb, xc):
        P = T1[:, :, a] * T1[:, :, b]                       # (G1, y1)
        inner = np.einsum("hij,gj->ghi", T2, P)             # (G1, G2, y2)
        out *= (inner * model.equilibrium[None, None, :] * T12[:, :, :, c]).sum(axis=2)
    return out


def quadrature_likelihood(alignment: Alignment, model: MutationModel, theta: float,
                          rel_tol: float = 1e-6) -> float:
    """L(theta) = integral of p(X, G) over times (and structures for n=3),
    by trapezoid grids refined until successive estimates agree to rel_tol."""
    n = alignment.n
    if n == 2:
        return _quadrature_n2(alignment, model, theta, rel_tol)
    if n == 3:
        return float(_quadrature_n3(alignment, model, theta, rel_tol).sum())
    raise ConfigError("quadrature oracle supports n in {2, 3} only")


def _quadrature_n2(alignment, model, theta, rel_tol):
    upper = PRIOR_TAIL_LOG  # rate-1 prior tail below 1e-12
    prev = None
    pts = 1025
    while True:
        d = np.linspace(0.0, upper, pts)
        f = np.exp(-d) * _pair_likelihood_curve(alignment.data[0], alignment.data[1],
                                                model, theta, d)
        est = float(np.trapezoid(f, d))
        if prev is not None and abs(est - prev) <= rel_tol * abs(est):
            return est
        if pts > 2 ** 20:
            return est
        prev = est
        pts = 2 * (pts - 1) + 1


def _quadrature_n3(alignment, model, theta, rel_tol):
    """Per-structure integrals of p(X, G) for n=3; ordering matches
    enumerate_structures(3)."""
    enum = enumerate_structures(3)
    upper1 = PRIOR_TAIL_LOG / 3.0  # delta_1 has prior rate C(3,2) = 3
    upper2 = PRIOR_TAIL_LOG
    prev = None
    pts = 129
    while True:
        d1 = np.linspace(0.0, upper1, pts)
        d2 = np.linspace(0.0, upper2, pts)
        prior = np.exp(-3.0 * d1)[:, None] * np.exp(-d2)[None, :]
        ests = []
        for (a, b) in (ev[0] for ev in enum.structures):
            c = ({0, 1, 2} - {a, b}).pop()
            lik = _three_leaf_likelihood_grid(alignment.data[a], alignment.data[b],
                                              alignment.data[c], model, theta, d1, d2)
            ests.append(np.trapezoid(np.trapezoid(prior * lik, d2, axis=1), d1))
        ests = np.array(ests)
        total = ests.sum()
        if prev is not None and abs(total - prev) <= rel_tol * abs(total):
            return ests
        if pts > 2049:
            return ests
        prev = total
        pts = 2 * (pts - 1) + 1


def structure_posterior(alignment: Alignment, model: MutationModel, theta: float,
                        rel_tol: float = 1e-6) -> EnumerationResult:
    """p(S | X) for n=3, times integrated out by quadrature."""
    ests = _quadrature_n3(alignment, model, theta, rel_tol)
    enum = enumerate_structures(3)
    enum.values = ests / ests.sum()
    return enum


def root_height_density(alignment: Alignment, model: MutationModel, theta: float,
                        heights: np.ndarray, inner_points: int = 257) -> np.ndarray:
    """Unnormalized posterior density of the tree height (|t_2|) for n=3:
    p(h) = e^{-h} * sum_S int_0^h e^{-2 d1} lik_S(d1, h - d1) d d1."""
    enum = enumerate_structures(3)
    out = np.zeros(len(heights))
    for (a, b) in (ev[0] for ev in enum.structures):
        c = ({0, 1, 2} - {a, b}).pop()
        for j, h in enumerate(heights):
            if h <= 0:
                continue
            d1 = np.linspace(0.0, h, inner_points)
            d2 = h - d1
            T1 = model.trans_batch(theta, d1)
            T2 = model.trans_batch(theta, d2)
            Th = model.trans(theta, h)
            lik = np.ones(inner_points)
            for xa, xb, xc in zip(alignment.data[a], alignment.data[b], alignment.data[c]):
                P = T1[:, :, xa] * T1[:, :, xb]                 # (g, y1)
                inner = np.einsum("gij,gj->gi", T2, P)          # (g, y2)
                lik *= (inner * model.equilibrium[None, :] * Th[None, :, xc]).sum(axis=1)
            out[j] += np.exp(-h) * np.trapezoid(np.exp(-2.0 * d1) * lik, d1)
    return out
