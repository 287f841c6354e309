"""Shared helpers for the test suite."""

import numpy as np
import pytest

from coalpgs import genealogy as gn
from coalpgs import mutation as mu


def random_model(rng, k_max=4):
    K = int(rng.integers(2, k_max + 1))
    if K == 2 and rng.random() < 0.5:
        return mu.make_binary_model()
    return mu.make_stepwise_model(K)


def random_instance(rng, n_max=5, k_max=4, l_max=2):
    """A random (genealogy, alignment, model, theta) problem instance."""
    n = int(rng.integers(2, n_max + 1))
    model = random_model(rng, k_max)
    g = gn.simulate_prior(n, rng)
    L = int(rng.integers(1, l_max + 1))
    aln = gn.Alignment(rng.integers(0, model.num_states, size=(n, L)))
    theta = float(rng.uniform(0.1, 10.0))
    return g, aln, model, theta


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
