"""Particle Gibbs sampling for Kingman's n-coalescent.

Posterior sampling of genealogies (tree structure + coalescent times) given
aligned sequence data, alternating exact Gibbs updates of event times with
conditional-SMC updates of the tree structure, plus a relative-likelihood
surface estimator for the genetic parameter theta.
"""

from .config import RunConfig
from .genealogy import Alignment, Genealogy, log_prior, simulate_prior, simulate_data
from .mutation import MutationModel, make_binary_model, make_stepwise_model, transition_matrix
from .belief import MessageStore, log_likelihood
from .timegibbs import gibbs_sweep, sample_time, conditional_bounds
from .csmc import csmc_run, select_structure, ParticleSet
from .pgs import pgs_run, relative_likelihood_surface, diagnostics, SurfaceEstimate

__all__ = [
    "RunConfig", "Alignment", "Genealogy", "log_prior", "simulate_prior",
    "simulate_data", "MutationModel", "make_binary_model", "make_stepwise_model",
    "transition_matrix", "MessageStore", "log_likelihood", "gibbs_sweep",
    "sample_time", "conditional_bounds", "csmc_run", "select_structure",
    "ParticleSet", "pgs_run", "relative_likelihood_surface", "diagnostics",
    "SurfaceEstimate",
]

__version__ = "0.1.0"
