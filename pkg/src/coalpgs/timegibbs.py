"""Gibbs sampling of coalescent event times from their full conditionals.

Each conditional is a truncated product of exponential prior terms and a
matrix-exponential-dependent data factor, so there is no standard sampler for
it.  Times are drawn by grid-based inverse-CDF sampling: evaluate the log
density on a uniform grid, build a piecewise-linear CDF, invert it.  The grid
doubles (up to a cap) when the mass concentrates in fewer than a handful of
cells.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .belief import MessageStore
from .errors import InvariantError
from .genealogy import Genealogy
from .mutation import MutationModel
from .util import binom2

log = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 256
MAX_GRID_POINTS = 2048
MIN_SUPPORT_CELLS = 4
DEGENERATE_WIDTH = 1e-14
# truncation of the root's unbounded interval: prior tail mass < 1e-12
ROOT_TAIL_LOG = 27.7


@dataclass
class TimeConditional:
    """Full conditional of one event time: support plus vectorized log density."""

    event_index: int
    lower: float  # -inf for the root
    upper: float
    log_density: callable

    @property
    def sampling_lower(self) -> float:
        if np.isfinite(self.lower):
            return self.lower
        return self.upper - ROOT_TAIL_LOG  # root prior rate is C(2,2) = 1


def conditional_bounds(genealogy: Genealogy, i: int) -> tuple:
    """Support of t_i: event-order neighbors and adjacent tree nodes jointly."""
    g = genealogy
    n = g.n
    node = n + i - 1
    cl, cr = g.children(node)
    upper = min(0.0 if i == 1 else g.times[i - 2], g.node_time(cl), g.node_time(cr))
    if node == g.root:
        lower = -np.inf
    else:
        lower = g.times[i] if i <= n - 2 else -np.inf
        lower = max(lower, g.node_time(g.parent(node)))
    if not lower < upper:
        raise InvariantError(f"empty conditional interval for event {i}")
    return lower, upper


def time_conditional(genealogy: Genealogy, store: MessageStore, i: int,
                     model: MutationModel, theta: float) -> TimeConditional:
    g = genealogy
    n = g.n
    lower, upper = conditional_bounds(g, i)
    rate_cur = binom2(n - i + 1)
    rate_next = binom2(n - i) if i <= n - 2 else 0.0
    t_prev = 0.0 if i == 1 else float(g.times[i - 2])
    t_next = float(g.times[i]) if i <= n - 2 else 0.0

    def log_density(ts):
        ts = np.asarray(ts, dtype=float)
        prior = -rate_cur * (t_prev - ts)
        if rate_next:
            prior = prior - rate_next * (ts - t_next)
        return prior + store.local_combination_vs_time(i, ts)

    return TimeConditional(i, lower, upper, log_density)


def _resolve_grid(cond: TimeConditional, initial_points: int, max_points: int):
    """Grid nodes and normalized trapezoid cell masses, doubling resolution
    while the density is concentrated in fewer than MIN_SUPPORT_CELLS cells."""
    pts = initial_points
    lo, hi = cond.sampling_lower, cond.upper
    while True:
        xs = np.linspace(lo, hi, pts + 1)
        logf = cond.log_density(xs)
        shift = np.max(logf)
        if not np.isfinite(shift):
            # flat fallback: data factor underflowed everywhere
            return xs, np.full(pts, 1.0 / pts)
        f = np.exp(logf - shift)
        cells = 0.5 * (f[:-1] + f[1:])
        total = cells.sum()
        if total <= 0:
            return xs, np.full(pts, 1.0 / pts)
        w = cells / total
        covered = np.searchsorted(np.cumsum(np.sort(w)[::-1]), 0.99) + 1
        if covered >= MIN_SUPPORT_CELLS or pts >= max_points:
            return xs, w
        pts *= 2


def sample_conditional(cond: TimeConditional, rng: np.random.Generator,
                       grid_points: int = DEFAULT_GRID_POINTS,
                       size: int | None = None):
    """Inverse-CDF draw(s) from the conditional on its resolved grid."""
    xs, w = _resolve_grid(cond, grid_points, MAX_GRID_POINTS)
    cdf = np.concatenate(([0.0], np.cumsum(w)))
    cdf[-1] = 1.0
    u = rng.random() if size is None else rng.random(size)
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(w) - 1)
    frac = (u - cdf[j]) / np.where(w[j] > 0, w[j], 1.0)
    out = xs[j] + np.clip(frac, 0.0, 1.0) * (xs[j + 1] - xs[j])
    return float(out) if size is None else out


def sample_time(genealogy: Genealogy, store: MessageStore, i: int,
                model: MutationModel, theta: float, rng: np.random.Generator,
                grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Resample t_i from its full conditional, commit it, refresh messages."""
    cond = time_conditional(genealogy, store, i, model, theta)
    if cond.upper - cond.sampling_lower < DEGENERATE_WIDTH:
        log.warning("degenerate conditional interval for event %d; keeping value", i)
        return float(genealogy.times[i - 1])
    t_new = sample_conditional(cond, rng, grid_points)
    genealogy.times[i - 1] = t_new
    store.refresh_after_time_change(i)
    return t_new


def gibbs_sweep(genealogy: Genealogy, store: MessageStore, model: MutationModel,
                theta: float, rounds: int, rng: np.random.Generator,
                grid_points: int = DEFAULT_GRID_POINTS) -> Genealogy:
    """`rounds` full passes of single-site time updates in ascending event order."""
    for _ in range(rounds):
        for i in range(1, genealogy.n):
            sample_time(genealogy, store, i, model, theta, rng, grid_points)
    return genealogy
