"""Conditional SMC over tree structures at fixed coalescent times.

At each event the proposal over which pair coalesces is the local posterior:
the normalizer of the upward message the hypothetical merged node would emit.
The structure from the previous outer iteration is deterministically replayed
as particle 0 and survives every resampling step, which is what makes the
outer Gibbs chain leave the exact posterior invariant.

Determinism contract: all randomness is drawn from substreams keyed by
(seed, step[, purpose]); pair choices for particles 1..M-1 come from one
uniform vector per step, so permuting those particles together with their
uniforms permutes the output particles identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SequencingError
from .genealogy import Alignment, Genealogy
from .belief import leaf_log_messages
from .mutation import MutationModel
from .util import logsumexp, substream, TAG_CSMC_PROPOSAL, TAG_CSMC_RESAMPLE


@dataclass
class OpCounters:
    """Work counters backing the complexity diagnostics."""

    pair_weight_evals: int = 0
    lineage_evals: int = 0

    def merge(self, other: "OpCounters") -> None:
        self.pair_weight_evals += other.pair_weight_evals
        self.lineage_evals += other.lineage_evals


@dataclass
class Lineage:
    """One live partial-tree root: node id, its time, its upward message."""

    node: int
    time: float
    logm: np.ndarray  # (L, K), normalized so sum_v p0(v) m(v) = 1 per locus


@dataclass
class PartialStructure:
    """A particle: committed events plus the messages of its live lineages."""

    lineages: list
    events: list
    cum_log_weight: float = 0.0
    incr_log_weight: float = 0.0

    def copy(self) -> "PartialStructure":
        # lineages and their arrays are immutable once created: shallow is safe
        return PartialStructure(list(self.lineages), list(self.events),
                                self.cum_log_weight, self.incr_log_weight)


@dataclass
class ParticleSet:
    """Weighted completed structures; particle `reference_index` is the
    retained reference."""

    particles: list
    weights: np.ndarray
    mode: str
    reference_index: int = 0
    counters: OpCounters = field(default_factory=OpCounters)


def _fold_lineages(particle: PartialStructure, t_i: float, model: MutationModel,
                   theta: float, a_cache: dict, counters: OpCounters):
    """Per-lineage folded messages at merge time t_i: exp-shifted linear parts
    plus per-locus log shifts.  Cached across particles that share the same
    message arrays (leaves, and copies made by resampling)."""
    lins, shifts = [], []
    for lin_ref in particle.lineages:
        key = (lin_ref.node, id(lin_ref.logm))
        hit = a_cache.get(key)
        if hit is None:
            T = model.trans(theta, lin_ref.time - t_i)
            shift = np.max(lin_ref.logm, axis=1, keepdims=True)
            shift = np.where(np.isfinite(shift), shift, 0.0)
            folded = np.exp(lin_ref.logm - shift) @ T.T  # (L, K) linear
            hit = (lin_ref.logm, folded, shift[:, 0])
            a_cache[key] = hit
            counters.lineage_evals += 1
        lins.append(hit[1])
        shifts.append(hit[2])
    return np.stack(lins), np.stack(shifts)  # (k, L, K), (k, L)


def pair_weights(particle: PartialStructure, t_i: float, model: MutationModel,
                 theta: float, a_cache: dict | None = None,
                 counters: OpCounters | None = None):
    """Local-posterior weights for every live pair at merge time t_i.

    Returns (pairs, per-locus log-normalizer matrix of shape (n_pairs, L),
    normalized pair probabilities, total log weight w_i)."""
    k = len(particle.lineages)
    if k < 2:
        raise SequencingError("need at least 2 live lineages")
    if a_cache is None:
        a_cache = {}
    if counters is None:
        counters = OpCounters()
    lins, shifts = _fold_lineages(particle, t_i, model, theta, a_cache, counters)
    p0 = model.equilibrium
    Z = np.einsum("aly,y,bly->abl", lins, p0, lins)  # (k, k, L) linear, shifted
    with np.errstate(divide="ignore"):
        logZ = np.log(Z) + shifts[:, None, :] + shifts[None, :, :]
    idx_a, idx_b = np.triu_indices(k, k=1)
    pairs = list(zip(idx_a.tolist(), idx_b.tolist()))
    counters.pair_weight_evals += len(pairs)
    per_locus = logZ[idx_a, idx_b, :]              # (n_pairs, L)
    totals = per_locus.sum(axis=1)
    log_w = float(logsumexp(totals))
    if np.isfinite(log_w):
        probs = np.exp(totals - log_w)
        probs /= probs.sum()
    else:
        probs = np.full(len(pairs), 1.0 / len(pairs))
    return pairs, per_locus, probs, log_w


def _merge(particle: PartialStructure, pair: tuple, per_locus_logz: np.ndarray,
           t_i: float, new_node: int, model: MutationModel, theta: float,
           a_cache: dict, counters: OpCounters) -> PartialStructure:
    """Commit a coalescence: replace the two lineages by their parent, whose
    message is the normalized product of the folded child messages."""
    j, l = pair
    lins, shifts = _fold_lineages(particle, t_i, model, theta, a_cache, counters)
    with np.errstate(divide="ignore"):
        logmu = (np.log(lins[j]) + shifts[j][:, None]
                 + np.log(lins[l]) + shifts[l][:, None])
    logm = logmu - per_locus_logz[:, None]
    a, b = particle.lineages[j], particle.lineages[l]
    lineages = [x for m, x in enumerate(particle.lineages) if m not in (j, l)]
    lineages.append(Lineage(new_node, t_i, logm))
    event = (min(a.node, b.node), max(a.node, b.node))
    return PartialStructure(lineages, particle.events + [event],
                            particle.cum_log_weight, particle.incr_log_weight)


def final_weight(particle: PartialStructure, model: MutationModel, theta: float,
                 t_root: float) -> float:
    """log w_{n-1}: the root combination normalizer over the last two lineages."""
    if len(particle.lineages) != 2:
        raise SequencingError("final weight needs exactly 2 live lineages")
    _, per_locus, _, log_w = pair_weights(particle, t_root, model, theta)
    return log_w


def csmc_run(reference: Genealogy, alignment: Alignment, model: MutationModel,
             theta: float, num_particles: int, mode: str, seed: int,
             counters: OpCounters | None = None,
             times: np.ndarray | None = None) -> ParticleSet:
    """Conditional SMC targeting p(S | X, T) with `reference` retained as
    particle 0.  `times` defaults to the reference's event times."""
    M = int(num_particles)
    if M < 2:
        raise ConfigError("conditional SMC needs at least 2 particles")
    if mode not in ("sis", "smc"):
        raise ConfigError(f"unknown csmc mode {mode!r}")
    if counters is None:
        counters = OpCounters()
    n = reference.n
    if times is None:
        times = reference.times
    times = np.asarray(times, dtype=float)

    logms, _ = leaf_log_messages(alignment, model)
    base = PartialStructure([Lineage(leaf, 0.0, logms[leaf]) for leaf in range(n)], [])
    particles = [base.copy() for _ in range(M)]

    for step in range(1, n):
        t_i = float(times[step - 1])
        if mode == "smc" and step > 1:
            incr = np.array([p.incr_log_weight for p in particles])
            w = np.exp(incr - logsumexp(incr))
            w /= w.sum()
            rng_rs = substream(seed, TAG_CSMC_RESAMPLE, step)
            ancestors = rng_rs.choice(M, size=M - 1, p=w)
            particles = [particles[0]] + [particles[a].copy() for a in ancestors]

        a_cache = {}
        pw_cache = {}
        merge_cache = {}
        rng_prop = substream(seed, TAG_CSMC_PROPOSAL, step)
        u = rng_prop.random(M - 1)
        new_node = n + step - 1
        ref_event = reference.events[step - 1]
        for m, particle in enumerate(particles):
            # particles sharing the same message arrays (leaves, resampling
            # copies) reuse pair weights and merge results verbatim
            sig = tuple((ln.node, id(ln.logm)) for ln in particle.lineages)
            res = pw_cache.get(sig)
            if res is None:
                res = pair_weights(particle, t_i, model, theta, a_cache, counters)
                pw_cache[sig] = res
            pairs, per_locus, probs, log_w = res
            if m == 0:
                nodes = [p.node for p in particle.lineages]
                j, l = sorted((nodes.index(ref_event[0]), nodes.index(ref_event[1])))
                choice = pairs.index((j, l))
            else:
                choice = int(np.searchsorted(np.cumsum(probs), u[m - 1], side="right"))
                choice = min(choice, len(pairs) - 1)
            mkey = (sig, choice)
            merged = merge_cache.get(mkey)
            if merged is None:
                merged = _merge(particle, pairs[choice], per_locus[choice], t_i,
                                new_node, model, theta, a_cache, counters)
                merge_cache[mkey] = merged
            merged = merged.copy()
            merged.incr_log_weight = log_w
            merged.cum_log_weight = particle.cum_log_weight + log_w
            particles[m] = merged

    if mode == "smc":
        final = np.array([p.incr_log_weight for p in particles])
    else:
        final = np.array([p.cum_log_weight for p in particles])
    weights = np.exp(final - logsumexp(final))
    weights /= weights.sum()
    return ParticleSet(particles, weights, mode, 0, counters)


def select_structure(particle_set: ParticleSet, rng: np.random.Generator) -> list:
    """Draw one particle index by weight; return its full event list."""
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(particle_set.weights), u, side="right"))
    idx = min(idx, len(particle_set.particles) - 1)
    return list(particle_set.particles[idx].events)
