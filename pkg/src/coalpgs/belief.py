"""Bidirectional belief propagation on a fixed genealogy.

Messages live in log domain, one length-K vector per locus, and are
normalized so that sum_v p0(v) * m(v) = 1; the log-normalizer of every
message is kept so the data likelihood can be assembled at any node from the
messages directed toward it.  Every message is a function of the *sender's*
state; the recipient integrates it against the transition matrix of the
connecting branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SequencingError
from .genealogy import Alignment, Genealogy
from .mutation import MutationModel
from .util import logsumexp

NORMALIZATION_TOL = 1e-10


def _logsumexp_last(a: np.ndarray) -> np.ndarray:
    """Max-shifted log-sum-exp over the last axis (hot path; no scipy wrapper)."""
    m = np.max(a, axis=-1)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(a - m[..., None]).sum(axis=-1)) + m


@dataclass
class Message:
    """One directed per-locus message plus its per-locus log-normalizer."""

    values: np.ndarray          # (L, K) log-domain
    log_normalizer: np.ndarray  # (L,)
    direction: str              # "up" | "down"
    edge: tuple                 # (from_node, to_node)


def leaf_log_messages(aln: Alignment, model: MutationModel):
    """Per-leaf upward message arrays: point mass at the observed state,
    normalized against p0.  Returns (logm list, logz list)."""
    K = model.num_states
    logp0 = model.log_equilibrium
    logms, logzs = [], []
    for row in aln.data:
        logm = np.full((len(row), K), -np.inf)
        logm[np.arange(len(row)), row] = -logp0[row]
        logms.append(logm)
        logzs.append(logp0[row].astype(float))
    return logms, logzs


def leaf_message(x: int, model: MutationModel, leaf: int = 0, parent: int = -1) -> Message:
    """Upward message from a single observed leaf state (one locus)."""
    logp0 = model.log_equilibrium
    logm = np.full((1, model.num_states), -np.inf)
    logm[0, x] = -logp0[x]
    return Message(logm, np.array([logp0[x]]), "up", (leaf, parent))


def _fold_toward_parent(logm: np.ndarray, T: np.ndarray) -> np.ndarray:
    """A(l, y) = log sum_c T[y, c] exp(logm[l, c]) — child message seen from
    the parent end of the branch."""
    shift = np.max(logm, axis=1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    lin = np.exp(logm - shift)
    with np.errstate(divide="ignore"):
        return np.log(lin @ T.T) + shift


def _fold_toward_child(logm: np.ndarray, T: np.ndarray) -> np.ndarray:
    """B(l, y) = log sum_o exp(logm[l, o]) T[o, y] — parent message seen from
    the child end of the branch."""
    shift = np.max(logm, axis=1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    lin = np.exp(logm - shift)
    with np.errstate(divide="ignore"):
        return np.log(lin @ T) + shift


class MessageStore:
    """All 2n-2 edges' messages in both directions for one (G, X, theta)."""

    def __init__(self, genealogy: Genealogy, alignment: Alignment,
                 model: MutationModel, theta: float):
        if alignment.n != genealogy.n:
            raise SequencingError("alignment size does not match genealogy")
        self.g = genealogy
        self.aln = alignment
        self.model = model
        self.theta = theta
        n = genealogy.n
        L, K = alignment.num_loci, model.num_states
        total = 2 * n - 1
        self.up_logm = [None] * total
        self.up_logz = [None] * total
        self.down_logm = [None] * total
        self.down_logz = [None] * total
        logms, logzs = leaf_log_messages(alignment, model)
        for leaf in range(n):
            self.up_logm[leaf] = logms[leaf]
            self.up_logz[leaf] = logzs[leaf]
        self.fresh = False
        self.full_propagate()

    # -- propagation --------------------------------------------------------

    def _normalize(self, logmu: np.ndarray):
        logz = _logsumexp_last(logmu + self.model.log_equilibrium[None, :])
        return logmu - logz[:, None], logz

    def _compute_up(self, node: int) -> None:
        g, model = self.g, self.model
        t_v = g.node_time(node)
        logmu = 0.0
        for child in g.children(node):
            T = model.trans(self.theta, g.node_time(child) - t_v)
            logmu = logmu + _fold_toward_parent(self.up_logm[child], T)
        self.up_logm[node], self.up_logz[node] = self._normalize(logmu)

    def _compute_down(self, child: int) -> None:
        """Message parent(child) -> child, a function of the parent's state."""
        g, model = self.g, self.model
        v = g.parent(child)
        t_v = g.node_time(v)
        sib = g.sibling(child)
        T_sib = model.trans(self.theta, g.node_time(sib) - t_v)
        term_sib = _fold_toward_parent(self.up_logm[sib], T_sib)
        if v == g.root:
            logmu = self.model.log_equilibrium[None, :] + term_sib
        else:
            o = g.parent(v)
            T_up = model.trans(self.theta, t_v - g.node_time(o))
            term_par = _fold_toward_child(self.down_logm[v], T_up)
            logmu = term_par + term_sib
        self.down_logm[child], self.down_logz[child] = self._normalize(logmu)

    def full_propagate(self) -> None:
        g = self.g
        n = g.n
        for i in range(1, n - 1):  # internal non-root nodes, children-first
            self._compute_up(n + i - 1)
        self._downward_pass()
        self.fresh = True

    def _downward_pass(self) -> None:
        g = self.g
        n = g.n
        for i in range(n - 1, 0, -1):  # root-first
            for child in g.children(n + i - 1):
                self._compute_down(child)

    def refresh_after_time_change(self, event_index: int) -> None:
        """Recompute exactly the messages invalidated by a change of one event
        time; bit-identical to a full propagation."""
        if self.aln.num_loci == 0:
            self.fresh = True
            return  # empty messages carry no time dependence
        g = self.g
        node = g.n + event_index - 1
        while node != g.root:
            self._compute_up(node)
            node = g.parent(node)
        self._downward_pass()
        self.fresh = True

    # -- evaluation ---------------------------------------------------------

    def _require_fresh(self):
        if not self.fresh:
            raise SequencingError("message store is stale; propagate first")

    def log_likelihood(self, at_node: int | None = None) -> float:
        """log p_theta(X | G), assembled at the root (default) or at any
        internal node; all forms agree."""
        self._require_fresh()
        g, model = self.g, self.model
        n = g.n
        if at_node is None:
            at_node = g.root
        if at_node < n:
            raise SequencingError("likelihood can be evaluated at internal nodes only")
        t_v = g.node_time(at_node)
        folded = 0.0
        for child in g.children(at_node):
            T = model.trans(self.theta, g.node_time(child) - t_v)
            folded = folded + _fold_toward_parent(self.up_logm[child], T)
        if at_node == g.root:
            comb = logsumexp(model.log_equilibrium[None, :] + folded, axis=1)
            z_total = sum(float(np.sum(self.up_logz[u])) for u in range(2 * n - 2))
        else:
            o = g.parent(at_node)
            T_up = model.trans(self.theta, t_v - g.node_time(o))
            term_par = _fold_toward_child(self.down_logm[at_node], T_up)
            comb = logsumexp(term_par + folded, axis=1)
            ancestors = set()
            u = at_node
            while u != g.root:
                ancestors.add(u)
                u = g.parent(u)
            z_total = 0.0
            for u in range(2 * n - 2):
                z = self.down_logz[u] if u in ancestors else self.up_logz[u]
                z_total += float(np.sum(z))
        return float(np.sum(comb)) + z_total

    def local_combination_vs_time(self, event_index: int, ts: np.ndarray) -> np.ndarray:
        """Log of the data-dependent factor of the time conditional for event
        `event_index`, evaluated at candidate times `ts` (summed over loci).
        Messages toward the event's node do not depend on its own time, so
        this is exact for any candidate inside the conditional's bounds."""
        self._require_fresh()
        g, model = self.g, self.model
        ts = np.asarray(ts, dtype=float)
        if self.aln.num_loci == 0:
            return np.zeros(ts.shape)
        v = g.n + event_index - 1
        c1, c2 = g.children(v)
        tot = None
        for child in (c1, c2):
            logm = self.up_logm[child]
            shift = np.max(logm, axis=1, keepdims=True)
            shift = np.where(np.isfinite(shift), shift, 0.0)
            lin = np.exp(logm - shift)
            folded = model.fold_to_parent_batch(self.theta, g.node_time(child) - ts, lin)
            with np.errstate(divide="ignore"):
                A = np.log(folded) + shift[None, :, :]
            tot = A if tot is None else tot + A
        if v == g.root:
            tot = tot + model.log_equilibrium[None, None, :]
        else:
            o = g.parent(v)
            logm = self.down_logm[v]
            shift = np.max(logm, axis=1, keepdims=True)
            shift = np.where(np.isfinite(shift), shift, 0.0)
            lin = np.exp(logm - shift)
            folded = model.fold_to_child_batch(self.theta, ts - g.node_time(o), lin)
            with np.errstate(divide="ignore"):
                term = np.log(folded) + shift[None, :, :]
            tot = tot + term
        comb = _logsumexp_last(tot)  # (G, L)
        return comb.sum(axis=1)

    # -- inspection ---------------------------------------------------------

    def message(self, node: int, direction: str) -> Message:
        """The stored message on the edge (node, parent(node))."""
        self._require_fresh()
        p = self.g.parent(node)
        if direction == "up":
            return Message(self.up_logm[node], self.up_logz[node], "up", (node, p))
        if direction == "down":
            return Message(self.down_logm[node], self.down_logz[node], "down", (p, node))
        raise ValueError(f"unknown direction {direction!r}")

    def check_normalization(self, tol: float = NORMALIZATION_TOL) -> float:
        """Max deviation of sum_v p0(v) m(v) from 1 over all messages."""
        self._require_fresh()
        p0 = self.model.equilibrium
        worst = 0.0
        for store in (self.up_logm, self.down_logm):
            for logm in store:
                if logm is None or logm.size == 0:
                    continue
                worst = max(worst, float(np.max(np.abs(np.exp(logm) @ p0 - 1.0))))
        if worst > tol:
            raise SequencingError(f"message normalization off by {worst}")
        return worst


def log_likelihood(genealogy: Genealogy, alignment: Alignment, model: MutationModel,
                   theta: float, at_node: int | None = None) -> float:
    """Convenience wrapper: build a store, propagate, evaluate."""
    store = MessageStore(genealogy, alignment, model, theta)
    return store.log_likelihood(at_node=at_node)
