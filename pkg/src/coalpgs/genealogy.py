"""Coalescent tree data model: structure, event times, prior, simulation.

Node ids: leaves are 0..n-1 (all at time 0), the internal node created by
event i (1-based, i = 1..n-1) is n+i-1, the root is 2n-2.  Times are measured
backward from the present: t0 = 0 at the leaves and every event time is
strictly negative, with t1 > t2 > ... > t_{n-1} (the root is the most
negative).  Waiting times delta_i = t_{i-1} - t_i are therefore positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvariantError
from .mutation import MutationModel
from .util import binom2


@dataclass
class Alignment:
    """n individuals by L loci of integer state indices."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        if self.data.ndim != 2:
            raise DataError("alignment data must be a 2-D matrix")
        if self.data.shape[0] < 2:
            raise DataError("alignment needs at least 2 individuals")
        if self.data.size and self.data.min() < 0:
            raise DataError("alignment entries must be nonnegative")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def num_loci(self) -> int:
        return self.data.shape[1]

    def validate_states(self, num_states: int) -> None:
        if self.data.size and self.data.max() >= num_states:
            raise DataError(
                f"alignment contains state {self.data.max()} but the model has "
                f"{num_states} states"
            )


@dataclass
class Genealogy:
    """Tree structure (ordered pairing events) plus coalescent event times."""

    n: int
    events: list  # events[i] = (a, b): node ids merged at event i+1
    times: np.ndarray  # length n-1, strictly decreasing, all < 0
    _parent: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        # events are unordered pairs; store them in canonical sorted order
        self.events = [(int(min(a, b)), int(max(a, b))) for a, b in self.events]
        self.validate()

    def validate(self) -> None:
        n = self.n
        if len(self.events) != n - 1 or len(self.times) != n - 1:
            raise InvariantError("need exactly n-1 events and times")
        prev = 0.0
        for t in self.times:
            if not t < prev:
                raise InvariantError("event times must be strictly decreasing from 0")
            prev = t
        parent = np.full(2 * n - 1, -1, dtype=np.int64)
        live = set(range(n))
        for i, (a, b) in enumerate(self.events):
            if a == b or a not in live or b not in live:
                raise InvariantError(f"event {i + 1} merges unavailable lineages ({a},{b})")
            node = n + i
            live.discard(a)
            live.discard(b)
            live.add(node)
            parent[a] = node
            parent[b] = node
        self._parent = parent

    # -- navigation ---------------------------------------------------------

    @property
    def root(self) -> int:
        return 2 * self.n - 2

    def parent(self, node: int) -> int:
        return int(self._parent[node])

    def children(self, node: int) -> tuple:
        if node < self.n:
            raise InvariantError("leaves have no children")
        return self.events[node - self.n]

    def sibling(self, node: int) -> int:
        p = self.parent(node)
        a, b = self.children(p)
        return b if a == node else a

    def node_time(self, node: int) -> float:
        return 0.0 if node < self.n else float(self.times[node - self.n])

    def copy(self) -> "Genealogy":
        return Genealogy(self.n, list(self.events), self.times.copy())

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {"n": self.n, "events": [list(e) for e in self.events],
                "times": [float(t) for t in self.times]}

    @classmethod
    def from_json(cls, obj: dict) -> "Genealogy":
        return cls(int(obj["n"]), [tuple(e) for e in obj["events"]],
                   np.array(obj["times"], dtype=float))


def log_prior(g: Genealogy) -> float:
    """log p(G): exponential waiting-time factors times the uniform-pairing
    structure factor (constant over structures for fixed n)."""
    n = g.n
    out = 0.0
    prev = 0.0
    for i, t in enumerate(g.times, start=1):
        delta = prev - t
        rate = binom2(n - i + 1)
        out += -rate * delta - math.log(rate)
        prev = t
    return out


def simulate_prior(n: int, rng: np.random.Generator) -> Genealogy:
    """Draw a genealogy from the coalescent prior: uniform pairings, waiting
    times Exponential(C(k,2)) for k live lineages."""
    if n < 2:
        raise InvariantError("need at least 2 leaves")
    live = list(range(n))
    events = []
    times = []
    t = 0.0
    for i in range(1, n):
        k = n - i + 1
        t -= rng.exponential(1.0 / binom2(k))
        j, l = rng.choice(len(live), size=2, replace=False)
        a, b = live[j], live[l]
        for x in sorted((j, l), reverse=True):
            live.pop(x)
        live.append(n + i - 1)
        events.append((a, b))
        times.append(t)
    return Genealogy(n, events, np.array(times))


def simulate_data(g: Genealogy, model: MutationModel, theta: float, num_loci: int,
                  rng: np.random.Generator) -> Alignment:
    """Forward-simulate leaf states down the tree from equilibrium at the root."""
    n = g.n
    K = model.num_states
    states = np.empty((2 * n - 1, num_loci), dtype=np.int64)
    states[g.root] = rng.choice(K, size=num_loci, p=model.equilibrium)
    # visit internal nodes root-first (event order reversed)
    for i in range(n - 1, 0, -1):
        node = n + i - 1
        for child in g.events[i - 1]:
            T = model.trans(theta, g.node_time(child) - g.node_time(node))
            u = rng.random(num_loci)
            states[child] = np.argmax(np.cumsum(T[states[node]], axis=1) > u[:, None], axis=1)
    return Alignment(states[:n])


# -- alignment file format --------------------------------------------------
# one individual per line, whitespace-separated nonnegative integers;
# '#'-prefixed lines are comments.

def parse_alignment(path: str, num_states: int | None = None) -> Alignment:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                row = [int(tok) for tok in stripped.split()]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer token") from None
            if any(v < 0 for v in row):
                raise DataError(f"{path}:{lineno}: negative state index")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}:{lineno}: ragged row ({len(row)} != {width})")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    aln = Alignment(np.array(rows, dtype=np.int64))
    if num_states is not None:
        aln.validate_states(num_states)
    return aln


def write_alignment(path: str, aln: Alignment, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for row in aln.data:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def save_genealogy(path: str, g: Genealogy) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh, indent=2)


def load_genealogy(path: str) -> Genealogy:
    with open(path) as fh:
        try:
            return Genealogy.from_json(json.load(fh))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: malformed genealogy JSON: {exc}") from None
