"""Continuous-time Markov mutation models.

A model is a rate matrix R (per unit of the genetic parameter theta) together
with its equilibrium distribution p0.  Branch transition matrices are
exp(theta * dt * R), computed through a reversibility-based symmetrization so
the matrix exponential reduces to a real eigendecomposition.  Both built-in
models (symmetric binary alleles and the stepwise microsatellite walk) are
reversible, which makes this exact; a scaling-and-squaring fallback covers
anything that is not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, InvariantError

_ROW_SUM_TOL = 1e-12
_STATIONARITY_TOL = 1e-10
_MAX_CACHE_ENTRIES = 30000  # long runs see mostly-unique (theta, dt) keys


def _quantize(x: float) -> float:
    # 12 significant digits: cache key resolution for (theta, dt) pairs
    return float(f"{x:.12e}")


@dataclass(eq=False)
class MutationModel:
    """Mutation process: K states, generator R (rows sum to 0), equilibrium p0."""

    num_states: int
    rate_matrix: np.ndarray
    equilibrium: np.ndarray
    _spectral: tuple | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.rate_matrix = np.asarray(self.rate_matrix, dtype=float)
        self.equilibrium = np.asarray(self.equilibrium, dtype=float)
        K = self.num_states
        R, p0 = self.rate_matrix, self.equilibrium
        if R.shape != (K, K) or p0.shape != (K,):
            raise ConfigError(f"shape mismatch for {K}-state model")
        off = R - np.diag(np.diag(R))
        if np.any(off < 0):
            raise ConfigError("off-diagonal rates must be nonnegative")
        if np.max(np.abs(R.sum(axis=1))) > _ROW_SUM_TOL:
            raise ConfigError("rate matrix rows must sum to zero")
        if np.any(p0 < 0) or abs(p0.sum() - 1.0) > _ROW_SUM_TOL:
            raise ConfigError("equilibrium must be a probability vector")
        if np.max(np.abs(p0 @ R)) > _STATIONARITY_TOL:
            raise ConfigError("equilibrium is not stationary for the rate matrix")
        self.log_equilibrium = np.log(p0)

    def _spectral_factors(self):
        """Factor R = W1 diag(lam) W2 with real lam (via p0-symmetrization)."""
        if self._spectral is None:
            p0 = self.equilibrium
            d = np.sqrt(p0)
            S = (self.rate_matrix * d[:, None]) / d[None, :]
            if np.max(np.abs(S - S.T)) < 1e-9:
                lam, V = np.linalg.eigh((S + S.T) / 2.0)
                self._spectral = (lam, V / d[:, None], V.T * d[None, :])
            else:
                self._spectral = "nonreversible"
        return self._spectral

    def _expm(self, x: float) -> np.ndarray:
        spec = self._spectral_factors()
        if isinstance(spec, str):
            return scipy.linalg.expm(x * self.rate_matrix)
        lam, W1, W2 = spec
        return (W1 * np.exp(x * lam)[None, :]) @ W2

    def trans(self, theta: float, dt: float) -> np.ndarray:
        """exp(theta*dt*R), memoized on quantized (theta, dt). Do not mutate."""
        if dt < 0:
            raise InvariantError(f"negative branch duration dt={dt}")
        if dt == 0.0:
            return np.eye(self.num_states)
        key = (_quantize(theta), _quantize(dt))
        T = self._cache.get(key)
        if T is None:
            T = np.clip(self._expm(theta * dt), 0.0, None)
            T /= T.sum(axis=1, keepdims=True)
            if len(self._cache) >= _MAX_CACHE_ENTRIES:
                self._cache.clear()
            self._cache[key] = T
        return T

    def trans_batch(self, theta: float, dts: np.ndarray) -> np.ndarray:
        """exp(theta*dts[g]*R) for a vector of durations, shape (G, K, K)."""
        dts = np.asarray(dts, dtype=float)
        if np.any(dts < 0):
            raise InvariantError("negative branch duration in batch")
        spec = self._spectral_factors()
        if isinstance(spec, str):
            T = np.stack([self._expm(theta * dt) for dt in dts])
        else:
            lam, W1, W2 = spec
            E = np.exp(theta * dts[:, None] * lam[None, :])
            T = np.einsum("ij,gj,jk->gik", W1, E, W2)
        T = np.clip(T, 0.0, None)
        T /= T.sum(axis=2, keepdims=True)
        return T

    # Fused folds: apply the whole batch of transition matrices to a linear
    # message without materializing them, via the spectral factors.

    def fold_to_parent_batch(self, theta: float, dts: np.ndarray, lin: np.ndarray) -> np.ndarray:
        """out[g, l, y] = sum_c exp(theta*dts[g]*R)[y, c] * lin[l, c]."""
        spec = self._spectral_factors()
        if isinstance(spec, str):
            T = self.trans_batch(theta, dts)
            return np.einsum("gyc,lc->gly", T, lin)
        lam, W1, W2 = spec
        E = np.exp(theta * np.asarray(dts, dtype=float)[:, None] * lam[None, :])
        Q = lin @ W2.T                      # (L, j)
        out = (E[:, None, :] * Q[None, :, :]) @ W1.T
        return np.maximum(out, 0.0)

    def fold_to_child_batch(self, theta: float, dts: np.ndarray, lin: np.ndarray) -> np.ndarray:
        """out[g, l, y] = sum_o lin[l, o] * exp(theta*dts[g]*R)[o, y]."""
        spec = self._spectral_factors()
        if isinstance(spec, str):
            T = self.trans_batch(theta, dts)
            return np.einsum("lo,goy->gly", lin, T)
        lam, W1, W2 = spec
        E = np.exp(theta * np.asarray(dts, dtype=float)[:, None] * lam[None, :])
        Q = lin @ W1                        # (L, j)
        out = (E[:, None, :] * Q[None, :, :]) @ W2
        return np.maximum(out, 0.0)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic parent-to-child transition matrix over one branch."""

    matrix: np.ndarray
    branch_length: float  # theta * (t_child - t_parent)


def make_binary_model() -> MutationModel:
    """Two-state symmetric model; unit rate matrix [[-0.5, 0.5], [0.5, -0.5]]."""
    R = np.array([[-0.5, 0.5], [0.5, -0.5]])
    return MutationModel(2, R, np.array([0.5, 0.5]))


def make_stepwise_model(num_states: int) -> MutationModel:
    """Stepwise walk on {0..K-1}: each state mutates to a neighbor with total
    rate 1 (split evenly in the interior, reflected at the two boundaries)."""
    K = int(num_states)
    if K < 2:
        raise ConfigError("stepwise model needs at least 2 states")
    R = np.zeros((K, K))
    for k in range(K):
        if k == 0:
            R[k, k + 1] = 1.0
        elif k == K - 1:
            R[k, k - 1] = 1.0
        else:
            R[k, k - 1] = 0.5
            R[k, k + 1] = 0.5
        R[k, k] = -1.0
    p0 = _left_null_vector(R)
    return MutationModel(K, R, p0)


def _left_null_vector(R: np.ndarray) -> np.ndarray:
    """Normalized solution of p^T R = 0 with nonnegative entries."""
    _, _, vh = np.linalg.svd(R.T)
    p = vh[-1]
    p = np.abs(p)
    return p / p.sum()


def transition_matrix(model: MutationModel, theta: float, dt: float) -> TransitionMatrix:
    """Transition matrix over a branch of duration dt under mutation scale theta."""
    if theta <= 0:
        raise ConfigError(f"theta must be positive, got {theta}")
    if dt < 0:
        raise InvariantError(f"branch duration must be nonnegative, got {dt}")
    return TransitionMatrix(matrix=model.trans(theta, dt), branch_length=theta * dt)
