"""Dynamic spatial weight matrices.

The default strategy factorizes a min-shifted sliding window of the fused
history with multiplicative-update NMF, compares locations by the cosine
similarity of their latent feature rows, and row-normalizes the similarity
into a row-stochastic weight matrix. Correlation, distance-kernel and
identity strategies are provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, InputDomainError, InsufficientHistoryError, Location, NumericalError

SMOOTHING_EPS = 1e-9
STRATEGIES = ("nmf_cosine", "correlation", "distance", "identity")


@dataclass(frozen=True)
class LatentFeatureMatrix:
    U: np.ndarray
    r: int
    window_end: int

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[1] != self.r:
            raise InputDomainError(f"U must be S x {self.r}")
        if np.any(U < 0):
            raise InputDomainError("latent features must be nonnegative")
        object.__setattr__(self, "U", U)


@dataclass(frozen=True)
class SpatialWeightSet:
    """Per-lag row-stochastic S x S matrices, ``matrices[i-1]`` is the lag-i matrix."""

    matrices: tuple
    computed_at: int = 0

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        if not mats:
            raise InputDomainError("weight set needs at least one lag")
        S = mats[0].shape[0]
        for m in mats:
            if m.shape != (S, S):
                raise InputDomainError("weight matrices must all be S x S")
            if not np.all(np.isfinite(m)) or np.any(m < 0):
                raise InputDomainError("weights must be finite and nonnegative")
            if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
                raise InputDomainError("weight rows must sum to 1")
            m.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @property
    def p(self) -> int:
        return len(self.matrices)

    @property
    def S(self) -> int:
        return self.matrices[0].shape[0]

    def lag(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.p:
            raise InputDomainError(f"lag {i} outside 1..{self.p}")
        return self.matrices[i - 1]

    @classmethod
    def replicated(cls, W, p: int, computed_at: int = 0) -> "SpatialWeightSet":
        return cls(tuple(W for _ in range(p)), computed_at)

    @classmethod
    def identity(cls, S: int, p: int, computed_at: int = 0) -> "SpatialWeightSet":
        return cls.replicated(np.eye(S), p, computed_at)


def _row_normalize(raw: np.ndarray) -> np.ndarray:
    return raw / raw.sum(axis=1, keepdims=True)


def build_window_matrix(fused_history: Sequence, t: int, L: int) -> np.ndarray:
    """S x L matrix of fused values over cycles [t-L, t), shifted to be nonnegative.

    The global window minimum is subtracted (not a per-row minimum) so that level
    differences between locations survive.
    """
    if L < 1:
        raise InputDomainError("window length must be >= 1")
    if t < L:
        raise InsufficientHistoryError(f"window of {L} cycles needs t >= {L}, got t={t}")
    if len(fused_history) < t:
        raise InsufficientHistoryError(f"history has {len(fused_history)} cycles, need {t}")
    M = np.array([np.asarray(fused_history[c], dtype=float) for c in range(t - L, t)]).T
    return M - M.min()


def nmf(M, r: int, iters: int = 200, seed: int = 0, return_history: bool = False, check_monotone: bool = False):
    """Frobenius-loss NMF by Lee-Seung multiplicative updates.

    Args:
        M: S x L nonnegative matrix.
        r: factorization rank, 1 <= r <= min(S, L).
        iters: number of multiplicative update sweeps.
        seed: seed for the uniform random initialization.
        return_history: also return the reconstruction error before each sweep and after the last.
        check_monotone: raise ``NumericalError`` if the error ever increases.

    Returns:
        ``(U, V)`` with ``U`` S x r and ``V`` r x L, both offset by ``SMOOTHING_EPS``
        so no row of ``U`` is all zero. With ``return_history`` a third element,
        the list of errors, is appended.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InputDomainError("M must be a matrix")
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise InputDomainError("M must be finite and nonnegative")
    S, L = M.shape
    if not 1 <= r <= min(S, L):
        raise InputDomainError(f"rank r={r} outside 1..{min(S, L)}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(M.mean() / r) if M.mean() > 0 else 1.0
    U = rng.uniform(0.1, 1.0, size=(S, r)) * scale
    V = rng.uniform(0.1, 1.0, size=(r, L)) * scale
    tiny = np.finfo(float).tiny
    history = [float(np.linalg.norm(M - U @ V))]
    for _ in range(iters):
        V *= (U.T @ M) / np.maximum(U.T @ U @ V, tiny)
        U *= (M @ V.T) / np.maximum(U @ (V @ V.T), tiny)
        history.append(float(np.linalg.norm(M - U @ V)))
        if check_monotone and history[-1] > history[-2] * (1 + 1e-9) + 1e-12:
            raise NumericalError(f"NMF residual increased: {history[-2]} -> {history[-1]}")
    U += SMOOTHING_EPS
    V += SMOOTHING_EPS
    if return_history:
        return U, V, history
    return U, V


def latent_similarity(features: LatentFeatureMatrix) -> np.ndarray:
    """Cosine similarity between latent feature rows, clamped to [0, 1], unit diagonal."""
    U = features.U
    norms = np.linalg.norm(U, axis=1)
    zero = norms == 0
    safe = np.where(zero, 1.0, norms)
    Un = U / safe[:, None]
    sim = np.clip(Un @ Un.T, 0.0, 1.0)
    sim[zero, :] = 1.0
    np.fill_diagonal(sim, 1.0)
    return sim


def weights_from_similarity(simmat, p: int = 1, computed_at: int = 0) -> SpatialWeightSet:
    simmat = np.asarray(simmat, dtype=float)
    if simmat.ndim != 2 or simmat.shape[0] != simmat.shape[1]:
        raise InputDomainError("similarity matrix must be square")
    if np.any(simmat < 0) or np.any(simmat > 1) or not np.allclose(np.diag(simmat), 1.0):
        raise InputDomainError("similarities must lie in [0, 1] with a unit diagonal")
    return SpatialWeightSet.replicated(_row_normalize(simmat), p, computed_at)


def distance_weights(locations: Sequence[Location], bandwidth: float, p: int = 1, computed_at: int = 0) -> SpatialWeightSet:
    """Gaussian-kernel weights ``exp(-d^2 / bandwidth^2)``, row-normalized."""
    if any(loc.coords is None for loc in locations):
        raise ConfigError("distance weights require coordinates for every location")
    if not bandwidth > 0:
        raise ConfigError("weights.bandwidth must be > 0")
    xy = np.array([loc.coords for loc in locations], dtype=float)
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1)
    raw = np.exp(-d2 / bandwidth**2)
    return SpatialWeightSet.replicated(_row_normalize(raw), p, computed_at)


def correlation_weights(fused_history: Sequence, L: int, p: int = 1, computed_at: int = 0) -> SpatialWeightSet:
    """Row-normalized |Pearson correlation| over the last ``L`` fused vectors.

    A location whose window is constant depends only on itself.
    """
    if L < 3:
        raise InputDomainError("correlation window needs L >= 3")
    if len(fused_history) < L:
        raise InsufficientHistoryError(f"need {L} cycles of history, have {len(fused_history)}")
    X = np.array([np.asarray(v, dtype=float) for v in fused_history[-L:]]).T
    S = X.shape[0]
    centered = X - X.mean(axis=1, keepdims=True)
    sd = np.sqrt((centered**2).sum(axis=1))
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=1))
    safe = np.where(flat, 1.0, sd)
    Z = centered / safe[:, None]
    raw = np.clip(np.abs(Z @ Z.T), 0.0, 1.0)
    raw[flat, :] = 0.0
    raw[:, flat] = 0.0
    raw[np.arange(S), np.arange(S)] = 1.0
    return SpatialWeightSet.replicated(_row_normalize(raw), p, computed_at)


def nmf_cosine_weights(fused_history: Sequence, t: int, L: int, r: int, iters: int = 200, seed: int = 0, p: int = 1) -> SpatialWeightSet:
    M = build_window_matrix(fused_history, t, L)
    U, _ = nmf(M, r, iters, seed)
    sim = latent_similarity(LatentFeatureMatrix(U, r, t))
    return weights_from_similarity(sim, p, t)


def default_rank(S: int, L: int) -> int:
    return max(1, min(5, S - 1, L))


def compute_weights(
    strategy: str,
    fused_history: Sequence,
    t: int,
    L: int,
    p: int,
    *,
    locations: Sequence[Location] | None = None,
    rank: int | None = None,
    nmf_iters: int = 200,
    bandwidth: float = 0.25,
    per_lag: bool = False,
    seed: int = 0,
) -> SpatialWeightSet:
    """Dispatch to a weight strategy for the window ending at cycle ``t``.

    With ``per_lag`` the lag-i matrix is computed from the window shifted back
    by ``i - 1`` cycles; otherwise one matrix is shared by every lag.
    """
    S = len(np.asarray(fused_history[0]))
    if strategy == "identity":
        return SpatialWeightSet.identity(S, p, t)
    if strategy == "distance":
        return distance_weights(locations or [], bandwidth, p, t)
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown weights.strategy {strategy!r}")

    def one(end: int) -> np.ndarray:
        if strategy == "correlation":
            return correlation_weights(fused_history[:end], L).matrices[0]
        r = rank if rank is not None else default_rank(S, L)
        return nmf_cosine_weights(fused_history, end, L, r, nmf_iters, seed).matrices[0]

    if not per_lag:
        return SpatialWeightSet.replicated(one(t), p, t)
    return SpatialWeightSet(tuple(one(t - (i - 1)) for i in range(1, p + 1)), t)
