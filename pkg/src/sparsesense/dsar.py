"""Order-p spatially mixed autoregression.

    x(t) = sum_{i=1..p} W_i diag(phi_i) x(t-i) + u_t

Because ``diag(phi_i)`` is diagonal the model decouples per location once the
spatially mixed regressors ``z_i(t) = W_i x(t-i)`` are formed:
``x_s(t) = sum_i phi_{i,s} z_i(t)[s]``. Each location's lag coefficients are a
small ridge regression solved through its p x p normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import ConfigError, InputDomainError, InsufficientHistoryError, NumericalError
from .weights import STRATEGIES, SpatialWeightSet


@dataclass(frozen=True)
class DsarConfig:
    p: int = 2
    ridge: float = 1e-3
    weight_strategy: str = "nmf_cosine"
    refresh_interval: int = 24
    window: int = 48
    stabilize: bool = True

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 1:
            raise ConfigError("model.p must be an integer >= 1")
        if not self.ridge >= 0:
            raise ConfigError("model.ridge must be >= 0")
        if self.weight_strategy not in STRATEGIES:
            raise ConfigError(f"weights.strategy must be one of {STRATEGIES}")
        if not isinstance(self.refresh_interval, int) or self.refresh_interval < 1:
            raise ConfigError("model.refresh must be an integer >= 1")
        if not isinstance(self.window, int) or self.window <= self.p:
            raise ConfigError("model.window must be an integer > model.p")


@dataclass(frozen=True)
class DsarModel:
    phi: np.ndarray  # S x p, column i-1 holds the diagonal of phi_i
    weights: SpatialWeightSet
    noise_cov_diag: np.ndarray
    fitted_at: int = 0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim == 1:
            phi = phi[:, None]
        if phi.shape != (self.weights.S, self.weights.p):
            raise InputDomainError(f"phi shape {phi.shape} does not match weights ({self.weights.S}, {self.weights.p})")
        q = np.asarray(self.noise_cov_diag, dtype=float)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(q))) or np.any(q < 0):
            raise InputDomainError("model parameters must be finite with nonnegative noise variances")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "noise_cov_diag", q)

    @property
    def p(self) -> int:
        return self.phi.shape[1]

    @property
    def S(self) -> int:
        return self.phi.shape[0]


def regressor(weights: SpatialWeightSet, history: Sequence, t: int, i: int) -> np.ndarray:
    """Spatially mixed lag-i regressor ``W_i x(t-i)``."""
    if i < 1 or i > weights.p or t - i < 0 or t - i >= len(history):
        raise InputDomainError(f"lag {i} at cycle {t} is out of range")
    return weights.lag(i) @ np.asarray(history[t - i], dtype=float)


def _design(history: Sequence, weights: SpatialWeightSet) -> tuple[np.ndarray, np.ndarray]:
    """Targets (n x S) and regressors (n x S x p) over t in [p, len(history))."""
    X = np.array([np.asarray(v, dtype=float) for v in history])
    p = weights.p
    n = X.shape[0] - p
    Z = np.empty((n, X.shape[1], p))
    for i in range(1, p + 1):
        Z[:, :, i - 1] = X[p - i : p - i + n] @ weights.lag(i).T
    return X[p:], Z


def fit(fused_history: Sequence, weights: SpatialWeightSet, cfg: DsarConfig, fitted_at: int = 0) -> DsarModel:
    """Per-location ridge estimate of the lag diagonals with ``W`` held fixed."""
    p = weights.p
    if p != cfg.p:
        raise InputDomainError(f"weight set has {p} lags, config asks for p={cfg.p}")
    if len(fused_history) < 3 * p:
        raise InsufficientHistoryError(f"fit needs >= {3 * p} cycles of history, got {len(fused_history)}")
    Y, Z = _design(fused_history, weights)
    S = Y.shape[1]
    phi = np.empty((S, p))
    reg = cfg.ridge * np.eye(p)
    for s in range(S):
        Zs = Z[:, s, :]
        A = Zs.T @ Zs + reg
        b = Zs.T @ Y[:, s]
        if cfg.ridge == 0 and np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
            raise NumericalError(f"normal matrix for location {s} is singular; use a positive model.ridge")
        try:
            phi[s] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"normal matrix for location {s} is singular; use a positive model.ridge") from exc
    model = DsarModel(phi, weights, np.zeros(S), fitted_at)
    return estimate_noise(model, fused_history)


def stabilize(model: DsarModel) -> DsarModel:
    """Scale each location's lag coefficients so that ``sum_i |phi_i,s| <= 1``.

    With row-stochastic weights this makes the one-step map non-expansive in the
    max norm, so a loop that feeds predictions back as inputs cannot diverge.
    """
    total = np.abs(model.phi).sum(axis=1, keepdims=True)
    scale = 1.0 / np.maximum(total, 1.0)
    if np.all(scale == 1.0):
        return model
    return replace(model, phi=model.phi * scale)


def predict_next(model: DsarModel, fused_history: Sequence, t: int) -> np.ndarray:
    """One-step point prediction of x(t) from cycles t-p .. t-1; noise contributes zero."""
    if t < model.p or len(fused_history) < t:
        raise InsufficientHistoryError(f"prediction at t={t} needs cycles {t - model.p}..{t - 1}")
    out = np.zeros(model.S)
    for i in range(1, model.p + 1):
        out += model.phi[:, i - 1] * regressor(model.weights, fused_history, t, i)
    return out


def residuals(model: DsarModel, fused_history: Sequence) -> np.ndarray:
    Y, Z = _design(fused_history, model.weights)
    return Y - np.einsum("nsp,sp->ns", Z, model.phi)


def estimate_noise(model: DsarModel, fused_history: Sequence) -> DsarModel:
    """Copy of ``model`` whose ``noise_cov_diag`` holds per-location residual variances."""
    if len(fused_history) - model.p < 2:
        raise InsufficientHistoryError("noise estimate needs at least two residuals")
    return replace(model, noise_cov_diag=variance_of_residuals(residuals(model, fused_history)))


def variance_of_residuals(res) -> np.ndarray:
    res = np.asarray(res, dtype=float)
    if res.ndim == 1:
        res = res[:, None]
    if res.shape[0] < 2:
        raise InsufficientHistoryError("noise estimate needs at least two residuals")
    return res.var(axis=0)
