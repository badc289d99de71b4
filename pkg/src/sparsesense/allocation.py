"""Sensing-task allocation: expert factors, weighted priority order, EWIEM updates and baselines.

Three experts score every location each cycle:

* temporal uncertainty (TU): variance of its recent predictions,
* inference freshness (IF): cycles since it was last sensed,
* alertness (AT): predicted value relative to a hazard threshold.

The combined score is ``lam_TU*TU + lam_IF*IF + lam_AT*AT`` and the top ``k``
locations are sensed. After the cycle each expert is charged
``rmse * sim(combined order, expert order)`` and its weight is decayed by
``exp(-eta * loss)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core import ConfigError, InputDomainError, Location

# Combined scores closer than this are ties (broken by ascending id).
TIE_DECIMALS = 12


class Expert(Enum):
    TU = 0
    IF = 1
    AT = 2


@dataclass(frozen=True)
class ExpertScores:
    tu: np.ndarray
    if_: np.ndarray
    at: np.ndarray
    t: int = 0

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.tu, self.if_, self.at)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise InputDomainError("expert scores must be three vectors of equal length")
        for a in arrs:
            if not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
                raise InputDomainError("expert scores must be finite and lie in [0, 1]")
        object.__setattr__(self, "tu", arrs[0])
        object.__setattr__(self, "if_", arrs[1])
        object.__setattr__(self, "at", arrs[2])

    def factor(self, which: Expert) -> np.ndarray:
        return (self.tu, self.if_, self.at)[Expert(which).value]


@dataclass(frozen=True)
class ExpertWeights:
    lambdas: tuple = (1 / 3, 1 / 3, 1 / 3)
    eta: float = 0.1

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (3,) or not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InputDomainError("expert weights must be three positive numbers")
        if not self.eta >= 0:
            raise ConfigError("alloc.eta must be >= 0")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in lam / lam.sum()))

    def as_array(self) -> np.ndarray:
        return np.array(self.lambdas)


@dataclass(frozen=True)
class PriorityOrder:
    sequence: tuple
    scores: np.ndarray


@dataclass(frozen=True)
class TaskAssignment:
    ids: frozenset
    t: int = 0

    def sorted_ids(self) -> list[int]:
        return sorted(self.ids)


def _minmax(raw: np.ndarray) -> np.ndarray:
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def temporal_uncertainty(prediction_window) -> np.ndarray:
    """Min-max normalized population variance of recent predictions.

    Args:
        prediction_window: w x S array (or list of S-vectors), oldest first.
    """
    W = np.asarray(prediction_window, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[0] < 1:
        raise InputDomainError("temporal uncertainty needs at least one prediction per location")
    return _minmax(W.var(axis=0))


def inference_freshness(last_sensed, t: int) -> np.ndarray:
    last = np.asarray(last_sensed, dtype=float)
    if np.any(last > t):
        raise InputDomainError("last_sensed lies in the future")
    return _minmax(t - last)


def alertness(predicted, hazard_threshold: float) -> np.ndarray:
    if not hazard_threshold > 0:
        raise ConfigError("alloc.hazard_threshold must be > 0")
    pred = np.asarray(predicted, dtype=float)
    return np.clip(np.maximum(pred, 0.0) / hazard_threshold, 0.0, 1.0)


def _order(scores: np.ndarray) -> PriorityOrder:
    keys = np.round(scores, TIE_DECIMALS)
    ids = np.arange(scores.shape[0])
    seq = np.lexsort((ids, -keys))
    return PriorityOrder(tuple(int(s) for s in seq), scores)


def combined_order(scores: ExpertScores, weights: ExpertWeights) -> PriorityOrder:
    lam = weights.as_array()
    combined = lam[0] * scores.tu + lam[1] * scores.if_ + lam[2] * scores.at
    return _order(combined)


def expert_order(scores: ExpertScores, which: Expert) -> PriorityOrder:
    return _order(np.array(scores.factor(which), dtype=float))


def sequence_similarity(seq_a: Sequence[int], seq_b: Sequence[int], k: int, reversed_weights: bool = False) -> int:
    """Position-weighted agreement ``sum_{i=1..k} i * [a_i == b_i]``.

    With ``reversed_weights`` position i carries weight ``k - i + 1`` instead,
    so agreement near the head of the order counts most.
    """
    if len(seq_a) != len(seq_b) or sorted(seq_a) != sorted(seq_b):
        raise InputDomainError("sequences must be permutations of the same ids")
    if not 1 <= k <= len(seq_a):
        raise InputDomainError(f"k={k} outside 1..{len(seq_a)}")
    total = 0
    for i in range(1, k + 1):
        if seq_a[i - 1] == seq_b[i - 1]:
            total += (k - i + 1) if reversed_weights else i
    return total


def expert_loss(cycle_rmse: float, similarity: int, rmse_scale: float | None = None, k: int | None = None) -> float:
    """Loss ``rmse * similarity``, rescaled by ``rmse_scale * k(k+1)/2`` when both are given."""
    if cycle_rmse < 0 or similarity < 0:
        raise InputDomainError("rmse and similarity must be nonnegative")
    raw = cycle_rmse * similarity
    if rmse_scale is None or k is None:
        return float(raw)
    norm = rmse_scale * k * (k + 1) / 2
    return float(raw / norm) if norm > 0 else 0.0


def ewiem_update(weights: ExpertWeights, losses) -> ExpertWeights:
    """Multiplicative update ``lam_i * exp(-eta * loss_i)`` followed by renormalization."""
    ell = np.asarray(losses, dtype=float)
    if ell.shape != (3,) or not np.all(np.isfinite(ell)) or np.any(ell < 0):
        raise InputDomainError("losses must be three finite nonnegative numbers")
    # Shifting by the smallest loss cancels in the renormalization and avoids underflow.
    lam = weights.as_array() * np.exp(-weights.eta * (ell - ell.min()))
    lam = np.maximum(lam / lam.sum(), np.finfo(float).tiny)
    return ExpertWeights(tuple(lam / lam.sum()), weights.eta)


def _check_k(k: int, S: int) -> None:
    if not 1 <= k <= S:
        raise InputDomainError(f"k={k} outside 1..{S}")


def select_topk(order: PriorityOrder, k: int, t: int = 0) -> TaskAssignment:
    _check_k(k, len(order.sequence))
    return TaskAssignment(frozenset(order.sequence[:k]), t)


def baseline_random(S: int, k: int, rng: np.random.Generator, t: int = 0) -> TaskAssignment:
    _check_k(k, S)
    return TaskAssignment(frozenset(int(s) for s in rng.choice(S, size=k, replace=False)), t)


def baseline_static(fixed_ids: Iterable[int] | None, k: int, S: int | None = None, t: int = 0) -> TaskAssignment:
    ids = frozenset(range(k)) if fixed_ids is None else frozenset(int(s) for s in fixed_ids)
    if len(ids) != k:
        raise ConfigError(f"alloc.static_ids has {len(ids)} distinct ids but alloc.k = {k}")
    if S is not None and any(not 0 <= s < S for s in ids):
        raise ConfigError("alloc.static_ids contains an invalid location id")
    return TaskAssignment(ids, t)


def baseline_coverage(locations: Sequence[Location], k: int, t: int = 0) -> TaskAssignment:
    """Greedy farthest-point (k-center) selection.

    Starts from the smallest id among the endpoints of the farthest pair, then
    repeatedly adds the location farthest from the current selection.
    """
    if any(loc.coords is None for loc in locations):
        raise ConfigError("coverage allocation requires coordinates for every location")
    S = len(locations)
    _check_k(k, S)
    xy = np.array([loc.coords for loc in locations], dtype=float)
    D = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=-1))
    first = int(np.argwhere(D == D.max()).min())
    chosen = [first]
    mind = D[first].copy()
    for _ in range(k - 1):
        mind[chosen] = -np.inf
        nxt = int(np.argmax(mind))  # argmax returns the lowest id on ties
        chosen.append(nxt)
        mind = np.minimum(mind, D[nxt])
    return TaskAssignment(frozenset(chosen), t)


def brute_force_maxmin(coords, k: int) -> set:
    """Exhaustive max-min-distance k-subset (smallest lexicographic on ties); for checking only."""
    xy = np.asarray(coords, dtype=float)
    best, best_val = None, -1.0
    for combo in itertools.combinations(range(len(xy)), k):
        pts = xy[list(combo)]
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        val = d[np.triu_indices(k, 1)].min() if k > 1 else 0.0
        if val > best_val:
            best, best_val = set(combo), val
    return best


class Ewiem:
    """Stateful EWIEM allocator carried through a simulation run."""

    def __init__(self, k: int, eta: float = 0.1, rmse_scale: float = 0.0, sim_reversed: bool = False):
        self.k = k
        self.weights = ExpertWeights(eta=eta)
        self.rmse_scale = rmse_scale
        self.sim_reversed = sim_reversed
        self._last = None

    def assign(self, scores: ExpertScores, t: int = 0) -> TaskAssignment:
        order = combined_order(scores, self.weights)
        self._last = (order, scores)
        return select_topk(order, self.k, t)

    def losses(self, cycle_rmse: float) -> np.ndarray:
        order, scores = self._last
        self.rmse_scale = max(self.rmse_scale, cycle_rmse)
        return np.array([
            expert_loss(
                cycle_rmse,
                sequence_similarity(order.sequence, expert_order(scores, e).sequence, self.k, self.sim_reversed),
                self.rmse_scale,
                self.k,
            )
            for e in Expert
        ])

    def update(self, cycle_rmse: float) -> np.ndarray:
        ell = self.losses(cycle_rmse)
        self.weights = ewiem_update(self.weights, ell)
        return ell
