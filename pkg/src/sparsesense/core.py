"""Domain types and shared metrics for sparse collaborative sensing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

# Masked-out cells hold a quiet NaN. Numeric code must consult the mask instead.
SENTINEL = np.nan


class SensingError(Exception):
    """Base class for all errors raised by this package."""


class InputDomainError(SensingError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(SensingError, ValueError):
    """A configuration value is missing, mistyped or out of range."""


class ParseError(ConfigError):
    """An input file could not be parsed."""


class InsufficientHistoryError(SensingError):
    """Not enough cycles of history for the requested computation."""


class NumericalError(SensingError, ArithmeticError):
    """A numerical routine failed (e.g. a singular normal system)."""


@dataclass(frozen=True)
class Location:
    id: int
    name: str = ""
    coords: Optional[tuple[float, float]] = None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeasurementPanel:
    """S x T measurements with an observation mask (True = observed).

    Unobserved cells carry ``SENTINEL``; only ``mask`` decides what is data.
    """

    locations: tuple[Location, ...]
    values: np.ndarray
    mask: np.ndarray
    cycle_period: str = "1h"

    def __post_init__(self):
        locs = tuple(self.locations)
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InputDomainError(f"values must be a non-empty S x T matrix, got shape {values.shape}")
        if mask.shape != values.shape:
            raise InputDomainError(f"mask shape {mask.shape} != values shape {values.shape}")
        if len(locs) != values.shape[0]:
            raise InputDomainError(f"{len(locs)} locations for {values.shape[0]} rows")
        if [loc.id for loc in locs] != list(range(len(locs))):
            raise InputDomainError("location ids must be dense 0..S-1 in row order")
        with_coords = sum(loc.coords is not None for loc in locs)
        if 0 < with_coords < len(locs):
            raise InputDomainError("either all locations carry coords or none do")
        if not np.all(np.isfinite(values[mask])):
            raise InputDomainError("observed cells must be finite")
        values[~mask] = SENTINEL
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "mask", _readonly(mask))

    @property
    def S(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def has_coords(self) -> bool:
        return self.locations[0].coords is not None

    def coords(self) -> np.ndarray:
        """S x 2 array of location coordinates."""
        if not self.has_coords:
            raise ConfigError("panel locations carry no coordinates")
        return np.array([loc.coords for loc in self.locations], dtype=float)

    def with_mask(self, mask: np.ndarray) -> "MeasurementPanel":
        """Copy of the panel with a (more restrictive) mask."""
        mask = np.asarray(mask, dtype=bool)
        values = np.where(self.mask, self.values, 0.0)
        return MeasurementPanel(self.locations, values, mask & self.mask, self.cycle_period)

    @classmethod
    def from_array(cls, values, mask=None, coords=None, names=None, cycle_period="1h"):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        S = values.shape[0]
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        names = names if names is not None else [f"s{s}" for s in range(S)]
        locs = tuple(
            Location(s, names[s], None if coords is None else (float(coords[s][0]), float(coords[s][1])))
            for s in range(S)
        )
        return cls(locs, values, mask, cycle_period)


@dataclass(frozen=True)
class CycleState:
    t: int
    observed_ids: frozenset
    fused: np.ndarray
    predicted: np.ndarray = field(repr=False)


def fuse_observations(predicted, observations: Mapping[int, float]) -> np.ndarray:
    """Overlay observed values on a prediction vector.

    Args:
        predicted: length-S vector of model predictions.
        observations: sparse map from location id to observed value.

    Returns:
        New S-vector equal to ``observations[s]`` where present, else ``predicted[s]``.
    """
    out = np.array(predicted, dtype=float)
    if out.ndim != 1:
        raise InputDomainError("predicted must be a vector")
    S = out.shape[0]
    for s, v in observations.items():
        if not (0 <= int(s) < S) or int(s) != s:
            raise InputDomainError(f"invalid location id {s!r} for S={S}")
        out[int(s)] = v
    return out


def rmse(predicted, actual, subset: Sequence[int] | set) -> float:
    """Root mean square error over a subset of location ids."""
    idx = np.array(sorted(subset), dtype=int)
    if idx.size == 0:
        raise InputDomainError("rmse over an empty subset")
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise InputDomainError("predicted and actual must be vectors of equal length")
    if idx.min() < 0 or idx.max() >= p.shape[0]:
        raise InputDomainError("subset contains an invalid location id")
    d = p[idx] - a[idx]
    return float(np.sqrt(np.mean(d * d)))
