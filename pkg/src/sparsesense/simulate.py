"""Closed-loop sensing simulation, synthetic panels and experiment sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import allocation as alloc
from . import dsar
from .core import (
    Location,
    ConfigError,
    InputDomainError,
    InsufficientHistoryError,
    MeasurementPanel,
    fuse_observations,
    rmse,
)
from .weights import SpatialWeightSet, compute_weights, distance_weights

ALLOC_STRATEGIES = ("ewiem", "random", "static", "coverage")
PREDICTORS = ("dsar", "ar", "persistence", "mean")
LOSS_SCOPES = ("unselected", "all")


@dataclass(frozen=True)
class AllocConfig:
    strategy: str = "ewiem"
    k: Optional[int] = None  # None -> ceil(S / 4)
    eta: float = 0.1
    tu_window: int = 10
    hazard_threshold: float = 150.0
    static_ids: Optional[tuple] = None
    loss_scope: str = "unselected"
    sim_reversed: bool = False

    def __post_init__(self):
        if self.strategy not in ALLOC_STRATEGIES:
            raise ConfigError(f"alloc.strategy must be one of {ALLOC_STRATEGIES}")
        if self.k is not None and (not isinstance(self.k, int) or self.k < 1):
            raise ConfigError("alloc.k must be an integer >= 1")
        if not self.eta >= 0:
            raise ConfigError("alloc.eta must be >= 0")
        if not isinstance(self.tu_window, int) or self.tu_window < 1:
            raise ConfigError("alloc.tu_window must be an integer >= 1")
        if not self.hazard_threshold > 0:
            raise ConfigError("alloc.hazard_threshold must be > 0")
        if self.loss_scope not in LOSS_SCOPES:
            raise ConfigError(f"alloc.loss_scope must be one of {LOSS_SCOPES}")
        if self.static_ids is not None:
            object.__setattr__(self, "static_ids", tuple(int(s) for s in self.static_ids))


@dataclass(frozen=True)
class WeightsConfig:
    rank: Optional[int] = None  # None -> min(5, S - 1)
    nmf_iters: int = 200
    bandwidth: float = 0.25
    per_lag: bool = False

    def __post_init__(self):
        if self.rank is not None and (not isinstance(self.rank, int) or self.rank < 1):
            raise ConfigError("weights.rank must be an integer >= 1")
        if not isinstance(self.nmf_iters, int) or self.nmf_iters < 0:
            raise ConfigError("weights.nmf_iters must be an integer >= 0")
        if not self.bandwidth > 0:
            raise ConfigError("weights.bandwidth must be > 0")


@dataclass(frozen=True)
class SimulationConfig:
    cycles: Optional[int] = None  # None -> every cycle after warmup
    warmup: Optional[int] = None  # None -> model window
    seed: int = 0
    sparsity: float = 0.0
    predictor: str = "dsar"
    pooled: bool = False
    model: dsar.DsarConfig = field(default_factory=dsar.DsarConfig)
    alloc: AllocConfig = field(default_factory=AllocConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)

    def __post_init__(self):
        if self.cycles is not None and (not isinstance(self.cycles, int) or self.cycles < 1):
            raise ConfigError("sim.cycles must be an integer >= 1")
        if self.warmup is not None and (not isinstance(self.warmup, int) or self.warmup < self.model.window):
            raise ConfigError("sim.warmup must be an integer >= model.window")
        if not 0 <= self.sparsity < 1:
            raise ConfigError("sim.sparsity must lie in [0, 1)")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"model.predictor must be one of {PREDICTORS}")

    def resolve(self, S: int, T: int) -> tuple[int, int, int]:
        """Concrete ``(k, warmup, cycles)`` for a panel of S locations and T cycles."""
        k = self.alloc.k if self.alloc.k is not None else math.ceil(S / 4)
        if not 1 <= k <= S:
            raise ConfigError(f"alloc.k = {k} outside 1..{S}")
        warmup = self.warmup if self.warmup is not None else self.model.window
        if self.weights.per_lag and warmup < self.model.window + self.model.p - 1:
            raise ConfigError("weights.per_lag needs sim.warmup >= model.window + model.p - 1")
        cycles = self.cycles if self.cycles is not None else T - warmup
        if cycles < 1 or T < warmup + cycles:
            raise InsufficientHistoryError(f"panel has {T} cycles, run needs warmup {warmup} + {max(cycles, 1)}")
        return k, warmup, cycles

    def with_alloc(self, **kw) -> "SimulationConfig":
        return replace(self, alloc=replace(self.alloc, **kw))


@dataclass(frozen=True)
class CycleReport:
    t: int
    assignment: alloc.TaskAssignment
    cycle_rmse: float
    lambdas: tuple
    fused: np.ndarray
    predicted: np.ndarray
    n_scored: int


# --------------------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class HotspotSpec:
    amplitude: float = 10.0
    width: float = 0.15
    step: float = 0.05


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    ``true_phi`` is an S-vector (p = 1) or an S x p matrix; ``None`` draws
    each location's coefficient uniformly from ``phi_range`` (split evenly over
    ``p`` lags).
    """

    S: int = 8
    T: int = 300
    true_phi: Optional[object] = None
    p: int = 1
    phi_range: tuple = (0.2, 0.8)
    weight_kind: str = "kernel"
    bandwidth: float = 0.25
    noise_sigma: float = 0.1
    hotspot: Optional[HotspotSpec] = None
    seed: int = 0

    def __post_init__(self):
        if self.S < 1 or self.T < 1 or self.p < 1:
            raise ConfigError("S, T and p must be >= 1")
        if self.weight_kind not in ("kernel", "identity"):
            raise ConfigError("weight_kind must be 'kernel' or 'identity'")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.true_phi is not None:
            phi = np.asarray(self.true_phi, dtype=float).reshape(self.S, -1)
            if phi.shape[1] != self.p:
                raise ConfigError(f"true_phi must have {self.p} lag column(s)")
            # A unit root is allowed (persistence); explosive rows are not.
            if np.any(np.abs(phi).sum(axis=1) > 1):
                raise ConfigError("true_phi rows must satisfy sum_i |phi_i| <= 1")


def generate_synthetic(spec: SyntheticSpec) -> tuple[MeasurementPanel, dsar.DsarModel]:
    """Iterate the autoregression from the all-ones state (pre-sample lags are also ones)."""
    rng = np.random.default_rng(spec.seed)
    S, T, p = spec.S, spec.T, spec.p
    coords = rng.uniform(0.0, 1.0, size=(S, 2))
    if spec.true_phi is None:
        lo, hi = spec.phi_range
        phi = np.repeat(rng.uniform(lo, hi, size=(S, 1)) / p, p, axis=1)
    else:
        phi = np.asarray(spec.true_phi, dtype=float).reshape(S, p)
    locs = [Location(s, f"s{s}", (float(coords[s, 0]), float(coords[s, 1]))) for s in range(S)]
    if spec.weight_kind == "identity":
        weights = SpatialWeightSet.identity(S, p)
    else:
        weights = distance_weights(locs, spec.bandwidth, p)

    X = np.empty((S, T))
    X[:, 0] = 1.0
    ones = np.ones(S)
    for t in range(1, T):
        x = spec.noise_sigma * rng.standard_normal(S) if spec.noise_sigma > 0 else np.zeros(S)
        for i in range(1, p + 1):
            x += phi[:, i - 1] * (weights.lag(i) @ (X[:, t - i] if t >= i else ones))
        X[:, t] = x

    values = X
    if spec.hotspot is not None:
        values = X + _hotspot_field(coords, T, spec.hotspot, rng)
    panel = MeasurementPanel.from_array(values, coords=coords, names=[loc.name for loc in locs])
    truth = dsar.DsarModel(phi, weights, np.full(S, spec.noise_sigma**2), 0)
    return panel, truth


def _hotspot_field(coords: np.ndarray, T: int, hs: HotspotSpec, rng: np.random.Generator) -> np.ndarray:
    """Gaussian bump whose center does a reflected random walk in the unit square."""
    center = rng.uniform(0.0, 1.0, size=2)
    out = np.empty((coords.shape[0], T))
    for t in range(T):
        d2 = ((coords - center) ** 2).sum(axis=1)
        out[:, t] = hs.amplitude * np.exp(-d2 / (2 * hs.width**2))
        center = center + hs.step * rng.standard_normal(2)
        center = np.abs(center)
        center = np.where(center > 1.0, 2.0 - center, center)
    return out


def apply_sparsity(panel: MeasurementPanel, fraction: float, seed: int) -> MeasurementPanel:
    """Mask ``floor(fraction * S * T)`` observed cells uniformly, keeping one per cycle."""
    if not 0 <= fraction < 1:
        raise InputDomainError("sparsity fraction must lie in [0, 1)")
    S, T = panel.S, panel.T
    target = int(math.floor(fraction * S * T + 1e-9))  # absorb binary representation error (0.7 * 120)
    if target == 0:
        return panel
    rng = np.random.default_rng(seed)
    mask = panel.mask.copy()
    cells = np.flatnonzero(mask.T.ravel())  # cycle-major: cell = t * S + s
    per_cycle = mask.sum(axis=0)
    removed = 0
    for cell in rng.permutation(cells):
        if removed == target:
            break
        t, s = divmod(int(cell), S)
        if per_cycle[t] <= 1:
            continue
        mask[s, t] = False
        per_cycle[t] -= 1
        removed += 1
    return panel.with_mask(mask)


# --------------------------------------------------------------------------- closed loop


def warmup_history(panel: MeasurementPanel, warmup: int) -> list[np.ndarray]:
    """Fused vectors for the bootstrap prefix.

    Every cell the panel observes is used; gaps carry the location's previous
    value forward (at cycle 0: the mean of that cycle's observations).
    """
    vals, mask = panel.values, panel.mask
    observed = mask[:, :warmup]
    if not observed.any():
        raise InsufficientHistoryError("warmup window contains no observations")
    fallback = float(vals[:, :warmup][observed].mean())
    hist = []
    prev = None
    for t in range(warmup):
        m = mask[:, t]
        if prev is None:
            fill = np.full(panel.S, float(vals[m, t].mean()) if m.any() else fallback)
        else:
            fill = prev
        cur = np.where(m, np.where(m, vals[:, t], 0.0), fill)
        hist.append(cur)
        prev = cur
    return hist


class _Predictor:
    """Refit-on-cadence one-step predictor over the fused history."""

    def __init__(self, cfg: SimulationConfig, panel: MeasurementPanel):
        self.cfg = cfg
        self.panel = panel
        self.model = None

    def refit(self, fused: list, t: int) -> None:
        cfg = self.cfg
        if cfg.predictor not in ("dsar", "ar"):
            return
        L, p = cfg.model.window, cfg.model.p
        strategy = cfg.model.weight_strategy if cfg.predictor == "dsar" else "identity"
        W = compute_weights(
            strategy,
            fused,
            t,
            L,
            p,
            locations=self.panel.locations,
            rank=cfg.weights.rank,
            nmf_iters=cfg.weights.nmf_iters,
            bandwidth=cfg.weights.bandwidth,
            per_lag=cfg.weights.per_lag,
            seed=cfg.seed,
        )
        model = dsar.fit(fused[t - L : t], W, cfg.model, fitted_at=t)
        self.model = dsar.stabilize(model) if cfg.model.stabilize else model

    def predict(self, fused: list, t: int) -> np.ndarray:
        if self.cfg.predictor == "persistence":
            return fused[t - 1].copy()
        if self.cfg.predictor == "mean":
            L = self.cfg.model.window
            return np.full(self.panel.S, float(np.mean(fused[t - L : t])))
        return dsar.predict_next(self.model, fused, t)


def run_closed_loop(panel: MeasurementPanel, cfg: SimulationConfig) -> list[CycleReport]:
    """Simulate sensing cycles ``warmup .. warmup + cycles - 1``.

    Each cycle: predict from the fused history, score the experts, pick ``k``
    locations, reveal the panel's values there (cells the panel masks yield
    nothing), fuse, score the error on the loss-scope locations the panel
    observes, update the expert weights, and refresh W and phi every
    ``model.refresh_interval`` cycles.
    """
    S = panel.S
    k, warmup, cycles = cfg.resolve(S, panel.T)
    ac = cfg.alloc
    rng = np.random.default_rng(cfg.seed)
    vals, mask = panel.values, panel.mask

    fused = warmup_history(panel, warmup)
    last_sensed = np.full(S, -1)
    for s in range(S):
        seen = np.flatnonzero(mask[s, :warmup])
        if seen.size:
            last_sensed[s] = seen[-1]

    predictor = _Predictor(cfg, panel)
    predictor.refit(fused, warmup)
    ewiem = alloc.Ewiem(k, ac.eta, sim_reversed=ac.sim_reversed) if ac.strategy == "ewiem" else None
    static = alloc.baseline_static(ac.static_ids, k, S) if ac.strategy == "static" else None
    coverage = alloc.baseline_coverage(panel.locations, k) if ac.strategy == "coverage" else None
    initial_lambdas = alloc.ExpertWeights(eta=ac.eta).lambdas

    predictions: list[np.ndarray] = []
    reports = []
    for t in range(warmup, warmup + cycles):
        if t > warmup and (t - warmup) % cfg.model.refresh_interval == 0:
            predictor.refit(fused, t)
        xhat = predictor.predict(fused, t)
        predictions.append(xhat)

        if ewiem is not None:
            scores = alloc.ExpertScores(
                alloc.temporal_uncertainty(predictions[-ac.tu_window :]),
                alloc.inference_freshness(last_sensed, t),
                alloc.alertness(xhat, ac.hazard_threshold),
                t,
            )
            assignment = ewiem.assign(scores, t)
        elif static is not None:
            assignment = replace(static, t=t)
        elif coverage is not None:
            assignment = replace(coverage, t=t)
        else:
            assignment = alloc.baseline_random(S, k, rng, t)

        chosen = assignment.sorted_ids()
        observations = {s: float(vals[s, t]) for s in chosen if mask[s, t]}
        f = fuse_observations(xhat, observations)
        fused.append(f)
        last_sensed[chosen] = t

        if ac.loss_scope == "unselected":
            scope = [s for s in range(S) if s not in assignment.ids and mask[s, t]]
        else:
            scope = [s for s in range(S) if mask[s, t]]
        if scope:
            truth = np.where(mask[:, t], vals[:, t], 0.0)
            err = rmse(f, truth, scope)
        elif k == S:
            err = 0.0
        else:
            err = float("nan")  # nothing observable to score this cycle

        if ewiem is not None and not math.isnan(err):
            ewiem.update(err)
        lambdas = ewiem.weights.lambdas if ewiem is not None else initial_lambdas
        reports.append(CycleReport(t, assignment, err, lambdas, f, xhat, len(scope)))
    return reports


def overall_rmse(reports: Sequence[CycleReport], pooled: bool = False) -> float:
    """Unweighted mean of per-cycle RMSE, or the RMSE pooled over all scored cells."""
    scored = [r for r in reports if not math.isnan(r.cycle_rmse)]
    if not scored:
        return float("nan")
    if pooled:
        n = sum(r.n_scored for r in scored)
        if n == 0:
            return 0.0
        return math.sqrt(sum(r.cycle_rmse**2 * r.n_scored for r in scored) / n)
    return float(np.mean([r.cycle_rmse for r in scored]))


# --------------------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ReportRow:
    strategy: str
    param: float
    mean_rmse: float
    stddev: float
    repeats: int


@dataclass
class ExperimentResult:
    rows: list
    series: dict  # (strategy, param, repeat) -> list[CycleReport]


def _row(strategy: str, param: float, values: list) -> ReportRow:
    arr = np.asarray(values, dtype=float)
    return ReportRow(strategy, float(param), float(np.mean(arr)), float(np.std(arr)), len(arr))


def sparsity_sweep(
    panel: MeasurementPanel,
    sparsities: Sequence[float],
    cfg: SimulationConfig,
    repeats: int = 1,
    predictors: Sequence[str] | None = None,
) -> ExperimentResult:
    """Mean overall RMSE per (predictor, sparsity).

    Run ``j`` of sparsity level ``i`` uses seed ``cfg.seed ^ (i * repeats + j)``
    for both its mask and its closed loop, so every predictor sees the same masks.
    """
    predictors = list(predictors) if predictors else [cfg.predictor]
    for name in predictors:
        if name not in PREDICTORS:
            raise ConfigError(f"unknown predictor {name!r}")
    rows, series = [], {}
    for name in predictors:
        for i, frac in enumerate(sorted(sparsities)):
            vals = []
            for j in range(repeats):
                seed = cfg.seed ^ (i * repeats + j)
                sparse = apply_sparsity(panel, frac, seed)
                run_cfg = replace(cfg, seed=seed, predictor=name, sparsity=frac)
                reports = run_closed_loop(sparse, run_cfg)
                series[(name, float(frac), j)] = reports
                vals.append(overall_rmse(reports, cfg.pooled))
            rows.append(_row(name, frac, vals))
    rows.sort(key=lambda r: (r.strategy, r.param))
    return ExperimentResult(rows, series)


def compare_allocations(
    panel: MeasurementPanel,
    strategies: Sequence[str],
    k_values: Sequence[int],
    cfg: SimulationConfig,
    repeats: int = 1,
) -> ExperimentResult:
    """Mean overall RMSE per (allocation strategy, k); strategies share seeds per (k, repeat)."""
    for name in strategies:
        if name not in ALLOC_STRATEGIES:
            raise ConfigError(f"unknown allocation strategy {name!r}")
    rows, series = [], {}
    for name in strategies:
        for i, k in enumerate(sorted(k_values)):
            vals = []
            for j in range(repeats):
                seed = cfg.seed ^ (i * repeats + j)
                sparse = apply_sparsity(panel, cfg.sparsity, seed)
                run_cfg = replace(cfg, seed=seed).with_alloc(strategy=name, k=int(k))
                reports = run_closed_loop(sparse, run_cfg)
                series[(name, float(k), j)] = reports
                vals.append(overall_rmse(reports, cfg.pooled))
            rows.append(_row(name, k, vals))
    rows.sort(key=lambda r: (r.strategy, r.param))
    return ExperimentResult(rows, series)
