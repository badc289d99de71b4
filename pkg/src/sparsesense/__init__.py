"""Sparse collaborative sensing: spatially mixed autoregressive prediction with closed-loop task allocation."""

from .core import (
    ConfigError,
    InputDomainError,
    InsufficientHistoryError,
    Location,
    MeasurementPanel,
    NumericalError,
    ParseError,
    SensingError,
    fuse_observations,
    rmse,
)
from .dsar import DsarConfig, DsarModel
from .simulate import (
    AllocConfig,
    SimulationConfig,
    SyntheticSpec,
    HotspotSpec,
    WeightsConfig,
    apply_sparsity,
    compare_allocations,
    generate_synthetic,
    run_closed_loop,
    sparsity_sweep,
)
from .weights import SpatialWeightSet

__version__ = "0.1.0"
