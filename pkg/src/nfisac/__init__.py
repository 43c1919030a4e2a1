"""Near-field extended-target ISAC laboratory.

Voxelized dielectric targets are illuminated by a cross-shaped MIMO array,
solved with a volume-integral-equation forward model and stored as
multi-subcarrier channel tensors. Classical range-azimuth baselines, sensing
metrics, structured training objectives, a cross-task attention operator and
a shared-OFDM rate benchmark operate on those tensors.
"""

from .classical import (EstimationResult, SearchGrid, matched_filter_estimate, periodogram_estimate,
                        steering_vectors)
from .config import RunConfig
from .dataset import ChannelSample, read_container, write_container
from .em import simulate_tensor, solve_total_fields
from .estimators import (ChannelSimulator, ComplexNoise, GlobalPhaseOffset, MatchedFilterLocalizer,
                         PeriodogramLocalizer, RealImagStacker)
from .exceptions import (ContainerError, EstimatorNotApplicableError, InvalidConfigError, NFISACError,
                         SingularityError, SolverError)
from .geometry import ArrayGeometry, FrequencyGrid, build_cross_array, build_frequency_grid
from .metrics import MetricReport, aggregate, planar_error, wrap_angle
from .targets import Material, VoxelTarget, ground_truth, make_procedural_target, place
from .tradeoff import RateConfig, ergodic_rate_analytic, ergodic_rate_mc, qos_min_bandwidth

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "ChannelSample", "ChannelSimulator", "ComplexNoise", "ContainerError",
    "EstimationResult", "EstimatorNotApplicableError", "FrequencyGrid", "GlobalPhaseOffset",
    "InvalidConfigError", "MatchedFilterLocalizer", "Material", "MetricReport", "NFISACError",
    "PeriodogramLocalizer", "RateConfig", "RealImagStacker", "RunConfig", "SearchGrid",
    "SingularityError", "SolverError", "VoxelTarget", "aggregate", "build_cross_array",
    "build_frequency_grid", "ergodic_rate_analytic", "ergodic_rate_mc", "ground_truth",
    "make_procedural_target", "matched_filter_estimate", "periodogram_estimate", "place",
    "planar_error", "qos_min_bandwidth", "read_container", "simulate_tensor", "solve_total_fields",
    "steering_vectors", "wrap_angle", "write_container",
]
