"""symid: attractor reconstruction, fragment symmetry mining, model identification."""

from .embedding import Trajectory, delay_embed, estimate_lag
from .fragments import Fragment, MarkerList, enumerate_fragments, place_markers, resample_fragment
from .geometry import Descriptor, find_axis, normalize, transform_between
from .model import IdentifiedModel, compare, fit_model, simulate
from .pipeline import InputSpec, run_pipeline
from .selection import CandidateSet, GaConfig, fitness, pairwise_matrix, select_optimal
from .signal_io import (
    PipelineConfig,
    RosslerParams,
    TimeSeries,
    config_from_dict,
    generate_rossler,
    load_series,
    parse_config,
    write_series,
)
from .spectral import DistanceWeights, SpectralSignature, dft_descriptor, distance, inverse_dft

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "Descriptor",
    "DistanceWeights",
    "Fragment",
    "GaConfig",
    "IdentifiedModel",
    "InputSpec",
    "MarkerList",
    "PipelineConfig",
    "RosslerParams",
    "SpectralSignature",
    "TimeSeries",
    "Trajectory",
    "compare",
    "config_from_dict",
    "delay_embed",
    "dft_descriptor",
    "distance",
    "enumerate_fragments",
    "estimate_lag",
    "find_axis",
    "fit_model",
    "fitness",
    "generate_rossler",
    "inverse_dft",
    "load_series",
    "normalize",
    "pairwise_matrix",
    "parse_config",
    "place_markers",
    "resample_fragment",
    "run_pipeline",
    "select_optimal",
    "simulate",
    "transform_between",
    "write_series",
]
