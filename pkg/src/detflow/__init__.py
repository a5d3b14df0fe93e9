"""Capacity, coding and unfolding tools for deterministic relay networks."""

__version__ = "0.1.0"

from .errors import (
    DetflowError,
    DocumentError,
    LimitError,
    ModelError,
    NetworkError,
    NotLayeredError,
    ShapeError,
)
from .field import RNG_ID, FieldMatrix, make_rng, rank, row_reduce
from .network import (
    GeneralRelayNetwork,
    LinearRelayNetwork,
    NodeFunction,
    layer_structure,
    validate,
)
from .cutset import (
    Cut,
    ProductDistribution,
    achievable_rate,
    entropy_cut_value,
    enumerate_cuts,
    linear_capacity,
    optimize_distribution,
    rank_cut_value,
    transfer_matrix,
)
from .coding import SimulationConfig, build_scheme, estimate_error_rate, run_trial
from .unfolding import lift_steady_cut, unfold, unfolded_cut_value, unfolded_min_cut
from .document import dumps, loads

__all__ = [name for name in dir() if not name.startswith("_")]
