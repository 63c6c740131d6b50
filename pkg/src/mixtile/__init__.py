"""Geostatistical modeling on tiled covariance matrices with a precision band.

Matern covariance assembly, mixed-precision tile Cholesky, Gaussian
maximum-likelihood fitting and kriging prediction, with deterministic
results for any worker count.
"""

from .covmath import (
    EARTH_RADIUS_KM,
    DistanceMetric,
    MaternParams,
    bessel_k,
    distance,
    gamma,
    matern,
    matern_array,
    pairwise_distance,
)
from .factor import (
    CholeskyFactor,
    FactorizationError,
    FlopCount,
    cholesky,
    logdet,
    matvec_lower,
    planned_flops,
    reconstruction_error,
    solve,
)
from .geodata import (
    DatasetFormatError,
    FoldAssignment,
    GeoDataset,
    derive_seed,
    generate_field,
    generate_locations,
    kfold_split,
    morton_sort,
    read_dataset,
    write_dataset,
)
from .mle import (
    EstimationError,
    FitResult,
    LikelihoodEval,
    OptimizerConfig,
    TracePoint,
    fit_matern,
    loglik,
    profile_loglik,
)
from .predict import PredictionReport, krige, pmse_kfold
from .tilestore import (
    Mode,
    PrecisionOverflowError,
    PrecisionPolicy,
    TileAssembler,
    TileMatrix,
    assemble_covariance,
    band_member,
    percent_to_thickness,
)

__version__ = "0.1.0"

__all__ = [
    "EARTH_RADIUS_KM",
    "CholeskyFactor",
    "DatasetFormatError",
    "DistanceMetric",
    "EstimationError",
    "FactorizationError",
    "FitResult",
    "FlopCount",
    "FoldAssignment",
    "GeoDataset",
    "LikelihoodEval",
    "MaternParams",
    "Mode",
    "OptimizerConfig",
    "PrecisionOverflowError",
    "PrecisionPolicy",
    "PredictionReport",
    "TileAssembler",
    "TileMatrix",
    "TracePoint",
    "assemble_covariance",
    "band_member",
    "bessel_k",
    "cholesky",
    "derive_seed",
    "distance",
    "fit_matern",
    "gamma",
    "generate_field",
    "generate_locations",
    "kfold_split",
    "krige",
    "logdet",
    "loglik",
    "matern",
    "matern_array",
    "matvec_lower",
    "morton_sort",
    "pairwise_distance",
    "percent_to_thickness",
    "planned_flops",
    "pmse_kfold",
    "profile_loglik",
    "read_dataset",
    "reconstruction_error",
    "solve",
    "write_dataset",
]
