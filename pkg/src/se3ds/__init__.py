"""Stable SE(3) pose motion policies learned from demonstrations.

Pipeline: demonstrations -> preprocess -> mixture fit -> policy learn ->
rollout / eval.  See the README for the CLI.
"""

from .errors import (
    AntipodalError,
    DegenerateClusterError,
    DimensionMismatchError,
    EmptySequenceError,
    InsufficientDataError,
    InvalidPathError,
    NoConvergenceError,
    ParseError,
    Se3dsError,
    TooShortError,
)
from .manifold import (
    AngularVelocity,
    TangentVector,
    UnitQuaternion,
    angular_velocity_to_increment,
    canonicalize_signs,
    displacement_to_angular_velocity,
    exp_map,
    frechet_mean,
    geodesic_distance,
    log_map,
    parallel_transport,
    rotation_distance,
    tangent_covariance,
)
from .metrics import arc_length, dtw_position, quaternion_error
from .mixture import MODE_COUPLED, MODE_ORIENTATION, GaussianComponent, MixtureModel, fit
from .policy import Se3Policy, fit_stable_linear_maps, learn
from .preprocess import Demonstration, PreprocessedDataset, preprocess
from .rollout import Perturbation, RolloutConfig, RolloutTrace, run
from .synthetic import TASKS, SyntheticTask, generate

__version__ = "0.1.0"

__all__ = [
    "AngularVelocity",
    "AntipodalError",
    "DegenerateClusterError",
    "Demonstration",
    "DimensionMismatchError",
    "EmptySequenceError",
    "GaussianComponent",
    "InsufficientDataError",
    "InvalidPathError",
    "MixtureModel",
    "MODE_COUPLED",
    "MODE_ORIENTATION",
    "NoConvergenceError",
    "ParseError",
    "Perturbation",
    "PreprocessedDataset",
    "RolloutConfig",
    "RolloutTrace",
    "Se3Policy",
    "Se3dsError",
    "SyntheticTask",
    "TASKS",
    "TangentVector",
    "TooShortError",
    "UnitQuaternion",
    "angular_velocity_to_increment",
    "arc_length",
    "canonicalize_signs",
    "displacement_to_angular_velocity",
    "dtw_position",
    "exp_map",
    "fit",
    "fit_stable_linear_maps",
    "frechet_mean",
    "generate",
    "geodesic_distance",
    "learn",
    "log_map",
    "parallel_transport",
    "preprocess",
    "quaternion_error",
    "rotation_distance",
    "run",
    "tangent_covariance",
]
