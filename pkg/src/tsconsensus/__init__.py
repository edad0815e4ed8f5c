"""Leader-following consensus on time scales: decomposition, exponential bounds, certification, simulation."""

__version__ = "0.1.0"

from .certify import Certificate, CertifyConfig, certify, compute_sum_i, envelope
from .kernels import BACKEND
from .scenario import Scenario, load_builtin, load_scenario
from .simulate import Trajectory, delta_step, dense_integrate, run, variation_of_constants
from .spectral import (
    BoundConstants,
    ConditionsViolated,
    EigenSystem,
    GammaSpec,
    compute_bound_constants,
    eigendecompose,
    lemma1_bounds,
    lemma3_bound,
    scalar_ts_exponential,
    spectral_norm_exponential,
    ts_matrix_exponential,
)
from .system import DynamicsSpec, StabilitySystem, TrajectorySpec
from .timescale import (
    FamilySpec,
    PointClass,
    SegmentDecomposition,
    TimeScale,
    build_explicit,
    build_family,
    classify,
    decompose,
    mu,
    scattered_points_in,
    sigma,
)
