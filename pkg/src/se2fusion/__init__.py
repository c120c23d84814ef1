"""Pose-graph fusion of absolute GNSS fixes with relative vehicle
odometry on SE(2)."""

from .builders import BuilderConfig, NodeRate, Strategy, build, \
    full_rate_trajectory, initialize_from_odometry, vehicle_trajectory
from .dataset import Dataset, ExperimentConfig, TruthTrack, export_results, \
    load_dataset, run_batch, run_experiment
from .errors import BadInformationError, DivisionByZeroMetricError, \
    EmptyInputError, GaugeUnderconstrainedError, InsufficientCoverageError, \
    MixedUtmZonesError, NeedTwoPosesError, NonMonotonicTimestampsError, \
    OutOfUtmDomainError, ParseError, SingularSystemError, \
    TooFewReadingsError, UnknownNodeError
from .gnss import GnssReading, RejectionResult, gnss_information, \
    latlon_to_utm, reject_outliers
from .graph import Edge, EdgeKind, Node, NodeKind, PoseGraph
from .graph import load as load_graph
from .graph import save as save_graph
from .metrics import MetricsReport, PpsPose, accuracy, compute_metrics, \
    improvements, match_pps, max_offset, precision
from .odometry import OdometrySample, OdometryStream, PreintegratedOdometry, \
    odometry_information, preintegrate
from .se2 import Pose2, compose, edge_jacobians, edge_residual, exp_map, \
    inverse, log_map, retract, wrap_angle
from .solver import Method, SolveReport, SolverConfig, Termination, \
    build_linear_system, dogleg_step, optimize
from .synth import GnssErrorModel, OdoErrorModel, TrajectoryProfile, \
    generate_synthetic

__version__ = "0.1.0"
