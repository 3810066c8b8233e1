"""Balanced open flow networks from sequential browsing logs.

The package turns per-user visit logs into weighted directed networks
closed by reserved source and sink nodes, and computes the absorbing
random-walk calculus on them: per-node through-flow, dissipation, and
impact, flow distances, scaling-law fits, concentration measures, and an
OLS regression harness, all cross-checked by an independent Monte Carlo
walker oracle.
"""
__version__ = "0.1.0"

from .errors import (
    AllNodesDropped,
    AllZero,
    AttnFlowError,
    DegenerateX,
    DroppedNodesWarning,
    EmptyInput,
    InsufficientData,
    InvalidEdge,
    InvalidSpec,
    MalformedRecord,
    MismatchedNetworks,
    MissingTimestamps,
    NegativeValue,
    NegativeWeight,
    NonMonotonicTimestampsWarning,
    NotCertified,
    SelfEdgeOnSourceOrSink,
    SingularDesign,
    SingularSystem,
    StepCapWarning,
    TooFewPoints,
    TooFewRows,
    UnreachablePair,
    ZeroOutflowRow,
)
from .ingest import (
    LogFormat,
    LogRecord,
    SessionLog,
    parse_log,
    serialize_log,
    sessionize,
    to_transition_edges,
)
from .network import (
    BALANCE_TOL,
    SINK,
    SOURCE,
    FlowNetwork,
    ValidationReport,
    balance,
    build_flow_network,
    certify,
    drop_uncertified,
    read_edges,
    read_network,
    validate,
    write_edges,
    write_network,
)
from ._linalg import DENSE_THRESHOLD
from .flowcalc import (
    FundamentalMatrix,
    NodeFlowStats,
    TransitionMatrix,
    flow_impact,
    flow_impact_double_sum,
    fundamental_matrix,
    node_flows,
    read_stats_csv,
    transition_matrix,
    write_stats_csv,
)
from .distance import (
    PAIRWISE_CAP,
    first_passage,
    pairwise_distances,
    return_times,
    source_distances,
    source_total_distances,
    symmetric_distance,
    total_distance_row,
    write_pairwise,
    write_source_distances,
)
from .stats import (
    ConcentrationReport,
    DuplicationReport,
    FeatureTable,
    PowerLawFit,
    RegressionResult,
    concentration,
    duplication_filter,
    fit_power_law,
    gini,
    ols_regress,
    regression_feature_table,
    write_duplication_csv,
    write_zipf_csv,
    zipf_table,
)
from .oracle import (
    STEP_CAP,
    ComparisonReport,
    EnumerationResult,
    GeneratorSpec,
    WalkEstimate,
    compare,
    enumerate_walks,
    generate,
    simulate_walkers,
    write_estimates_csv,
)

__all__ = [
    "AllNodesDropped",
    "AllZero",
    "AttnFlowError",
    "BALANCE_TOL",
    "ComparisonReport",
    "ConcentrationReport",
    "DegenerateX",
    "DENSE_THRESHOLD",
    "DroppedNodesWarning",
    "DuplicationReport",
    "EmptyInput",
    "EnumerationResult",
    "FeatureTable",
    "FlowNetwork",
    "FundamentalMatrix",
    "GeneratorSpec",
    "InsufficientData",
    "InvalidEdge",
    "InvalidSpec",
    "LogFormat",
    "LogRecord",
    "MalformedRecord",
    "MismatchedNetworks",
    "MissingTimestamps",
    "NegativeValue",
    "NegativeWeight",
    "NodeFlowStats",
    "NonMonotonicTimestampsWarning",
    "NotCertified",
    "PAIRWISE_CAP",
    "PowerLawFit",
    "RegressionResult",
    "SelfEdgeOnSourceOrSink",
    "SessionLog",
    "SingularDesign",
    "SingularSystem",
    "SINK",
    "SOURCE",
    "STEP_CAP",
    "StepCapWarning",
    "TooFewPoints",
    "TooFewRows",
    "TransitionMatrix",
    "UnreachablePair",
    "ValidationReport",
    "WalkEstimate",
    "ZeroOutflowRow",
    "balance",
    "build_flow_network",
    "certify",
    "compare",
    "concentration",
    "drop_uncertified",
    "duplication_filter",
    "enumerate_walks",
    "first_passage",
    "fit_power_law",
    "flow_impact",
    "flow_impact_double_sum",
    "fundamental_matrix",
    "generate",
    "gini",
    "node_flows",
    "ols_regress",
    "pairwise_distances",
    "parse_log",
    "read_edges",
    "read_network",
    "read_stats_csv",
    "regression_feature_table",
    "return_times",
    "serialize_log",
    "sessionize",
    "simulate_walkers",
    "source_distances",
    "source_total_distances",
    "symmetric_distance",
    "to_transition_edges",
    "total_distance_row",
    "transition_matrix",
    "validate",
    "write_duplication_csv",
    "write_edges",
    "write_estimates_csv",
    "write_network",
    "write_pairwise",
    "write_source_distances",
    "write_stats_csv",
    "write_zipf_csv",
    "zipf_table",
    "__version__",
]
