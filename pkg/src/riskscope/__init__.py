"""Differentially private query answering with per-individual risk profiles.

Controllers register tabular data, inspect how each candidate privacy
parameter spreads disclosure risk across the individuals actually in the
dataset, pick the parameter through preference thresholds (optionally via a
private above-threshold release), and track cumulative loss with a dynamic
odometer instead of a fixed total budget.
"""

from .errors import (
    DatasetError,
    EmptyAverageError,
    JournalError,
    OdometerError,
    ParameterError,
    QueryError,
    RiskscopeError,
    SchemaError,
)
from .mechanisms import (
    GAUSSIAN,
    LAPLACE,
    NO_DP,
    MechanismSpec,
    NoiseParams,
    RngStream,
    apply_mechanism,
    noise_params,
)
from .odometer import (
    ALG_RDR,
    ALG_SVT,
    Decision,
    Journal,
    OdometerEntry,
    OdometerState,
    Session,
    truncate_grid,
)
from .queries import (
    L1,
    L2,
    And,
    Leaf,
    Or,
    PisTable,
    Query,
    QueryOutput,
    evaluate_query,
    global_sensitivity,
    neighbor_outputs,
    norm_diff,
    per_instance_sensitivity,
    pis_for_query,
)
from .rdr import (
    ExPostLossTable,
    RdrProfile,
    ex_post_loss,
    ex_post_loss_table,
    output_dependent_rdr,
    pis_summary,
    profile_stats,
    rdr_profile,
    signed_log_likelihood_ratio,
)
from .search import (
    FOUND,
    NO_SUITABLE_EPSILON,
    EpsilonGrid,
    GroupMedianRatio,
    MinMaxRatio,
    NormalizedVariance,
    SearchResult,
    SvtConfig,
    evaluate_preference,
    find_and_release_epsilon,
    find_epsilon_from_rdr,
    svt_above_threshold,
)
from .tabular import (
    Column,
    Dataset,
    ProjectedDataset,
    Schema,
    load_dataset,
    project_dataset,
    project_query_attributes,
)

__version__ = "0.1.0"
