"""blocknets: block-grown random networks.

Grow hooking networks (blocks fused at a hook) and bipolar networks
(directed blocks splicing arcs) under linear preferential attachment,
derive the exact finite-type urn describing their degree census --
intensity matrix, spectrum, limit vector and limit covariance -- and
verify the normal limit law by seeded Monte-Carlo simulation.
"""

__version__ = "0.1.0"

from .model_io import (
    BIPOLAR,
    HOOKING,
    Block,
    BlockSet,
    BlockSetError,
    InternalConsistencyError,
    degree_of,
    load_blockset,
    load_example,
    parse_blockset,
    reverse_bipolar,
)
from .profile import (
    BalanceInfo,
    DegreeProfile,
    balance_check,
    build_profile,
    degree_profile,
    essential_degrees,
    lambda1,
    limit_vector,
)
from .urn import (
    STAR,
    ReplacementLaw,
    UrnModel,
    build_urn,
    covariance,
    eigen_closed_form,
    intensity_matrix,
    irreducibility_check,
    replacement_vector,
    right_eigenvector,
    second_moment_matrix,
)
from .growth import (
    CENSUS,
    GRAPH,
    GrowthState,
    ResourceLimitError,
    backend_name,
    census_vector,
    export_dot,
    export_edge_list,
    grow_step,
    grow_step_scripted,
    init_state,
    simulate,
    write_trajectory_csv,
)
from .verify import (
    CheckResult,
    Tolerances,
    VerificationReport,
    covariance_check,
    mean_check,
    normality_check,
    run_replicates,
    verify_model,
    whiten_scores,
)

__all__ = [
    "BIPOLAR",
    "HOOKING",
    "STAR",
    "CENSUS",
    "GRAPH",
    "BalanceInfo",
    "Block",
    "BlockSet",
    "BlockSetError",
    "CheckResult",
    "DegreeProfile",
    "GrowthState",
    "InternalConsistencyError",
    "ReplacementLaw",
    "ResourceLimitError",
    "Tolerances",
    "UrnModel",
    "VerificationReport",
    "backend_name",
    "balance_check",
    "build_profile",
    "build_urn",
    "census_vector",
    "covariance",
    "covariance_check",
    "degree_of",
    "degree_profile",
    "eigen_closed_form",
    "essential_degrees",
    "export_dot",
    "export_edge_list",
    "grow_step",
    "grow_step_scripted",
    "init_state",
    "intensity_matrix",
    "irreducibility_check",
    "lambda1",
    "limit_vector",
    "load_blockset",
    "load_example",
    "mean_check",
    "normality_check",
    "parse_blockset",
    "replacement_vector",
    "reverse_bipolar",
    "right_eigenvector",
    "run_replicates",
    "second_moment_matrix",
    "simulate",
    "verify_model",
    "whiten_scores",
    "write_trajectory_csv",
]
