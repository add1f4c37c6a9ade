"""Heuristic interleaving-style distances between partially labeled merge trees."""

from .assignment import Assignment, solve
from .core import (
    Agreement,
    AgreementInfo,
    LabelTable,
    LabeledMatrix,
    LabeledMergeTree,
    MergeTree,
    classify_agreement,
    induced_matrix,
    inf_norm_diff,
)
from .io import (
    DistanceMatrix,
    parse_mtree,
    read_mtree_file,
    write_matrix_csv,
    write_mtree,
    write_mtree_file,
)
from .methods import (
    Matching,
    MethodResult,
    SMatrix,
    build_s_matrix,
    elm_distance,
    evaluate_configuration,
    full_agreement_distance,
    greedy_distance,
    mmb_distance,
    oracle_min_objective,
    pairwise_leaf_distances,
    select_trim,
    unknown_to_known_distances,
)
from .synth import (
    EnsembleSpec,
    PerturbationSpec,
    assign_labels,
    generate_ensemble,
    perturb,
    random_base_tree,
)

__version__ = "0.1.0"

__all__ = [
    "Agreement",
    "AgreementInfo",
    "Assignment",
    "DistanceMatrix",
    "EnsembleSpec",
    "LabelTable",
    "LabeledMatrix",
    "LabeledMergeTree",
    "Matching",
    "MergeTree",
    "MethodResult",
    "PerturbationSpec",
    "SMatrix",
    "assign_labels",
    "build_s_matrix",
    "classify_agreement",
    "elm_distance",
    "evaluate_configuration",
    "full_agreement_distance",
    "generate_ensemble",
    "greedy_distance",
    "induced_matrix",
    "inf_norm_diff",
    "mmb_distance",
    "oracle_min_objective",
    "pairwise_leaf_distances",
    "parse_mtree",
    "perturb",
    "random_base_tree",
    "read_mtree_file",
    "select_trim",
    "solve",
    "unknown_to_known_distances",
    "write_matrix_csv",
    "write_mtree",
    "write_mtree_file",
]
