"""Broadcasting and root-bit reconstruction on random recursive trees."""

from .broadcast import (
    BitAssignment,
    Decomposition,
    SubtreeCounts,
    Visibility,
    VisibilityError,
    assign_bits,
    assign_bits_decomposed,
    delta_from_decomposition,
    delta_statistic,
    subtree_counts,
)
from .estimators import (
    Estimate,
    StructParams,
    StructWitness,
    bayes_estimate,
    centroid_estimate,
    detect_structure,
    majority_estimate,
    structured_estimate,
)
from .generate import PaParams, generate_pa, generate_urrt, pa_attachment_probabilities
from .harness import (
    ConfigError,
    ExperimentConfig,
    RiskEstimate,
    emit_results,
    exhaustive_risk,
    read_results,
    run_experiment,
    shuffled_view,
)
from .isomorphism import (
    RootPosterior,
    all_root_codes,
    aut_bar,
    aut_vertex,
    canonical_codes_rooted,
    labeling_count,
    root_likelihoods,
    root_likelihoods_exact,
)
from .moments import (
    MomentBound,
    UrnState,
    bound_suite,
    depth_moments,
    expected_Ni_exact,
    expected_Ni_exact_pa,
    four_color_urn,
    gamma_ratio_product,
    pa_weight_urn,
    two_color_urn,
    urn_simulate,
)
from .rng import RngStream
from .structure import (
    CentroidDepthStats,
    StructuralSummary,
    centroid_depth_stats,
    centroids,
    nearest_leaf,
    structural_summary,
)
from .tree import Tree, enumerate_parent_sequences, read_tree_file, write_tree_file

__version__ = "0.1.0"
