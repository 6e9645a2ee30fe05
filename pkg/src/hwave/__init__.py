"""Randomized dyadic cubes, splines and orthonormal wavelets on finite
doubling quasi-metric measure spaces."""

from .space import (
    FiniteSpace,
    SpaceConstants,
    ValidationError,
    compute_constants,
    generate_space,
    load_space,
    resolve_space,
    save_space,
)
from .nets import (
    GeometryViolation,
    NetHierarchy,
    ReferenceOrder,
    build_nets,
    build_reference_order,
    verify_nets,
)
from .randomized import (
    CubeMachine,
    OmegaSample,
    RandomizedSystem,
    boundary_layer_probability,
    build_cubes,
    sample_omega,
    theoretical_eta,
    verify_center_sandwich,
    verify_system,
)
from .splines import (
    SplineTable,
    TransitionSystem,
    build_bump,
    build_transitions,
    compute_splines_exact,
    compute_splines_mc,
    holder_profile,
    transition_probabilities,
    verify_spline_table,
)
from .mra import (
    GramSystem,
    build_gram_system,
    chain_constants,
    decay_fit,
    gram_matrix,
    inverse_and_sqrt,
    neumann_inverse_and_sqrt,
    riesz_bounds,
    separated_sum_check,
)
from .wavelets import (
    WaveletBasis,
    analyze,
    assemble_basis,
    decay_and_regularity_report,
    kernel_of_projection,
    orthonormalize_level,
    pre_wavelets,
    synthesize,
)
from .analysis import (
    almost_diagonal_check,
    ball_average_drift_check,
    bmo_carleson_roundtrip,
    bmo_from_carleson,
    bmo_norm,
    carleson_norm,
    cz_kernel_check,
    empty_annulus_dichotomy,
    kj_sequence,
    operator_wavelet_matrix,
    paraproduct_matrix,
    schur_statistic,
    size_redundancy_check,
    verify_kernel_sums,
    verify_sum_large_balls,
)
from .pipeline import Bundle, PipelineConfig, build_bundle, run_pipeline

__version__ = "0.1.0"
