"""Exact and incomplete LDL^T factorization and selected inversion for
complex-symmetric sparse matrices."""

from .factorization import (
    HypothesisViolated,
    LdltFactors,
    PivotBreakdown,
    aposteriori_inverse_bound,
    gershgorin_norm,
    ldlt_exact,
    ldlt_incomplete,
    ldlt_incomplete_tol,
)
from .localization import (
    DecayFit,
    SpectralSet,
    fit_decay_rate,
    green_single_interval,
    green_two_intervals,
    predicted_bounds,
    toy_spectral_set,
)
from .ordering import (
    Permutation,
    natural_order,
    nested_dissection_cartesian,
    nested_dissection_general,
    permute,
)
from .pexsi import (
    PoleExpansion,
    QuantityReport,
    circle_contour_poles,
    dense_density_oracle,
    fermi_dirac,
    pexsi_evaluate,
)
from .selinv import (
    SelectedInverse,
    aposteriori_selinv_bound,
    closedness_audit,
    selinv_exact,
    selinv_incomplete,
)
from .sparse import (
    MeshSpec,
    SparseSymmetric,
    build_from_triplets,
    dense_eigendecomposition,
    dense_inverse,
    graph_distance,
    shift,
    toy_hamiltonian,
)
from .symbolic import FillPattern, fill_path_oracle, fill_pattern_exact, symbolic_levels

__version__ = "0.1.0"

__all__ = [
    "DecayFit",
    "FillPattern",
    "HypothesisViolated",
    "LdltFactors",
    "MeshSpec",
    "Permutation",
    "PivotBreakdown",
    "PoleExpansion",
    "QuantityReport",
    "SelectedInverse",
    "SparseSymmetric",
    "SpectralSet",
    "aposteriori_inverse_bound",
    "aposteriori_selinv_bound",
    "build_from_triplets",
    "circle_contour_poles",
    "closedness_audit",
    "dense_density_oracle",
    "dense_eigendecomposition",
    "dense_inverse",
    "fermi_dirac",
    "fill_path_oracle",
    "fill_pattern_exact",
    "fit_decay_rate",
    "gershgorin_norm",
    "graph_distance",
    "green_single_interval",
    "green_two_intervals",
    "ldlt_exact",
    "ldlt_incomplete",
    "ldlt_incomplete_tol",
    "natural_order",
    "nested_dissection_cartesian",
    "nested_dissection_general",
    "permute",
    "pexsi_evaluate",
    "predicted_bounds",
    "selinv_exact",
    "selinv_incomplete",
    "shift",
    "symbolic_levels",
    "toy_hamiltonian",
    "toy_spectral_set",
]
