from .errors import GraphError
from .points import UNLABELED, PointSet, read_points_csv, write_points_csv
from .spectral import (
    SpectralDecomposition,
    fiedler_values,
    jacobi_eigendecomposition,
    power_spectral_radius,
    symmetric_eigendecomposition,
    zero_eigenvalue_multiplicity,
)
from .weights import (
    AdaptiveSigma,
    FixedSigma,
    SigmaRule,
    SparseWeights,
    batch_weights,
    build_weight_matrix,
    connected_components,
    gaussian_kernel,
    graph_laplacian,
    normalize_symmetric,
    read_weights_csv,
    sparsify_topk,
    symmetrize,
    write_weights_csv,
)

__all__ = [
    "AdaptiveSigma",
    "FixedSigma",
    "GraphError",
    "PointSet",
    "SigmaRule",
    "SparseWeights",
    "SpectralDecomposition",
    "UNLABELED",
    "batch_weights",
    "build_weight_matrix",
    "connected_components",
    "fiedler_values",
    "gaussian_kernel",
    "graph_laplacian",
    "jacobi_eigendecomposition",
    "normalize_symmetric",
    "power_spectral_radius",
    "read_points_csv",
    "read_weights_csv",
    "sparsify_topk",
    "symmetric_eigendecomposition",
    "symmetrize",
    "write_points_csv",
    "write_weights_csv",
    "zero_eigenvalue_multiplicity",
]
