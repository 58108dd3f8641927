from .diffusion import (
    DENSE_OPERATOR_LIMIT,
    DiffusionConfig,
    check_stability,
    diffuse,
    diffuse_backward,
    diffusion_backward,
    diffusion_closed_form,
    diffusion_operator,
    diffusion_step,
    iteration_matrix,
    largest_laplacian_eigenvalue,
    spectral_radius,
    stability_max_step,
)
from .errors import DiffusionError

__all__ = [
    "DENSE_OPERATOR_LIMIT",
    "DiffusionConfig",
    "DiffusionError",
    "check_stability",
    "diffuse",
    "diffuse_backward",
    "diffusion_backward",
    "diffusion_closed_form",
    "diffusion_operator",
    "diffusion_step",
    "iteration_matrix",
    "largest_laplacian_eigenvalue",
    "spectral_radius",
    "stability_max_step",
]
