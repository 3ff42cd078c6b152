"""Infinite-width kernels of architecture graphs and their space-frequency spectra."""
__version__ = "0.1.0"

from .arch import (ArchDag, build_dcnn, build_mlp, build_scnn, d_cnn, hr_cnn, mlp, preset,
                   validate_assumptions)
from .dual import centered_exp_dual, gaussian_dual, identity_dual, poly_dual, relu_dual
from .indices import MultiIndex, index_triple, learning_sequence, spatial_index
from .kernel import (derivative_at_zero, eigenvalue_estimate, kernel_matrix, nngp_eval,
                     nngp_gap_eval, ntk_eval, ntk_gap_eval)

__all__ = [
    "ArchDag", "build_dcnn", "build_mlp", "build_scnn", "d_cnn", "hr_cnn", "mlp", "preset",
    "validate_assumptions", "centered_exp_dual", "gaussian_dual", "identity_dual", "poly_dual",
    "relu_dual", "MultiIndex", "index_triple", "learning_sequence", "spatial_index",
    "derivative_at_zero", "eigenvalue_estimate", "kernel_matrix", "nngp_eval", "nngp_gap_eval",
    "ntk_eval", "ntk_gap_eval",
]
