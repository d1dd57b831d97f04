//! Generalized memory polynomial: structures, the kernel regression
//! matrix, model evaluation and structural metrics.

mod coeff_file;
mod matrix;
mod model;
mod structure;

pub use coeff_file::{format_coefficients, parse_coefficients, CoefficientFile, COEFF_FORMAT};
pub use matrix::{build_kernel_matrix, build_kernel_matrix_with, BoundaryMode, KernelMatrix};
pub use model::{
    apply_model, branch_counts, effective_memory_depth, kernel_count, max_memory_lag,
    CoefficientVector,
};
pub use structure::{full_structure, Branch, GmpStructure, KernelDescriptor};
