//! Sparse complex regression: least squares, ridge, iterated-ridge Lasso,
//! the block-weighted Lasso solved by block coordinate descent, and an
//! optimality certificate.

mod bcd;
mod lasso;
mod linalg;
mod schedule;

pub use bcd::{block_residual, block_weighted_lasso, BcdConfig, FitTrace, TraceRecord};
pub use lasso::{
    fit_nmse_db, kkt_check, lasso_iterated_ridge, least_squares, ls_refine, objective, residual,
    ridge, KktReport, LassoProblem, MAX_CONDITION,
};
pub use schedule::{
    default_schedule, progressive_schedule, RegularizationSchedule, DEFAULT_LAMBDA0, DEFAULT_MAX_ORDER,
    DEFAULT_THRESHOLD0,
};
