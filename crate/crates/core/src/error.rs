use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid sensor subset: {0}")]
    InvalidSubset(String),

    #[error("invalid column pair ({i}, {j})")]
    InvalidPair { i: usize, j: usize },

    #[error("infeasible budget: M = {budget} with D = {dimension} (need 0 < M <= D)")]
    InfeasibleBudget { budget: f64, dimension: usize },

    #[error("degenerate projection: no interior entries and sum deviates from budget by {deviation:e}")]
    DegenerateProjection { deviation: f64 },

    #[error("non-finite objective at iteration {iteration}")]
    NumericalFailure { iteration: usize },

    #[error("exhaustive search over {combinations} subsets exceeds the limit of {limit}")]
    TooLarge { combinations: u128, limit: u128 },

    #[error("basis pursuit did not converge after {iterations} pivots (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse { path: PathBuf, row: usize, column: usize, message: String },

    #[error("{0}: file contains no matrix rows")]
    EmptyFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
