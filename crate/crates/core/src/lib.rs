//! Incoherent sensor selection for sparse signals.
//!
//! Given a sensing matrix whose rows are candidate sensors, pick `M` rows so
//! that the columns of the selected submatrix are as incoherent as possible,
//! which is what sparse recovery by basis pursuit needs.
//!
//! - [`matrix`]: matrices, subsets and quality metrics (coherence, frame
//!   potential, condition number).
//! - [`projection`]: Euclidean projection onto `{z in [0,1]^D : sum z = M}`.
//! - [`optimizer`]: the projected-gradient selector and its gradients.
//! - [`baselines`]: random, greedy frame-potential and exhaustive selectors.
//! - [`recovery`]: basis pursuit and the exact-recovery protocol.
//! - [`datagen`]: seeded synthetic ensembles and CSV I/O.
//! - [`experiment`]: benchmark sweeps over selectors, budgets and trials.
//!
//! Sensor indices are 0-based throughout.

pub mod baselines;
pub mod combinatorics;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod optimizer;
pub mod projection;
pub mod recovery;
pub mod rng;

pub use baselines::{BaselineConfig, BaselineMethod};
pub use experiment::{run_benchmark, ExperimentConfig};
pub use datagen::{generate, load_matrix, save_matrix, EnsembleKind, EnsembleSpec};
pub use error::{Error, Result};
pub use matrix::{extract_submatrix, MetricReport, SensingMatrix, SensorSubset};
pub use optimizer::{run_insense, InsenseConfig, SelectionResult};
pub use projection::{project_sbs, ProjectionResult, SbsConstraint};
pub use recovery::{evaluate_recovery, solve_bp, BpConfig, RecoveryReport};
