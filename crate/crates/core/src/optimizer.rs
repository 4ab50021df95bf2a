//! Coherence-minimizing sensor selection by projected gradient descent.
//!
//! The relaxed selector `z` lives in the scaled boxed simplex. Each iteration
//! takes a gradient step on the smoothed average-squared-coherence objective
//!
//! ```text
//! f(z) = sum_{i<j} (G_ij^2 + eps1) / (G_ii G_jj + eps2),   G = Phi^T diag(z) Phi
//! ```
//!
//! projects back onto the feasible set, and backtracks the step until the
//! objective does not increase. The final weights are rounded to the `M`
//! largest entries.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{SensingMatrix, SensorSubset};
use crate::projection::{project_sbs, SbsConstraint};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// The barycenter `(M/D) * 1`.
    Uniform,
    /// Barycenter plus zero-mean Gaussian jitter, projected back to feasibility.
    UniformPlusJitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Accept the first step that does not increase the objective.
    Monotone,
    /// Accept when `f(z+) <= f(z) - c / gamma * ||z+ - z||^2`.
    Armijo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsenseConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub ls_shrink: f64,
    pub ls_c: f64,
    pub ls_init_step: f64,
    pub ls_max_backtracks: usize,
    /// Start each line search from twice the previously accepted step
    /// (capped at `ls_init_step`) instead of from `ls_init_step`.
    pub ls_warm_start: bool,
    pub step_rule: StepRule,
    pub init: Init,
    pub jitter_scale: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for InsenseConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-9,
            eps2: 1e-10,
            rel_tol: 1e-7,
            max_iters: 5000,
            ls_shrink: 0.5,
            ls_c: 1e-4,
            ls_init_step: 1.0,
            ls_max_backtracks: 50,
            ls_warm_start: false,
            step_rule: StepRule::Monotone,
            init: Init::Uniform,
            jitter_scale: 1e-3,
            restarts: 1,
            seed: 0,
        }
    }
}

impl InsenseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.eps2 > 0.0 && self.eps2 < self.eps1 && self.eps1 < 1.0) {
            return bad("need 0 < eps2 < eps1 < 1");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return bad("ls_shrink must lie in (0, 1)");
        }
        if !(self.ls_c > 0.0 && self.ls_c < 1.0) {
            return bad("ls_c must lie in (0, 1)");
        }
        if !(self.ls_init_step > 0.0 && self.ls_init_step.is_finite()) {
            return bad("ls_init_step must be positive");
        }
        if !(self.jitter_scale >= 0.0) {
            return bad("jitter_scale must be nonnegative");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        Ok(())
    }
}

/// `G = Phi^T diag(z) Phi`, kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramState {
    g: DMatrix<f64>,
}

impl GramState {
    pub fn new(phi: &SensingMatrix, z: &[f64]) -> Result<Self> {
        let p = phi.as_matrix();
        if z.len() != p.nrows() {
            return Err(Error::DimensionMismatch { expected: p.nrows(), actual: z.len() });
        }
        let mut scaled = p.clone();
        for (mut row, &w) in scaled.row_iter_mut().zip(z) {
            row *= w;
        }
        let mut g = p.tr_mul(&scaled);
        g.fill_lower_triangle_with_upper_triangle();
        Ok(Self { g })
    }

    /// Wraps an explicit symmetric matrix.
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::DimensionMismatch { expected: g.nrows(), actual: g.ncols() });
        }
        Ok(Self { g })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn size(&self) -> usize {
        self.g.nrows()
    }
}

/// Smoothed objective evaluated on a Gram state.
pub fn objective_from_gram(gram: &GramState, cfg: &InsenseConfig) -> f64 {
    let g = gram.matrix();
    let n = g.nrows();
    let mut total = 0.0;
    for j in 1..n {
        let gjj = g[(j, j)];
        for i in 0..j {
            let gij = g[(i, j)];
            total += (gij * gij + cfg.eps1) / (g[(i, i)] * gjj + cfg.eps2);
        }
    }
    total
}

pub fn objective_feps(phi: &SensingMatrix, z: &[f64], cfg: &InsenseConfig) -> Result<f64> {
    Ok(objective_from_gram(&GramState::new(phi, z)?, cfg))
}

/// Gradient of the objective with respect to the upper triangle of `G`
/// (strictly lower entries are zero).
pub fn gradient_g(gram: &GramState, cfg: &InsenseConfig) -> DMatrix<f64> {
    let g = gram.matrix();
    let n = g.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let gii = g[(i, i)];
        let mut diag = 0.0;
        for l in 0..n {
            if l == i {
                continue;
            }
            let gll = g[(l, l)];
            let gil = g[(i, l)];
            let denom = gii * gll + cfg.eps2;
            diag -= gll * (gil * gil + cfg.eps1) / (denom * denom);
            if l > i {
                out[(i, l)] = 2.0 * gil / denom;
            }
        }
        out[(i, i)] = diag;
    }
    out
}

/// Gradient with respect to `z`: the diagonal of `Phi (grad_G f) Phi^T`,
/// evaluated row by row.
pub fn gradient_z(phi: &SensingMatrix, gram: &GramState, cfg: &InsenseConfig) -> Result<Vec<f64>> {
    let p = phi.as_matrix();
    if gram.size() != p.ncols() {
        return Err(Error::DimensionMismatch { expected: p.ncols(), actual: gram.size() });
    }
    let w = gradient_g(gram, cfg);
    let pw = p * w;
    Ok(pw.row_iter().zip(p.row_iter()).map(|(a, b)| a.dot(&b)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    RelativeTolerance,
    /// No step in the backtracking schedule decreased the objective.
    LineSearchStalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub z: Vec<f64>,
    pub gram: GramState,
    pub iteration: usize,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
    pub step: f64,
}

/// One run of the projected-gradient iteration; drive it with [`step`](Self::step)
/// or [`run`](Self::run).
pub struct Insense<'a> {
    phi: &'a SensingMatrix,
    constraint: SbsConstraint,
    cfg: InsenseConfig,
    state: OptimizerState,
    stopped: Option<StopReason>,
}

impl<'a> Insense<'a> {
    /// Sets up a run for budget `m`; `seed` drives the jittered start.
    pub fn new(phi: &'a SensingMatrix, m: usize, cfg: &InsenseConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = phi.sensors();
        if m == 0 || m > d {
            return Err(Error::InfeasibleBudget { budget: m as f64, dimension: d });
        }
        let constraint = SbsConstraint::new(d, m as f64)?;
        let z = initial_weights(&constraint, cfg, seed)?;
        let gram = GramState::new(phi, &z)?;
        let objective = objective_from_gram(&gram, cfg);
        if !objective.is_finite() {
            return Err(Error::NumericalFailure { iteration: 0 });
        }
        let state = OptimizerState {
            z,
            gram,
            iteration: 0,
            objective,
            objective_trace: vec![objective],
            step: cfg.ls_init_step,
        };
        Ok(Self { phi, constraint, cfg: cfg.clone(), state, stopped: None })
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stopped
    }

    /// Performs one accepted iteration. Returns the stop reason once the run
    /// has terminated; further calls are no-ops.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        if self.stopped.is_some() {
            return Ok(self.stopped);
        }
        if self.state.iteration >= self.cfg.max_iters {
            self.stopped = Some(StopReason::MaxIterations);
            return Ok(self.stopped);
        }
        let grad = gradient_z(self.phi, &self.state.gram, &self.cfg)?;
        let mut gamma = if self.cfg.ls_warm_start {
            (2.0 * self.state.step).min(self.cfg.ls_init_step)
        } else {
            self.cfg.ls_init_step
        };
        let current = self.state.objective;
        let mut accepted = None;
        for _ in 0..=self.cfg.ls_max_backtracks {
            let trial: Vec<f64> = self.state.z.iter().zip(&grad).map(|(z, g)| z - gamma * g).collect();
            let projected = project_sbs(&trial, &self.constraint)?.z;
            let gram = GramState::new(self.phi, &projected)?;
            let value = objective_from_gram(&gram, &self.cfg);
            if !value.is_finite() {
                return Err(Error::NumericalFailure { iteration: self.state.iteration + 1 });
            }
            let threshold = match self.cfg.step_rule {
                StepRule::Monotone => current,
                StepRule::Armijo => {
                    let moved: f64 =
                        projected.iter().zip(&self.state.z).map(|(a, b)| (a - b) * (a - b)).sum();
                    current - self.cfg.ls_c / gamma * moved
                }
            };
            if value <= threshold {
                accepted = Some((projected, gram, value));
                break;
            }
            gamma *= self.cfg.ls_shrink;
        }

        let Some((z, gram, value)) = accepted else {
            self.stopped = Some(StopReason::LineSearchStalled);
            return Ok(self.stopped);
        };
        self.state.z = z;
        self.state.gram = gram;
        self.state.objective = value;
        self.state.objective_trace.push(value);
        self.state.iteration += 1;
        self.state.step = gamma;

        let change = (value - current).abs() / current.abs().max(1e-30);
        if change < self.cfg.rel_tol {
            self.stopped = Some(StopReason::RelativeTolerance);
        } else if self.state.iteration >= self.cfg.max_iters {
            self.stopped = Some(StopReason::MaxIterations);
        }
        Ok(self.stopped)
    }

    pub fn run(mut self) -> Result<SelectionResult> {
        loop {
            if let Some(reason) = self.step()? {
                return Ok(self.finish(reason));
            }
        }
    }

    fn finish(self, reason: StopReason) -> SelectionResult {
        let m = self.constraint.budget() as usize;
        let subset = round_top_m(&self.state.z, m);
        SelectionResult {
            subset,
            final_weights: self.state.z,
            iterations: self.state.iteration,
            final_objective: self.state.objective,
            objective_trace: self.state.objective_trace,
            converged: reason != StopReason::MaxIterations,
            stop_reason: reason,
            restart: 0,
        }
    }
}

fn initial_weights(c: &SbsConstraint, cfg: &InsenseConfig, seed: u64) -> Result<Vec<f64>> {
    let d = c.dimension();
    let base = c.budget() / d as f64;
    match cfg.init {
        Init::Uniform => Ok(vec![base; d]),
        Init::UniformPlusJitter => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut y: Vec<f64> = (0..d)
                .map(|_| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    base + cfg.jitter_scale * n
                })
                .collect();
            let mean = y.iter().sum::<f64>() / d as f64;
            y.iter_mut().for_each(|v| *v += base - mean);
            Ok(project_sbs(&y, c)?.z)
        }
    }
}

/// Indices of the `m` largest weights (ties to the lower index), ascending.
pub fn round_top_m(weights: &[f64], m: usize) -> SensorSubset {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(m).collect();
    chosen.sort_unstable();
    SensorSubset::new(chosen, weights.len()).expect("top-m of a valid weight vector")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub subset: SensorSubset,
    pub final_weights: Vec<f64>,
    pub iterations: usize,
    pub final_objective: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Which restart produced this result.
    pub restart: usize,
}

/// Runs `cfg.restarts` independent descents (in parallel) and keeps the one
/// with the lowest final objective, ties going to the lower restart index.
/// Restart `r` is seeded with `derive_seed(cfg.seed, r)`.
pub fn run_insense(phi: &SensingMatrix, m: usize, cfg: &InsenseConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    if phi.sensors() == 0 || m == 0 || m > phi.sensors() {
        return Err(Error::InfeasibleBudget { budget: m as f64, dimension: phi.sensors() });
    }
    let runs: Vec<Result<SelectionResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut result = Insense::new(phi, m, cfg, derive_seed(cfg.seed, r as u64))?.run()?;
            result.restart = r;
            Ok(result)
        })
        .collect();
    let mut best: Option<SelectionResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.final_objective < b.final_objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> InsenseConfig {
        InsenseConfig::default()
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let swapped = InsenseConfig { eps1: 1e-10, eps2: 1e-9, ..cfg() };
        assert!(swapped.validate().is_err());
        assert!(InsenseConfig { restarts: 0, ..cfg() }.validate().is_err());
        assert!(InsenseConfig { ls_shrink: 1.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn objective_at_zero_weights() {
        let phi = SensingMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.5, -1.0, 2.0]]).unwrap();
        let f = objective_feps(&phi, &[0.0, 0.0], &cfg()).unwrap();
        assert_abs_diff_eq!(f, 3.0 * 10.0, epsilon = 1e-9);
    }

    #[test]
    fn objective_with_orthogonal_columns() {
        let phi = SensingMatrix::identity(4).unwrap();
        let f = objective_feps(&phi, &[1.0; 4], &cfg()).unwrap();
        assert_abs_diff_eq!(f, 6.0 * 1e-9 / (1.0 + 1e-10), epsilon = 1e-20);
    }

    #[test]
    fn gradient_g_of_identity() {
        let gram = GramState::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let w = gradient_g(&gram, &cfg());
        assert_eq!(w[(0, 1)], 0.0);
        assert_eq!(w[(1, 0)], 0.0);
        assert_abs_diff_eq!(w[(0, 0)], -1e-9 / (1.0 + 1e-10f64).powi(2), epsilon = 1e-24);
    }

    #[test]
    fn gradient_g_diagonal_with_zero_off_diagonal() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 3.0]));
        let gram = GramState::from_matrix(g).unwrap();
        let c = cfg();
        let w = gradient_g(&gram, &c);
        let expected = -(0.5 * c.eps1 / (2.0 * 0.5 + c.eps2).powi(2)
            + 3.0 * c.eps1 / (2.0 * 3.0 + c.eps2).powi(2));
        assert_abs_diff_eq!(w[(0, 0)], expected, epsilon = 1e-24);
    }

    #[test]
    fn gradient_z_on_identity_is_diagonal_of_gradient_g() {
        let phi = SensingMatrix::identity(3).unwrap();
        let z = [0.2, 0.5, 0.3];
        let gram = GramState::new(&phi, &z).unwrap();
        let gz = gradient_z(&phi, &gram, &cfg()).unwrap();
        let w = gradient_g(&gram, &cfg());
        for i in 0..3 {
            assert_eq!(gz[i], w[(i, i)]);
        }
    }

    #[test]
    fn duplicated_rows_get_equal_gradient() {
        let phi = SensingMatrix::from_rows(&[
            vec![1.0, -0.3, 0.7],
            vec![0.2, 0.9, -1.1],
            vec![1.0, -0.3, 0.7],
            vec![-0.4, 0.1, 0.5],
        ])
        .unwrap();
        let z = [0.3, 0.6, 0.5, 0.6];
        let gram = GramState::new(&phi, &z).unwrap();
        let g = gradient_z(&phi, &gram, &cfg()).unwrap();
        assert_eq!(g[0], g[2]);
    }

    #[test]
    fn top_m_rounding_breaks_ties_low() {
        let s = round_top_m(&[0.5, 0.9, 0.5, 0.5, 0.1], 3);
        assert_eq!(s.indices(), &[0, 1, 2]);
    }

    #[test]
    fn rejects_bad_budget() {
        let phi = SensingMatrix::identity(4).unwrap();
        assert!(matches!(run_insense(&phi, 0, &cfg()), Err(Error::InfeasibleBudget { .. })));
        assert!(matches!(run_insense(&phi, 5, &cfg()), Err(Error::InfeasibleBudget { .. })));
    }

    #[test]
    fn symmetric_identity_is_deterministic() {
        let phi = SensingMatrix::identity(4).unwrap();
        let a = run_insense(&phi, 2, &cfg()).unwrap();
        let b = run_insense(&phi, 2, &cfg()).unwrap();
        assert_eq!(a.subset, b.subset);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.subset.len(), 2);
    }
}
