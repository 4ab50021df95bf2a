//! Basis pursuit and the exact-recovery evaluation protocol.
//!
//! [`solve_bp`] solves `min ||x||_1  s.t.  A x = y` as the linear program
//! `min 1^T (u + v)  s.t.  A u - A v = y, u, v >= 0`.
//! [`evaluate_recovery`] plants every `K`-sparse vector with unit nonzeros (or a
//! seeded sample of them when there are too many), measures it through the
//! selected rows and counts how often basis pursuit returns it.

mod simplex;

use std::io::Write;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, unrank_combination};
use crate::error::{Error, Result};
use crate::matrix::{extract_submatrix, SensingMatrix, SensorSubset};
use crate::rng::rng_from_seed;
use simplex::{solve_standard_form, LpFailure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpConfig {
    /// Largest accepted `||A x - y||_2`.
    pub feas_tol: f64,
    /// Largest `||x_hat - x||_inf` still counted as exact recovery.
    pub exact_tol: f64,
    /// Simplex pivot limit.
    pub max_iters: usize,
    pub seed: u64,
    /// Supports are enumerated when there are at most this many, sampled otherwise.
    pub sample_cap: usize,
    pub keep_per_trial: bool,
    /// Add the constraint `x >= 0` (nonnegative basis pursuit).
    pub nonnegative: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            exact_tol: 1e-4,
            max_iters: 20_000,
            seed: 0,
            sample_cap: 10_000,
            keep_per_trial: false,
            nonnegative: false,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.feas_tol < self.exact_tol) {
            return Err(Error::InvalidConfig("need 0 < feas_tol < exact_tol".into()));
        }
        if self.max_iters == 0 || self.sample_cap == 0 {
            return Err(Error::InvalidConfig("max_iters and sample_cap must be positive".into()));
        }
        Ok(())
    }
}

fn residual_norm(a: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    (a * DVector::from_column_slice(x) - DVector::from_column_slice(y)).norm()
}

/// Minimum-l1 solution of `phi_sub x = y`.
pub fn solve_bp(phi_sub: &SensingMatrix, y: &[f64], cfg: &BpConfig) -> Result<Vec<f64>> {
    let a = phi_sub.as_matrix();
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: y.len() });
    }
    let lp = if cfg.nonnegative {
        a.clone()
    } else {
        let mut split = DMatrix::zeros(m, 2 * n);
        split.columns_mut(0, n).copy_from(a);
        split.columns_mut(n, n).copy_from(&(-a));
        split
    };
    let costs = vec![1.0; lp.ncols()];
    let solution = solve_standard_form(&lp, y, &costs, cfg.max_iters).map_err(|f| match f {
        LpFailure::Infeasible { residual, pivots } | LpFailure::IterationLimit { residual, pivots } => {
            Error::SolverFailure { iterations: pivots, residual }
        }
        LpFailure::Unbounded { pivots } => Error::SolverFailure { iterations: pivots, residual: f64::NAN },
    })?;
    let x: Vec<f64> = if cfg.nonnegative {
        solution.x.clone()
    } else {
        (0..n).map(|j| solution.x[j] - solution.x[n + j]).collect()
    };
    let residual = residual_norm(a, &x, y);
    if !(residual <= cfg.feas_tol) {
        return Err(Error::SolverFailure { iterations: solution.pivots, residual });
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub support: Vec<usize>,
    pub recovered: bool,
    /// `||phi x_hat - y||_2`, `None` when the solver failed.
    pub residual: Option<f64>,
    pub linf_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub sparsity: usize,
    pub total_trials: usize,
    pub exact_count: usize,
    pub accuracy_percent: f64,
    pub sampled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_trial: Option<Vec<TrialRecord>>,
}

impl RecoveryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One CSV line per trial: support (space separated), outcome, residual, error.
    pub fn write_per_trial_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["support", "recovered", "residual", "linf_error", "error"])?;
        for t in self.per_trial.iter().flatten() {
            let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                t.support.iter().join(" "),
                t.recovered.to_string(),
                fmt(t.residual),
                fmt(t.linf_error),
                t.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Supports evaluated for `n` atoms at sparsity `k`: all of them, or `cap`
/// distinct ones sampled uniformly under `seed`. Returns whether sampling was used.
pub fn trial_supports(n: usize, k: usize, cap: usize, seed: u64) -> (Vec<Vec<usize>>, bool) {
    let total = binomial(n, k);
    if total <= cap as u128 {
        return ((0..n).combinations(k).collect(), false);
    }
    let mut rng = rng_from_seed(seed);
    let supports = if total <= usize::MAX as u128 {
        let mut ranks = index::sample(&mut rng, total as usize, cap).into_vec();
        ranks.sort_unstable();
        ranks.into_iter().map(|r| unrank_combination(n, k, r as u128)).collect()
    } else {
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < cap {
            let mut s = index::sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            seen.insert(s);
        }
        seen.into_iter().collect()
    };
    (supports, true)
}

/// Exact-recovery rate of basis pursuit on the rows of `phi` chosen by `subset`.
pub fn evaluate_recovery(
    phi: &SensingMatrix,
    subset: &SensorSubset,
    k: usize,
    cfg: &BpConfig,
) -> Result<RecoveryReport> {
    cfg.validate()?;
    let n = phi.atoms();
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("sparsity must satisfy 1 <= K < N = {n}, got {k}")));
    }
    let sub = extract_submatrix(phi, subset)?;
    let (supports, sampled) = trial_supports(n, k, cfg.sample_cap, cfg.seed);

    let records: Vec<TrialRecord> = supports
        .into_par_iter()
        .map(|support| run_trial(&sub, support, cfg))
        .collect();
    let exact_count = records.iter().filter(|r| r.recovered).count();
    let total_trials = records.len();
    Ok(RecoveryReport {
        sparsity: k,
        total_trials,
        exact_count,
        accuracy_percent: 100.0 * exact_count as f64 / total_trials as f64,
        sampled,
        per_trial: cfg.keep_per_trial.then_some(records),
    })
}

fn run_trial(sub: &SensingMatrix, support: Vec<usize>, cfg: &BpConfig) -> TrialRecord {
    let a = sub.as_matrix();
    let mut x = vec![0.0; a.ncols()];
    for &i in &support {
        x[i] = 1.0;
    }
    let y: Vec<f64> = (a * DVector::from_column_slice(&x)).iter().copied().collect();
    match solve_bp(sub, &y, cfg) {
        Ok(x_hat) => {
            let linf = x_hat.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            TrialRecord {
                support,
                recovered: linf <= cfg.exact_tol,
                residual: Some(residual_norm(a, &x_hat, &y)),
                linf_error: Some(linf),
                error: None,
            }
        }
        Err(e) => TrialRecord {
            support,
            recovered: false,
            residual: None,
            linf_error: None,
            error: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_returns_measurements() {
        let phi = SensingMatrix::identity(4).unwrap();
        let y = [0.5, -2.0, 0.0, 3.0];
        let x = solve_bp(&phi, &y, &BpConfig::default()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn square_system_is_the_linear_solve() {
        let phi = SensingMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve_bp(&phi, &[3.0, 5.0], &BpConfig::default()).unwrap();
        assert_abs_diff_eq!(x[0], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.4, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let phi = SensingMatrix::identity(3).unwrap();
        assert!(matches!(
            solve_bp(&phi, &[1.0], &BpConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_column_blocks_recovery() {
        // Column 2 is never observed.
        let phi = SensingMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.5],
            vec![0.0, 1.0, 0.0, 0.5],
        ])
        .unwrap();
        let subset = SensorSubset::all(2).unwrap();
        let cfg = BpConfig { keep_per_trial: true, ..Default::default() };
        let report = evaluate_recovery(&phi, &subset, 1, &cfg).unwrap();
        assert_eq!(report.total_trials, 4);
        assert!(report.accuracy_percent < 100.0);
        let trials = report.per_trial.unwrap();
        assert!(!trials.iter().find(|t| t.support == vec![2]).unwrap().recovered);
    }

    #[test]
    fn sampling_kicks_in_above_cap() {
        let (all, sampled) = trial_supports(10, 2, 45, 1);
        assert_eq!((all.len(), sampled), (45, false));
        let (some, sampled) = trial_supports(10, 2, 20, 1);
        assert_eq!((some.len(), sampled), (20, true));
        let mut dedup = some.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 20);
        assert_eq!(trial_supports(10, 2, 20, 1).0, some);
    }

    #[test]
    fn rejects_bad_sparsity() {
        let phi = SensingMatrix::identity(3).unwrap();
        let s = SensorSubset::all(3).unwrap();
        assert!(evaluate_recovery(&phi, &s, 0, &BpConfig::default()).is_err());
        assert!(evaluate_recovery(&phi, &s, 3, &BpConfig::default()).is_err());
    }

    #[test]
    fn per_trial_csv_has_header_and_rows() {
        let phi = SensingMatrix::identity(3).unwrap();
        let s = SensorSubset::all(3).unwrap();
        let cfg = BpConfig { keep_per_trial: true, ..Default::default() };
        let report = evaluate_recovery(&phi, &s, 1, &cfg).unwrap();
        let mut buf = Vec::new();
        report.write_per_trial_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("support,recovered"));
    }
}
