//! Reference selectors: uniform random, greedy frame-potential removal and an
//! exhaustive average-coherence oracle for tiny instances.

use itertools::Itertools;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::error::{Error, Result};
use crate::matrix::{extract_submatrix, mu_avg, SensingMatrix, SensorSubset};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Random,
    FpGreedy,
    ExhaustiveMuAvg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub seed: u64,
    pub exhaustive_limit: u128,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { method: BaselineMethod::Random, seed: 0, exhaustive_limit: 1_000_000 }
    }
}

fn check_budget(phi: &SensingMatrix, m: usize) -> Result<()> {
    if m == 0 || m > phi.sensors() {
        return Err(Error::InfeasibleBudget { budget: m as f64, dimension: phi.sensors() });
    }
    Ok(())
}

pub fn select(phi: &SensingMatrix, m: usize, cfg: &BaselineConfig) -> Result<SensorSubset> {
    match cfg.method {
        BaselineMethod::Random => select_random(phi, m, cfg),
        BaselineMethod::FpGreedy => select_fp_greedy(phi, m),
        BaselineMethod::ExhaustiveMuAvg => select_exhaustive_mu_avg(phi, m, cfg),
    }
}

/// `m` rows drawn uniformly without replacement.
pub fn select_random(phi: &SensingMatrix, m: usize, cfg: &BaselineConfig) -> Result<SensorSubset> {
    check_budget(phi, m)?;
    let mut rng = rng_from_seed(cfg.seed);
    let picked = index::sample(&mut rng, phi.sensors(), m).into_vec();
    SensorSubset::from_unsorted(picked, phi.sensors())
}

/// Worst-out greedy: starting from every row, repeatedly drop the row whose
/// removal leaves the smallest frame potential, until `m` rows remain.
/// Ties go to the lower row index.
pub fn select_fp_greedy(phi: &SensingMatrix, m: usize) -> Result<SensorSubset> {
    check_budget(phi, m)?;
    let p = phi.as_matrix();
    let d = p.nrows();
    let rows = p * p.transpose();
    let sq = rows.map(|v| v * v);

    // Removing r lowers the frame potential by score[r].
    let mut score: Vec<f64> = (0..d)
        .map(|r| (0..d).filter(|&j| j != r).map(|j| sq[(r, j)]).sum())
        .collect();
    let scale = score.iter().copied().fold(0.0, f64::max);
    // Incremental updates leave round-off on scores that are exactly equal in
    // exact arithmetic; treat those as ties.
    let tie_tol = 1e-10 * scale;

    let mut alive = vec![true; d];
    for _ in m..d {
        let mut best: Option<usize> = None;
        for r in (0..d).filter(|&r| alive[r]) {
            match best {
                Some(b) if score[r] <= score[b] + tie_tol => {}
                _ => best = Some(r),
            }
        }
        let victim = best.expect("at least one row remains");
        alive[victim] = false;
        for r in (0..d).filter(|&r| alive[r]) {
            score[r] -= sq[(r, victim)];
        }
    }
    SensorSubset::new((0..d).filter(|&r| alive[r]).collect(), d)
}

/// Subset minimizing the average coherence over all `D choose m` candidates.
/// Subsets with undefined coherence rank last; ties go to the
/// lexicographically first subset.
pub fn select_exhaustive_mu_avg(
    phi: &SensingMatrix,
    m: usize,
    cfg: &BaselineConfig,
) -> Result<SensorSubset> {
    check_budget(phi, m)?;
    let d = phi.sensors();
    let combinations = binomial(d, m);
    if combinations > cfg.exhaustive_limit {
        return Err(Error::TooLarge { combinations, limit: cfg.exhaustive_limit });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for combo in (0..d).combinations(m) {
        let subset = SensorSubset::new(combo, d)?;
        let value = mu_avg(&extract_submatrix(phi, &subset)?).unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, subset.into()));
        }
    }
    let (_, indices) = best.expect("at least one combination");
    SensorSubset::new(indices, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frame_potential;

    #[test]
    fn random_full_budget_and_determinism() {
        let phi = SensingMatrix::identity(6).unwrap();
        let cfg = BaselineConfig { seed: 11, ..Default::default() };
        assert_eq!(select_random(&phi, 6, &cfg).unwrap().indices(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(select_random(&phi, 3, &cfg).unwrap(), select_random(&phi, 3, &cfg).unwrap());
        assert!(select_random(&phi, 0, &cfg).is_err());
        assert!(select_random(&phi, 7, &cfg).is_err());
    }

    #[test]
    fn random_inclusion_frequency() {
        let phi = SensingMatrix::identity(10).unwrap();
        let mut counts = [0usize; 10];
        let draws = 10_000;
        for seed in 0..draws {
            let cfg = BaselineConfig { seed, ..Default::default() };
            for &i in select_random(&phi, 3, &cfg).unwrap().indices() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.3).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn fp_greedy_on_orthogonal_rows_keeps_highest_indices_removed_last() {
        let phi = SensingMatrix::identity(5).unwrap();
        let s = select_fp_greedy(&phi, 2).unwrap();
        // All scores tie at zero, so the lowest indices are removed first.
        assert_eq!(s.indices(), &[3, 4]);
        assert_eq!(frame_potential(&extract_submatrix(&phi, &s).unwrap()), 0.0);
    }

    #[test]
    fn fp_greedy_full_budget() {
        let phi = SensingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]]).unwrap();
        let s = select_fp_greedy(&phi, 3).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2]);
        assert_eq!(frame_potential(&extract_submatrix(&phi, &s).unwrap()), frame_potential(&phi));
    }

    #[test]
    fn fp_greedy_drops_the_duplicated_direction() {
        let phi = SensingMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.1, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let s = select_fp_greedy(&phi, 3).unwrap();
        assert!(!(s.contains(0) && s.contains(2)));
    }

    #[test]
    fn exhaustive_finds_the_orthogonal_subset() {
        // Only rows {1, 2} give orthogonal columns.
        let phi = SensingMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.9],
        ])
        .unwrap();
        let cfg = BaselineConfig { method: BaselineMethod::ExhaustiveMuAvg, ..Default::default() };
        assert_eq!(select_exhaustive_mu_avg(&phi, 2, &cfg).unwrap().indices(), &[1, 2]);
    }

    #[test]
    fn exhaustive_refuses_large_instances() {
        let phi = SensingMatrix::identity(30).unwrap();
        let cfg = BaselineConfig { exhaustive_limit: 1000, ..Default::default() };
        assert!(matches!(
            select_exhaustive_mu_avg(&phi, 15, &cfg),
            Err(Error::TooLarge { .. })
        ));
    }
}
