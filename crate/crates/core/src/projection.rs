//! Euclidean projection onto the scaled boxed simplex
//! `{z : sum(z) = M, 0 <= z_i <= 1}`.
//!
//! Every coordinate of the projection has the form `clamp(y_i + lambda, 0, 1)`
//! for a single multiplier `lambda`, and `sum(z)` is non-decreasing in
//! `lambda`. After sorting `y` the entries pinned at 0 are a prefix and the
//! entries pinned at 1 a suffix; their lengths are found by scanning the
//! sorted values with prefix sums, and `lambda` then follows in closed form
//! from the interior entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum(z) - M|` accepted from the closed-form path.
pub const SUM_TOL: f64 = 1e-8;

/// Feasible set `{z in [0,1]^D : sum(z) = budget}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbsConstraint {
    dimension: usize,
    budget: f64,
}

impl SbsConstraint {
    pub fn new(dimension: usize, budget: f64) -> Result<Self> {
        if dimension == 0 || !(budget > 0.0) || budget > dimension as f64 || !budget.is_finite() {
            return Err(Error::InfeasibleBudget { budget, dimension });
        }
        Ok(Self { dimension, budget })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Whether `z` lies in the set within the given tolerances.
    pub fn contains(&self, z: &[f64], box_tol: f64, sum_tol: f64) -> bool {
        z.len() == self.dimension
            && z.iter().all(|&v| v >= -box_tol && v <= 1.0 + box_tol)
            && (z.iter().sum::<f64>() - self.budget).abs() <= sum_tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub z: Vec<f64>,
    /// Multiplier of the equality constraint: `z_i = clamp(y_i + lambda, 0, 1)`.
    pub lambda: f64,
    /// Entries clamped to 0.
    pub k0: usize,
    /// Entries clamped to 1.
    pub k1: usize,
}

impl ProjectionResult {
    pub fn interior(&self) -> usize {
        self.z.len() - self.k0 - self.k1
    }
}

/// Projects `y`, falling back to bisection on `lambda` when round-off leaves
/// the closed-form solution off the budget.
pub fn project_sbs(y: &[f64], c: &SbsConstraint) -> Result<ProjectionResult> {
    project(y, c, false)
}

/// Like [`project_sbs`] but reports [`Error::DegenerateProjection`] instead of
/// falling back.
pub fn project_sbs_strict(y: &[f64], c: &SbsConstraint) -> Result<ProjectionResult> {
    project(y, c, true)
}

fn check_input(y: &[f64], c: &SbsConstraint) -> Result<()> {
    if y.len() != c.dimension {
        return Err(Error::DimensionMismatch { expected: c.dimension, actual: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("projection input must be finite".into()));
    }
    Ok(())
}

fn project(y: &[f64], c: &SbsConstraint, strict: bool) -> Result<ProjectionResult> {
    check_input(y, c)?;
    let d = c.dimension;
    let m = c.budget;

    if m == d as f64 {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(ProjectionResult { z: vec![1.0; d], lambda: 1.0 - min, k0: 0, k1: d });
    }

    let mut sorted = y.to_vec();
    // Stable, so equal values keep their original order.
    sorted.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(d + 1);
    prefix.push(0.0);
    for &v in &sorted {
        prefix.push(prefix.last().unwrap() + v);
    }
    let range_sum = |lo: usize, hi: usize| prefix[hi] - prefix[lo];

    // Zeros: largest k such that sum_i clamp(y_i - y_(k), 0, 1) >= M.
    let mut k0 = 0;
    let mut upper = 0;
    for p in 0..d {
        let pivot = sorted[p];
        upper = upper.max(p + 1);
        while upper < d && sorted[upper] - pivot < 1.0 {
            upper += 1;
        }
        let total = range_sum(p + 1, upper) - (upper - p - 1) as f64 * pivot + (d - upper) as f64;
        if total >= m {
            k0 = p + 1;
        } else {
            break;
        }
    }

    // Ones: largest k such that sum_i clamp(y_i - t_k + 1, 0, 1) <= M, with t_k
    // the k-th largest entry.
    let mut k1 = 0;
    let mut lower = d;
    for q in 0..d {
        let r = d - 1 - q;
        let pivot = sorted[r];
        lower = lower.min(r);
        while lower > 0 && sorted[lower - 1] > pivot - 1.0 {
            lower -= 1;
        }
        let total = (d - r) as f64 + range_sum(lower, r) + (r - lower) as f64 * (1.0 - pivot);
        if total <= m {
            k1 = q + 1;
        } else {
            break;
        }
    }

    let closed_form = if k0 + k1 > d {
        None
    } else if k0 + k1 == d {
        // No interior entries: any lambda between the two pinned groups works.
        let lo = if k1 > 0 { 1.0 - sorted[d - k1] } else { f64::NEG_INFINITY };
        let hi = if k0 > 0 { -sorted[k0 - 1] } else { f64::INFINITY };
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo <= hi => Some(0.5 * (lo + hi)),
            (true, false) => Some(lo),
            (false, true) => Some(hi),
            _ => None,
        }
    } else {
        let interior = (d - k0 - k1) as f64;
        Some((m - k1 as f64 - range_sum(k0, d - k1)) / interior)
    };

    if let Some(lambda) = closed_form {
        let z: Vec<f64> = y.iter().map(|&v| (v + lambda).clamp(0.0, 1.0)).collect();
        let deviation = (z.iter().sum::<f64>() - m).abs();
        if deviation <= SUM_TOL {
            return Ok(ProjectionResult { z, lambda, k0, k1 });
        }
        if strict && k0 + k1 == d {
            return Err(Error::DegenerateProjection { deviation });
        }
    }
    if strict {
        return Err(Error::DegenerateProjection { deviation: f64::NAN });
    }
    Ok(project_by_bisection(y, c))
}

/// Projection by bisection on the monotone map `lambda -> sum(clamp(y + lambda))`.
/// Slower than [`project_sbs`]; used as its fallback.
pub fn project_by_bisection(y: &[f64], c: &SbsConstraint) -> ProjectionResult {
    let m = c.budget;
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let total = |lambda: f64| y.iter().map(|&v| (v + lambda).clamp(0.0, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = (-max, 1.0 - min);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let z: Vec<f64> = y.iter().map(|&v| (v + lambda).clamp(0.0, 1.0)).collect();
    let k0 = z.iter().filter(|&&v| v == 0.0).count();
    let k1 = z.iter().filter(|&&v| v == 1.0).count();
    ProjectionResult { z, lambda, k0, k1 }
}
