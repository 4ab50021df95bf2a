//! Sensing matrices, sensor subsets and the quality metrics reported for a
//! selected submatrix.
//!
//! Rows of a [`SensingMatrix`] are sensors and columns are signal atoms. All
//! metrics are pure functions of the matrix. Coherence-type metrics become
//! undefined (`None`) when a column is numerically zero, which is what happens
//! when a selector keeps only rows that never touch some atom.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a column norm counts as zero.
pub const ZERO_COLUMN_RTOL: f64 = 1e-12;
/// Relative threshold below which the smallest singular value counts as zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Dense D×N real matrix; rows are sensors, columns are atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    data: DMatrix<f64>,
}

impl SensingMatrix {
    /// Wraps `data`, checking that it has at least one row, at least two
    /// columns and only finite entries.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 1 {
            return Err(Error::InvalidMatrix("matrix needs at least one row".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "matrix needs at least two columns, got {}",
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (col, row) = (pos / data.nrows(), pos % data.nrows());
            return Err(Error::InvalidMatrix(format!("non-finite entry at ({row}, {col})")));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidMatrix("matrix needs at least one row".into()));
        }
        let n = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidMatrix(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(d, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Number of sensors (rows).
    pub fn sensors(&self) -> usize {
        self.data.nrows()
    }

    /// Number of atoms (columns).
    pub fn atoms(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    pub fn row_vec(&self, row: usize) -> Vec<f64> {
        self.data.row(row).iter().copied().collect()
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        self.data.column_iter().map(|c| c.norm()).collect()
    }

    /// Indices of columns whose norm is at most [`ZERO_COLUMN_RTOL`] times the
    /// largest column norm.
    pub fn zero_columns(&self) -> Vec<usize> {
        let norms = self.column_norms();
        let largest = norms.iter().copied().fold(0.0, f64::max);
        let cutoff = ZERO_COLUMN_RTOL * largest;
        norms
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= cutoff)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn has_zero_column(&self) -> bool {
        !self.zero_columns().is_empty()
    }
}

/// A strictly increasing list of row indices into a matrix with `D` rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SensorSubset {
    indices: Vec<usize>,
}

impl SensorSubset {
    /// Validates that `indices` is non-empty, strictly increasing and below
    /// `dimension`.
    pub fn new(indices: Vec<usize>, dimension: usize) -> Result<Self> {
        let subset = Self::try_from(indices)?;
        if let Some(&last) = subset.indices.last() {
            if last >= dimension {
                return Err(Error::InvalidSubset(format!(
                    "index {last} out of range for {dimension} sensors"
                )));
            }
        }
        Ok(subset)
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, dimension: usize) -> Result<Self> {
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::InvalidSubset("duplicate sensor indices".into()));
        }
        Self::new(indices, dimension)
    }

    pub fn all(dimension: usize) -> Result<Self> {
        Self::new((0..dimension).collect(), dimension)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

impl TryFrom<Vec<usize>> for SensorSubset {
    type Error = Error;

    fn try_from(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSubset("subset must contain at least one sensor".into()));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset(format!(
                "indices must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { indices })
    }
}

impl From<SensorSubset> for Vec<usize> {
    fn from(s: SensorSubset) -> Self {
        s.indices
    }
}

/// Rows of `m` selected by `subset`, in subset order.
pub fn extract_submatrix(m: &SensingMatrix, subset: &SensorSubset) -> Result<SensingMatrix> {
    if let Some(&bad) = subset.indices().iter().find(|&&i| i >= m.sensors()) {
        return Err(Error::InvalidSubset(format!(
            "index {bad} out of range for {} sensors",
            m.sensors()
        )));
    }
    Ok(SensingMatrix { data: m.data.select_rows(subset.indices()) })
}

/// Coherence between columns `i` and `j`, or `None` if either is zero.
pub fn pairwise_coherence(m: &SensingMatrix, i: usize, j: usize) -> Result<Option<f64>> {
    let n = m.atoms();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidPair { i, j });
    }
    if m.zero_columns().iter().any(|&c| c == i || c == j) {
        return Ok(None);
    }
    let a = m.data.column(i);
    let b = m.data.column(j);
    let value = a.dot(&b).abs() / (a.norm() * b.norm());
    Ok(Some(value.min(1.0)))
}

/// Upper-triangle coherences μ_ij (i < j) via the column Gram matrix.
fn coherences(m: &SensingMatrix) -> Option<Vec<f64>> {
    if m.has_zero_column() {
        return None;
    }
    let gram = m.data.tr_mul(&m.data);
    let n = m.atoms();
    let norms: Vec<f64> = (0..n).map(|i| gram[(i, i)].sqrt()).collect();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for j in 1..n {
        for i in 0..j {
            out.push((gram[(i, j)].abs() / (norms[i] * norms[j])).min(1.0));
        }
    }
    Some(out)
}

/// Root-mean-square column coherence over all column pairs.
pub fn mu_avg(m: &SensingMatrix) -> Option<f64> {
    let mu = coherences(m)?;
    let mean_sq = mu.iter().map(|v| v * v).sum::<f64>() / mu.len() as f64;
    Some(mean_sq.sqrt())
}

/// Largest column coherence.
pub fn mu_max(m: &SensingMatrix) -> Option<f64> {
    coherences(m).map(|mu| mu.into_iter().fold(0.0, f64::max))
}

/// Sum of squared inner products over distinct row pairs; 0 for one row.
pub fn frame_potential(m: &SensingMatrix) -> f64 {
    let rows = &m.data * m.data.transpose();
    let d = rows.nrows();
    let mut fp = 0.0;
    for j in 1..d {
        for i in 0..j {
            fp += rows[(i, j)] * rows[(i, j)];
        }
    }
    fp
}

/// Ratio of the largest to the smallest of the min(M, N) singular values, or
/// `None` when the matrix is numerically rank deficient.
pub fn condition_number(m: &SensingMatrix) -> Option<f64> {
    let sv = m.data.clone().svd(false, false).singular_values;
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if largest <= 0.0 || smallest < RANK_RTOL * largest {
        None
    } else {
        Some(largest / smallest)
    }
}

/// The four matrix-quality metrics of a (sub)matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mu_avg: Option<f64>,
    pub mu_max: Option<f64>,
    pub frame_potential: f64,
    pub condition_number: Option<f64>,
}

impl MetricReport {
    pub fn compute(m: &SensingMatrix) -> Self {
        Self {
            mu_avg: mu_avg(m),
            mu_max: mu_max(m),
            frame_potential: frame_potential(m),
            condition_number: condition_number(m),
        }
    }

    /// Metrics of the rows of `m` picked by `subset`.
    pub fn for_subset(m: &SensingMatrix, subset: &SensorSubset) -> Result<Self> {
        Ok(Self::compute(&extract_submatrix(m, subset)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> SensingMatrix {
        SensingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(SensingMatrix::from_rows(&[vec![1.0]]).is_err());
        assert!(SensingMatrix::from_rows(&[]).is_err());
        assert!(SensingMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(SensingMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn subset_validation() {
        assert!(SensorSubset::new(vec![], 3).is_err());
        assert!(SensorSubset::new(vec![1, 1], 3).is_err());
        assert!(SensorSubset::new(vec![2, 1], 3).is_err());
        assert!(SensorSubset::new(vec![0, 3], 3).is_err());
        assert!(SensorSubset::from_unsorted(vec![2, 0], 3).is_ok());
        assert!(SensorSubset::from_unsorted(vec![2, 2], 3).is_err());
    }

    #[test]
    fn extract_rows_in_order() {
        let m = mat(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let s = SensorSubset::new(vec![0, 2], 3).unwrap();
        let sub = extract_submatrix(&m, &s).unwrap();
        assert_eq!(sub, mat(&[&[1.0, 2.0], &[5.0, 6.0]]));

        let all = SensorSubset::all(3).unwrap();
        assert_eq!(extract_submatrix(&m, &all).unwrap(), m);

        let too_far = SensorSubset::new(vec![5], 6).unwrap();
        assert!(matches!(extract_submatrix(&m, &too_far), Err(Error::InvalidSubset(_))));
    }

    #[test]
    fn pairwise_values() {
        let id = SensingMatrix::identity(3).unwrap();
        assert_eq!(pairwise_coherence(&id, 0, 1).unwrap(), Some(0.0));

        let dup = mat(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert_abs_diff_eq!(pairwise_coherence(&dup, 0, 1).unwrap().unwrap(), 1.0, epsilon = 1e-15);

        let m = mat(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let expected = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(pairwise_coherence(&m, 0, 1).unwrap().unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_max(&m).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_avg(&m).unwrap(), expected, epsilon = 1e-15);

        assert!(matches!(pairwise_coherence(&m, 1, 1), Err(Error::InvalidPair { .. })));
    }

    #[test]
    fn zero_column_makes_coherence_undefined() {
        let m = mat(&[&[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(m.zero_columns(), vec![1]);
        assert_eq!(pairwise_coherence(&m, 0, 1).unwrap(), None);
        assert!(pairwise_coherence(&m, 0, 2).unwrap().is_some());
        assert_eq!(mu_avg(&m), None);
        assert_eq!(mu_max(&m), None);
    }

    #[test]
    fn coherence_extremes() {
        let id = SensingMatrix::identity(4).unwrap();
        assert_eq!(mu_avg(&id), Some(0.0));
        assert_eq!(mu_max(&id), Some(0.0));

        let same = mat(&[&[2.0, 2.0, 2.0], &[-1.0, -1.0, -1.0]]);
        assert_abs_diff_eq!(mu_avg(&same).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn frame_potential_cases() {
        assert_eq!(frame_potential(&SensingMatrix::identity(5).unwrap()), 0.0);
        let two = mat(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(frame_potential(&two), 1.0);
        let one = mat(&[&[3.0, 4.0]]);
        assert_eq!(frame_potential(&one), 0.0);
    }

    #[test]
    fn condition_number_cases() {
        let rows = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_abs_diff_eq!(condition_number(&rows).unwrap(), 1.0, epsilon = 1e-12);
        let deficient = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(condition_number(&deficient), None);
        let diag = mat(&[&[3.0, 0.0], &[0.0, 1.5]]);
        assert_abs_diff_eq!(condition_number(&diag).unwrap(), 2.0, epsilon = 1e-12);
    }
}
