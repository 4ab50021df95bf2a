//! Seeded synthetic ensembles and CSV matrix I/O.
//!
//! Entries are drawn row-major from `ChaCha8Rng::seed_from_u64(seed)`, so a
//! spec always produces the same matrix.
//!
//! The CSV format has one sensor per line, comma-separated decimal values and
//! no header. Lines starting with `#` are ignored, which lets writers prepend
//! a single provenance line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SensingMatrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Gaussian,
    Uniform01,
    Bernoulli01,
    /// Identity rows `0..N` stacked on Gaussian rows `N..2N`.
    IdentityGaussian,
    /// Gaussian rows `0..g` stacked on U[0,1] rows `g..D`.
    UniformGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub d: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian row count for `uniform-gaussian`.
    #[serde(default = "default_gaussian_rows")]
    pub gaussian_rows: usize,
    /// Draw Bernoulli entries from {-1, 1} instead of {0, 1}.
    #[serde(default)]
    pub signed: bool,
}

fn default_gaussian_rows() -> usize {
    10
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, d: usize, n: usize, seed: u64) -> Self {
        Self { kind, d, n, seed, gaussian_rows: default_gaussian_rows(), signed: false }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d == 0 || self.n < 2 {
            return bad(format!("need D >= 1 and N >= 2, got D = {}, N = {}", self.d, self.n));
        }
        match self.kind {
            EnsembleKind::IdentityGaussian if self.d != 2 * self.n => {
                bad(format!("identity-gaussian needs D = 2N, got D = {}, N = {}", self.d, self.n))
            }
            EnsembleKind::UniformGaussian if self.gaussian_rows == 0 || self.gaussian_rows >= self.d => {
                bad(format!(
                    "uniform-gaussian needs 0 < gaussian_rows < D, got {} with D = {}",
                    self.gaussian_rows, self.d
                ))
            }
            _ => Ok(()),
        }
    }
}

/// A contiguous, named range of rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowBlock {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

impl RowBlock {
    fn new(name: &str, start: usize, end: usize) -> Self {
        Self { name: name.to_string(), start, end }
    }

    pub fn contains(&self, row: usize) -> bool {
        (self.start..self.end).contains(&row)
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub matrix: SensingMatrix,
    pub blocks: Vec<RowBlock>,
}

impl Generated {
    pub fn block(&self, name: &str) -> Option<&RowBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn manifest(&self, spec: &EnsembleSpec) -> Manifest {
        Manifest {
            spec: spec.clone(),
            rows: self.matrix.sensors(),
            cols: self.matrix.atoms(),
            generator: "ChaCha8Rng::seed_from_u64, row-major".to_string(),
            blocks: self.blocks.clone(),
        }
    }
}

/// Sidecar JSON describing how a matrix file was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: EnsembleSpec,
    pub rows: usize,
    pub cols: usize,
    pub generator: String,
    pub blocks: Vec<RowBlock>,
}

pub fn generate(spec: &EnsembleSpec) -> Result<Generated> {
    spec.validate()?;
    let (d, n) = (spec.d, spec.n);
    let mut rng = rng_from_seed(spec.seed);
    let mut data = DMatrix::zeros(d, n);
    let mut gaussian = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let blocks;
    match spec.kind {
        EnsembleKind::Gaussian => {
            fill_rows(&mut data, 0..d, &mut rng, &mut gaussian);
            blocks = vec![RowBlock::new("gaussian", 0, d)];
        }
        EnsembleKind::Uniform01 => {
            fill_rows(&mut data, 0..d, &mut rng, &mut |r| r.random::<f64>());
            blocks = vec![RowBlock::new("uniform", 0, d)];
        }
        EnsembleKind::Bernoulli01 => {
            let (lo, hi) = if spec.signed { (-1.0, 1.0) } else { (0.0, 1.0) };
            fill_rows(&mut data, 0..d, &mut rng, &mut |r| if r.random::<bool>() { hi } else { lo });
            blocks = vec![RowBlock::new("bernoulli", 0, d)];
        }
        EnsembleKind::IdentityGaussian => {
            for i in 0..n {
                data[(i, i)] = 1.0;
            }
            fill_rows(&mut data, n..d, &mut rng, &mut gaussian);
            blocks = vec![RowBlock::new("identity", 0, n), RowBlock::new("gaussian", n, d)];
        }
        EnsembleKind::UniformGaussian => {
            let g = spec.gaussian_rows;
            fill_rows(&mut data, 0..g, &mut rng, &mut gaussian);
            fill_rows(&mut data, g..d, &mut rng, &mut |r| r.random::<f64>());
            blocks = vec![RowBlock::new("gaussian", 0, g), RowBlock::new("uniform", g, d)];
        }
    }
    Ok(Generated { matrix: SensingMatrix::new(data)?, blocks })
}

fn fill_rows<R: Rng>(
    data: &mut DMatrix<f64>,
    rows: std::ops::Range<usize>,
    rng: &mut R,
    draw: &mut dyn FnMut(&mut R) -> f64,
) {
    for i in rows {
        for j in 0..data.ncols() {
            data[(i, j)] = draw(rng);
        }
    }
}

/// Reads a CSV matrix, rejecting ragged rows and non-numeric cells.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<SensingMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: c + 1,
                    message: format!("not a finite number: {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: row.len().min(first.len()) + 1,
                    message: format!("ragged row: {} values, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    SensingMatrix::from_rows(&rows)
}

/// Writes `m` as CSV with shortest round-trip float formatting, optionally
/// preceded by a `#` comment line.
pub fn save_matrix(path: impl AsRef<Path>, m: &SensingMatrix, header: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(h) = header {
        writeln!(out, "# {}", h.replace('\n', " "))?;
    }
    for row in m.as_matrix().row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}
