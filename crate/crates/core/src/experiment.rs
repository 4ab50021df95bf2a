//! Benchmark sweeps: every (trial, selector, budget) cell gets the matrix
//! metrics of its selected rows, basis-pursuit accuracy at each sparsity and
//! the selector's wall time.
//!
//! Trial `t` draws its matrix with `derive_seed(spec.seed, t)` and seeds its
//! selectors and support sampling from `derive_seed(config.seed, t)`, so a
//! config file fully determines the numeric output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{select_exhaustive_mu_avg, select_fp_greedy, select_random, BaselineConfig};
use crate::datagen::{generate, load_matrix, EnsembleSpec, RowBlock};
use crate::error::{Error, Result};
use crate::matrix::{MetricReport, SensingMatrix, SensorSubset};
use crate::optimizer::{run_insense, InsenseConfig};
use crate::recovery::{evaluate_recovery, BpConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSource {
    Ensemble(EnsembleSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SelectorSpec {
    Insense {
        #[serde(default)]
        config: InsenseConfig,
    },
    Random,
    FpGreedy,
    Exhaustive {
        #[serde(default = "default_exhaustive_limit")]
        limit: u64,
    },
}

fn default_exhaustive_limit() -> u64 {
    BaselineConfig::default().exhaustive_limit as u64
}

/// A selector plus the name its rows are reported under (defaults to the
/// method name; needed when one method appears with several configs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub spec: SelectorSpec,
}

impl SelectorEntry {
    pub fn name(&self) -> &str {
        self.label.as_deref().unwrap_or(self.spec.name())
    }
}

impl From<SelectorSpec> for SelectorEntry {
    fn from(spec: SelectorSpec) -> Self {
        Self { label: None, spec }
    }
}

impl SelectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SelectorSpec::Insense { .. } => "insense",
            SelectorSpec::Random => "random",
            SelectorSpec::FpGreedy => "fp-greedy",
            SelectorSpec::Exhaustive { .. } => "exhaustive",
        }
    }

    /// Runs the selector; `seed` replaces any seed in the selector's own config.
    pub fn select(&self, phi: &SensingMatrix, m: usize, seed: u64) -> Result<SensorSubset> {
        match self {
            SelectorSpec::Insense { config } => {
                let cfg = InsenseConfig { seed, ..config.clone() };
                Ok(run_insense(phi, m, &cfg)?.subset)
            }
            SelectorSpec::Random => {
                select_random(phi, m, &BaselineConfig { seed, ..Default::default() })
            }
            SelectorSpec::FpGreedy => select_fp_greedy(phi, m),
            SelectorSpec::Exhaustive { limit } => select_exhaustive_mu_avg(
                phi,
                m,
                &BaselineConfig { exhaustive_limit: *limit as u128, ..Default::default() },
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub matrix: MatrixSource,
    pub selectors: Vec<SelectorEntry>,
    pub budgets: Vec<usize>,
    #[serde(default)]
    pub sparsities: Vec<usize>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<OutputFormat>,
    #[serde(default)]
    pub bp: BpConfig,
}

fn one() -> usize {
    1
}

fn all_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl ExperimentConfig {
    /// Reads a JSON config. A relative matrix file path is taken relative to
    /// the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        if let MatrixSource::File(p) = &mut cfg.matrix {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.selectors.is_empty() {
            return Err(Error::InvalidConfig("at least one selector is required".into()));
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return Err(Error::InvalidConfig("budgets must be a non-empty list of positive integers".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.sparsities.contains(&0) {
            return Err(Error::InvalidConfig("sparsities must be positive".into()));
        }
        if let MatrixSource::Ensemble(spec) = &self.matrix {
            spec.validate()?;
        }
        let mut names: Vec<&str> = self.selectors.iter().map(|s| s.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("selector names must be unique; add a label".into()));
        }
        for s in &self.selectors {
            if let SelectorSpec::Insense { config } = &s.spec {
                config.validate()?;
            }
        }
        self.bp.validate()
    }
}

/// One benchmark cell. `None` metrics are undefined (or the cell failed, in
/// which case `error` says why).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub trial: usize,
    pub selector: String,
    pub m: usize,
    pub matrix_seed: Option<u64>,
    pub selector_seed: u64,
    pub subset: Option<Vec<usize>>,
    pub mu_avg: Option<f64>,
    pub mu_max: Option<f64>,
    pub frame_potential: Option<f64>,
    pub condition_number: Option<f64>,
    /// Accuracy in percent, one entry per configured sparsity.
    pub bp_accuracy: Vec<Option<f64>>,
    /// Percentage of selected rows from a block named `gaussian`, when the
    /// matrix has one.
    pub gaussian_ratio: Option<f64>,
    pub time_s: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// Number of defined values.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: Option<f64>,
    /// `mean ± sd` with four decimals.
    pub display: String,
}

impl Stat {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
        let sd = match (mean, n) {
            (Some(mu), n) if n > 1 => {
                Some((v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
            }
            (Some(_), _) => Some(0.0),
            _ => None,
        };
        let display = match (mean, sd) {
            (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
            _ => "NA".to_string(),
        };
        Self { n, mean, sd, display }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub selector: String,
    pub m: usize,
    pub trials: usize,
    pub failures: usize,
    pub mu_avg: Stat,
    pub mu_max: Stat,
    pub frame_potential: Stat,
    pub condition_number: Stat,
    pub bp_accuracy: Vec<(usize, Stat)>,
    pub gaussian_ratio: Stat,
    pub time_s: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<BenchmarkRow>,
    pub summary: Vec<SummaryCell>,
}

struct TrialMatrix {
    matrix: SensingMatrix,
    blocks: Vec<RowBlock>,
    seed: Option<u64>,
}

fn trial_matrix(source: &MatrixSource, trial: usize, cached: Option<&SensingMatrix>) -> Result<TrialMatrix> {
    match source {
        MatrixSource::Ensemble(spec) => {
            let seed = derive_seed(spec.seed, trial as u64);
            let g = generate(&spec.with_seed(seed))?;
            Ok(TrialMatrix { matrix: g.matrix, blocks: g.blocks, seed: Some(seed) })
        }
        MatrixSource::File(path) => {
            let matrix = match cached {
                Some(m) => m.clone(),
                None => load_matrix(path)?,
            };
            Ok(TrialMatrix { matrix, blocks: Vec::new(), seed: None })
        }
    }
}

/// Runs every cell. Cells run in parallel; rows come back ordered by
/// (trial, selector, budget). A cell that fails keeps its row with the error
/// recorded and the sweep continues.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let file_matrix = match &cfg.matrix {
        MatrixSource::File(p) => Some(load_matrix(p)?),
        MatrixSource::Ensemble(_) => None,
    };
    let matrices: Vec<TrialMatrix> = (0..cfg.trials)
        .map(|t| trial_matrix(&cfg.matrix, t, file_matrix.as_ref()))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.trials)
        .flat_map(|t| {
            (0..cfg.selectors.len()).flat_map(move |s| cfg.budgets.iter().map(move |&m| (t, s, m)))
        })
        .collect();
    let rows: Vec<BenchmarkRow> = jobs
        .into_par_iter()
        .map(|(t, s, m)| run_cell(cfg, &matrices[t], t, &cfg.selectors[s], m))
        .collect();
    let summary = summarize(cfg, &rows);
    Ok(BenchmarkOutput { config: cfg.clone(), rows, summary })
}

fn run_cell(cfg: &ExperimentConfig, tm: &TrialMatrix, trial: usize, sel: &SelectorEntry, m: usize) -> BenchmarkRow {
    let selector_seed = derive_seed(cfg.seed, trial as u64);
    let mut row = BenchmarkRow {
        trial,
        selector: sel.name().to_string(),
        m,
        matrix_seed: tm.seed,
        selector_seed,
        subset: None,
        mu_avg: None,
        mu_max: None,
        frame_potential: None,
        condition_number: None,
        bp_accuracy: vec![None; cfg.sparsities.len()],
        gaussian_ratio: None,
        time_s: None,
        error: None,
    };
    let start = Instant::now();
    let subset = match sel.spec.select(&tm.matrix, m, selector_seed) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.time_s = Some(start.elapsed().as_secs_f64());

    if let Some(block) = tm.blocks.iter().find(|b| b.name == "gaussian") {
        let hits = subset.indices().iter().filter(|&&i| block.contains(i)).count();
        row.gaussian_ratio = Some(100.0 * hits as f64 / subset.len() as f64);
    }
    match MetricReport::for_subset(&tm.matrix, &subset) {
        Ok(r) => {
            row.mu_avg = r.mu_avg;
            row.mu_max = r.mu_max;
            row.frame_potential = Some(r.frame_potential);
            row.condition_number = r.condition_number;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    let bp = BpConfig { seed: derive_seed(cfg.bp.seed, trial as u64), keep_per_trial: false, ..cfg.bp.clone() };
    let mut errors = Vec::new();
    for (slot, &k) in row.bp_accuracy.iter_mut().zip(&cfg.sparsities) {
        match evaluate_recovery(&tm.matrix, &subset, k, &bp) {
            Ok(report) => *slot = Some(report.accuracy_percent),
            Err(e) => errors.push(format!("K={k}: {e}")),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row.subset = Some(subset.into());
    row
}

fn summarize(cfg: &ExperimentConfig, rows: &[BenchmarkRow]) -> Vec<SummaryCell> {
    let mut out = Vec::new();
    for sel in &cfg.selectors {
        for &m in &cfg.budgets {
            let cell: Vec<&BenchmarkRow> =
                rows.iter().filter(|r| r.selector == sel.name() && r.m == m).collect();
            let stat = |f: &dyn Fn(&BenchmarkRow) -> Option<f64>| Stat::from_values(cell.iter().map(|r| f(r)));
            let bp_accuracy = cfg
                .sparsities
                .iter()
                .enumerate()
                .map(|(i, &k)| (k, stat(&|r| r.bp_accuracy[i])))
                .collect();
            out.push(SummaryCell {
                selector: sel.name().to_string(),
                m,
                trials: cell.len(),
                failures: cell.iter().filter(|r| r.error.is_some()).count(),
                mu_avg: stat(&|r| r.mu_avg),
                mu_max: stat(&|r| r.mu_max),
                frame_potential: stat(&|r| r.frame_potential),
                condition_number: stat(&|r| r.condition_number),
                bp_accuracy,
                gaussian_ratio: stat(&|r| r.gaussian_ratio),
                time_s: stat(&|r| r.time_s),
            });
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "NA".to_string())
}

impl BenchmarkOutput {
    /// CSV with one row per cell, preceded by a `#` line holding the config.
    pub fn to_csv(&self) -> Result<String> {
        let mut text = String::new();
        writeln!(text, "# config: {}", serde_json::to_string(&self.config)?).expect("write to string");
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "trial", "selector", "m", "matrix_seed", "selector_seed", "mu_avg", "mu_max",
            "frame_potential", "condition_number",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.config.sparsities.iter().map(|k| format!("bp_k{k}")));
        header.extend(["gaussian_ratio", "time_s", "subset", "error"].iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.trial.to_string(),
                r.selector.clone(),
                r.m.to_string(),
                r.matrix_seed.map(|s| s.to_string()).unwrap_or_else(|| "NA".into()),
                r.selector_seed.to_string(),
                fmt_opt(r.mu_avg),
                fmt_opt(r.mu_max),
                fmt_opt(r.frame_potential),
                fmt_opt(r.condition_number),
            ];
            rec.extend(r.bp_accuracy.iter().map(|v| fmt_opt(*v)));
            rec.push(fmt_opt(r.gaussian_ratio));
            rec.push(fmt_opt(r.time_s));
            rec.push(
                r.subset
                    .as_ref()
                    .map(|s| s.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default(),
            );
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        Ok(text)
    }

    /// Summary JSON (means and sample standard deviations per selector and
    /// budget) together with the config.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            config: &'a ExperimentConfig,
            summary: &'a [SummaryCell],
        }
        Ok(serde_json::to_string_pretty(&Doc { config: &self.config, summary: &self.summary })?)
    }

    /// Writes `results.csv` and/or `summary.json` into `dir` per the config's formats.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for f in &self.config.formats {
            let (name, body) = match f {
                OutputFormat::Csv => ("results.csv", self.to_csv()?),
                OutputFormat::Json => ("summary.json", self.summary_json()?),
            };
            let path = dir.join(name);
            fs::File::create(&path)?.write_all(body.as_bytes())?;
            written.push(path);
        }
        Ok(written)
    }
}
