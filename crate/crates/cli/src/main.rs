//! `insense` command-line tool.
//!
//! Exit status: 0 on success, 1 when a command fails at run time, 2 on a usage
//! error. Sensor indices in every input and output are 0-based.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use insense::baselines::{select_exhaustive_mu_avg, select_fp_greedy, select_random};
use insense::datagen::{Generated, RowBlock};
use insense::optimizer::Init;
use insense::{
    evaluate_recovery, generate, load_matrix, run_benchmark, run_insense, save_matrix, BaselineConfig,
    BpConfig, EnsembleKind, EnsembleSpec, ExperimentConfig, InsenseConfig, MetricReport, SensingMatrix,
    SensorSubset,
};
use serde::Serialize;
use serde_json::json;

const OUTPUT_DIR_ENV: &str = "INSENSE_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "insense", version, about = "Incoherent sensor selection for sparse recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic sensing matrix and save it as CSV.
    Generate(GenerateArgs),
    /// Select M sensors (rows) from a matrix.
    Select(SelectArgs),
    /// Coherence, frame potential and condition number of a (sub)matrix.
    Metrics(MetricsArgs),
    /// Basis-pursuit exact-recovery accuracy on selected rows.
    Recover(RecoverArgs),
    /// Run a benchmark sweep described by a JSON config.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Gaussian,
    Uniform01,
    Bernoulli01,
    IdentityGaussian,
    UniformGaussian,
}

impl From<Kind> for EnsembleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gaussian => EnsembleKind::Gaussian,
            Kind::Uniform01 => EnsembleKind::Uniform01,
            Kind::Bernoulli01 => EnsembleKind::Bernoulli01,
            Kind::IdentityGaussian => EnsembleKind::IdentityGaussian,
            Kind::UniformGaussian => EnsembleKind::UniformGaussian,
        }
    }
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Synthetic ensemble kind.
    #[arg(long, value_enum)]
    ensemble: Kind,
    /// Number of candidate sensors (rows).
    #[arg(long)]
    d: usize,
    /// Number of atoms (columns).
    #[arg(long)]
    n: usize,
    /// Gaussian rows for uniform-gaussian.
    #[arg(long, default_value_t = 10)]
    gaussian_rows: usize,
    /// Bernoulli entries in {-1, 1} instead of {0, 1}.
    #[arg(long)]
    signed: bool,
}

impl EnsembleArgs {
    fn spec(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            gaussian_rows: self.gaussian_rows,
            signed: self.signed,
            ..EnsembleSpec::new(self.ensemble.into(), self.d, self.n, seed)
        }
    }
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct SourceChoice {
    /// CSV matrix, one sensor per line.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Synthetic ensemble (needs --d and --n).
    #[arg(long, value_enum, requires_all = ["d", "n"])]
    ensemble: Option<Kind>,
}

#[derive(Args, Debug)]
struct SourceArgs {
    #[command(flatten)]
    choice: SourceChoice,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    gaussian_rows: usize,
    #[arg(long)]
    signed: bool,
    /// Seed for a synthetic matrix; defaults to --seed.
    #[arg(long)]
    matrix_seed: Option<u64>,
}

struct Loaded {
    matrix: SensingMatrix,
    blocks: Vec<RowBlock>,
    description: serde_json::Value,
}

impl SourceArgs {
    fn load(&self, seed: u64) -> anyhow::Result<Loaded> {
        if let Some(path) = &self.choice.matrix {
            let matrix = load_matrix(path).with_context(|| format!("loading {}", path.display()))?;
            return Ok(Loaded { matrix, blocks: Vec::new(), description: json!({ "file": path }) });
        }
        let kind = self.choice.ensemble.expect("clap enforces a source");
        let spec = EnsembleSpec {
            gaussian_rows: self.gaussian_rows,
            signed: self.signed,
            ..EnsembleSpec::new(
                kind.into(),
                self.d.expect("required with --ensemble"),
                self.n.expect("required with --ensemble"),
                self.matrix_seed.unwrap_or(seed),
            )
        };
        let Generated { matrix, blocks } = generate(&spec)?;
        Ok(Loaded { matrix, blocks, description: json!({ "ensemble": spec }) })
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; defaults to matrix.csv in $INSENSE_OUTPUT_DIR or the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Method {
    Insense,
    Random,
    FpGreedy,
    Exhaustive,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Number of sensors to select.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    #[arg(long, value_enum, default_value_t = Method::Insense)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optimizer settings as JSON (fields of the optimizer config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Independent optimizer restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Start from a jittered uniform point.
    #[arg(long)]
    jitter: bool,
    /// Subset limit for the exhaustive selector.
    #[arg(long, default_value_t = 1_000_000)]
    exhaustive_limit: u64,
    /// Output JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RowsArgs {
    /// Comma-separated 0-based rows; all rows when neither this nor --selection is given.
    #[arg(long, value_delimiter = ',', conflicts_with = "selection")]
    rows: Option<Vec<usize>>,
    /// JSON written by `select`.
    #[arg(long)]
    selection: Option<PathBuf>,
}

impl RowsArgs {
    fn subset(&self, d: usize) -> anyhow::Result<SensorSubset> {
        if let Some(rows) = &self.rows {
            return Ok(SensorSubset::from_unsorted(rows.clone(), d)?);
        }
        if let Some(path) = &self.selection {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let Some(indices) = v.get("indices") else {
                bail!("{} has no \"indices\" field", path.display());
            };
            let indices: Vec<usize> = serde_json::from_value(indices.clone())?;
            return Ok(SensorSubset::new(indices, d)?);
        }
        Ok(SensorSubset::all(d)?)
    }
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    rows: RowsArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    rows: RowsArgs,
    /// Sparsity levels (repeat or comma-separate).
    #[arg(long = "k", value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of supports before sampling.
    #[arg(long, default_value_t = 10_000)]
    sample_cap: usize,
    /// Solve the nonnegative variant (x >= 0).
    #[arg(long)]
    nonnegative: bool,
    /// Per-trial CSV output (one file per sparsity, suffixed with _k<K>).
    #[arg(long)]
    per_trial: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory; overrides the config and $INSENSE_OUTPUT_DIR.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn env_output_dir() -> Option<PathBuf> {
    std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn write_or_print(out: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let spec = args.ensemble.spec(args.seed);
    let generated = generate(&spec)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| env_output_dir().unwrap_or_default().join("matrix.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let manifest = generated.manifest(&spec);
    save_matrix(&out, &generated.matrix, Some(&serde_json::to_string(&manifest)?))?;
    let manifest_path = out.with_extension("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    eprintln!("wrote {} and {}", out.display(), manifest_path.display());
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> anyhow::Result<()> {
    let loaded = args.source.load(args.seed)?;
    let phi = &loaded.matrix;
    let m = args.m as usize;
    let start = Instant::now();
    let mut report = serde_json::Map::new();
    let subset = match args.method {
        Method::Insense => {
            let mut cfg: InsenseConfig = match &args.config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => InsenseConfig::default(),
            };
            cfg.seed = args.seed;
            if let Some(r) = args.restarts {
                cfg.restarts = r;
            }
            if args.jitter {
                cfg.init = Init::UniformPlusJitter;
            }
            let result = run_insense(phi, m, &cfg)?;
            report.insert("weights".into(), json!(result.final_weights));
            report.insert("objective_trace".into(), json!(result.objective_trace));
            report.insert("iterations".into(), json!(result.iterations));
            report.insert("final_objective".into(), json!(result.final_objective));
            report.insert("converged".into(), json!(result.converged));
            report.insert("stop_reason".into(), json!(result.stop_reason));
            report.insert("restart".into(), json!(result.restart));
            report.insert("optimizer".into(), json!(cfg));
            result.subset
        }
        Method::Random => select_random(phi, m, &BaselineConfig { seed: args.seed, ..Default::default() })?,
        Method::FpGreedy => select_fp_greedy(phi, m)?,
        Method::Exhaustive => select_exhaustive_mu_avg(
            phi,
            m,
            &BaselineConfig { exhaustive_limit: args.exhaustive_limit as u128, ..Default::default() },
        )?,
    };
    let wall = start.elapsed().as_secs_f64();
    let metrics = MetricReport::for_subset(phi, &subset)?;
    let mut out = serde_json::Map::new();
    let method = args.method.to_possible_value().map(|v| v.get_name().to_string());
    out.insert("method".into(), json!(method));
    out.insert("m".into(), json!(m));
    out.insert("seed".into(), json!(args.seed));
    out.insert("matrix".into(), loaded.description);
    out.insert("indices".into(), json!(subset.indices()));
    out.insert("wall_time_s".into(), json!(wall));
    out.insert("metrics".into(), json!(metrics));
    if let Some(block) = loaded.blocks.iter().find(|b| b.name == "gaussian") {
        let hits = subset.indices().iter().filter(|&&i| block.contains(i)).count();
        out.insert("gaussian_ratio".into(), json!(100.0 * hits as f64 / m as f64));
    }
    out.extend(report);
    write_or_print(args.out.as_deref(), &out)
}

fn cmd_metrics(args: &MetricsArgs) -> anyhow::Result<()> {
    let loaded = args.source.load(args.seed)?;
    let subset = args.rows.subset(loaded.matrix.sensors())?;
    let metrics = MetricReport::for_subset(&loaded.matrix, &subset)?;
    write_or_print(None, &json!({ "rows": subset.indices(), "metrics": metrics }))
}

fn cmd_recover(args: &RecoverArgs) -> anyhow::Result<()> {
    let loaded = args.source.load(args.seed)?;
    let subset = args.rows.subset(loaded.matrix.sensors())?;
    let cfg = BpConfig {
        seed: args.seed,
        sample_cap: args.sample_cap,
        nonnegative: args.nonnegative,
        keep_per_trial: args.per_trial.is_some(),
        ..Default::default()
    };
    let mut reports = Vec::new();
    for &k in &args.k {
        let report = evaluate_recovery(&loaded.matrix, &subset, k, &cfg)?;
        if let Some(base) = &args.per_trial {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trials");
            let path = base.with_file_name(format!("{stem}_k{k}.csv"));
            report.write_per_trial_csv(fs::File::create(&path)?)?;
            eprintln!("wrote {}", path.display());
        }
        reports.push(insense::RecoveryReport { per_trial: None, ..report });
    }
    write_or_print(None, &json!({ "rows": subset.indices(), "bp": cfg, "reports": reports }))
}

fn cmd_benchmark(args: &BenchmarkArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::from_file(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    let dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(env_output_dir)
        .unwrap_or_else(|| PathBuf::from("results"));
    let output = run_benchmark(&cfg)?;
    for path in output.write(&dir)? {
        eprintln!("wrote {}", path.display());
    }
    let failed = output.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells recorded errors", output.rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Select(a) => cmd_select(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
