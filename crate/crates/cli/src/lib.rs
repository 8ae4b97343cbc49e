//! Driver behind the `toric-outliers` binary.
//!
//! Exit codes: 0 success, 1 other failure, 2 parse or usage error,
//! 3 fit did not converge, 4 resource limit (import a basis instead),
//! 5 trivial augmentation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};
use toric_outliers::detect::{
    global_max_residual_test, poisson_outlier_regions, scan_residuals, CandidateReport, MaxResidualTest,
    PoissonRegion, DEFAULT_THRESHOLD,
};
use toric_outliers::exact::{mc_pvalue_lrt_traced, write_trace, SamplerConfig, RNG_ALGORITHM};
use toric_outliers::fit::{
    g2_counts, lrt_detailed, mle_fit, pearson_residuals, FitResult, TestResult, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use toric_outliers::models::augment_set;
use toric_outliers::tables::read_table;
use toric_outliers::toric::{markov_basis_with, preset_basis, read_moves, write_moves, MarkovBasis, MarkovOptions};
use toric_outliers::{DesignMatrix, Error, ModelSpec, ModelSpecFile, Table, TableFormat};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "toric-outliers", version, about = "Model-based outlier detection in contingency tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the base model, or the likelihood-ratio test when the spec has outliers.
    Fit(FitArgs),
    /// Flag cells with large residuals, optionally testing each one.
    Scan(ScanArgs),
    /// Compute, or import and check, a Markov basis of the base model.
    Basis(BasisArgs),
    /// Asymptotic and Monte Carlo test of an outlier set or pattern.
    Test(TestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Auto,
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Table file (CSV, or JSON by extension).
    #[arg(long)]
    pub table: PathBuf,
    /// Model spec JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Print the JSON report only.
    #[arg(long)]
    pub json: bool,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long = "B", default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Worker threads for parallel chains; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Read the Markov basis from this file instead of computing it.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Auto)]
    pub preset: Preset,
    /// Give up on basis computation after this many seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            replicates: self.replicates,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            chains: self.chains,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Run a single-outlier test for every candidate.
    #[arg(long)]
    pub test_cells: bool,
    /// Add Monte Carlo p-values to the per-cell tests.
    #[arg(long, requires = "test_cells")]
    pub mc: bool,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    /// Model spec JSON; outlier columns are ignored.
    #[arg(long)]
    pub model: PathBuf,
    /// Table giving the shape and axis names.
    #[arg(long, conflicts_with = "dims")]
    pub table: Option<PathBuf>,
    /// Shape as comma-separated level counts, e.g. 3,3.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Write the moves here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Check and re-emit an externally computed basis.
    #[arg(long)]
    pub import: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Auto)]
    pub preset: Preset,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Write the sampled statistics as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => 2,
            Error::Convergence { .. } => 3,
            Error::Resource(_) => 4,
            Error::Triviality(_) => 5,
            _ => 1,
        };
        let mut message = e.to_string();
        if code == 4 {
            message.push_str("; compute the basis elsewhere and pass it with --import or --basis");
        }
        CliError { code, message }
    }
}

fn other(message: impl Into<String>) -> CliError {
    CliError {
        code: 1,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Serialize)]
pub struct Engine {
    pub name: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table_sha256: Option<String>,
    pub model_sha256: String,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub converged: bool,
    pub iterations: usize,
    pub max_margin_gap: f64,
    pub fitted: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<f64>>,
    /// Deviance against the saturated model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Sampler {
    pub config: SamplerConfig,
    /// Diagnostics are absent when several tests shared the config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BasisInfo {
    pub source: String,
    pub moves: usize,
    pub degrees: Vec<(i64, usize)>,
}

#[derive(Debug, Serialize)]
pub struct Decision {
    pub alpha: f64,
    pub reject_asymptotic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject_monte_carlo: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct CellTest {
    pub cell: usize,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub basis_seconds: Option<f64>,
    pub total_seconds: f64,
}

/// Everything a run produced; one JSON object per invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub engine: Engine,
    pub input: InputDigest,
    pub model: ModelSpecFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augmented_fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<CandidateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_tests: Option<Vec<CellTest>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual_test: Option<MaxResidualTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_regions: Option<Vec<PoissonRegion>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RunReport {
    fn new(command: &'static str, input: InputDigest, model: ModelSpecFile) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command,
            engine: Engine {
                name: "toric-outliers",
                version: env!("CARGO_PKG_VERSION"),
                rng: RNG_ALGORITHM,
            },
            input,
            model,
            dims: None,
            base_fit: None,
            augmented_fit: None,
            test: None,
            decision: None,
            sampler: None,
            basis: None,
            candidates: None,
            cell_tests: None,
            max_residual_test: None,
            poisson_regions: None,
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| other(format!("cannot read {}: {e}", path.display())))
}

struct Inputs {
    table: Table,
    file: ModelSpecFile,
    spec: ModelSpec,
    digest: InputDigest,
}

fn load(common: &Common) -> CliResult<Inputs> {
    if !(common.alpha > 0.0 && common.alpha < 1.0) {
        return Err(other("--alpha must lie in (0, 1)"));
    }
    let table_bytes = read_bytes(&common.table)?;
    let model_bytes = read_bytes(&common.model)?;
    let table = read_table(table_bytes.as_slice(), TableFormat::from_path(&common.table))?;
    let file = ModelSpecFile::from_json(&String::from_utf8_lossy(&model_bytes))?;
    let spec = file.resolve(&table)?;
    Ok(Inputs {
        table,
        file,
        spec,
        digest: InputDigest {
            table_sha256: Some(sha256_hex(&table_bytes)),
            model_sha256: sha256_hex(&model_bytes),
        },
    })
}

fn summarize(table: &Table, fit: &FitResult, design: &DesignMatrix) -> CliResult<FitSummary> {
    let observed = table.counts_f64();
    let g2 = g2_counts(table.counts(), &fit.fitted, &observed).ok();
    Ok(FitSummary {
        converged: fit.converged,
        iterations: fit.iterations,
        max_margin_gap: fit.max_margin_gap,
        fitted: fit.fitted.clone(),
        residuals: pearson_residuals(table, fit).ok(),
        g2,
        df: Some(design.num_cells() - design.rank()),
    })
}

fn obtain_basis(
    a: &DesignMatrix,
    import: Option<&Path>,
    preset: Preset,
    time_limit: Option<f64>,
) -> CliResult<(MarkovBasis, String)> {
    if let Some(path) = import {
        let text = read_bytes(path)?;
        let moves = read_moves(text.as_slice(), a.num_cells())?;
        let basis = MarkovBasis::from_moves(a.clone(), moves)?;
        return Ok((basis, format!("imported from {}", path.display())));
    }
    if preset != Preset::Off {
        if let Some(b) = preset_basis(a) {
            return Ok((b, "preset".into()));
        }
        if preset == Preset::On {
            return Err(other("no preset basis is known for this model; use --preset auto or off"));
        }
    }
    let time_limit = match time_limit {
        Some(s) if !(s > 0.0 && s.is_finite()) => return Err(other("--time-limit must be positive")),
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let opts = MarkovOptions {
        time_limit,
        ..MarkovOptions::default()
    };
    Ok((markov_basis_with(a, &opts)?, "computed".into()))
}

fn basis_info(basis: &MarkovBasis, source: String) -> BasisInfo {
    let mut degrees: Vec<(i64, usize)> = Vec::new();
    for m in basis.moves() {
        match degrees.iter_mut().find(|(d, _)| *d == m.degree()) {
            Some(entry) => entry.1 += 1,
            None => degrees.push((m.degree(), 1)),
        }
    }
    degrees.sort_unstable();
    BasisInfo {
        source,
        moves: basis.len(),
        degrees,
    }
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(other("--threads must be at least 1"));
        }
        // A second call in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Output of one invocation: the report plus an optional moves file body.
pub struct Outcome {
    pub report: RunReport,
    pub table: Option<Table>,
    pub moves_text: Option<String>,
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let inp = load(&args.common)?;
    let mut report = RunReport::new("fit", inp.digest, inp.file.clone());
    report.dims = Some(inp.table.shape().dims().to_vec());
    let base_design = inp.spec.base_design()?;
    if inp.spec.has_outliers() {
        inp.spec.validate()?;
        let aug_design = inp.spec.design()?;
        let out = lrt_detailed(&inp.table, &base_design, &aug_design, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        report.base_fit = Some(summarize(&inp.table, &out.base, &base_design)?);
        report.augmented_fit = Some(summarize(&inp.table, &out.augmented, &aug_design)?);
        report.decision = Some(Decision {
            alpha: args.common.alpha,
            reject_asymptotic: out.result.p_asymptotic <= args.common.alpha,
            reject_monte_carlo: None,
        });
        report.test = Some(out.result);
    } else {
        let fit = mle_fit(&base_design, &inp.table, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        report.base_fit = Some(summarize(&inp.table, &fit, &base_design)?);
        if inp.table.shape().ndim() == 2 && is_independence(&inp.spec) {
            report.max_residual_test = Some(global_max_residual_test(&inp.table, args.common.alpha)?);
            report.poisson_regions = Some(poisson_outlier_regions(&inp.table, &base_design, args.common.alpha)?);
        }
    }
    finish_timing(&mut report, args.common.timing, start, None);
    Ok(Outcome {
        report,
        table: Some(inp.table),
        moves_text: None,
    })
}

fn is_independence(spec: &ModelSpec) -> bool {
    let mut terms: Vec<Vec<usize>> = spec.terms.clone();
    terms.sort();
    terms == [vec![0], vec![1]]
}

pub fn cmd_scan(args: &ScanArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let inp = load(&args.common)?;
    configure_threads(args.sampler.threads)?;
    let mut report = RunReport::new("scan", inp.digest, inp.file.clone());
    report.dims = Some(inp.table.shape().dims().to_vec());
    let base = inp.spec.base_design()?;
    let candidates = scan_residuals(&inp.table, &base, args.threshold)?;
    let mut basis_seconds = None;
    if args.test_cells {
        let basis = if args.mc {
            let t = Instant::now();
            let (b, source) = obtain_basis(
                &base,
                args.sampler.basis.as_deref(),
                args.sampler.preset,
                args.sampler.time_limit,
            )?;
            basis_seconds = Some(t.elapsed().as_secs_f64());
            report.basis = Some(basis_info(&b, source));
            report.sampler = Some(Sampler {
                config: args.sampler.config(),
                exceed: None,
                failed_replicates: None,
                acceptance_rate: None,
                warning: None,
            });
            Some(b)
        } else {
            None
        };
        let cfg = args.sampler.config();
        let mut tests = Vec::new();
        for c in &candidates.cells {
            let aug = augment_set(&base, &[c.cell])?;
            let result = match &basis {
                Some(b) => mc_pvalue_lrt_traced(&inp.table, &base, &aug, b, &cfg, false).map(|o| o.result),
                None => lrt_detailed(&inp.table, &base, &aug, DEFAULT_TOL, DEFAULT_MAX_ITER).map(|o| o.result),
            };
            let (test, skipped) = match result {
                Ok(r) => (Some(r), None),
                Err(e @ (Error::Triviality(_) | Error::Evaluation(_))) => (None, Some(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            tests.push(CellTest {
                cell: c.cell,
                label: c.label.clone(),
                test,
                skipped,
            });
        }
        report.cell_tests = Some(tests);
    }
    report.candidates = Some(candidates);
    finish_timing(&mut report, args.common.timing, start, basis_seconds);
    Ok(Outcome {
        report,
        table: Some(inp.table),
        moves_text: None,
    })
}

pub fn cmd_basis(args: &BasisArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let model_bytes = read_bytes(&args.model)?;
    let file = ModelSpecFile::from_json(&String::from_utf8_lossy(&model_bytes))?;
    let (table, table_digest) = match (&args.table, &args.dims) {
        (Some(path), _) => {
            let bytes = read_bytes(path)?;
            let t = read_table(bytes.as_slice(), TableFormat::from_path(path))?;
            (t, Some(sha256_hex(&bytes)))
        }
        (None, Some(dims)) => {
            let k: usize = dims.iter().product();
            (Table::from_counts(dims, &vec![0; k])?, None)
        }
        (None, None) => return Err(other("basis needs --table or --dims for the table shape")),
    };
    let spec = file.resolve(&table)?;
    let a = spec.base_design()?;
    let (basis, source) = obtain_basis(&a, args.import.as_deref(), args.preset, args.time_limit)?;
    let basis_seconds = start.elapsed().as_secs_f64();
    let mut text = Vec::new();
    write_moves(basis.moves(), &mut text)?;
    let mut report = RunReport::new(
        "basis",
        InputDigest {
            table_sha256: table_digest,
            model_sha256: sha256_hex(&model_bytes),
        },
        file,
    );
    report.dims = Some(table.shape().dims().to_vec());
    report.basis = Some(basis_info(&basis, source));
    finish_timing(&mut report, args.timing, start, Some(basis_seconds));
    Ok(Outcome {
        report,
        table: Some(table),
        moves_text: Some(String::from_utf8(text).expect("moves are ascii")),
    })
}

pub fn cmd_test(args: &TestArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    let inp = load(&args.common)?;
    configure_threads(args.sampler.threads)?;
    if !inp.spec.has_outliers() {
        return Err(other("the model spec has no outlier sets or patterns to test"));
    }
    inp.spec.validate()?;
    let base = inp.spec.base_design()?;
    let aug = inp.spec.design()?;
    let cfg = args.sampler.config();
    cfg.validate()?;
    let lrt = lrt_detailed(&inp.table, &base, &aug, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let t = Instant::now();
    let (basis, source) = obtain_basis(
        &base,
        args.sampler.basis.as_deref(),
        args.sampler.preset,
        args.sampler.time_limit,
    )?;
    let basis_seconds = t.elapsed().as_secs_f64();
    let mc = mc_pvalue_lrt_traced(&inp.table, &base, &aug, &basis, &cfg, args.trace.is_some())?;
    if let Some(path) = &args.trace {
        let f = fs::File::create(path).map_err(|e| other(format!("cannot write {}: {e}", path.display())))?;
        write_trace(&mc.trace, std::io::BufWriter::new(f))?;
    }
    let mut report = RunReport::new("test", inp.digest, inp.file.clone());
    report.dims = Some(inp.table.shape().dims().to_vec());
    report.base_fit = Some(summarize(&inp.table, &lrt.base, &base)?);
    report.augmented_fit = Some(summarize(&inp.table, &lrt.augmented, &aug)?);
    let alpha = args.common.alpha;
    report.decision = Some(Decision {
        alpha,
        reject_asymptotic: mc.result.p_asymptotic <= alpha,
        reject_monte_carlo: mc.result.p_monte_carlo.map(|p| p <= alpha),
    });
    report.test = Some(mc.result.clone());
    report.sampler = Some(Sampler {
        config: mc.config.clone(),
        exceed: Some(mc.exceed),
        failed_replicates: Some(mc.failed_replicates),
        acceptance_rate: Some(mc.acceptance_rate),
        warning: mc.warning.clone(),
    });
    report.basis = Some(basis_info(&basis, source));
    finish_timing(&mut report, args.common.timing, start, Some(basis_seconds));
    Ok(Outcome {
        report,
        table: Some(inp.table),
        moves_text: None,
    })
}

fn finish_timing(report: &mut RunReport, enabled: bool, start: Instant, basis_seconds: Option<f64>) {
    if enabled {
        report.timing = Some(Timing {
            basis_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
}

fn fmt_p(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

/// Short plain-text rendering of a report.
pub fn render_text(report: &RunReport, table: Option<&Table>) -> String {
    let mut s = String::new();
    let label = |k: usize| table.map_or_else(|| format!("#{k}"), |t| t.cell_label(k));
    if let Some(f) = &report.base_fit {
        s += &format!("base model: {} iterations", f.iterations);
        if let (Some(g2), Some(df)) = (f.g2, f.df) {
            s += &format!(", deviance {g2:.4} on {df} df");
        }
        s.push('\n');
        if report.test.is_none() {
            for (k, v) in f.fitted.iter().enumerate() {
                let r = f.residuals.as_ref().map_or(f64::NAN, |r| r[k]);
                s += &format!("  {:<16} fitted {:>10.4}  residual {:>8.4}\n", label(k), v, r);
            }
        }
    }
    if let Some(m) = &report.max_residual_test {
        s += &format!(
            "max adjusted residual {:.4} at {} (critical {:.4}): {}\n",
            m.z,
            label(m.cell),
            m.critical,
            if m.reject { "reject" } else { "no rejection" }
        );
    }
    if let Some(t) = &report.test {
        s += &format!("G2 = {:.4} on {} df, asymptotic p = {}\n", t.statistic, t.df, fmt_p(t.p_asymptotic));
        if let Some(p) = t.p_monte_carlo {
            s += &format!(
                "Monte Carlo p = {} (B = {}, seed = {})\n",
                fmt_p(p),
                t.replicates.unwrap_or(0),
                t.seed.unwrap_or(0)
            );
        }
    }
    if let Some(d) = &report.decision {
        s += &format!("decision at alpha = {}: asymptotic {}", d.alpha, reject_word(d.reject_asymptotic));
        if let Some(r) = d.reject_monte_carlo {
            s += &format!(", Monte Carlo {}", reject_word(r));
        }
        s.push('\n');
    }
    if let Some(smp) = &report.sampler {
        if let Some(rate) = smp.acceptance_rate {
            s += &format!("acceptance rate {rate:.3}\n");
        }
        if let Some(w) = &smp.warning {
            s += &format!("warning: {w}\n");
        }
    }
    if let Some(b) = &report.basis {
        let degs: Vec<String> = b.degrees.iter().map(|(d, n)| format!("{n} of degree {d}")).collect();
        s += &format!("Markov basis ({}): {} moves, {}\n", b.source, b.moves, degs.join(", "));
    }
    if let Some(c) = &report.candidates {
        s += &format!("{} candidate(s) with |residual| >= {}\n", c.cells.len(), c.threshold);
        for cand in &c.cells {
            s += &format!(
                "  {:<16} observed {:>6}  fitted {:>10.4}  residual {:>8.4}  {:?}\n",
                cand.label, cand.observed, cand.fitted, cand.residual, cand.direction
            );
        }
    }
    if let Some(tests) = &report.cell_tests {
        for t in tests {
            match (&t.test, &t.skipped) {
                (Some(r), _) => {
                    s += &format!("  test {:<16} G2 {:>9.4}  p_asym {}", t.label, r.statistic, fmt_p(r.p_asymptotic));
                    if let Some(p) = r.p_monte_carlo {
                        s += &format!("  p_mc {}", fmt_p(p));
                    }
                    s.push('\n');
                }
                (None, Some(why)) => s += &format!("  test {:<16} skipped: {why}\n", t.label),
                (None, None) => {}
            }
        }
    }
    if let Some(t) = &report.timing {
        s += &format!("time {:.3} s\n", t.total_seconds);
    }
    s
}

fn reject_word(r: bool) -> &'static str {
    if r {
        "reject"
    } else {
        "keep base model"
    }
}

/// Runs a parsed command line, writing output to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> CliResult<()> {
    let (outcome, json, moves_out) = match &cli.command {
        Command::Fit(a) => (cmd_fit(a)?, a.common.json, None),
        Command::Scan(a) => (cmd_scan(a)?, a.common.json, None),
        Command::Test(a) => (cmd_test(a)?, a.common.json, None),
        Command::Basis(a) => (cmd_basis(a)?, a.json, Some(a.out.as_ref())),
    };
    let io = |e: std::io::Error| other(format!("write failed: {e}"));
    if let (Some(text), Some(Some(path))) = (&outcome.moves_text, moves_out) {
        fs::write(path, text).map_err(|e| other(format!("cannot write {}: {e}", path.display())))?;
    }
    if json {
        writeln!(out, "{}", outcome.report.to_json()).map_err(io)?;
        return Ok(());
    }
    match (&outcome.moves_text, moves_out) {
        (Some(text), Some(None)) => out.write_all(text.as_bytes()).map_err(io)?,
        _ => write!(out, "{}", render_text(&outcome.report, outcome.table.as_ref())).map_err(io)?,
    }
    Ok(())
}
