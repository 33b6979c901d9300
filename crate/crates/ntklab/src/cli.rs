//! Config parsing and the command drivers behind the `ntklab` binary.
//!
//! One TOML config file carries a section per subcommand (`[verify]`,
//! `[sweep]`, `[bounds]`, `[ntk]`, `[reprogram]`); unknown keys are rejected
//! with the offending key named. Exit codes: 0 on success, 1 when an asserted
//! invariant is violated (or a computation fails), 2 on config errors —
//! which are raised before any work starts, so exit 2 never leaves partial
//! reports behind. The `NTKLAB_SEED` environment variable overrides the
//! config seed of whichever subcommand runs.

use crate::bounds::{self, verification, BoundReport, GapBoundInputs, Thm1Mode};
use crate::experiments::{self, SweepConfig};
use crate::kernels::{self, Dataset, FeatureMap, FeatureMapKind};
use crate::linalg::{self, Matrix};
use crate::nets::{self, standard_normal, NetworkSpec};
use crate::reprogram;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::thread;

/// Environment variable that overrides the config seed.
pub const SEED_ENV_VAR: &str = "NTKLAB_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "ntklab",
    about = "Kernel-level laboratory for model reprogramming: NTK blocks, spectrum bounds, depth sweeps"
)]
pub struct CliArgs {
    /// Upper bound on concurrently running independent cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the randomized bound-verification sweep.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Override the first seed of the sweep range.
        #[arg(long)]
        seed_start: Option<u64>,
        /// Override the last seed of the sweep range (inclusive).
        #[arg(long)]
        seed_end: Option<u64>,
    },
    /// Run the depth sweep and write sweep/diagnostic reports.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Validate the config and paths, write nothing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Build one instance and emit every bound report as JSON.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Override the instance seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump a kernel matrix as CSV.
    Ntk {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a reprogramming instance and dump the loss trace.
    Reprogram {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments; maps to exit code 2.
    Config(String),
    /// Failure during computation; maps to exit code 1.
    Runtime(String),
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

// ---------------------------------------------------------------------
// Config file sections
// ---------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub ntk: Option<NtkSection>,
    #[serde(default)]
    pub reprogram: Option<ReprogramSection>,
}

fn default_seed_end() -> u64 {
    19
}

fn default_max_target_samples() -> usize {
    8
}

fn default_max_source_samples() -> usize {
    12
}

fn default_max_source_dim() -> usize {
    6
}

fn default_tolerance() -> f64 {
    bounds::BOUND_TOL
}

fn default_additivity_tolerance() -> f64 {
    1e-10
}

fn default_sigma_t() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub seed_start: u64,
    #[serde(default = "default_seed_end")]
    pub seed_end: u64,
    #[serde(default = "default_max_target_samples")]
    pub max_target_samples: usize,
    #[serde(default = "default_max_source_samples")]
    pub max_source_samples: usize,
    #[serde(default = "default_max_source_dim")]
    pub max_source_dim: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_additivity_tolerance")]
    pub additivity_tolerance: f64,
    /// Summary JSON goes here instead of stdout when set.
    #[serde(default)]
    pub report_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Isotropic,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub instance: InstanceKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_target_samples")]
    pub max_target_samples: usize,
    #[serde(default = "default_max_source_samples")]
    pub max_source_samples: usize,
    #[serde(default = "default_max_source_dim")]
    pub max_source_dim: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Ridge used by the empirical-risk report on the target NTK spectrum.
    #[serde(default = "default_sigma_t")]
    pub sigma_t: f64,
    /// Force the output mapping to zero.
    #[serde(default)]
    pub zero_mapping: bool,
    /// Replace the target set with this many fresh points (lets N_T exceed
    /// N_S to exercise the one-sided report).
    #[serde(default)]
    pub target_samples: Option<usize>,
    #[serde(default)]
    pub report_path: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NtkKind {
    /// Block empirical NTK, `N c x N c`.
    EmpiricalBlock,
    /// Trace-averaged scalar empirical NTK, `N x N`.
    EmpiricalScalar,
    /// Kernel matrix of an explicit feature map built over the same network.
    FeatureKernel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtkSection {
    pub kind: NtkKind,
    pub net: NetworkSpec,
    /// Required when `kind = "feature_kernel"`.
    #[serde(default)]
    pub feature_map: Option<FeatureMapKind>,
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReprogramSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_target_samples")]
    pub max_target_samples: usize,
    #[serde(default = "default_max_source_samples")]
    pub max_source_samples: usize,
    #[serde(default = "default_max_source_dim")]
    pub max_source_dim: usize,
    pub lr: f64,
    pub steps: usize,
    #[serde(default = "default_true")]
    pub train_transform: bool,
    #[serde(default = "default_true")]
    pub train_mapping: bool,
    pub trace_out: String,
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

/// Runs a parsed command line, returning the process exit code.
pub fn run(args: CliArgs) -> i32 {
    let jobs = args.jobs.max(1);
    let result = match args.command {
        Command::Verify {
            config,
            seed_start,
            seed_end,
        } => cmd_verify(&config, seed_start, seed_end, jobs),
        Command::Sweep { config, dry_run } => cmd_sweep(&config, dry_run, jobs),
        Command::Bounds { config, seed } => cmd_bounds(&config, seed),
        Command::Ntk { config } => cmd_ntk(&config),
        Command::Reprogram { config } => cmd_reprogram(&config),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|e| config_err(format!("{SEED_ENV_VAR}={raw:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Probes that `dir` (or its nearest existing ancestor) accepts writes,
/// without leaving anything behind.
fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    let mut base = dir;
    while !base.exists() {
        base = base
            .parent()
            .ok_or_else(|| config_err(format!("no existing ancestor for {}", dir.display())))?;
        if base.as_os_str().is_empty() {
            // Relative path bottomed out: probe the working directory.
            return probe_dir(Path::new("."), dir);
        }
    }
    if !base.is_dir() {
        return Err(config_err(format!("{} is not a directory", base.display())));
    }
    probe_dir(base, dir)
}

fn probe_dir(base: &Path, target: &Path) -> Result<(), CliError> {
    let probe = base.join(".ntklab-write-probe");
    std::fs::write(&probe, b"probe")
        .map_err(|e| config_err(format!("{} is not writable: {e}", target.display())))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

fn write_or_print(report_path: Option<&str>, payload: &str) -> Result<(), CliError> {
    match report_path {
        Some(path) => std::fs::write(path, payload)
            .map_err(|e| CliError::Runtime(format!("cannot write {path}: {e}"))),
        None => {
            println!("{payload}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct VerifyOutput {
    seed_start: u64,
    seed_end: u64,
    instances: usize,
    checks_run: usize,
    passed: bool,
    violations: Vec<verification::Violation>,
}

fn cmd_verify(
    config_path: &Path,
    seed_start: Option<u64>,
    seed_end: Option<u64>,
    jobs: usize,
) -> Result<i32, CliError> {
    let config = load_config(config_path)?;
    let section = config
        .verify
        .ok_or_else(|| config_err("missing [verify] section"))?;
    let mut cfg = verification::VerifyConfig {
        seed_start: section.seed_start,
        seed_end: section.seed_end,
        max_target_samples: section.max_target_samples,
        max_source_samples: section.max_source_samples,
        max_source_dim: section.max_source_dim,
        tolerance: section.tolerance,
        additivity_tolerance: section.additivity_tolerance,
    };
    if let Some(seed) = env_seed()? {
        let span = cfg.seed_end.saturating_sub(cfg.seed_start);
        cfg.seed_start = seed;
        cfg.seed_end = seed.saturating_add(span);
    }
    if let Some(s) = seed_start {
        cfg.seed_start = s;
    }
    if let Some(s) = seed_end {
        cfg.seed_end = s;
    }
    if cfg.seed_end < cfg.seed_start {
        return Err(config_err(format!(
            "seed range {}..={} is empty",
            cfg.seed_start, cfg.seed_end
        )));
    }
    if let Some(path) = &section.report_path {
        ensure_writable(Path::new(path).parent().unwrap_or(Path::new(".")))?;
    }

    let summary = verification::run(&cfg, jobs).map_err(runtime_err)?;
    for v in &summary.violations {
        eprintln!("violation at seed {}: {} ({})", v.seed, v.check, v.detail);
    }
    eprintln!(
        "verify: {} instances, {} checks, {} violations",
        summary.instances,
        summary.checks_run,
        summary.violations.len()
    );
    let output = VerifyOutput {
        seed_start: summary.seed_start,
        seed_end: summary.seed_end,
        instances: summary.instances,
        checks_run: summary.checks_run,
        passed: summary.passed(),
        violations: summary.violations.clone(),
    };
    let payload = serde_json::to_string_pretty(&output).expect("summary serializes");
    write_or_print(section.report_path.as_deref(), &payload)?;
    Ok(if summary.passed() { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct SweepOutput {
    output_dir: String,
    records: usize,
    failures: Vec<experiments::CellFailure>,
}

fn cmd_sweep(config_path: &Path, dry_run: bool, jobs: usize) -> Result<i32, CliError> {
    let config = load_config(config_path)?;
    let mut cfg = config
        .sweep
        .ok_or_else(|| config_err("missing [sweep] section"))?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    ensure_writable(&out_dir)?;
    if dry_run {
        eprintln!("sweep: config valid, dry run writes nothing");
        return Ok(0);
    }

    let outcome = experiments::run_replicated_sweep(&cfg, jobs).map_err(runtime_err)?;
    experiments::write_reports(&outcome.records, &out_dir).map_err(runtime_err)?;
    for f in &outcome.failures {
        eprintln!(
            "cell failed: depth {} replicate {}: {}",
            f.depth, f.replicate, f.message
        );
    }
    eprintln!(
        "sweep: {} records written to {}",
        outcome.records.len(),
        out_dir.display()
    );
    let output = SweepOutput {
        output_dir: cfg.output_dir.clone(),
        records: outcome.records.len(),
        failures: outcome.failures.clone(),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&output).expect("summary serializes")
    );
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

// ---------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------

#[derive(Serialize)]
struct BoundsOutput {
    instance: String,
    seed: u64,
    reports: Vec<BoundReport>,
    gap_inputs: GapBoundInputs,
    gap_bound: f64,
    satisfied: bool,
}

fn cmd_bounds(config_path: &Path, seed_flag: Option<u64>) -> Result<i32, CliError> {
    let config = load_config(config_path)?;
    let section = config
        .bounds
        .ok_or_else(|| config_err("missing [bounds] section"))?;
    let mut seed = section.seed;
    if let Some(s) = env_seed()? {
        seed = s;
    }
    if let Some(s) = seed_flag {
        seed = s;
    }
    if let Some(path) = &section.report_path {
        ensure_writable(Path::new(path).parent().unwrap_or(Path::new(".")))?;
    }

    let (mut model, mut target) = match section.instance {
        InstanceKind::Isotropic => bounds::isotropic_instance(),
        InstanceKind::Random => {
            let caps = verification::VerifyConfig {
                max_target_samples: section.max_target_samples,
                max_source_samples: section.max_source_samples,
                max_source_dim: section.max_source_dim,
                tolerance: section.tolerance,
                ..verification::VerifyConfig::default()
            };
            verification::random_instance(seed, &caps).map_err(runtime_err)?
        }
    };
    if section.zero_mapping {
        let b = &model.mapping.b;
        model.mapping.b = Matrix::zeros(b.rows(), b.cols());
    }
    if let Some(n_t) = section.target_samples {
        if n_t == 0 {
            return Err(config_err("target_samples must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a31);
        let x = Matrix::from_fn(n_t, model.target_dim(), |_, _| standard_normal(&mut rng));
        let y = Matrix::from_fn(n_t, model.target_label_dim(), |_, _| standard_normal(&mut rng));
        target = Dataset::new(x, y, "override-target").map_err(runtime_err)?;
    }

    let tol = section.tolerance;
    let mut reports = Vec::new();

    // Empirical-risk sandwich on the scalar target NTK, both modes.
    let scalar_t = reprogram::ntk_t_scalar(&model, &target.x).map_err(runtime_err)?;
    let spectrum = linalg::sym_eig(&scalar_t, 1e-8).map_err(runtime_err)?;
    for mode in [Thm1Mode::Squared, Thm1Mode::AsPrinted] {
        reports.push(
            bounds::thm1_bounds(&spectrum, &target.y, section.sigma_t, target.len(), mode, tol)
                .map_err(runtime_err)?,
        );
    }

    let thm2 = bounds::thm2_bounds(&model, &target, tol).map_err(runtime_err)?;
    let thm3 = bounds::thm3_bounds(&model, &target, tol).map_err(runtime_err)?;

    // Corollaries inherit the theorems' upper sides; their content is the
    // refined lower bound with the estimated assumption constants.
    let c_a = bounds::estimate_c_a(&model, &target).map_err(runtime_err)?;
    let cor1 = bounds::cor1_lower(&model, &target, c_a).map_err(runtime_err)?;
    reports.push(report_with_lower("corollary1", &thm2, cor1, tol));
    let c_b = bounds::estimate_c_b(&model, &target).unwrap_or(0.0);
    let cor2 = bounds::cor2_lower(&model, c_b).map_err(runtime_err)?;
    reports.push(report_with_lower("corollary2", &thm3, cor2, tol));

    reports.push(thm2);
    reports.push(thm3);
    reports.push(bounds::combined_bounds(&model, &target, tol).map_err(runtime_err)?);

    let (scalar_b, _) = reprogram::ntk_b(&model, &target.x).map_err(runtime_err)?;
    reports.push(bounds::prop1_check(&scalar_b, model.target_label_dim(), tol).map_err(runtime_err)?);

    let gap_inputs = bounds::estimate_gap_constants(&target, &model, 1.0, 1.0).map_err(runtime_err)?;
    let gap = bounds::gap_bound(&gap_inputs).map_err(runtime_err)?;

    // The printed-mode lower bound is reported, never asserted.
    let satisfied = reports
        .iter()
        .filter(|r| r.mode != Some(Thm1Mode::AsPrinted))
        .all(|r| r.satisfied())
        && reports
            .iter()
            .filter(|r| r.mode == Some(Thm1Mode::AsPrinted))
            .all(|r| r.satisfied_upper);

    let output = BoundsOutput {
        instance: match section.instance {
            InstanceKind::Isotropic => "isotropic".to_string(),
            InstanceKind::Random => "random".to_string(),
        },
        seed,
        reports,
        gap_inputs,
        gap_bound: gap,
        satisfied,
    };
    let payload = serde_json::to_string_pretty(&output).expect("reports serialize");
    write_or_print(section.report_path.as_deref(), &payload)?;
    Ok(if satisfied { 0 } else { 1 })
}

/// A copy of `base` whose lower side is replaced (corollary refinements).
fn report_with_lower(name: &str, base: &BoundReport, lower: f64, tol: f64) -> BoundReport {
    let mut report = BoundReport {
        name: name.to_string(),
        mode: None,
        lambda_observed: base.lambda_observed.clone(),
        lower,
        upper: base.upper,
        satisfied_lower: true,
        satisfied_upper: base.satisfied_upper,
        slack_lower: 0.0,
        slack_upper: base.slack_upper,
    };
    let min = report
        .lambda_observed
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    report.satisfied_lower = report
        .lambda_observed
        .iter()
        .all(|&l| bounds::leq_with_tol(lower, l, tol));
    report.slack_lower = min - lower;
    report
}

// ---------------------------------------------------------------------
// ntk
// ---------------------------------------------------------------------

fn cmd_ntk(config_path: &Path) -> Result<i32, CliError> {
    let config = load_config(config_path)?;
    let mut section = config
        .ntk
        .ok_or_else(|| config_err("missing [ntk] section"))?;
    if let Some(seed) = env_seed()? {
        section.seed = seed;
    }
    section
        .net
        .validate()
        .map_err(|e| config_err(e.to_string()))?;
    if section.n_points == 0 {
        return Err(config_err("n_points must be positive"));
    }
    if section.kind == NtkKind::FeatureKernel && section.feature_map.is_none() {
        return Err(config_err(
            "kind = \"feature_kernel\" needs a feature_map field",
        ));
    }
    let out = PathBuf::from(&section.out);
    ensure_writable(out.parent().unwrap_or(Path::new(".")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(section.seed);
    let points = Matrix::from_fn(section.n_points, section.net.input_dim(), |_, _| {
        standard_normal(&mut rng)
    });
    let params = nets::init_network(&section.net);
    let matrix = match section.kind {
        NtkKind::EmpiricalBlock => {
            kernels::empirical_ntk(&section.net, &params, &points, &points).map_err(runtime_err)?
        }
        NtkKind::EmpiricalScalar => {
            let block = kernels::empirical_ntk(&section.net, &params, &points, &points)
                .map_err(runtime_err)?;
            kernels::scalar_from_block(&block, section.net.output_dim()).map_err(runtime_err)?
        }
        NtkKind::FeatureKernel => {
            let phi = FeatureMap::from_kind(
                section.feature_map.unwrap(),
                section.net.input_dim(),
                Some(section.net.clone()),
            )
            .map_err(runtime_err)?;
            kernels::kernel_matrix(&phi, &points, &points).map_err(runtime_err)?
        }
    };
    std::fs::write(&out, matrix.to_csv())
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "{}",
        serde_json::json!({
            "out": section.out,
            "rows": matrix.rows(),
            "cols": matrix.cols(),
        })
    );
    Ok(0)
}

// ---------------------------------------------------------------------
// reprogram
// ---------------------------------------------------------------------

fn cmd_reprogram(config_path: &Path) -> Result<i32, CliError> {
    let config = load_config(config_path)?;
    let mut section = config
        .reprogram
        .ok_or_else(|| config_err("missing [reprogram] section"))?;
    if let Some(seed) = env_seed()? {
        section.seed = seed;
    }
    if !(section.lr.is_finite() && section.lr >= 0.0) {
        return Err(config_err(format!("lr {} must be non-negative", section.lr)));
    }
    let out = PathBuf::from(&section.trace_out);
    ensure_writable(out.parent().unwrap_or(Path::new(".")))?;

    let caps = verification::VerifyConfig {
        max_target_samples: section.max_target_samples,
        max_source_samples: section.max_source_samples,
        max_source_dim: section.max_source_dim,
        ..verification::VerifyConfig::default()
    };
    let (mut model, target) =
        verification::random_instance(section.seed, &caps).map_err(runtime_err)?;
    model.transform_trainable = section.train_transform;
    model.mapping.trainable = section.train_mapping;

    let result = reprogram::train_reprogram(&model, &target, section.lr, section.steps)
        .map_err(runtime_err)?;
    std::fs::write(&out, reprogram::loss_trace_csv(&result.trace))
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;
    println!(
        "{}",
        serde_json::json!({
            "trace_path": section.trace_out,
            "steps": section.steps,
            "initial_loss": result.trace.first(),
            "final_loss": result.trace.last(),
            "diverged": result.diverged,
        })
    );
    Ok(0)
}

// ---------------------------------------------------------------------
// shared
// ---------------------------------------------------------------------

/// Applies `f` to every item with up to `jobs` worker threads, preserving
/// input order in the output so results are deterministic regardless of the
/// level of parallelism.
pub fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.max(1);
    if jobs == 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(jobs);
    thread::scope(|scope| {
        for (slot_chunk, item_chunk) in slots.chunks_mut(chunk).zip(items.chunks(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (slot, item) in slot_chunk.iter_mut().zip(item_chunk) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("slot filled")).collect()
}
