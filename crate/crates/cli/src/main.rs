//! Benchmark CLI: run finite-sum optimizers on LIBSVM datasets and emit
//! convergence traces as `grad_calls,loss_diff` CSV.
//!
//! Exit codes: 0 run converged, 2 usage error, 3 budget exhausted before the
//! tolerance was met, 4 the run diverged or stalled, 1 any other failure.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlvr_core::{
    doubled_level_sizes, load_or_compute_reference, run_gd, run_newton_cg, run_sarah, run_sgd,
    run_ssn, run_svrg, train_mlvr, CgConfig, LineSearchConfig, MlvrConfig, ReferenceSolution,
    RunConfig, RunStatus, SolverError, SparseDataset, StepRule, SubsetStrategy, Trace,
};
use rayon::prelude::*;
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "mlvr",
    version,
    about = "Finite-sum optimization benchmarks with convergence-trace output"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimizer and write its convergence trace as CSV.
    Run(RunArgs),
    /// Run every (method, seed) combination in parallel, one CSV each.
    Sweep(SweepArgs),
    /// Compute (and cache) the reference optimum of a dataset.
    Reference(ReferenceArgs),
    /// Print dataset statistics.
    Inspect(InspectArgs),
}

/// Flags shared by `run` and `sweep`. Every flag is optional here so that a
/// config file can supply it; required ones are enforced after merging.
#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// LIBSVM dataset path (.gz is decompressed transparently).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Widen the feature count beyond the largest observed index.
    #[arg(long)]
    features: Option<usize>,
    /// Regularization strength (default: 1/n).
    #[arg(long)]
    lambda: Option<f64>,
    /// Stop once the loss gap falls below this value (default: 1e-9).
    #[arg(long)]
    tol: Option<f64>,
    /// Work budget in effective gradient evaluations (default: 1000).
    #[arg(long)]
    budget: Option<f64>,
    /// RNG seed (default: 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Step size: a number, or "line-search" where supported.
    #[arg(long)]
    step_size: Option<String>,
    /// Inner steps per outer iteration: an integer, "n", "2n", "0.5n", "n/2".
    #[arg(long)]
    inner_iters: Option<String>,
    /// Hessian subset size for the sub-sampled Newton method.
    #[arg(long)]
    hessian_samples: Option<usize>,
    /// Conjugate-gradient iterations per linear solve (default: 10).
    #[arg(long)]
    cg_iters: Option<usize>,
    /// Number of hierarchy levels (with a single --level-sizes entry, the
    /// rest are filled by doubling).
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated level sizes, coarsest first; "full" means all samples.
    #[arg(long)]
    level_sizes: Option<String>,
    /// Reference-cache file (default: <dataset>.ref.json).
    #[arg(long)]
    reference_cache: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file mirroring the flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer to run.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Trace CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML config file mirroring the flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated methods to run.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated seeds to run per method.
    #[arg(long)]
    seeds: Option<String>,
    /// Directory for the trace CSVs (one "<method>-seed<seed>.csv" each).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct ReferenceArgs {
    /// LIBSVM dataset path (.gz is decompressed transparently).
    #[arg(long)]
    dataset: PathBuf,
    /// Widen the feature count beyond the largest observed index.
    #[arg(long)]
    features: Option<usize>,
    /// Regularization strength (default: 1/n).
    #[arg(long)]
    lambda: Option<f64>,
    /// Reference-cache file (default: <dataset>.ref.json).
    #[arg(long)]
    reference_cache: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    /// LIBSVM dataset path (.gz is decompressed transparently).
    #[arg(long)]
    dataset: PathBuf,
    /// Widen the feature count beyond the largest observed index.
    #[arg(long)]
    features: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Gd,
    Newton,
    Sgd,
    Svrg,
    Sarah,
    Ssn,
    Mlvr,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Newton => "newton",
            Method::Sgd => "sgd",
            Method::Svrg => "svrg",
            Method::Sarah => "sarah",
            Method::Ssn => "ssn",
            Method::Mlvr => "mlvr",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        <Method as ValueEnum>::from_str(s, true)
            .map_err(|_| usage(format!("unknown method {s:?}")))
    }
}

/// Every option a run can draw on, as merged from the config file and the
/// command line (the command line wins field by field).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    dataset: Option<PathBuf>,
    features: Option<usize>,
    method: Option<String>,
    methods: Option<String>,
    lambda: Option<f64>,
    tol: Option<f64>,
    budget: Option<f64>,
    seed: Option<u64>,
    seeds: Option<String>,
    step_size: Option<String>,
    inner_iters: Option<String>,
    hessian_samples: Option<usize>,
    cg_iters: Option<usize>,
    levels: Option<usize>,
    level_sizes: Option<String>,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    reference_cache: Option<PathBuf>,
}

impl Settings {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| hard(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// `self` (the command line) overrides `base` (the config file).
    fn over(self, base: Settings) -> Settings {
        Settings {
            dataset: self.dataset.or(base.dataset),
            features: self.features.or(base.features),
            method: self.method.or(base.method),
            methods: self.methods.or(base.methods),
            lambda: self.lambda.or(base.lambda),
            tol: self.tol.or(base.tol),
            budget: self.budget.or(base.budget),
            seed: self.seed.or(base.seed),
            seeds: self.seeds.or(base.seeds),
            step_size: self.step_size.or(base.step_size),
            inner_iters: self.inner_iters.or(base.inner_iters),
            hessian_samples: self.hessian_samples.or(base.hessian_samples),
            cg_iters: self.cg_iters.or(base.cg_iters),
            levels: self.levels.or(base.levels),
            level_sizes: self.level_sizes.or(base.level_sizes),
            out: self.out.or(base.out),
            out_dir: self.out_dir.or(base.out_dir),
            reference_cache: self.reference_cache.or(base.reference_cache),
        }
    }
}

impl CommonOpts {
    fn into_settings(self) -> Settings {
        Settings {
            dataset: self.dataset,
            features: self.features,
            lambda: self.lambda,
            tol: self.tol,
            budget: self.budget,
            seed: self.seed,
            step_size: self.step_size,
            inner_iters: self.inner_iters,
            hessian_samples: self.hessian_samples,
            cg_iters: self.cg_iters,
            levels: self.levels,
            level_sizes: self.level_sizes,
            reference_cache: self.reference_cache,
            ..Settings::default()
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Bad flags, bad flag values, or invalid combinations → exit 2.
    Usage(String),
    /// The optimizer stalled (e.g. a line search that cannot make progress)
    /// → exit 4, like divergence.
    Stalled(String),
    /// I/O and other hard failures → exit 1.
    Hard(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn hard(msg: impl Into<String>) -> CliError {
    CliError::Hard(msg.into())
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Stalled(m) | CliError::Hard(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stalled(_) => 4,
            CliError::Hard(_) => 1,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(msg) => usage(msg),
            SolverError::LineSearchFailed { .. }
            | SolverError::NotDescent { .. }
            | SolverError::NonFinite { .. }
            | SolverError::CgBreakdown { .. } => CliError::Stalled(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Clap reports usage problems with exit code 2 and --help/--version
            // with 0; keep its choice.
            let code = if e.use_stderr() { 2u8 } else { 0u8 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Reference(args) => cmd_reference(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_dataset(path: &Path, features: Option<usize>) -> Result<SparseDataset, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| hard(format!("cannot open {}: {e}", path.display())))?;
    let reader: Box<dyn BufRead> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    SparseDataset::parse_libsvm(reader, features)
        .map_err(|e| hard(format!("cannot parse {}: {e}", path.display())))
}

fn dataset_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn default_cache_path(dataset: &Path) -> PathBuf {
    PathBuf::from(format!("{}.ref.json", dataset.display()))
}

fn reference_for(
    dataset_path: &Path,
    ds: &SparseDataset,
    lambda: f64,
    cache_override: Option<&Path>,
) -> Result<ReferenceSolution, CliError> {
    let cache = cache_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_cache_path(dataset_path));
    let solution = load_or_compute_reference(&cache, ds, lambda)
        .map_err(|e| hard(format!("reference solve failed: {e}")))?;
    if !solution.converged {
        eprintln!(
            "warning: reference solve stopped at gradient norm {:.3e} (target 1e-12); \
             loss gaps are measured against the best iterate found",
            solution.grad_norm
        );
    }
    Ok(solution)
}

/// The step-size flag: either Armijo backtracking or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
enum StepSpec {
    LineSearch,
    Fixed(f64),
}

fn parse_step_size(token: &str) -> Result<StepSpec, CliError> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("line-search") {
        return Ok(StepSpec::LineSearch);
    }
    let a: f64 = t
        .parse()
        .map_err(|_| usage(format!("--step-size must be a number or \"line-search\", got {t:?}")))?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(usage(format!("--step-size must be positive and finite, got {t}")));
    }
    Ok(StepSpec::Fixed(a))
}

impl StepSpec {
    fn rule(self) -> StepRule {
        match self {
            StepSpec::LineSearch => StepRule::LineSearch(LineSearchConfig::default()),
            StepSpec::Fixed(a) => StepRule::Fixed(a),
        }
    }
}

/// Inner-iteration counts written relative to the sample count: "n", "2n",
/// "0.5n", "n/2", or a plain integer.
fn parse_inner_iters(token: &str, n: usize) -> Result<usize, CliError> {
    let t = token.trim();
    let bad = || {
        usage(format!(
            "--inner-iters must be an integer, \"n\", \"<k>n\", or \"n/<k>\", got {t:?}"
        ))
    };
    if let Ok(k) = t.parse::<usize>() {
        if k == 0 {
            return Err(usage("--inner-iters must be at least 1"));
        }
        return Ok(k);
    }
    if let Some(rest) = t.strip_prefix("n/") {
        let div: f64 = rest.parse().map_err(|_| bad())?;
        if !(div > 0.0 && div.is_finite()) {
            return Err(bad());
        }
        return Ok(((n as f64 / div).round() as usize).max(1));
    }
    if let Some(mult) = t.strip_suffix('n') {
        let m: f64 = if mult.is_empty() {
            1.0
        } else {
            mult.trim().parse().map_err(|_| bad())?
        };
        if !(m > 0.0 && m.is_finite()) {
            return Err(bad());
        }
        return Ok(((m * n as f64).round() as usize).max(1));
    }
    Err(bad())
}

/// Comma-separated level sizes, coarsest first; "full" expands to n. A single
/// size together with --levels fills the rest by doubling.
fn parse_level_sizes(
    spec: &str,
    levels: Option<usize>,
    n: usize,
) -> Result<Vec<usize>, CliError> {
    let mut sizes = Vec::new();
    for tok in spec.split(',') {
        let t = tok.trim();
        if t.is_empty() {
            continue;
        }
        if t.eq_ignore_ascii_case("full") {
            sizes.push(n);
        } else {
            let v: usize = t
                .parse()
                .map_err(|_| usage(format!("bad level size {t:?} (use a count or \"full\")")))?;
            sizes.push(v);
        }
    }
    if sizes.is_empty() {
        return Err(usage("--level-sizes needs at least one entry"));
    }
    match levels {
        Some(l) if sizes.len() == 1 => {
            doubled_level_sizes(sizes[0], l, n).map_err(|e| usage(e.to_string()))
        }
        Some(l) if sizes.len() != l => Err(usage(format!(
            "--levels {l} disagrees with the {} sizes in --level-sizes",
            sizes.len()
        ))),
        _ => Ok(sizes),
    }
}

fn parse_seed_list(spec: &str) -> Result<Vec<u64>, CliError> {
    let mut seeds = Vec::new();
    for tok in spec.split(',') {
        let t = tok.trim();
        if t.is_empty() {
            continue;
        }
        seeds.push(
            t.parse::<u64>()
                .map_err(|_| usage(format!("bad seed {t:?}")))?,
        );
    }
    if seeds.is_empty() {
        return Err(usage("--seeds needs at least one entry"));
    }
    Ok(seeds)
}

fn parse_method_list(spec: &str) -> Result<Vec<Method>, CliError> {
    let mut methods = Vec::new();
    for tok in spec.split(',') {
        let t = tok.trim();
        if t.is_empty() {
            continue;
        }
        methods.push(Method::parse(t)?);
    }
    if methods.is_empty() {
        return Err(usage("--methods needs at least one entry"));
    }
    Ok(methods)
}

/// Reject flags the chosen method does not read (run command only; a sweep
/// legitimately shares one flag set across several methods).
fn reject_unused_flags(method: Method, s: &Settings) -> Result<(), CliError> {
    let mut stray = Vec::new();
    let uses_step = !matches!(method, Method::Mlvr);
    let uses_inner = matches!(method, Method::Svrg | Method::Sarah);
    let uses_hessian = matches!(method, Method::Ssn);
    let uses_cg = matches!(method, Method::Newton | Method::Ssn | Method::Mlvr);
    let uses_levels = matches!(method, Method::Mlvr);
    if s.step_size.is_some() && !uses_step {
        stray.push("--step-size");
    }
    if s.inner_iters.is_some() && !uses_inner {
        stray.push("--inner-iters");
    }
    if s.hessian_samples.is_some() && !uses_hessian {
        stray.push("--hessian-samples");
    }
    if s.cg_iters.is_some() && !uses_cg {
        stray.push("--cg-iters");
    }
    if (s.levels.is_some() || s.level_sizes.is_some()) && !uses_levels {
        stray.push("--levels/--level-sizes");
    }
    if stray.is_empty() {
        Ok(())
    } else {
        Err(usage(format!(
            "method {} does not take {}",
            method.name(),
            stray.join(", ")
        )))
    }
}

fn dispatch(
    method: Method,
    ds: &SparseDataset,
    lambda: f64,
    s: &Settings,
    rc: &RunConfig,
) -> Result<Trace, CliError> {
    let n = ds.n_samples();
    let step = s
        .step_size
        .as_deref()
        .map(parse_step_size)
        .transpose()?
        .unwrap_or(StepSpec::LineSearch);
    let fixed_step = |flag_owner: &str| -> Result<f64, CliError> {
        match step {
            StepSpec::Fixed(a) => Ok(a),
            StepSpec::LineSearch => Err(usage(format!(
                "{flag_owner} needs a numeric --step-size"
            ))),
        }
    };
    let inner = s
        .inner_iters
        .as_deref()
        .map(|t| parse_inner_iters(t, n))
        .transpose()?
        .unwrap_or(n);
    let cg = CgConfig {
        max_iters: s.cg_iters.unwrap_or(CgConfig::default().max_iters),
        ..CgConfig::default()
    };

    let trace = match method {
        Method::Gd => run_gd(ds, lambda, step.rule(), rc)?,
        Method::Newton => run_newton_cg(ds, lambda, cg, step.rule(), rc)?,
        Method::Sgd => run_sgd(ds, lambda, fixed_step("sgd")?, rc)?,
        Method::Svrg => run_svrg(ds, lambda, fixed_step("svrg")?, inner, rc)?,
        Method::Sarah => run_sarah(ds, lambda, fixed_step("sarah")?, inner, rc)?,
        Method::Ssn => {
            let subset = s
                .hessian_samples
                .ok_or_else(|| usage("ssn needs --hessian-samples"))?;
            run_ssn(
                ds,
                lambda,
                SubsetStrategy::Redraw(subset),
                cg,
                step.rule(),
                rc,
            )?
        }
        Method::Mlvr => {
            let spec = s
                .level_sizes
                .as_deref()
                .ok_or_else(|| usage("mlvr needs --level-sizes"))?;
            let sizes = parse_level_sizes(spec, s.levels, n)?;
            let cfg = MlvrConfig {
                cg,
                ..MlvrConfig::default()
            };
            train_mlvr(ds, lambda, &sizes, &cfg, rc)?
        }
    };
    Ok(trace)
}

fn status_exit_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged => 0,
        RunStatus::BudgetExhausted => 3,
        RunStatus::Diverged => 4,
    }
}

fn describe(trace: &Trace) -> String {
    let status = match trace.status {
        RunStatus::Converged => "converged",
        RunStatus::BudgetExhausted => "budget-exhausted",
        RunStatus::Diverged => "diverged",
    };
    format!(
        "{} seed {}: {status}, {} records, cost {:.3}, gap {:.3e}",
        trace.meta.method,
        trace.meta.seed,
        trace.records.len(),
        trace.final_cost().unwrap_or(0.0),
        trace.final_gap().unwrap_or(f64::NAN),
    )
}

fn cmd_run(args: RunArgs) -> Result<u8, CliError> {
    let from_file = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let mut cli_settings = args.common.into_settings();
    cli_settings.method = args.method.map(|m| m.name().to_string());
    cli_settings.out = args.out;
    let s = cli_settings.over(from_file);

    let method = Method::parse(
        s.method
            .as_deref()
            .ok_or_else(|| usage("run needs --method (or a config file with one)"))?,
    )?;
    reject_unused_flags(method, &s)?;
    let dataset_path = s
        .dataset
        .clone()
        .ok_or_else(|| usage("run needs --dataset"))?;
    let ds = load_dataset(&dataset_path, s.features)?;
    let lambda = s.lambda.unwrap_or(1.0 / ds.n_samples() as f64);
    let reference = reference_for(&dataset_path, &ds, lambda, s.reference_cache.as_deref())?;

    let mut rc = RunConfig::new(reference.f_star)
        .with_seed(s.seed.unwrap_or(0))
        .with_dataset(&dataset_label(&dataset_path));
    if let Some(tol) = s.tol {
        rc = rc.with_tol(tol);
    }
    if let Some(budget) = s.budget {
        rc = rc.with_budget(budget);
    }

    let trace = dispatch(method, &ds, lambda, &s, &rc)?;
    match &s.out {
        Some(path) => {
            trace
                .save_csv(path)
                .map_err(|e| hard(format!("cannot write trace: {e}")))?;
            eprintln!("{} -> {}", describe(&trace), path.display());
        }
        None => {
            let stdout = io::stdout();
            trace
                .write_csv(stdout.lock())
                .map_err(|e| hard(format!("cannot write trace: {e}")))?;
            eprintln!("{}", describe(&trace));
        }
    }
    Ok(status_exit_code(trace.status))
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, CliError> {
    let from_file = match &args.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let mut cli_settings = args.common.into_settings();
    cli_settings.methods = args.methods;
    cli_settings.seeds = args.seeds;
    cli_settings.out_dir = args.out_dir;
    let s = cli_settings.over(from_file);

    let methods = parse_method_list(
        s.methods
            .as_deref()
            .ok_or_else(|| usage("sweep needs --methods"))?,
    )?;
    let seeds = match s.seeds.as_deref() {
        Some(spec) => parse_seed_list(spec)?,
        None => vec![s.seed.unwrap_or(0)],
    };
    let out_dir = s
        .out_dir
        .clone()
        .ok_or_else(|| usage("sweep needs --out-dir"))?;
    let dataset_path = s
        .dataset
        .clone()
        .ok_or_else(|| usage("sweep needs --dataset"))?;

    let ds = load_dataset(&dataset_path, s.features)?;
    let lambda = s.lambda.unwrap_or(1.0 / ds.n_samples() as f64);
    // Resolve the reference once, up front: the grid then only reads it.
    let reference = reference_for(&dataset_path, &ds, lambda, s.reference_cache.as_deref())?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| hard(format!("cannot create {}: {e}", out_dir.display())))?;

    let grid: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&seed| (m, seed)))
        .collect();
    let outcomes: Vec<Result<Trace, CliError>> = grid
        .par_iter()
        .map(|&(method, seed)| {
            let mut rc = RunConfig::new(reference.f_star)
                .with_seed(seed)
                .with_dataset(&dataset_label(&dataset_path));
            if let Some(tol) = s.tol {
                rc = rc.with_tol(tol);
            }
            if let Some(budget) = s.budget {
                rc = rc.with_budget(budget);
            }
            let trace = dispatch(method, &ds, lambda, &s, &rc)?;
            let path = out_dir.join(format!("{}-seed{}.csv", method.name(), seed));
            trace
                .save_csv(&path)
                .map_err(|e| hard(format!("cannot write trace: {e}")))?;
            Ok(trace)
        })
        .collect();

    let mut exit = 0u8;
    // Severity order: hard/usage failures, then divergence, budget, success.
    let rank = |code: u8| match code {
        1 => 5,
        2 => 4,
        4 => 3,
        3 => 2,
        _ => 0,
    };
    for (idx, outcome) in outcomes.iter().enumerate() {
        let (method, seed) = grid[idx];
        let code = match outcome {
            Ok(trace) => {
                println!(
                    "{} -> {}",
                    describe(trace),
                    out_dir
                        .join(format!("{}-seed{}.csv", method.name(), seed))
                        .display()
                );
                status_exit_code(trace.status)
            }
            Err(e) => {
                eprintln!("error: {} seed {}: {e}", method.name(), seed);
                e.exit_code()
            }
        };
        if rank(code) > rank(exit) {
            exit = code;
        }
    }
    Ok(exit)
}

fn cmd_reference(args: ReferenceArgs) -> Result<u8, CliError> {
    let ds = load_dataset(&args.dataset, args.features)?;
    let lambda = args.lambda.unwrap_or(1.0 / ds.n_samples() as f64);
    let cache = args
        .reference_cache
        .unwrap_or_else(|| default_cache_path(&args.dataset));
    let solution = load_or_compute_reference(&cache, &ds, lambda)
        .map_err(|e| hard(format!("reference solve failed: {e}")))?;
    if !solution.converged {
        eprintln!(
            "warning: gradient-norm target 1e-12 not reached; best was {:.3e}",
            solution.grad_norm
        );
    }
    println!(
        "f_star={} grad_norm={:.3e} iterations={} converged={} cache={}",
        solution.f_star,
        solution.grad_norm,
        solution.iterations,
        solution.converged,
        cache.display()
    );
    Ok(0)
}

fn cmd_inspect(args: InspectArgs) -> Result<u8, CliError> {
    let ds = load_dataset(&args.dataset, args.features)?;
    let positive = ds.positive_count();
    println!(
        "n={} d={} positive={} negative={}",
        ds.n_samples(),
        ds.n_features(),
        positive,
        ds.n_samples() - positive
    );
    Ok(0)
}
