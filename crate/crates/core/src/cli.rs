//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{bound_report, BoundSpec, VarianceConvention};
use crate::error::Error;
use crate::mask::{generate_mask, Mask, MaskConfig};
use crate::montecarlo::{
    approx_curve, figure_curves, noise_ratio_curve, run_experiment, table1_report, ExperimentSpec,
    Table1Options, TABLE1_ROWS,
};
use crate::output::{to_json, write_csv};
use crate::recovery::{
    default_threshold, read_signal_csv, recover, sample_random, sample_uniform, RecoverySpec, DEFAULT_ALPHA,
    DEFAULT_ITERATIONS,
};
use crate::spectrum::FastDft;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "maskspectra", version, about = "Bounds on the DFT magnitude of random sampling masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every analytic bound for one (N, p, eps).
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment and report trial statistics.
    Simulate(SimulateArgs),
    /// Reproduce the simulation-vs-bound comparison table.
    Table1(Table1Args),
    /// Emit data for the bound, noise-ratio, approximation and sampling plots.
    Figure(FigureArgs),
    /// Recover a band-limited signal from random samples.
    Recover(RecoverArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// RNG seed; falls back to MASKSPECTRA_SEED, then 1.
    #[arg(long, env = "MASKSPECTRA_SEED")]
    pub seed: Option<u64>,
}

impl SeedArgs {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Support size; defaults to ceil(N·p).
    #[arg(long)]
    pub np: Option<usize>,
    /// Divide eps over the N-1 nonzero bins.
    #[arg(long)]
    pub union: bool,
    /// Use p(1-p)N/2 as the variance of Re A_k.
    #[arg(long)]
    pub exact_variance: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Tail budget of the Gaussian threshold used for exceedance counts.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Run the N = 131071 rows at the full trial count instead of 1000.
    #[arg(long)]
    pub full: bool,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureMode {
    /// Bounds and simulated maxima versus N at one sampling rate.
    Bounds,
    /// Noise ratio |A_k|/(Np) versus k.
    Ratio,
    /// Exact worst-case ratio versus its closed-form approximation.
    Approx,
    /// Spectra of a signal and its uniform and random samples.
    Sampling,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    #[arg(long, value_enum, default_value_t = FigureMode::Bounds)]
    pub mode: FigureMode,
    /// Sampling rate (bounds, sampling modes).
    #[arg(long, default_value_t = 0.5)]
    pub rate: f64,
    /// Mask lengths (bounds mode).
    #[arg(long, value_delimiter = ',', default_values_t = [127usize, 1543, 8191])]
    pub ns: Vec<usize>,
    /// Mask length (ratio, approx modes).
    #[arg(long, default_value_t = 8191)]
    pub n: usize,
    /// Sampling rates (ratio, approx modes); approx defaults to 0.01..0.99.
    #[arg(long, value_delimiter = ',')]
    pub ps: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 1_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Signal fixture (sampling mode).
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Signal fixture, `index,value` per line.
    #[arg(long)]
    pub signal: PathBuf,
    /// Sampling rate in (0, 1]; 1 keeps every sample.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Initial threshold; derived from the mask bounds when omitted.
    #[arg(long)]
    pub t0: Option<f64>,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CliError::Usage(format!("--{name}: {reason}")),
            Error::SupportOutOfRange { n, n_p } => {
                CliError::Usage(format!("--np: support size {n_p} out of range [1, {n}]"))
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {reason}"))
}

fn check_n(flag: &str, n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(usage(flag, format!("mask length must be at least 2, got {n}")));
    }
    Ok(())
}

fn check_rate(flag: &str, p: f64) -> Result<(), CliError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(usage(flag, format!("sampling rate must lie in (0, 1), got {p}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(usage("eps", format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn check_positive(flag: &str, v: u64) -> Result<(), CliError> {
    if v == 0 {
        return Err(usage(flag, "must be at least 1"));
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Diagnostics go to `stderr`; results to `--out` or `stdout`.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Binary entry point.
pub fn main() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a, stdout, stderr),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Table1(a) => cmd_table1(a, stdout),
        Command::Figure(a) => cmd_figure(a, stdout),
        Command::Recover(a) => cmd_recover(a, stdout, stderr),
    }
}

fn emit<T: Serialize>(out: &OutputArgs, stdout: &mut dyn Write, records: &[T]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    match out.format {
        Format::Csv => write_csv(&mut buf, records)?,
        Format::Json => buf.extend(to_json(&records).map_err(|e| CliError::Runtime(e.to_string()))?.bytes()),
    }
    write_output(out.out.as_deref(), stdout, &buf)
}

fn write_output(path: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(
                File::create(p).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", p.display())))?,
            );
            f.write_all(bytes)?;
            f.flush()?;
        }
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

pub fn cmd_bounds(a: &BoundsArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    check_n("n", a.n)?;
    check_rate("p", a.p)?;
    check_eps(a.eps)?;
    let mut spec = BoundSpec::new(a.n, a.p, a.eps)?.with_union_mode(a.union);
    if a.exact_variance {
        spec = spec.with_variance(VarianceConvention::Exact);
    }
    if let Some(np) = a.np {
        spec = spec.with_n_p(np)?;
    }
    let report = bound_report(&spec)?;
    if !report.n_is_prime {
        writeln!(stderr, "warning: N = {} is not prime; the worst-case bound assumes prime N", a.n)?;
    }
    emit(&a.output, stdout, &[report])
}

/// Flat view of a simulation for CSV output.
#[derive(Debug, Serialize)]
struct SimulateRecord {
    n: usize,
    p: f64,
    seed: u64,
    trials: u64,
    per_trial_max_mean: f64,
    per_trial_max_variance: f64,
    per_trial_max_min: f64,
    per_trial_max_max: f64,
    global_max: f64,
    mean_abs_coeff: f64,
    n_p_mean: f64,
    ratio_mean: f64,
    empty_masks: u64,
    gaussian_t: f64,
    exceed_gaussian: u64,
    sigma3: f64,
    exceed_sigma3: u64,
    sigma4: f64,
    exceed_sigma4: u64,
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_n("n", a.n)?;
    check_rate("p", a.p)?;
    check_eps(a.eps)?;
    check_positive("trials", a.trials)?;
    check_positive("workers", a.workers as u64)?;
    let seed = a.seed.seed();
    let bounds = bound_report(&BoundSpec::new(a.n, a.p, a.eps)?)?;
    let spec = ExperimentSpec::new(MaskConfig::new(a.n, a.p, seed)?, a.trials)
        .with_workers(a.workers)
        .with_threshold("gaussian", bounds.gaussian_t)
        .with_threshold("sigma3", bounds.sigma3)
        .with_threshold("sigma4", bounds.sigma4);
    let stats = run_experiment(&spec)?;
    match a.output.format {
        Format::Json => {
            let text = to_json(&stats).map_err(|e| CliError::Runtime(e.to_string()))?;
            write_output(a.output.out.as_deref(), stdout, text.as_bytes())
        }
        Format::Csv => {
            let count = |i: usize| stats.exceedance_counts[i].count;
            let rec = SimulateRecord {
                n: a.n,
                p: a.p,
                seed,
                trials: stats.trials,
                per_trial_max_mean: stats.per_trial_max.mean(),
                per_trial_max_variance: stats.per_trial_max.variance(),
                per_trial_max_min: stats.per_trial_max.min(),
                per_trial_max_max: stats.per_trial_max.max(),
                global_max: stats.global_max,
                mean_abs_coeff: stats.mean_abs_coeff,
                n_p_mean: stats.n_p_stats.mean(),
                ratio_mean: stats.ratio_stats.mean(),
                empty_masks: stats.empty_masks,
                gaussian_t: bounds.gaussian_t,
                exceed_gaussian: count(0),
                sigma3: bounds.sigma3,
                exceed_sigma3: count(1),
                sigma4: bounds.sigma4,
                exceed_sigma4: count(2),
            };
            emit(&a.output, stdout, &[rec])
        }
    }
}

pub fn cmd_table1(a: &Table1Args, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_positive("trials", a.trials)?;
    check_positive("workers", a.workers as u64)?;
    let mut opts = Table1Options::new(a.trials, a.seed.seed());
    opts.workers = a.workers;
    if a.full {
        opts.large_n_trials = None;
    }
    let rows = table1_report(&TABLE1_ROWS, &opts)?;
    emit(&a.output, stdout, &rows)
}

#[derive(Debug, Serialize)]
struct NoiseRatioRecord {
    n: usize,
    p: f64,
    k: usize,
    single: f64,
    mean: f64,
    max: f64,
}

#[derive(Debug, Serialize)]
struct SamplingRecord {
    k: usize,
    original: f64,
    uniform: f64,
    random: f64,
}

pub fn cmd_figure(a: &FigureArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    check_positive("trials", a.trials)?;
    check_positive("workers", a.workers as u64)?;
    let seed = a.seed.seed();
    match a.mode {
        FigureMode::Bounds => {
            check_rate("rate", a.rate)?;
            check_eps(a.eps)?;
            if a.ns.is_empty() {
                return Err(usage("ns", "need at least one mask length"));
            }
            for &n in &a.ns {
                check_n("ns", n)?;
            }
            let recs = figure_curves(a.rate, &a.ns, a.eps, a.trials, seed, a.workers)?;
            emit(&a.output, stdout, &recs)
        }
        FigureMode::Ratio => {
            check_n("n", a.n)?;
            let ps = if a.ps.is_empty() { vec![0.1, 0.5, 0.8] } else { a.ps.clone() };
            let mut recs = Vec::new();
            for &p in &ps {
                check_rate("ps", p)?;
                let curve = noise_ratio_curve(&MaskConfig::new(a.n, p, seed)?, a.trials, a.workers)?;
                recs.extend(curve.into_iter().map(|pt| NoiseRatioRecord {
                    n: a.n,
                    p,
                    k: pt.k,
                    single: pt.single,
                    mean: pt.mean,
                    max: pt.max,
                }));
            }
            emit(&a.output, stdout, &recs)
        }
        FigureMode::Approx => {
            check_n("n", a.n)?;
            let ps: Vec<f64> = if a.ps.is_empty() {
                (1..100).map(|i| i as f64 / 100.0).filter(|p| a.n as f64 * p >= 1.0).collect()
            } else {
                a.ps.clone()
            };
            for &p in &ps {
                check_rate("ps", p)?;
            }
            emit(&a.output, stdout, &approx_curve(a.n, &ps)?)
        }
        FigureMode::Sampling => {
            check_rate("rate", a.rate)?;
            let path = a.signal.as_deref().ok_or_else(|| usage("signal", "sampling mode needs a signal fixture"))?;
            let x = load_signal(path)?;
            check_n("signal", x.len())?;
            let dft = FastDft::new(x.len());
            let step = (1.0 / a.rate).round().max(1.0) as usize;
            let mask = generate_mask(&MaskConfig::new(x.len(), a.rate, seed)?, 0);
            let orig = dft.forward_real(&x)?.magnitudes();
            let uni = dft.forward_real(&sample_uniform(&x, step)?)?.magnitudes();
            let rnd = dft.forward_real(&sample_random(&x, &mask)?)?.magnitudes();
            let recs: Vec<SamplingRecord> = (0..x.len())
                .map(|k| SamplingRecord {
                    k,
                    original: orig[k],
                    uniform: uni[k],
                    random: rnd[k],
                })
                .collect();
            emit(&a.output, stdout, &recs)
        }
    }
}

fn load_signal(path: &Path) -> Result<Vec<f64>, CliError> {
    let f = File::open(path).map_err(|e| usage("signal", format!("cannot open {}: {e}", path.display())))?;
    read_signal_csv(BufReader::new(f)).map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => usage("signal", format!("{}: {reason}", path.display())),
        other => other.into(),
    })
}

#[derive(Debug, Serialize)]
struct HistoryRecord {
    iteration: usize,
    threshold: f64,
    snr_db: f64,
}

#[derive(Debug, Serialize)]
struct RecoverySummary {
    n: usize,
    n_p: usize,
    t0: f64,
    iterations: usize,
    stop: crate::recovery::StopReason,
    final_snr_db: f64,
    history: Vec<HistoryRecord>,
}

pub fn cmd_recover(a: &RecoverArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    if !(a.p > 0.0 && a.p <= 1.0) {
        return Err(usage("p", format!("sampling rate must lie in (0, 1], got {}", a.p)));
    }
    check_positive("iters", a.iters as u64)?;
    let x = load_signal(&a.signal)?;
    check_n("signal", x.len())?;
    let mask = if a.p == 1.0 {
        Mask::from_bits(vec![true; x.len()])
    } else {
        generate_mask(&MaskConfig::new(x.len(), a.p, a.seed.seed())?, 0)
    };
    let xs = sample_random(&x, &mask)?;
    let t0 = match a.t0 {
        Some(t) => t,
        None => default_threshold(&xs, &mask)?,
    };
    let spec = RecoverySpec::new(mask.clone(), a.iters, t0, a.alpha)?;
    let outcome = recover(&xs, &spec, Some(&x))?;
    let history: Vec<HistoryRecord> = outcome
        .history
        .iter()
        .map(|r| HistoryRecord {
            iteration: r.iteration,
            threshold: r.threshold,
            snr_db: r.snr_db.unwrap_or(f64::NAN),
        })
        .collect();
    let final_snr = outcome.final_snr_db().unwrap_or(f64::NAN);
    writeln!(
        stderr,
        "recovered N={} from {} samples: {} iterations, stop={:?}, final SNR {:.2} dB",
        x.len(),
        mask.n_p(),
        history.len(),
        outcome.stop,
        final_snr
    )?;
    match a.output.format {
        Format::Csv => emit(&a.output, stdout, &history),
        Format::Json => {
            let summary = RecoverySummary {
                n: x.len(),
                n_p: mask.n_p(),
                t0,
                iterations: history.len(),
                stop: outcome.stop,
                final_snr_db: final_snr,
                history,
            };
            let text = to_json(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
            write_output(a.output.out.as_deref(), stdout, text.as_bytes())
        }
    }
}
