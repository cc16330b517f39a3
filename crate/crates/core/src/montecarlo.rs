//! Monte Carlo validation of the bounds.
//!
//! Trials are grouped into fixed blocks of [`BLOCK_TRIALS`]. Each block is
//! folded sequentially, and block results are merged strictly in block order,
//! so the aggregates are bit-identical for every worker count. Blocks are
//! scheduled in bounded waves; only per-block aggregates (never spectra) are
//! held between waves.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_report, worst_case_bound, BoundSpec};
use crate::error::{Error, Result};
use crate::mask::{generate_mask, nominal_support, Mask, MaskConfig};
use crate::spectrum::{peak_of, FastDft};
use crate::stats::RunningStats;

/// Trials per deterministic reduction block.
pub const BLOCK_TRIALS: u64 = 64;

/// Blocks scheduled per worker in one wave.
const BLOCKS_PER_WORKER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub label: String,
    pub value: f64,
}

impl Threshold {
    pub fn new(label: impl Into<String>, value: f64) -> Self {
        Threshold {
            label: label.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: MaskConfig,
    pub trials: u64,
    pub thresholds: Vec<Threshold>,
    pub workers: usize,
}

impl ExperimentSpec {
    pub fn new(config: MaskConfig, trials: u64) -> Self {
        ExperimentSpec {
            config,
            trials,
            thresholds: Vec::new(),
            workers: 1,
        }
    }

    pub fn with_threshold(mut self, label: impl Into<String>, value: f64) -> Self {
        self.thresholds.push(Threshold::new(label, value));
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "need at least one trial"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers", "need at least one worker"));
        }
        for (i, t) in self.thresholds.iter().enumerate() {
            if self.thresholds[..i].iter().any(|u| u.label == t.label) {
                return Err(Error::param("thresholds", format!("duplicate label `{}`", t.label)));
            }
            if t.value.is_nan() {
                return Err(Error::param("thresholds", format!("`{}` is NaN", t.label)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceCount {
    pub label: String,
    pub threshold: f64,
    pub count: u64,
}

/// Aggregates of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub trials: u64,
    /// `max_{k≠0} |A_k|` per trial. Empty masks contribute 0.
    pub per_trial_max: RunningStats,
    pub global_max: f64,
    /// Mean of `|A_k|` over all `k ≠ 0` and all trials.
    pub mean_abs_coeff: f64,
    /// Trials whose maximum is strictly above each threshold.
    pub exceedance_counts: Vec<ExceedanceCount>,
    pub n_p_stats: RunningStats,
    /// `max_{k≠0} |A_k| / N_p` per nonempty trial.
    pub ratio_stats: RunningStats,
    pub empty_masks: u64,
}

impl TrialStats {
    pub fn exceedance_rate(&self, label: &str) -> Result<f64> {
        exceedance_rate(self, label)
    }
}

pub fn exceedance_rate(stats: &TrialStats, label: &str) -> Result<f64> {
    stats
        .exceedance_counts
        .iter()
        .find(|e| e.label == label)
        .map(|e| e.count as f64 / stats.trials as f64)
        .ok_or_else(|| Error::UnknownThreshold(label.to_string()))
}

/// Per-thread transform state.
struct Workspace {
    dft: FastDft,
    buf: Vec<Complex64>,
}

impl Workspace {
    fn new(dft: &FastDft) -> Self {
        Workspace {
            dft: dft.clone(),
            buf: Vec::with_capacity(dft.len()),
        }
    }

    fn transform(&mut self, mask: &Mask) -> Result<&[Complex64]> {
        self.dft.forward_real_into(&mask.to_real(), &mut self.buf)?;
        Ok(&self.buf)
    }
}

/// Runs `fold_block` over fixed trial blocks on `workers` threads and merges
/// the block results in block order.
fn deterministic_fold<P, B, M>(trials: u64, workers: usize, fold_block: B, mut merge: M) -> Result<Option<P>>
where
    P: Send,
    B: Fn(std::ops::Range<u64>) -> Result<P> + Sync,
    M: FnMut(&mut P, P),
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Experiment(format!("cannot start worker pool: {e}")))?;
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let wave = (workers * BLOCKS_PER_WORKER) as u64;
    let mut acc: Option<P> = None;
    let mut start = 0;
    while start < blocks {
        let end = (start + wave).min(blocks);
        let parts: Vec<Result<P>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|b| {
                    let lo = b * BLOCK_TRIALS;
                    let hi = (lo + BLOCK_TRIALS).min(trials);
                    fold_block(lo..hi)
                })
                .collect()
        });
        for part in parts {
            let part = part?;
            match acc.as_mut() {
                Some(a) => merge(a, part),
                None => acc = Some(part),
            }
        }
        start = end;
    }
    Ok(acc)
}

#[derive(Clone)]
struct Partial {
    per_trial_max: RunningStats,
    mean_abs: RunningStats,
    n_p: RunningStats,
    ratio: RunningStats,
    exceed: Vec<u64>,
    empty: u64,
}

impl Partial {
    fn new(thresholds: usize) -> Self {
        Partial {
            per_trial_max: RunningStats::new(),
            mean_abs: RunningStats::new(),
            n_p: RunningStats::new(),
            ratio: RunningStats::new(),
            exceed: vec![0; thresholds],
            empty: 0,
        }
    }

    fn merge(&mut self, other: Partial) {
        self.per_trial_max.merge(&other.per_trial_max);
        self.mean_abs.merge(&other.mean_abs);
        self.n_p.merge(&other.n_p);
        self.ratio.merge(&other.ratio);
        self.exceed.iter_mut().zip(other.exceed).for_each(|(a, b)| *a += b);
        self.empty += other.empty;
    }
}

/// Runs the experiment with masks from [`generate_mask`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<TrialStats> {
    let config = spec.config;
    run_experiment_with(spec, |t| generate_mask(&config, t))
}

/// Runs the experiment with masks supplied by `source(trial_index)`.
///
/// Either every trial completes and the full aggregate is returned, or the
/// first error is returned and nothing else.
pub fn run_experiment_with<S>(spec: &ExperimentSpec, source: S) -> Result<TrialStats>
where
    S: Fn(u64) -> Mask + Sync,
{
    spec.validate()?;
    let n = spec.config.n();
    let dft = FastDft::new(n);
    let thresholds: Vec<f64> = spec.thresholds.iter().map(|t| t.value).collect();

    let fold_block = |range: std::ops::Range<u64>| -> Result<Partial> {
        let mut ws = Workspace::new(&dft);
        let mut part = Partial::new(thresholds.len());
        for t in range {
            let mask = source(t);
            let n_p = mask.n_p();
            let coeffs = ws.transform(&mask)?;
            let peak = if n_p == 0 { 0.0 } else { peak_of(coeffs)?.value };
            let abs_sum: f64 = coeffs[1..].iter().map(|c| c.norm()).sum();

            part.per_trial_max.push(peak);
            part.mean_abs.push(abs_sum / (n - 1) as f64);
            part.n_p.push(n_p as f64);
            if n_p == 0 {
                part.empty += 1;
            } else {
                part.ratio.push(peak / n_p as f64);
            }
            for (count, &th) in part.exceed.iter_mut().zip(&thresholds) {
                if peak > th {
                    *count += 1;
                }
            }
        }
        Ok(part)
    };

    let total = deterministic_fold(spec.trials, spec.workers, fold_block, Partial::merge)?
        .expect("at least one trial");

    Ok(TrialStats {
        trials: spec.trials,
        global_max: total.per_trial_max.max(),
        per_trial_max: total.per_trial_max,
        mean_abs_coeff: total.mean_abs.mean(),
        exceedance_counts: spec
            .thresholds
            .iter()
            .zip(total.exceed)
            .map(|(t, count)| ExceedanceCount {
                label: t.label.clone(),
                threshold: t.value,
                count,
            })
            .collect(),
        n_p_stats: total.n_p,
        ratio_stats: total.ratio,
        empty_masks: total.empty,
    })
}

/// Largest per-trial maximum seen for each realized support size, with the
/// worst-case bound for that size. Used to check the bound is never broken.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportConditionedMax {
    pub n_p: usize,
    pub trials: u64,
    pub max: f64,
    pub bound: f64,
}

/// Per-trial maxima grouped by realized `N_p`.
pub fn support_conditioned_maxima(config: &MaskConfig, trials: u64, workers: usize) -> Result<Vec<SupportConditionedMax>> {
    if trials == 0 || workers == 0 {
        return Err(Error::param("trials", "need at least one trial and one worker"));
    }
    let n = config.n();
    let dft = FastDft::new(n);
    let fold_block = |range: std::ops::Range<u64>| -> Result<Vec<(u64, f64)>> {
        let mut ws = Workspace::new(&dft);
        let mut by_np = vec![(0u64, 0.0f64); n + 1];
        for t in range {
            let mask = generate_mask(config, t);
            let coeffs = ws.transform(&mask)?;
            let peak = if mask.n_p() == 0 { 0.0 } else { peak_of(coeffs)?.value };
            let slot = &mut by_np[mask.n_p()];
            slot.0 += 1;
            slot.1 = slot.1.max(peak);
        }
        Ok(by_np)
    };
    let merged = deterministic_fold(trials, workers, fold_block, |a, b| {
        a.iter_mut().zip(b).for_each(|(x, y)| {
            x.0 += y.0;
            x.1 = x.1.max(y.1);
        })
    })?
    .expect("at least one trial");
    merged
        .into_iter()
        .enumerate()
        .filter(|(n_p, (count, _))| *count > 0 && *n_p > 0)
        .map(|(n_p, (count, max))| {
            Ok(SupportConditionedMax {
                n_p,
                trials: count,
                max,
                bound: worst_case_bound(n, n_p)?,
            })
        })
        .collect()
}

/// One row of the simulation-vs-bound comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub n: usize,
    pub p: f64,
    pub n_p: usize,
    pub trials: u64,
    pub sim_max_mean: f64,
    pub sim_global_max: f64,
    /// `sim_max_mean / (N·p)`.
    pub sim_ratio: f64,
    pub bound_worst: f64,
    /// `bound_worst / (N·p)`.
    pub bound_ratio: f64,
}

/// The nine `(N, p)` pairs of the published comparison table.
pub const TABLE1_ROWS: [(usize, f64); 9] = [
    (127, 0.5),
    (127, 0.8),
    (127, 0.1),
    (1543, 0.5),
    (1543, 0.8),
    (1543, 0.1),
    (131071, 0.5),
    (131071, 0.8),
    (131071, 0.1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Options {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    /// Rows with `N` at or above this length use `large_n_trials` instead.
    pub large_n: usize,
    /// Trial cap for large rows; `None` runs them at `trials`.
    pub large_n_trials: Option<u64>,
}

impl Table1Options {
    pub fn new(trials: u64, seed: u64) -> Self {
        Table1Options {
            trials,
            seed,
            workers: 1,
            large_n: 100_000,
            large_n_trials: Some(1_000),
        }
    }

    fn trials_for(&self, n: usize) -> u64 {
        match self.large_n_trials {
            Some(cap) if n >= self.large_n => cap.min(self.trials),
            _ => self.trials,
        }
    }
}

pub fn table1_report(rows: &[(usize, f64)], opts: &Table1Options) -> Result<Vec<Table1Row>> {
    if rows.is_empty() {
        return Err(Error::param("rows", "need at least one (N, p) row"));
    }
    rows.iter()
        .map(|&(n, p)| {
            let config = MaskConfig::new(n, p, opts.seed)?;
            let trials = opts.trials_for(n);
            let stats = run_experiment(&ExperimentSpec::new(config, trials).with_workers(opts.workers))?;
            let n_p = nominal_support(n, p);
            let bound_worst = worst_case_bound(n, n_p)?;
            let np = n as f64 * p;
            Ok(Table1Row {
                n,
                p,
                n_p,
                trials,
                sim_max_mean: stats.per_trial_max.mean(),
                sim_global_max: stats.global_max,
                sim_ratio: stats.per_trial_max.mean() / np,
                bound_worst,
                bound_ratio: bound_worst / np,
            })
        })
        .collect()
}

/// Bounds and empirical curves at one `N` for a bound-comparison figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRecord {
    pub n: usize,
    pub p: f64,
    pub n_p: usize,
    pub trials: u64,
    pub sim_max_mean: f64,
    pub sim_global_max: f64,
    pub mean_abs: f64,
    pub gaussian_t: f64,
    pub sigma3: f64,
    pub sigma4: f64,
    pub worst_case: f64,
    pub exceed_gaussian: f64,
    pub exceed_sigma3: f64,
    pub exceed_sigma4: f64,
}

pub fn figure_curves(
    p: f64,
    n_values: &[usize],
    epsilon: f64,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<FigureRecord>> {
    if n_values.is_empty() {
        return Err(Error::param("ns", "need at least one mask length"));
    }
    n_values
        .iter()
        .map(|&n| {
            let config = MaskConfig::new(n, p, seed)?;
            let bounds = bound_report(&BoundSpec::new(n, p, epsilon)?)?;
            let spec = ExperimentSpec::new(config, trials)
                .with_workers(workers)
                .with_threshold("gaussian", bounds.gaussian_t)
                .with_threshold("sigma3", bounds.sigma3)
                .with_threshold("sigma4", bounds.sigma4);
            let stats = run_experiment(&spec)?;
            Ok(FigureRecord {
                n,
                p,
                n_p: bounds.n_p,
                trials,
                sim_max_mean: stats.per_trial_max.mean(),
                sim_global_max: stats.global_max,
                mean_abs: stats.mean_abs_coeff,
                gaussian_t: bounds.gaussian_t,
                sigma3: bounds.sigma3,
                sigma4: bounds.sigma4,
                worst_case: bounds.worst_case,
                exceed_gaussian: stats.exceedance_rate("gaussian")?,
                exceed_sigma3: stats.exceedance_rate("sigma3")?,
                exceed_sigma4: stats.exceedance_rate("sigma4")?,
            })
        })
        .collect()
}

/// Exact worst-case ratio against its closed-form approximation at one `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxPoint {
    pub n: usize,
    pub p: f64,
    pub n_p: usize,
    /// `worst_case / N_p`.
    pub exact_ratio: f64,
    /// `worst_case / (N·p)`.
    pub exact_ratio_np: f64,
    pub approx_ratio: f64,
}

pub fn approx_curve(n: usize, ps: &[f64]) -> Result<Vec<ApproxPoint>> {
    ps.iter()
        .map(|&p| {
            let n_p = nominal_support(n, p).max(1);
            let worst = worst_case_bound(n, n_p)?;
            Ok(ApproxPoint {
                n,
                p,
                n_p,
                exact_ratio: worst / n_p as f64,
                exact_ratio_np: worst / (n as f64 * p),
                approx_ratio: crate::bounds::ratio_approximation(n, p)?.value,
            })
        })
        .collect()
}

/// Noise ratio `|A_k| / (N·p)` at one bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRatioPoint {
    pub k: usize,
    /// From the mask of trial 0 alone.
    pub single: f64,
    pub mean: f64,
    pub max: f64,
}

/// Noise ratio versus `k = 1..N-1` across `trials` masks.
pub fn noise_ratio_curve(config: &MaskConfig, trials: u64, workers: usize) -> Result<Vec<NoiseRatioPoint>> {
    if trials == 0 || workers == 0 {
        return Err(Error::param("trials", "need at least one trial and one worker"));
    }
    let n = config.n();
    let dft = FastDft::new(n);
    struct Bins {
        sum: Vec<f64>,
        max: Vec<f64>,
    }
    let fold_block = |range: std::ops::Range<u64>| -> Result<Bins> {
        let mut ws = Workspace::new(&dft);
        let mut bins = Bins {
            sum: vec![0.0; n],
            max: vec![0.0; n],
        };
        for t in range {
            let coeffs = ws.transform(&generate_mask(config, t))?;
            for (k, c) in coeffs.iter().enumerate() {
                let v = c.norm();
                bins.sum[k] += v;
                bins.max[k] = bins.max[k].max(v);
            }
        }
        Ok(bins)
    };
    let total = deterministic_fold(trials, workers, fold_block, |a, b| {
        a.sum.iter_mut().zip(b.sum).for_each(|(x, y)| *x += y);
        a.max.iter_mut().zip(b.max).for_each(|(x, y)| *x = x.max(y));
    })?
    .expect("at least one trial");

    let single = dft.forward_real(&generate_mask(config, 0).to_real())?;
    let scale = 1.0 / (n as f64 * config.p());
    Ok((1..n)
        .map(|k| NoiseRatioPoint {
            k,
            single: single.coeffs()[k].norm() * scale,
            mean: total.sum[k] / trials as f64 * scale,
            max: total.max[k] * scale,
        })
        .collect())
}
