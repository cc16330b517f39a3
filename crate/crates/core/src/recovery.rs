//! Iterative hard-thresholding recovery of band-limited signals from random
//! samples.
//!
//! Each pass refills the unsampled positions with the current estimate,
//! transforms, keeps only coefficients above a decaying threshold and
//! transforms back:
//!
//! ```text
//! x̂⁰ = 0
//! x̂ⁱ⁺¹ = IDFT( H_{Tᵢ}( DFT( x_s + (1 - m) ⊙ x̂ⁱ ) ) ),   Tᵢ = t₀·e^{-α·i}
//! ```
//!
//! The mask spectrum bounds say how much aliasing noise one sampled line
//! spreads into other bins, which is what `t₀` has to clear.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{ratio_approximation, sigma_bound};
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::spectrum::FastDft;

/// Relative imaginary residue tolerated when synthesizing a real signal.
const REAL_TOL: f64 = 1e-9;

/// A band-limited spectrum: `amplitudes[i]` sits at bin `band[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub n: usize,
    pub band: Vec<usize>,
    pub amplitudes: Vec<Complex64>,
    pub seed: u64,
}

impl SignalSpec {
    /// Random conjugate-symmetric band: DC plus `pairs` bins `±k` with
    /// `k < n/2`, magnitudes in `[0.5, 1.5)·n/2` and uniform phases.
    pub fn random(n: usize, pairs: usize, seed: u64) -> Result<Self> {
        if n < 3 || 2 * pairs + 1 > n {
            return Err(Error::param("band", format!("cannot place {pairs} bin pairs in length {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = (n - 1) / 2;
        let mut picked = BTreeSet::new();
        while picked.len() < pairs {
            picked.insert(rng.random_range(1..=half));
        }
        let scale = n as f64 / 2.0;
        let mut band = vec![0];
        let mut amplitudes = vec![Complex64::new(rng.random_range(0.5..1.5) * scale, 0.0)];
        for k in picked {
            let mag = rng.random_range(0.5..1.5) * scale;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let a = Complex64::from_polar(mag, phase);
            band.push(k);
            amplitudes.push(a);
            band.push(n - k);
            amplitudes.push(a.conj());
        }
        Ok(SignalSpec {
            n,
            band,
            amplitudes,
            seed,
        })
    }

    /// Full length-`n` spectrum, validated for conjugate symmetry.
    pub fn spectrum(&self) -> Result<Vec<Complex64>> {
        if self.band.len() != self.amplitudes.len() {
            return Err(Error::LengthMismatch {
                expected: self.band.len(),
                actual: self.amplitudes.len(),
            });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.n];
        let mut present = vec![false; self.n];
        for (&b, &a) in self.band.iter().zip(&self.amplitudes) {
            if b >= self.n {
                return Err(Error::param("band", format!("bin {b} outside length {}", self.n)));
            }
            coeffs[b] = a;
            present[b] = true;
        }
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for b in 0..self.n {
            if !present[b] {
                continue;
            }
            let mirror = (self.n - b) % self.n;
            if !present[mirror] || (coeffs[b] - coeffs[mirror].conj()).norm() > REAL_TOL * scale {
                return Err(Error::AsymmetricBand(b));
            }
        }
        Ok(coeffs)
    }
}

/// Time-domain signal of a banded spectrum.
pub fn synthesize_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    let coeffs = spec.spectrum()?;
    if spec.n == 0 {
        return Ok(Vec::new());
    }
    let time = FastDft::new(spec.n).inverse(&coeffs)?;
    let peak = time.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    if let Some(bad) = time.iter().position(|c| c.im.abs() > REAL_TOL * peak) {
        return Err(Error::AsymmetricBand(bad));
    }
    Ok(time.into_iter().map(|c| c.re).collect())
}

/// `x[n]·m[n]`.
pub fn sample_random(x: &[f64], mask: &Mask) -> Result<Vec<f64>> {
    if x.len() != mask.len() {
        return Err(Error::LengthMismatch {
            expected: mask.len(),
            actual: x.len(),
        });
    }
    Ok(x.iter()
        .zip(mask.bits())
        .map(|(&v, &b)| if b == 1 { v } else { 0.0 })
        .collect())
}

/// Keeps every `step`-th sample starting at 0 and zeroes the rest.
pub fn sample_uniform(x: &[f64], step: usize) -> Result<Vec<f64>> {
    if step == 0 {
        return Err(Error::param("step", "uniform sampling step must be positive"));
    }
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| if i % step == 0 { v } else { 0.0 })
        .collect())
}

/// Zeroes every coefficient with magnitude `<= t`.
pub fn hard_threshold(coeffs: &[Complex64], t: f64) -> Vec<Complex64> {
    coeffs
        .iter()
        .map(|&c| if c.norm() > t { c } else { Complex64::new(0.0, 0.0) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySpec {
    pub mask: Mask,
    pub iterations: usize,
    pub t0: f64,
    pub alpha: f64,
}

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_ITERATIONS: usize = 50;

impl RecoverySpec {
    pub fn new(mask: Mask, iterations: usize, t0: f64, alpha: f64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::param("iters", "need at least one iteration"));
        }
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::param("t0", format!("initial threshold must be positive, got {t0}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("decay rate must be positive, got {alpha}")));
        }
        Ok(RecoverySpec {
            mask,
            iterations,
            t0,
            alpha,
        })
    }

    /// Spec with `t0` from [`default_threshold`] and default schedule.
    pub fn with_default_threshold(mask: Mask, xs: &[f64]) -> Result<Self> {
        let t0 = default_threshold(xs, &mask)?;
        RecoverySpec::new(mask, DEFAULT_ITERATIONS, t0, DEFAULT_ALPHA)
    }

    pub fn threshold_at(&self, iteration: usize) -> f64 {
        self.t0 * (-self.alpha * iteration as f64).exp()
    }
}

/// Starting threshold `c·max_k |DFT(x_s)[k]| / p̂` with `p̂ = N_p/N` and
/// `c = ratio_approximation(N, p̂) + 3·√(p̂(1-p̂)N)/(N·p̂)`.
///
/// A full mask aliases nothing, so `c` drops to `1e-9` there.
pub fn default_threshold(xs: &[f64], mask: &Mask) -> Result<f64> {
    let n = mask.len();
    if xs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: xs.len(),
        });
    }
    if mask.n_p() == 0 {
        return Err(Error::param("mask", "cannot recover from an empty mask"));
    }
    let p_hat = mask.n_p() as f64 / n as f64;
    let c = if mask.n_p() == n {
        1e-9
    } else {
        let np = n as f64 * p_hat;
        ratio_approximation(n, p_hat)?.value + sigma_bound(n, p_hat, 3)? / np
    };
    let spectrum = FastDft::new(n).forward_real(xs)?;
    let peak = spectrum.magnitudes().into_iter().fold(0.0, f64::max) / p_hat;
    if peak == 0.0 {
        return Err(Error::param("signal", "sampled signal is identically zero"));
    }
    Ok(c * peak)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub threshold: f64,
    /// `None` when no reference signal was supplied.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the requested number of iterations.
    Completed,
    /// The estimate stopped changing.
    Converged,
    /// SNR fell for [`DIVERGENCE_RUN`] consecutive iterations.
    Diverged,
}

/// Consecutive SNR decreases that abort the loop.
pub const DIVERGENCE_RUN: usize = 5;

/// Relative update size below which the estimate counts as converged.
const CONVERGED_RTOL: f64 = 1e-13;

/// Ceiling on reported SNR.
pub const MAX_SNR_DB: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub estimate: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl RecoveryOutcome {
    pub fn final_snr_db(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.snr_db)
    }
}

/// `10·log10(‖x‖² / ‖x - x̂‖²)`, capped at [`MAX_SNR_DB`].
pub fn snr_db(truth: &[f64], estimate: &[f64]) -> f64 {
    let signal: f64 = truth.iter().map(|v| v * v).sum();
    let error: f64 = truth.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum();
    if error <= signal * 10f64.powf(-MAX_SNR_DB / 10.0) {
        return MAX_SNR_DB;
    }
    10.0 * (signal / error).log10()
}

/// Runs the thresholding loop on samples `xs` taken with `spec.mask`.
///
/// With `truth`, each iteration records its SNR and the loop stops early if
/// the SNR keeps falling.
pub fn recover(xs: &[f64], spec: &RecoverySpec, truth: Option<&[f64]>) -> Result<RecoveryOutcome> {
    let n = spec.mask.len();
    for len in std::iter::once(xs.len()).chain(truth.map(<[f64]>::len)) {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let dft = FastDft::new(n);
    let bits = spec.mask.bits();
    let mut estimate = vec![0.0; n];
    let mut filled = vec![0.0; n];
    let mut spectrum = Vec::with_capacity(n);
    let mut history = Vec::with_capacity(spec.iterations);
    let mut falling = 0;
    let mut stop = StopReason::Completed;

    for i in 0..spec.iterations {
        for ((f, &s), (&e, &b)) in filled.iter_mut().zip(xs).zip(estimate.iter().zip(bits)) {
            *f = if b == 1 { s } else { e };
        }
        let t = spec.threshold_at(i);
        dft.forward_real_into(&filled, &mut spectrum)?;
        let next: Vec<f64> = dft
            .inverse(&hard_threshold(&spectrum, t))?
            .into_iter()
            .map(|c| c.re)
            .collect();

        let change: f64 = next.iter().zip(&estimate).map(|(a, b)| (a - b) * (a - b)).sum();
        let size: f64 = next.iter().map(|v| v * v).sum();
        estimate = next;

        let snr = truth.map(|x| snr_db(x, &estimate));
        if let (Some(now), Some(prev)) = (snr, history.last().and_then(|r: &IterationRecord| r.snr_db)) {
            falling = if now < prev { falling + 1 } else { 0 };
        }
        history.push(IterationRecord {
            iteration: i,
            threshold: t,
            snr_db: snr,
        });
        if falling >= DIVERGENCE_RUN {
            stop = StopReason::Diverged;
            break;
        }
        if size > 0.0 && change <= CONVERGED_RTOL * CONVERGED_RTOL * size {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(RecoveryOutcome {
        estimate,
        history,
        stop,
    })
}

/// Reads `index,value` lines. A non-numeric first line is taken as a header.
/// Indices must run `0, 1, 2, …`.
pub fn read_signal_csv<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::param("signal", e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (idx, val) = line
            .split_once(',')
            .ok_or_else(|| Error::param("signal", format!("line {}: expected `index,value`", lineno + 1)))?;
        let parsed = (idx.trim().parse::<usize>(), val.trim().parse::<f64>());
        match parsed {
            (Ok(i), Ok(v)) => {
                if i != values.len() {
                    return Err(Error::param(
                        "signal",
                        format!("line {}: expected index {}, got {i}", lineno + 1, values.len()),
                    ));
                }
                values.push(v);
            }
            _ if lineno == 0 => continue,
            _ => {
                return Err(Error::param("signal", format!("line {}: cannot parse `{line}`", lineno + 1)));
            }
        }
    }
    if values.is_empty() {
        return Err(Error::param("signal", "no samples"));
    }
    Ok(values)
}

pub fn write_signal_csv<W: Write>(mut w: W, x: &[f64]) -> std::io::Result<()> {
    writeln!(w, "index,value")?;
    for (i, v) in x.iter().enumerate() {
        writeln!(w, "{i},{v:e}")?;
    }
    Ok(())
}
