//! Discrete Fourier transforms of masks and signals.
//!
//! Both transforms use the forward kernel `exp(-j·2π·k·n/N)` and sum over
//! `n = 0..N-1`, so `coeffs[0]` of a mask spectrum is its support size. The
//! opposite sign convention only conjugates the coefficients and leaves every
//! magnitude unchanged.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::mask::Mask;

/// Complex DFT coefficients `A_k`, `k = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    source_n_p: Option<usize>,
}

impl Spectrum {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Spectrum {
            coeffs,
            source_n_p: None,
        }
    }

    /// Tags the spectrum with the support size of the mask it came from.
    pub fn with_source_n_p(mut self, n_p: usize) -> Self {
        self.source_n_p = Some(n_p);
        self
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn source_n_p(&self) -> Option<usize> {
        self.source_n_p
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm()).collect()
    }

    /// `Σ_k |A_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// `O(N²)` reference transform.
///
/// Twiddles are indexed by `k·n mod N`, so each term uses an exactly reduced
/// angle no matter how large `k·n` gets.
pub fn dft_direct(input: &[f64]) -> Spectrum {
    let n = input.len();
    let twiddles: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, -TAU * m as f64 / n as f64))
        .collect();
    let coeffs = (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for &x in input {
                acc += twiddles[idx] * x;
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            acc
        })
        .collect();
    Spectrum::new(coeffs)
}

/// A planned `O(N log N)` transform of a fixed length.
///
/// Any length is supported, primes included; the planner falls back to
/// Rader/Bluestein for prime sizes. Plans are `Send + Sync` and can be shared
/// across worker threads.
#[derive(Clone)]
pub struct FastDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FastDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FastDft").field("n", &self.n).finish()
    }
}

impl FastDft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FastDft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform of a real sequence into `out` (resized to `N`).
    pub fn forward_real_into(&self, input: &[f64], out: &mut Vec<Complex64>) -> Result<()> {
        self.check_len(input.len())?;
        out.clear();
        out.extend(input.iter().map(|&x| Complex64::new(x, 0.0)));
        self.forward.process(out);
        Ok(())
    }

    pub fn forward_real(&self, input: &[f64]) -> Result<Spectrum> {
        let mut out = Vec::with_capacity(self.n);
        self.forward_real_into(input, &mut out)?;
        Ok(Spectrum::new(out))
    }

    pub fn forward_complex(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(input.len())?;
        let mut out = input.to_vec();
        self.forward.process(&mut out);
        Ok(out)
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.inverse.process(&mut out);
        let scale = 1.0 / self.n as f64;
        out.iter_mut().for_each(|c| *c *= scale);
        Ok(out)
    }

    /// Spectrum of a mask, tagged with its support size.
    pub fn mask_spectrum(&self, mask: &Mask) -> Result<Spectrum> {
        Ok(self.forward_real(&mask.to_real())?.with_source_n_p(mask.n_p()))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: len,
            });
        }
        Ok(())
    }
}

/// One-shot fast transform. Plans a new transform on every call; hot loops
/// should hold a [`FastDft`] instead.
pub fn dft_fast(input: &[f64]) -> Spectrum {
    if input.is_empty() {
        return Spectrum::new(Vec::new());
    }
    FastDft::new(input.len())
        .forward_real(input)
        .expect("plan length equals input length")
}

/// Largest off-DC magnitude of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub value: f64,
}

/// Relative slack under which two magnitudes count as tied; conjugate bins
/// `k` and `N-k` agree only to rounding.
const TIE_RTOL: f64 = 1e-12;

/// `max_{k=1..N-1} |A_k|` with the smallest maximizing `k`.
pub fn max_nonzero_bin(s: &Spectrum) -> Result<Peak> {
    peak_of(s.coeffs())
}

pub(crate) fn peak_of(coeffs: &[Complex64]) -> Result<Peak> {
    if coeffs.len() < 2 {
        return Err(Error::param(
            "spectrum",
            format!("need at least 2 bins, got {}", coeffs.len()),
        ));
    }
    let mut best = Peak {
        bin: 1,
        value: coeffs[1].norm(),
    };
    for (k, c) in coeffs.iter().enumerate().skip(2) {
        let v = c.norm();
        if v > best.value * (1.0 + TIE_RTOL) + f64::MIN_POSITIVE {
            best = Peak { bin: k, value: v };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{generate_mask, worst_case_mask, MaskConfig};

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn direct_basic_cases() {
        let zero = dft_direct(&[0.0; 9]);
        assert!(zero.coeffs().iter().all(|c| c.norm() == 0.0));

        let mut impulse = vec![0.0; 11];
        impulse[4] = 1.0;
        for c in dft_direct(&impulse).coeffs() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }

        let ones = dft_direct(&[1.0; 13]);
        assert!((ones.coeffs()[0] - Complex64::new(13.0, 0.0)).norm() < 1e-12);
        for c in &ones.coeffs()[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn direct_uses_negative_exponent() {
        // x = [0, 1, 0, 0] -> A_1 = exp(-jπ/2) = -j
        let s = dft_direct(&[0.0, 1.0, 0.0, 0.0]);
        assert!((s.coeffs()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn fast_matches_direct_on_random_mask() {
        let cfg = MaskConfig::new(127, 0.5, 3).unwrap();
        let m = generate_mask(&cfg, 0);
        let d = dft_direct(&m.to_real());
        let f = dft_fast(&m.to_real());
        let scale = d.magnitudes().into_iter().fold(0.0, f64::max);
        assert!(max_abs_diff(d.coeffs(), f.coeffs()) <= 1e-9 * scale);
    }

    #[test]
    fn fast_length_one() {
        let s = dft_fast(&[2.5]);
        assert_eq!(s.coeffs(), &[Complex64::new(2.5, 0.0)]);
    }

    #[test]
    fn worst_case_127_64_peak() {
        let m = worst_case_mask(127, 64).unwrap();
        let peak = max_nonzero_bin(&dft_fast(&m.to_real())).unwrap();
        assert!((peak.value - 40.426).abs() <= 1e-3, "{}", peak.value);
        assert_eq!(peak.bin, 1);
    }

    #[test]
    fn peak_of_block_13_4_is_first_bin() {
        // Direct oracle: |A_k| = |sin(4πk/13) / sin(πk/13)|, largest at k = 1, 12.
        let m = worst_case_mask(13, 4).unwrap();
        let s = dft_direct(&m.to_real());
        let mags = s.magnitudes();
        let expected = ((4.0 * std::f64::consts::PI / 13.0).sin()
            / (std::f64::consts::PI / 13.0).sin())
        .abs();
        assert!((mags[1] - expected).abs() < 1e-12);
        let peak = max_nonzero_bin(&s).unwrap();
        assert_eq!(peak.bin, 1);
        let fast_peak = max_nonzero_bin(&dft_fast(&m.to_real())).unwrap();
        assert_eq!(fast_peak.bin, 1);
    }

    #[test]
    fn peak_edge_cases() {
        let flat = dft_fast(&[1.0; 31]);
        assert!(max_nonzero_bin(&flat).unwrap().value < 1e-12);

        let mut impulse = vec![0.0; 31];
        impulse[0] = 1.0;
        let p = max_nonzero_bin(&dft_fast(&impulse)).unwrap();
        assert_eq!(p.bin, 1);
        assert!((p.value - 1.0).abs() < 1e-15);

        assert!(max_nonzero_bin(&Spectrum::new(vec![Complex64::new(1.0, 0.0)])).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let x: Vec<f64> = (0..101).map(|i| (i as f64 * 0.37).sin()).collect();
        let plan = FastDft::new(101);
        let s = plan.forward_real(&x).unwrap();
        let back = plan.inverse(s.coeffs()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
        assert!(plan.forward_real(&x[..100]).is_err());
    }
}
