//! Analytic upper bounds on `max_{k≠0} |A_k|` for a Bernoulli mask.
//!
//! Four families are provided:
//!
//! * the worst case over all masks with `N_p` ones, attained by a contiguous
//!   block and equal to a Dirichlet kernel sample;
//! * a large-`N` approximation of the worst-case noise ratio;
//! * a Gaussian threshold `T(ε)` from modelling `Re A_k` and `Im A_k` as
//!   zero-mean normals, plus its `Q(x) ≈ e^{-x²/2}/2` shortcut;
//! * `m`-sigma bounds `m·√(p(1-p)N)`.
//!
//! The worst-case bound assumes `N` is prime. For composite `N` a bin `k`
//! sharing a factor with `N` folds the support onto fewer phases and the
//! bound may be exceeded; callers get `n_is_prime` in the report to warn on.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{is_prime, nominal_support};
use crate::qfunc::q_inverse;

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n", format!("mask length must be at least 2, got {n}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("sampling rate must lie in (0, 1), got {p}")));
    }
    Ok(())
}

fn check_support(n: usize, n_p: usize) -> Result<()> {
    if n_p == 0 || n_p > n {
        return Err(Error::SupportOutOfRange { n, n_p });
    }
    Ok(())
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Maximum of `|A_k|`, `k ≠ 0`, over all length-`n` masks with `n_p` ones:
///
/// `√( N_p + 2·Σ_{i=1}^{N_p-1} (N_p - i)·cos(2πi/N) )`
///
/// A block of `N_p` ones and its complement block of `N - N_p` ones have the
/// same off-DC magnitudes, so the sum is taken over the shorter of the two.
/// This keeps the radicand free of the cancellation that otherwise wipes out
/// all digits as `N_p → N`. Terms are accumulated with compensation.
pub fn worst_case_bound(n: usize, n_p: usize) -> Result<f64> {
    check_n(n)?;
    check_support(n, n_p)?;
    let m = n_p.min(n - n_p);
    let mut acc = CompensatedSum::default();
    for i in 1..m {
        let w = (m - i) as f64;
        acc.add(w * (TAU * i as f64 / n as f64).cos());
    }
    let radicand = m as f64 + 2.0 * acc.value();
    Ok(radicand.max(0.0).sqrt())
}

/// `|sin(π·N_p/N) / sin(π/N)|`, the contiguous-block spectrum at `k = 1`.
pub fn dirichlet_closed_form(n: usize, n_p: usize) -> Result<f64> {
    check_n(n)?;
    check_support(n, n_p)?;
    let m = n_p.min(n - n_p);
    let num = (PI * m as f64 / n as f64).sin();
    let den = (PI / n as f64).sin();
    Ok((num / den).abs())
}

/// Closed-form approximation of the worst-case noise ratio `|A_k|_max / (Np)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioApproximation {
    pub value: f64,
    /// The radicand came out negative and was clamped to zero.
    pub clamped: bool,
}

/// `(1/(Np))·√( Np + (N²/π²)·sin²(pπ) - N·[sin(pπ) - sin(2pπ)/(2π)] )`.
///
/// Tends to `sin(pπ)/(pπ)` as `N → ∞`.
pub fn ratio_approximation(n: usize, p: f64) -> Result<RatioApproximation> {
    check_n(n)?;
    check_p(p)?;
    let nf = n as f64;
    let np = nf * p;
    if np < 1.0 {
        return Err(Error::param("p", format!("need N·p >= 1, got {np}")));
    }
    let s = (p * PI).sin();
    let radicand = np + nf * nf / (PI * PI) * s * s - nf * (s - (2.0 * p * PI).sin() / TAU);
    let clamped = radicand < 0.0;
    Ok(RatioApproximation {
        value: radicand.max(0.0).sqrt() / np,
        clamped,
    })
}

/// Which variance to assign to `Re A_k` in the Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// `p(1-p)·N`.
    #[default]
    Full,
    /// `p(1-p)·N/2`, the actual variance of `Re A_k` for `k ≠ 0` since
    /// `Σ_n cos²(2πkn/N) = N/2`.
    Exact,
}

/// Zero-mean normal model for the real (or imaginary) part of `A_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub variance: f64,
    pub sigma: f64,
}

impl GaussianModel {
    pub fn new(n: usize, p: f64, convention: VarianceConvention) -> Result<Self> {
        check_n(n)?;
        check_p(p)?;
        let base = p * (1.0 - p) * n as f64;
        let variance = match convention {
            VarianceConvention::Full => base,
            VarianceConvention::Exact => base / 2.0,
        };
        Ok(GaussianModel {
            variance,
            sigma: variance.sqrt(),
        })
    }

    pub fn mean(&self) -> f64 {
        0.0
    }
}

/// Inputs shared by every bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub n: usize,
    pub p: f64,
    pub n_p: usize,
    pub epsilon: f64,
    /// Split `ε` over the `N-1` nonzero bins before inverting the tail.
    pub union_mode: bool,
    pub variance: VarianceConvention,
}

impl BoundSpec {
    /// Spec with `n_p = ⌈N·p⌉`, per-bin `ε` and the full `p(1-p)N` variance.
    pub fn new(n: usize, p: f64, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_p(p)?;
        BoundSpec {
            n,
            p,
            n_p: nominal_support(n, p).max(1),
            epsilon,
            union_mode: false,
            variance: VarianceConvention::Full,
        }
        .validated()
    }

    /// Overrides the support size, e.g. with a realized `N_p`.
    pub fn with_n_p(mut self, n_p: usize) -> Result<Self> {
        self.n_p = n_p;
        self.validated()
    }

    pub fn with_union_mode(mut self, on: bool) -> Self {
        self.union_mode = on;
        self
    }

    pub fn with_variance(mut self, convention: VarianceConvention) -> Self {
        self.variance = convention;
        self
    }

    pub fn validated(self) -> Result<Self> {
        check_n(self.n)?;
        check_p(self.p)?;
        check_support(self.n, self.n_p)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param(
                "eps",
                format!("epsilon must lie in (0, 1), got {}", self.epsilon),
            ));
        }
        Ok(self)
    }

    /// The per-bin tail budget `ε'`.
    pub fn effective_epsilon(&self) -> f64 {
        if self.union_mode {
            self.epsilon / (self.n - 1) as f64
        } else {
            self.epsilon
        }
    }

    pub fn model(&self) -> Result<GaussianModel> {
        GaussianModel::new(self.n, self.p, self.variance)
    }
}

/// `T` with `Q(T / √(2σ²)) = ε'/2`, i.e. `√(2σ²)·Q⁻¹(ε'/2)`.
pub fn gaussian_threshold(model: &GaussianModel, eps_prime: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime <= 1.0) {
        return Err(Error::param("eps", format!("tail budget must lie in (0, 1], got {eps_prime}")));
    }
    Ok((2.0 * model.variance).sqrt() * q_inverse(eps_prime / 2.0)?)
}

/// `2·√(σ²·ln(1/ε'))`, from `Q(x) ≈ e^{-x²/2}/2`.
pub fn gaussian_threshold_approx(model: &GaussianModel, eps_prime: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime <= 1.0) {
        return Err(Error::param("eps", format!("tail budget must lie in (0, 1], got {eps_prime}")));
    }
    Ok(2.0 * (model.variance * (1.0 / eps_prime).ln()).max(0.0).sqrt())
}

/// Gaussian-approximation threshold for a spec.
pub fn gaussian_bound(spec: &BoundSpec) -> Result<f64> {
    let spec = spec.validated()?;
    gaussian_threshold(&spec.model()?, spec.effective_epsilon())
}

pub fn gaussian_bound_approx(spec: &BoundSpec) -> Result<f64> {
    let spec = spec.validated()?;
    gaussian_threshold_approx(&spec.model()?, spec.effective_epsilon())
}

/// `m·√(p(1-p)N)` for `m ∈ {3, 4}`.
pub fn sigma_bound(n: usize, p: f64, m: u32) -> Result<f64> {
    if m != 3 && m != 4 {
        return Err(Error::param(
            "m",
            format!("sigma multiple must be 3 or 4, got {m}; use sigma_bound_any for others"),
        ));
    }
    sigma_bound_any(n, p, f64::from(m))
}

/// `m·√(p(1-p)N)` for any positive multiple.
pub fn sigma_bound_any(n: usize, p: f64, m: f64) -> Result<f64> {
    check_n(n)?;
    check_p(p)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("m", format!("sigma multiple must be positive, got {m}")));
    }
    Ok(m * (p * (1.0 - p) * n as f64).sqrt())
}

/// Every bound evaluated for one `(N, p, N_p, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub p: f64,
    pub n_p: usize,
    pub epsilon: f64,
    pub n_is_prime: bool,
    pub worst_case: f64,
    /// `worst_case / N_p`.
    pub worst_case_ratio: f64,
    /// `worst_case / (N·p)`, the normalisation used by published tables.
    pub worst_case_ratio_np: f64,
    pub ratio_approx: f64,
    pub ratio_approx_clamped: bool,
    pub gaussian_t: f64,
    pub gaussian_t_approx: f64,
    pub sigma3: f64,
    pub sigma4: f64,
}

pub fn bound_report(spec: &BoundSpec) -> Result<BoundReport> {
    let spec = spec.validated()?;
    let worst_case = worst_case_bound(spec.n, spec.n_p)?;
    let approx = ratio_approximation(spec.n, spec.p)?;
    let unit = sigma_bound_any(spec.n, spec.p, 1.0)?;
    Ok(BoundReport {
        n: spec.n,
        p: spec.p,
        n_p: spec.n_p,
        epsilon: spec.epsilon,
        n_is_prime: is_prime(spec.n),
        worst_case,
        worst_case_ratio: worst_case / spec.n_p as f64,
        worst_case_ratio_np: worst_case / (spec.n as f64 * spec.p),
        ratio_approx: approx.value,
        ratio_approx_clamped: approx.clamped,
        gaussian_t: gaussian_bound(&spec)?,
        gaussian_t_approx: gaussian_bound_approx(&spec)?,
        sigma3: 3.0 * unit,
        sigma4: 4.0 * unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::worst_case_mask;
    use crate::qfunc::q_function;
    use crate::spectrum::{dft_direct, max_nonzero_bin};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn worst_case_table_values() {
        assert!(close(worst_case_bound(127, 64).unwrap(), 40.426, 1e-3));
        assert!(close(worst_case_bound(1543, 772).unwrap(), 491.152, 1e-3));
        assert!(close(worst_case_bound(127, 13).unwrap(), 12.778, 1e-3));
    }

    #[test]
    fn worst_case_extremes() {
        for n in [2, 7, 127, 1000] {
            assert!(close(worst_case_bound(n, 1).unwrap(), 1.0, 1e-12));
            assert_eq!(worst_case_bound(n, n).unwrap(), 0.0);
            assert_eq!(dirichlet_closed_form(n, n).unwrap(), 0.0);
        }
        assert!(worst_case_bound(127, 0).is_err());
        assert!(worst_case_bound(127, 128).is_err());
        assert!(worst_case_bound(1, 1).is_err());
    }

    #[test]
    fn unreflected_sum_agrees_where_it_is_well_conditioned() {
        // Left-to-right evaluation of the raw formula without reflection.
        for (n, n_p) in [(127, 64), (127, 102), (1543, 1235), (4099, 3000)] {
            let raw: f64 = (1..n_p)
                .map(|i| (n_p - i) as f64 * (TAU * i as f64 / n as f64).cos())
                .sum::<f64>()
                * 2.0
                + n_p as f64;
            let got = worst_case_bound(n, n_p).unwrap();
            assert!(((raw.sqrt() - got) / got).abs() < 1e-9, "{n} {n_p}");
        }
    }

    #[test]
    fn dirichlet_matches_direct_spectrum() {
        let s = dft_direct(&worst_case_mask(127, 64).unwrap().to_real());
        let k1 = s.coeffs()[1].norm();
        let d = dirichlet_closed_form(127, 64).unwrap();
        assert!(close(k1, d, 1e-9));
        assert!(close(d, 40.426, 1e-3));
        assert!(close(dirichlet_closed_form(127, 13).unwrap(), 12.778, 1e-3));
        assert!(close(worst_case_bound(127, 64).unwrap(), d, 1e-9));
    }

    #[test]
    fn worst_case_is_attained_at_first_bin() {
        for (n, n_p) in [(13, 4), (127, 64), (127, 13), (131, 100)] {
            let s = dft_direct(&worst_case_mask(n, n_p).unwrap().to_real());
            let peak = max_nonzero_bin(&s).unwrap();
            let bound = worst_case_bound(n, n_p).unwrap();
            assert!(close(peak.value, bound, 1e-9));
            assert_eq!(peak.bin, 1);
        }
    }

    #[test]
    fn worst_case_peaks_mid_support() {
        for n in [7, 127, 1543] {
            let mid = worst_case_bound(n, n / 2).unwrap();
            assert!(mid >= worst_case_bound(n, 1).unwrap());
            assert!(mid >= worst_case_bound(n, n).unwrap());
        }
    }

    #[test]
    fn ratio_approximation_values() {
        let half = ratio_approximation(131071, 0.5).unwrap();
        assert!(close(half.value, 0.637, 2e-3));
        assert!(!half.clamped);
        assert!(close(ratio_approximation(131071, 0.1).unwrap().value, 0.984, 3e-3));
        let big = ratio_approximation(1_000_000, 0.5).unwrap().value;
        assert!((big - 2.0 / PI).abs() < 1e-3);
        assert!(ratio_approximation(10, 0.05).is_err());
    }

    #[test]
    fn gaussian_bound_values() {
        let spec = BoundSpec::new(127, 0.5, 1e-4).unwrap();
        let t = gaussian_bound(&spec).unwrap();
        let oracle = 63.5f64.sqrt() * q_inverse(5e-5).unwrap();
        assert!(close(t, oracle, 1e-12));
        assert!(close(t, 31.0, 0.1), "{t}");

        let union = gaussian_bound(&spec.with_union_mode(true)).unwrap();
        assert!(union > t);

        let loose = BoundSpec::new(127, 0.5, 0.999999).unwrap();
        assert!(gaussian_bound(&loose).unwrap() < 1e-4);
    }

    #[test]
    fn exact_variance_shrinks_threshold_by_root_two() {
        let spec = BoundSpec::new(1543, 0.3, 1e-3).unwrap();
        let full = gaussian_bound(&spec).unwrap();
        let exact = gaussian_bound(&spec.with_variance(VarianceConvention::Exact)).unwrap();
        assert!(close(full / exact, 2f64.sqrt(), 1e-12));
    }

    #[test]
    fn gaussian_bound_decreases_in_epsilon() {
        let mut prev = f64::INFINITY;
        for e in 1..=99 {
            let eps = e as f64 / 100.0;
            let t = gaussian_bound(&BoundSpec::new(127, 0.5, eps).unwrap()).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn approx_threshold_values() {
        let spec = BoundSpec::new(127, 0.5, 1e-4).unwrap();
        let a = gaussian_bound_approx(&spec).unwrap();
        let oracle = 2.0 * (31.75 * 1e4f64.ln()).sqrt();
        assert!(close(a, oracle, 1e-12));
        assert!(close(a, 34.2, 0.1));
        let model = spec.model().unwrap();
        assert_eq!(gaussian_threshold_approx(&model, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn approx_threshold_dominates_exact_inverse() {
        // Q(x) <= exp(-x²/2)/2 for x >= 0.
        for i in 0..=200 {
            let x = i as f64 * 0.05;
            assert!(q_function(x) <= 0.5 * (-x * x / 2.0).exp() + 1e-17);
        }
        for e in 1..=60 {
            let eps = 0.23 * 10f64.powf(-e as f64 / 4.0);
            for union in [false, true] {
                let spec = BoundSpec::new(1543, 0.2, eps).unwrap().with_union_mode(union);
                assert!(gaussian_bound_approx(&spec).unwrap() >= gaussian_bound(&spec).unwrap());
            }
        }
    }

    #[test]
    fn sigma_bounds() {
        let s4 = sigma_bound(127, 0.5, 4).unwrap();
        assert!(close(s4, 4.0 * 31.75f64.sqrt(), 1e-12));
        assert!(close(s4, 22.539, 1e-3));
        let s3 = sigma_bound(127, 0.5, 3).unwrap();
        assert!(close(s4 / s3, 4.0 / 3.0, 1e-15));
        let scaled = sigma_bound(4 * 127, 0.5, 3).unwrap();
        assert!(close(scaled, 2.0 * s3, 1e-12));
        assert!(sigma_bound(127, 0.5, 5).is_err());
        assert!(close(sigma_bound_any(127, 0.5, 5.0).unwrap(), 5.0 * 31.75f64.sqrt(), 1e-12));
    }

    #[test]
    fn report_fields() {
        let r = bound_report(&BoundSpec::new(127, 0.5, 1e-4).unwrap()).unwrap();
        assert_eq!(r.n_p, 64);
        assert!(close(r.worst_case, 40.426, 1e-3));
        assert!(close(r.worst_case_ratio, 40.426 / 64.0, 1e-4));
        assert!(close(r.worst_case_ratio_np, 0.637, 5e-4));
        assert!(r.sigma4 > r.sigma3);
        assert!(r.n_is_prime);

        let r = bound_report(&BoundSpec::new(127, 0.1, 1e-4).unwrap()).unwrap();
        assert_eq!(r.n_p, 13);
        assert!(close(r.worst_case, 12.778, 1e-3));
        assert!(close(r.worst_case_ratio_np, 1.006, 5e-3));

        let r = bound_report(&BoundSpec::new(128, 0.5, 1e-4).unwrap()).unwrap();
        assert!(!r.n_is_prime);
    }

    #[test]
    fn spec_validation() {
        assert!(BoundSpec::new(127, 0.5, 0.0).is_err());
        assert!(BoundSpec::new(127, 0.5, 1.0).is_err());
        assert!(BoundSpec::new(127, 0.5, 0.1).unwrap().with_n_p(0).is_err());
        assert!(BoundSpec::new(127, 0.5, 0.1).unwrap().with_n_p(128).is_err());
        assert!(BoundSpec::new(1, 0.5, 0.1).is_err());
    }
}
