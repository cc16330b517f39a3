//! Upper bounds on the DFT magnitude of Bernoulli random sampling masks.
//!
//! A random mask multiplies a signal by i.i.d. Bernoulli(`p`) bits. Its DFT
//! `A_k` leaks energy from every spectral line into every other bin; for
//! `k ≠ 0` that leakage acts as noise. This crate evaluates analytic bounds
//! on `max_{k≠0} |A_k|` ([`bounds`]), checks them against simulation
//! ([`montecarlo`]) and uses them to set thresholds in an iterative
//! recovery loop ([`recovery`]).

pub mod bounds;
pub mod cli;
pub mod error;
pub mod mask;
pub mod montecarlo;
pub mod output;
pub mod qfunc;
pub mod recovery;
pub mod spectrum;
pub mod stats;

pub use bounds::{
    bound_report, dirichlet_closed_form, gaussian_bound, gaussian_bound_approx, ratio_approximation,
    sigma_bound, worst_case_bound, BoundReport, BoundSpec, GaussianModel, VarianceConvention,
};
pub use error::{Error, Result};
pub use mask::{generate_mask, worst_case_mask, Mask, MaskConfig};
pub use montecarlo::{exceedance_rate, run_experiment, ExperimentSpec, TrialStats};
pub use qfunc::{q_function, q_inverse};
pub use spectrum::{dft_direct, dft_fast, max_nonzero_bin, FastDft, Peak, Spectrum};
