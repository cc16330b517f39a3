//! Bernoulli sampling masks.
//!
//! A mask is a length-`N` sequence of i.i.d. Bernoulli(`p`) bits. Masks are
//! generated from a counter-based stream keyed by `(seed, trial_index)`, so
//! the mask for a given trial does not depend on which thread draws it or in
//! what order trials are executed.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a random mask experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    n: usize,
    p: f64,
    seed: u64,
    n_is_prime: bool,
}

impl MaskConfig {
    pub fn new(n: usize, p: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", format!("mask length must be at least 2, got {n}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::param("p", format!("sampling rate must lie in (0, 1), got {p}")));
        }
        Ok(MaskConfig {
            n,
            p,
            seed,
            n_is_prime: is_prime(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether the mask length is prime. The worst-case bound assumes it is.
    pub fn n_is_prime(&self) -> bool {
        self.n_is_prime
    }

    /// Nominal support size `⌈N·p⌉`.
    pub fn nominal_support(&self) -> usize {
        nominal_support(self.n, self.p)
    }
}

/// `⌈N·p⌉`, with a small guard so that products like `127 * 0.5 * 2` that land
/// a hair above an integer through rounding do not bump the count.
pub fn nominal_support(n: usize, p: f64) -> usize {
    let np = n as f64 * p;
    let rounded = np.round();
    if (np - rounded).abs() <= 1e-9 * np.max(1.0) {
        rounded as usize
    } else {
        np.ceil() as usize
    }
}

/// Trial division primality test.
pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A realized 0/1 mask together with its support set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    bits: Vec<u8>,
    support: Vec<usize>,
}

impl Mask {
    /// Builds a mask from 0/1 bits. Any nonzero byte counts as a one.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<u8> = bits.into_iter().map(u8::from).collect();
        let support = bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == 1).then_some(i))
            .collect();
        Mask { bits, support }
    }

    /// Mask of length `n` with ones exactly at `support` (duplicates ignored).
    pub fn from_support(n: usize, support: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in support {
            if i >= n {
                return Err(Error::param(
                    "support",
                    format!("index {i} outside mask of length {n}"),
                ));
            }
            bits[i] = true;
        }
        Ok(Mask::from_bits(bits))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i] == 1
    }

    /// Indices of the ones, strictly increasing.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Number of ones.
    pub fn n_p(&self) -> usize {
        self.support.len()
    }

    /// The mask as a real sequence, ready for a transform.
    pub fn to_real(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }
}

/// Draws the mask for one trial.
///
/// The stream is ChaCha8 seeded with `config.seed` and positioned on stream
/// `trial_index`, so each `(seed, trial_index)` pair names one fixed mask.
pub fn generate_mask(config: &MaskConfig, trial_index: u64) -> Mask {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial_index);
    let coin = Bernoulli::new(config.p).expect("p validated in MaskConfig");
    Mask::from_bits((0..config.n).map(|_| coin.sample(&mut rng)))
}

/// The contiguous block of `n_p` ones at the origin, followed by zeros.
pub fn worst_case_mask(n: usize, n_p: usize) -> Result<Mask> {
    if n_p > n {
        return Err(Error::SupportOutOfRange { n, n_p });
    }
    Ok(Mask::from_bits((0..n).map(|i| i < n_p)))
}

/// Text form: one line of `'0'`/`'1'` characters terminated by `'\n'`.
impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line: String = self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        writeln!(f, "{line}")
    }
}

impl FromStr for Mask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let line = s
            .strip_suffix('\n')
            .ok_or_else(|| Error::MaskFormat("missing trailing newline".into()))?;
        if line.is_empty() {
            return Err(Error::MaskFormat("empty mask".into()));
        }
        let bits = line
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::MaskFormat(format!(
                    "unexpected character {other:?} at column {i}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mask::from_bits(bits))
    }
}
