//! Spectral vectors, truncated convolution with certified error, the product
//! measures `μ^(k)` and checks of the stability and inductive estimates.

mod coefficients;
mod convolve;
mod product;
mod stability;

pub use coefficients::{Coefficients, LayerCoefficients, Support};
pub use convolve::{convolve, ConvolveOptions};
pub use product::{
    check_inductive_bounds, inductive_bound, product_measure, Band, BandCheck, BoundReport, MeasureOptions, Violation,
};
pub use stability::{
    check_stability, synthetic_stability, Envelope, HypothesisCheck, StabilityOptions,
    StabilityReport, SyntheticEnvelopes,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Record margins and trends, never fail on the asymptotic constants.
    #[default]
    Desk,
    /// Enforce the mass condition and every bound as displayed.
    PaperStrict,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Desk => "desk",
            Mode::PaperStrict => "paper-strict",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Mode::Desk),
            "paper-strict" | "paper_strict" => Ok(Mode::PaperStrict),
            _ => Err(Error::InvalidInput(format!("unknown mode {s:?}"))),
        }
    }
}

/// `|v(s)| ≤ A exp(-(|s|/T)^{1/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDescriptor {
    pub amplitude: f64,
    pub scale: f64,
}

impl TailDescriptor {
    pub fn bound(&self, s: f64) -> f64 {
        self.amplitude * (-(s.abs() / self.scale).sqrt()).exp()
    }

    /// Bound on `Σ_{|u| > r} A exp(-(|u|/T)^{1/2})` by the integral from `r`.
    pub fn mass_beyond(&self, r: f64) -> f64 {
        let y = r.max(0.0) / self.scale;
        let root = y.sqrt();
        4.0 * self.amplitude * self.scale * (root + 1.0) * (-root).exp()
    }

    /// Smallest `r` with `mass_beyond(r) ≤ tol`.
    pub fn cut_for(&self, tol: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.scale.max(1.0));
        while self.mass_beyond(hi) > tol {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.mass_beyond(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1.0 {
                break;
            }
        }
        hi.ceil()
    }
}

/// What is known about one coefficient of a [`SpectralVector`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup {
    Stored(Complex64),
    /// Outside the stored set but inside the tail region: only a bound.
    Tail(f64),
    Unknown,
}

/// Fourier coefficients on `[−W, W]`, optional samples beyond, and a tail descriptor
/// asserted for `|s| > tail_from`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralVector {
    pub window: i64,
    dense: Vec<Complex64>,
    pub samples: BTreeMap<i64, Complex64>,
    pub tail: TailDescriptor,
    pub tail_from: f64,
    pub label: String,
    /// Bound on the truncation error of every stored value.
    pub error_bound: f64,
    pub hermitian: bool,
}

impl SpectralVector {
    /// `dense[k]` holds `s = k − W`.
    pub fn new(
        window: i64,
        dense: Vec<Complex64>,
        tail: TailDescriptor,
        tail_from: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if window < 0 || dense.len() as i64 != 2 * window + 1 {
            return Err(Error::InvalidInput(format!(
                "dense part must have 2W + 1 = {} entries, got {}",
                2 * window + 1,
                dense.len()
            )));
        }
        let hermitian = (0..=window as usize).all(|k| {
            let a = dense[window as usize + k];
            let b = dense[window as usize - k];
            a == b.conj()
        });
        Ok(Self {
            window,
            dense,
            samples: BTreeMap::new(),
            tail,
            tail_from,
            label: label.into(),
            error_bound: 0.0,
            hermitian,
        })
    }

    /// Builds the dense part from a function of `s`.
    pub fn from_fn(
        window: i64,
        f: impl Fn(i64) -> Complex64,
        tail: TailDescriptor,
        tail_from: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let dense = (-window..=window).map(f).collect();
        Self::new(window, dense, tail, tail_from, label)
    }

    pub fn with_samples(mut self, samples: BTreeMap<i64, Complex64>) -> Self {
        if self.hermitian {
            self.hermitian = samples
                .iter()
                .all(|(s, v)| samples.get(&-s).map_or(true, |w| *w == v.conj()));
        }
        self.samples = samples;
        self
    }

    pub fn dense(&self) -> &[Complex64] {
        &self.dense
    }

    pub fn get(&self, s: i64) -> Option<Complex64> {
        if s.unsigned_abs() <= self.window as u64 {
            return Some(self.dense[(s + self.window) as usize]);
        }
        if let Some(v) = self.samples.get(&s) {
            return Some(*v);
        }
        if self.hermitian {
            return self.samples.get(&-s).map(|v| v.conj());
        }
        None
    }

    pub fn lookup(&self, s: i64) -> Lookup {
        match self.get(s) {
            Some(v) => Lookup::Stored(v),
            None if s.unsigned_abs() as f64 > self.tail_from => Lookup::Tail(self.tail.bound(s as f64)),
            None => Lookup::Unknown,
        }
    }

    pub fn set(&mut self, s: i64, v: Complex64) {
        if s.unsigned_abs() <= self.window as u64 {
            self.dense[(s + self.window) as usize] = v;
        } else {
            self.samples.insert(s, v);
        }
        self.hermitian = self.get(-s).map_or(self.hermitian, |w| self.hermitian && w == v.conj());
    }

    /// All stored `(s, v)` in ascending `s`, dense part and samples merged.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let below = self.samples.range(..-self.window).map(|(s, v)| (*s, *v));
        let dense = self
            .dense
            .iter()
            .enumerate()
            .map(move |(k, v)| (k as i64 - self.window, *v));
        let above = self.samples.range(self.window + 1..).map(|(s, v)| (*s, *v));
        below.chain(dense).chain(above)
    }

    /// Largest `|s|` with a stored value.
    pub fn reach(&self) -> i64 {
        let top = self.samples.keys().map(|s| s.abs()).max().unwrap_or(0);
        top.max(self.window)
    }

    /// Stored values in the tail region that exceed the descriptor by more than a
    /// relative `slack`.
    pub fn tail_inconsistencies(&self, slack: f64) -> Vec<i64> {
        self.iter()
            .filter(|(s, v)| {
                (s.unsigned_abs() as f64) > self.tail_from
                    && v.norm() > self.tail.bound(*s as f64) * (1.0 + slack) + self.error_bound
            })
            .map(|(s, _)| s)
            .collect()
    }
}

/// `M_1 < M_2 < …` with `M_{j+1} = ⌈M_j^{β_ε}⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub m1: u64,
    pub beta_eps: f64,
    pub scales: Vec<u64>,
}

impl ScaleSchedule {
    pub fn new(m1: u64, beta_eps: f64, depth: usize) -> Result<Self> {
        if m1 < 2 || depth == 0 {
            return Err(Error::InvalidInput(format!(
                "need M1 >= 2 and depth >= 1, got M1 = {m1}, depth = {depth}"
            )));
        }
        if !(beta_eps > 1.0) {
            return Err(Error::InvalidInput(format!("beta_eps must exceed 1, got {beta_eps}")));
        }
        let mut scales = vec![m1];
        while scales.len() < depth {
            let next = (*scales.last().unwrap() as f64).powf(beta_eps).ceil();
            if next > 4.0e18 {
                return Err(Error::BudgetExceeded {
                    required_t_cut: u64::MAX,
                    budget: 4_000_000_000_000_000_000,
                });
            }
            scales.push(next as u64);
        }
        Ok(Self {
            m1,
            beta_eps,
            scales,
        })
    }

    pub fn depth(&self) -> usize {
        self.scales.len()
    }

    /// `Σ_j M_j^{-δ}` over the first `k` scales.
    pub fn mass_sum(&self, k: usize, delta: f64) -> f64 {
        self.scales[..k].iter().map(|&m| (m as f64).powf(-delta)).sum()
    }

    /// The whole schedule keeps `Σ M_j^{-δ} < 1/100`.
    pub fn mass_condition(&self, delta: f64) -> bool {
        self.mass_sum(self.scales.len(), delta) < 0.01
    }
}
