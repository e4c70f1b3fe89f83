//! One scale of the construction: the primes in `[M, 2M)`, the annuli `I_{q,r}`,
//! and the Fourier coefficients of `g_M` and `f_M = g_M / ĝ_M(0)`.
//!
//! Transforms follow `f̂(s) = ∫ f(x) e(sx) dx`, so a bump centred at `x₀`
//! contributes the phase `e(s x₀)`.

mod grid;
mod primes;
mod regimes;

pub use grid::{grid_oracle_discrepancy, grid_transform, layer_grid};
pub use primes::{primes_in_range, primes_in_scale, small_primes};
pub use regimes::{verify_regimes, MediumBand, Regime, RegimeReport, RegimeSampler, TailBand, ZeroBand};

use num_complex::Complex64;
use std::sync::Arc;

use crate::bump::BumpSpec;
use crate::diophantine::ThetaSpec;
use crate::error::{Error, Result};
use crate::numeric::e;
use crate::params::{c_of_m, ApproxFunction};

/// Everything except the scale itself.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub psi1: ApproxFunction,
    pub psi2: ApproxFunction,
    pub epsilon: f64,
    pub theta: ThetaSpec,
    pub bump: Arc<BumpSpec>,
}

#[derive(Debug, Clone)]
pub struct ScaleLayer {
    pub m: u64,
    pub c: f64,
    pub primes: Vec<u64>,
    pub psi1: ApproxFunction,
    pub psi2: ApproxFunction,
    pub epsilon: f64,
    pub theta: ThetaSpec,
    pub bump: Arc<BumpSpec>,
    pub g_hat_0: f64,
    /// `ψ₁(q) − (c/2)ψ₂(q)` per prime
    shift: Vec<f64>,
    /// `cψ₂(q)` per prime
    width: Vec<f64>,
}

impl ScaleLayer {
    pub fn new(m: u64, params: &LayerParams) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain(format!("scale must be at least 2, got {m}")));
        }
        Self::with_primes(m, params, primes_in_scale(m))
    }

    /// A layer over an explicit prime list; lets tests isolate single primes.
    pub fn with_primes(m: u64, params: &LayerParams, primes: Vec<u64>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::InvalidInput("layer has no primes".into()));
        }
        if primes.iter().any(|&q| q < m.max(2) || q >= 2 * m) {
            return Err(Error::InvalidInput("layer primes must lie in [M, 2M)".into()));
        }
        let c = c_of_m(m, params.epsilon);
        let shift = primes
            .iter()
            .map(|&q| params.psi1.at(q as f64) - 0.5 * c * params.psi2.at(q as f64))
            .collect();
        let width = primes.iter().map(|&q| c * params.psi2.at(q as f64)).collect();
        let g_hat_0 = params.bump.transform(0.0) * primes.iter().map(|&q| q as f64).sum::<f64>();
        Ok(Self {
            m,
            c,
            primes,
            psi1: params.psi1,
            psi2: params.psi2,
            epsilon: params.epsilon,
            theta: params.theta.clone(),
            bump: params.bump.clone(),
            g_hat_0,
            shift,
            width,
        })
    }

    /// `x_{q,r} = (r − θ)/q + ψ₁(q) − (c/2)ψ₂(q)`.
    pub fn center(&self, q: u64, r: u64) -> Result<f64> {
        let i = self
            .primes
            .binary_search(&q)
            .map_err(|_| Error::InvalidInput(format!("{q} is not a prime of this layer")))?;
        if r >= q {
            return Err(Error::InvalidInput(format!("r = {r} out of range for q = {q}")));
        }
        Ok(self.theta.affine(r as i128, 1)? / q as f64 + self.shift[i])
    }

    /// The same layer with `c` replaced; lets experiments decouple `c` from `ε`.
    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidInput(format!("c must lie in (0, 1), got {c}")));
        }
        for (i, &q) in self.primes.iter().enumerate() {
            let (p1, p2) = (self.psi1.at(q as f64), self.psi2.at(q as f64));
            self.shift[i] = p1 - 0.5 * c * p2;
            self.width[i] = c * p2;
        }
        self.c = c;
        Ok(self)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.width[i]
    }

    pub fn shift(&self, i: usize) -> f64 {
        self.shift[i]
    }

    fn theta_phase(&self, m: i64) -> Complex64 {
        let f = self
            .theta
            .frac_mul(m)
            .unwrap_or_else(|_| (m as f64 * self.theta.value()).rem_euclid(1.0));
        e(-f)
    }

    /// Contribution of prime index `i` to `ĝ(s)` at `s = m q_i`.
    #[inline]
    pub fn g_term(&self, i: usize, m: i64) -> Complex64 {
        let q = self.primes[i] as i64;
        let s = (m * q) as f64;
        let phi = self.bump.transform(self.width[i] * s);
        if phi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.theta_phase(m) * e(s * self.shift[i]) * (q as f64 * phi)
    }

    /// Same as [`g_term`](Self::g_term) divided by `ĝ(0)`.
    #[inline]
    pub fn f_term(&self, i: usize, m: i64) -> Complex64 {
        self.g_term(i, m) / self.g_hat_0
    }

    /// Indices of the layer primes dividing `s` (none for `s = 0`).
    pub fn divisors(&self, s: i64) -> impl Iterator<Item = usize> + '_ {
        let a = s.unsigned_abs();
        let small = s != 0 && a >= self.m;
        self.primes
            .iter()
            .enumerate()
            .filter(move |(_, &q)| small && a % q == 0)
            .map(|(i, _)| i)
    }

    pub fn g_hat(&self, s: i64) -> Complex64 {
        if s == 0 {
            return Complex64::new(self.g_hat_0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in self.divisors(s) {
            acc += self.g_term(i, s / self.primes[i] as i64);
        }
        acc
    }

    pub fn f_hat(&self, s: i64) -> Complex64 {
        if s == 0 {
            return Complex64::new(1.0, 0.0);
        }
        self.g_hat(s) / self.g_hat_0
    }

    /// `ln |f̂(s)|`, finite where the value itself would underflow.
    pub fn ln_abs_f_hat(&self, s: i64) -> f64 {
        if s == 0 {
            return 0.0;
        }
        let terms: Vec<(usize, f64)> = self
            .divisors(s)
            .map(|i| {
                let q = self.primes[i] as f64;
                let lnphi = self.bump.ln_abs_transform(self.width[i] * s as f64);
                (i, (q / self.g_hat_0).ln() + lnphi)
            })
            .collect();
        match terms.len() {
            0 => f64::NEG_INFINITY,
            1 => terms[0].1,
            _ => {
                let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
                let mut acc = Complex64::new(0.0, 0.0);
                for &(i, l) in &terms {
                    let q = self.primes[i] as i64;
                    let m = s / q;
                    let xi = self.width[i] * s as f64;
                    let sign = self.bump.transform(xi).signum();
                    let sign = if sign == 0.0 { 1.0 } else { sign };
                    acc += self.theta_phase(m) * e(s as f64 * self.shift[i]) * (sign * (l - top).exp());
                }
                acc.norm().ln() + top
            }
        }
    }

    /// Smallest `s > 0` past which every term sits beyond the faithful range of the
    /// truncated bump.
    pub fn faithful_s_limit(&self) -> f64 {
        let widest = self.width.iter().copied().fold(0.0, f64::max);
        self.bump.faithful_limit() / widest
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::default_bump;

    fn params(tau: f64, c_eps: f64, theta: ThetaSpec) -> LayerParams {
        let p = ApproxFunction::power(tau).unwrap();
        LayerParams {
            psi1: p,
            psi2: p,
            epsilon: c_eps,
            theta,
            bump: Arc::new(default_bump()),
        }
    }

    #[test]
    fn center_examples() {
        let layer = ScaleLayer::new(64, &params(3.0, 0.05, ThetaSpec::Zero))
            .unwrap()
            .with_c(0.5)
            .unwrap();
        let x = layer.center(101, 0).unwrap();
        assert!((x - 0.75 * 101f64.powi(-3)).abs() < 1e-20);
        let top = layer.center(101, 100).unwrap();
        assert!(top < 1.0 + 101f64.powi(-3));
        let g = ScaleLayer::new(64, &params(3.0, 0.05, ThetaSpec::golden()))
            .unwrap()
            .with_c(0.5)
            .unwrap();
        assert!((g.center(101, 37).unwrap() - 0.36021821320251297694).abs() < 1e-15);
        assert!(g.center(101, 101).is_err());
        assert!(g.center(103, 0).is_ok());
        assert!(g.center(100, 0).is_err());
    }

    #[test]
    fn zero_band_and_normalization() {
        for theta in [ThetaSpec::Zero, ThetaSpec::golden()] {
            let layer = ScaleLayer::new(100, &params(2.7, 0.05, theta)).unwrap();
            assert_eq!(layer.f_hat(0), Complex64::new(1.0, 0.0));
            for s in 1..100 {
                assert_eq!(layer.f_hat(s), Complex64::new(0.0, 0.0));
                assert_eq!(layer.f_hat(-s), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn g_hat_0_is_prime_sum() {
        let layer = ScaleLayer::new(100, &params(2.7, 0.05, ThetaSpec::Zero)).unwrap();
        let sum: u64 = primes_in_scale(100).iter().sum();
        assert_eq!(layer.g_hat_0, sum as f64);
        assert_eq!(sum, 3167);
    }

    #[test]
    fn single_term_at_707() {
        let layer = ScaleLayer::new(100, &params(2.7, 0.05, ThetaSpec::Zero)).unwrap();
        let c = layer.c;
        let psi = 101f64.powf(-2.7);
        let expected = e(707.0 * (psi - 0.5 * c * psi)) * (101.0 * layer.bump.transform(c * psi * 707.0));
        assert!((layer.g_hat(707) - expected).norm() < 1e-13);
        assert_eq!(layer.divisors(707).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn hermitian() {
        let layer = ScaleLayer::new(64, &params(2.7, 0.05, ThetaSpec::golden())).unwrap();
        for s in [67i64, 134, 71 * 73, 5000, 12_345 * 67] {
            let (a, b) = (layer.f_hat(s), layer.f_hat(-s));
            assert!((a - b.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn ln_abs_matches_direct() {
        let layer = ScaleLayer::new(64, &params(2.7, 0.05, ThetaSpec::Zero)).unwrap();
        for s in [67i64, 67 * 71, 67 * 71 * 73, 4489] {
            let direct = layer.f_hat(s).norm().ln();
            assert!((layer.ln_abs_f_hat(s) - direct).abs() < 1e-9, "{s}");
        }
        assert_eq!(layer.ln_abs_f_hat(65), f64::NEG_INFINITY);
    }

    #[test]
    fn divisor_count_bound() {
        let layer = ScaleLayer::new(64, &params(2.7, 0.05, ThetaSpec::Zero)).unwrap();
        let top = (64f64).powf(2.7 * 1.025) as i64;
        for s in (64..top).step_by(997) {
            let n = layer.divisors(s).count() as f64;
            assert!(n <= (s as f64).ln() / 64f64.ln());
        }
        let s = 67 * 71 * 73;
        assert_eq!(layer.divisors(s).count(), 3);
    }
}
