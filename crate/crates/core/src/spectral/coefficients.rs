//! Coefficient providers for the convolution: lazily evaluated layers with per-prime
//! term tables, and stored spectral vectors.

use num_complex::Complex64;
use std::sync::Arc;

use super::SpectralVector;
use crate::layer::ScaleLayer;

/// Where the nonzero coefficients of a provider can sit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support<'a> {
    /// `s = 0` and nonzero multiples of these primes; the value at `s = mq` is the
    /// sum over the primes `q` dividing `s` of `term(i, m)`.
    Multiples(&'a [u64]),
    /// Anything in `[−W, W]`, stored.
    Window(i64),
}

pub trait Coefficients: Sync {
    fn support(&self) -> Support<'_>;

    fn at_zero(&self) -> Complex64;

    /// Contribution of prime index `i` at `s = m q_i`; only for [`Support::Multiples`].
    fn term(&self, i: usize, m: i64) -> Complex64;

    /// The full coefficient where it is known.
    fn coeff(&self, s: i64) -> Option<Complex64>;

    /// Bound on `Σ_{|u| > r} |c(u)|`, `INFINITY` when nothing is known.
    fn tail_mass(&self, r: f64) -> f64;

    /// Bound on `sup_s |c(s)|`.
    fn sup_abs(&self) -> f64;

    fn hermitian(&self) -> bool;

    /// Smallest `r` (up to rounding to a power-of-two bracket and bisection) with
    /// `tail_mass(r) ≤ tol`.
    fn cut_for(&self, tol: f64, limit: f64) -> Option<f64> {
        if self.tail_mass(0.0) <= tol {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.tail_mass(hi) > tol {
            lo = hi;
            hi = (2.0 * hi).min(limit);
            if hi <= lo {
                return None;
            }
        }
        while hi - lo > 1.0 && hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi.ceil())
    }
}

/// `f̂_M` with the per-prime terms tabulated for `|s|` up to a reach.
#[derive(Debug, Clone)]
pub struct LayerCoefficients {
    pub layer: Arc<ScaleLayer>,
    tables: Vec<Vec<Complex64>>,
}

impl LayerCoefficients {
    /// Tabulates `term(i, m)` for `0 ≤ m q_i ≤ reach`; larger `m` are evaluated on
    /// demand.
    pub fn new(layer: Arc<ScaleLayer>, reach: f64) -> Self {
        use rayon::prelude::*;
        let tables = layer
            .primes
            .par_iter()
            .enumerate()
            .map(|(i, &q)| {
                let top = (reach / q as f64).floor().max(0.0) as i64;
                (0..=top).map(|m| layer.f_term(i, m)).collect()
            })
            .collect();
        Self { layer, tables }
    }

    pub fn table_len(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }

    fn envelope_mass(&self, i: usize, r: f64) -> f64 {
        let layer = &self.layer;
        let q = layer.primes[i] as f64;
        let h = layer.width(i) * q;
        let m0 = (r / q).floor() + 1.0;
        let x = h * m0;
        // Σ_{m ≥ m0} env(hm) ≤ env(h m0) + (1/h) ∫_{h m0}^∞ env, both signs.
        let one_side = layer.bump.envelope(x) + 0.5 * layer.bump.envelope_tail_sum(x) / h;
        2.0 * q / layer.g_hat_0 * one_side
    }
}

impl Coefficients for LayerCoefficients {
    fn support(&self) -> Support<'_> {
        Support::Multiples(&self.layer.primes)
    }

    fn at_zero(&self) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[inline]
    fn term(&self, i: usize, m: i64) -> Complex64 {
        let t = &self.tables[i];
        let k = m.unsigned_abs() as usize;
        if k < t.len() {
            if m < 0 {
                t[k].conj()
            } else {
                t[k]
            }
        } else {
            self.layer.f_term(i, m)
        }
    }

    fn coeff(&self, s: i64) -> Option<Complex64> {
        if s == 0 {
            return Some(self.at_zero());
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in self.layer.divisors(s) {
            acc += self.term(i, s / self.layer.primes[i] as i64);
        }
        Some(acc)
    }

    fn tail_mass(&self, r: f64) -> f64 {
        (0..self.layer.primes.len()).map(|i| self.envelope_mass(i, r)).sum()
    }

    fn sup_abs(&self) -> f64 {
        1.0
    }

    fn hermitian(&self) -> bool {
        true
    }
}

impl Coefficients for SpectralVector {
    fn support(&self) -> Support<'_> {
        Support::Window(self.window)
    }

    fn at_zero(&self) -> Complex64 {
        self.get(0).expect("window contains 0")
    }

    fn term(&self, _: usize, _: i64) -> Complex64 {
        unreachable!("stored vectors have no prime terms")
    }

    fn coeff(&self, s: i64) -> Option<Complex64> {
        self.get(s)
    }

    fn tail_mass(&self, r: f64) -> f64 {
        let w = self.window as f64;
        if self.tail_from > w {
            // A gap between the stored window and the tail region is unbounded.
            return if r >= self.tail_from {
                self.tail.mass_beyond(r)
            } else {
                f64::INFINITY
            };
        }
        if r >= w {
            return self.tail.mass_beyond(r);
        }
        let inside: f64 = self
            .dense()
            .iter()
            .enumerate()
            .filter(|(k, _)| (*k as i64 - self.window).unsigned_abs() as f64 > r)
            .map(|(_, v)| v.norm())
            .sum();
        inside + self.tail.mass_beyond(w)
    }

    fn sup_abs(&self) -> f64 {
        let stored = self.dense().iter().map(|v| v.norm()).fold(0.0, f64::max);
        stored.max(self.tail.bound(self.tail_from.max(self.window as f64)))
    }

    fn hermitian(&self) -> bool {
        self.hermitian
    }
}
