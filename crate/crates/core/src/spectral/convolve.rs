//! `(F * G)(s) = Σ_t F(t) G(s − t)` truncated to `|s − t| ≤ U`, with `U` chosen so
//! the discarded part is below a tolerance for every output coefficient.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use std::collections::BTreeMap;

use super::{Coefficients, SpectralVector, Support, TailDescriptor};
use crate::error::{Error, Result};
use crate::numeric::ComplexSum;

#[derive(Debug, Clone)]
pub struct ConvolveOptions {
    /// Dense output on `[−W, W]`.
    pub window: i64,
    /// Further output points beyond the window.
    pub samples: Vec<i64>,
    /// Allowed truncation error per coefficient.
    pub tol: f64,
    /// Largest admissible truncation radius `U`.
    pub budget: u64,
    pub tail: TailDescriptor,
    pub tail_from: f64,
    pub label: String,
}

/// `(gcd, step, inverse)` for solving `q m ≡ s (mod p)`.
#[derive(Clone, Copy)]
struct Congruence {
    d: i64,
    step: i64,
    inv: i64,
}

impl Congruence {
    fn new(q: i64, p: i64) -> Self {
        let g = q.extended_gcd(&p);
        let step = p / g.gcd;
        Self {
            d: g.gcd,
            step,
            inv: g.x.rem_euclid(step.max(1)),
        }
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    Integer::div_ceil(&a, &b)
}

fn floor_div(a: i64, b: i64) -> i64 {
    Integer::div_floor(&a, &b)
}

pub fn convolve(
    f: &dyn Coefficients,
    g: &dyn Coefficients,
    opts: &ConvolveOptions,
) -> Result<SpectralVector> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let sup_f = f.sup_abs();
    let target = opts.tol / sup_f.max(f64::MIN_POSITIVE);
    let limit = match g.support() {
        Support::Window(w) => (w as u64).min(opts.budget),
        Support::Multiples(_) => opts.budget,
    };
    let u = match g.cut_for(target, limit as f64) {
        Some(u) => u as i64,
        None => {
            let required = g.cut_for(target, 1e18).map_or(u64::MAX, |r| r as u64);
            return Err(Error::BudgetExceeded {
                required_t_cut: required,
                budget: limit,
            });
        }
    };
    let truncation = sup_f * g.tail_mass(u as f64);

    let symmetric = f.hermitian() && g.hermitian();
    let mut points: Vec<i64> = if symmetric {
        (0..=opts.window).collect()
    } else {
        (-opts.window..=opts.window).collect()
    };
    let mut extra: Vec<i64> = opts
        .samples
        .iter()
        .filter(|s| s.unsigned_abs() > opts.window as u64)
        .map(|&s| if symmetric { s.abs() } else { s })
        .collect();
    extra.sort_unstable();
    extra.dedup();
    points.extend(&extra);

    let kernel = Kernel::new(f, g, u)?;
    let values: Vec<Complex64> = points
        .par_iter()
        .map(|&s| kernel.eval(s))
        .collect::<Result<_>>()?;

    let w = opts.window;
    let mut dense = vec![Complex64::new(0.0, 0.0); (2 * w + 1) as usize];
    let mut samples = BTreeMap::new();
    for (&s, &v) in points.iter().zip(&values) {
        if s.unsigned_abs() <= w as u64 {
            dense[(s + w) as usize] = v;
            if symmetric {
                dense[(w - s) as usize] = v.conj();
            }
        } else {
            samples.insert(s, v);
            if symmetric {
                samples.insert(-s, v.conj());
            }
        }
    }
    if symmetric {
        dense[w as usize].im = 0.0;
    }
    let mut out = SpectralVector::new(w, dense, opts.tail, opts.tail_from, opts.label.clone())?
        .with_samples(samples);
    out.error_bound = truncation;
    Ok(out)
}

enum Plan {
    /// Both sparse: pairs `(q, p)` of support primes, solved by congruences.
    Sparse {
        f_primes: Vec<i64>,
        g_primes: Vec<i64>,
        pairs: Vec<Congruence>,
    },
    /// Sparse `F` against a stored `G`.
    SparseDense { f_primes: Vec<i64> },
    /// Stored `F`: walk the support of `G`.
    DenseF { g_primes: Option<Vec<i64>> },
}

struct Kernel<'a> {
    f: &'a dyn Coefficients,
    g: &'a dyn Coefficients,
    u: i64,
    f0: Complex64,
    g0: Complex64,
    plan: Plan,
}

fn as_i64(p: &[u64]) -> Vec<i64> {
    p.iter().map(|&q| q as i64).collect()
}

impl<'a> Kernel<'a> {
    fn new(f: &'a dyn Coefficients, g: &'a dyn Coefficients, u: i64) -> Result<Self> {
        let plan = match (f.support(), g.support()) {
            (Support::Multiples(fp), Support::Multiples(gp)) => {
                let (fp, gp) = (as_i64(fp), as_i64(gp));
                let pairs = fp
                    .iter()
                    .flat_map(|&q| gp.iter().map(move |&p| Congruence::new(q, p)))
                    .collect();
                Plan::Sparse {
                    f_primes: fp,
                    g_primes: gp,
                    pairs,
                }
            }
            (Support::Multiples(fp), Support::Window(_)) => Plan::SparseDense {
                f_primes: as_i64(fp),
            },
            (Support::Window(_), Support::Multiples(gp)) => Plan::DenseF {
                g_primes: Some(as_i64(gp)),
            },
            (Support::Window(_), Support::Window(_)) => Plan::DenseF { g_primes: None },
        };
        Ok(Self {
            f,
            g,
            u,
            f0: f.at_zero(),
            g0: g.at_zero(),
            plan,
        })
    }

    fn f_at(&self, t: i64) -> Result<Complex64> {
        self.f.coeff(t).ok_or_else(|| {
            Error::InvalidInput(format!("F is not known at {t}; widen its stored window"))
        })
    }

    fn eval(&self, s: i64) -> Result<Complex64> {
        let u = self.u;
        let mut acc = ComplexSum::new();
        match &self.plan {
            Plan::Sparse {
                f_primes,
                g_primes,
                pairs,
            } => {
                // F0 G(s) + G0 F'(s) + Σ F'(t) G'(s − t)
                acc.add(self.f0 * self.g.coeff(s).expect("sparse providers are total"));
                let fs = self.f.coeff(s).expect("sparse providers are total");
                if s != 0 {
                    acc.add(self.g0 * fs);
                }
                let nq = g_primes.len();
                for (i, &q) in f_primes.iter().enumerate() {
                    let m_lo = ceil_div(s - u, q);
                    let m_hi = floor_div(s + u, q);
                    if m_lo > m_hi {
                        continue;
                    }
                    let mut block = Complex64::new(0.0, 0.0);
                    for (k, &p) in g_primes.iter().enumerate() {
                        let c = pairs[i * nq + k];
                        if s % c.d != 0 {
                            continue;
                        }
                        // q m ≡ s (mod p)  ⇔  (q/d) m ≡ s/d (mod p/d)
                        let r = ((s / c.d).rem_euclid(c.step) as i128 * c.inv as i128)
                            .rem_euclid(c.step as i128) as i64;
                        let mut m = m_lo + (r - m_lo).rem_euclid(c.step);
                        while m <= m_hi {
                            let rest = s - q * m;
                            if m != 0 && rest != 0 {
                                block += self.f.term(i, m) * self.g.term(k, rest / p);
                            }
                            m += c.step;
                        }
                    }
                    acc.add(block);
                }
            }
            Plan::SparseDense { f_primes } => {
                if s.abs() <= u {
                    acc.add(self.f0 * self.g.coeff(s).expect("inside the stored window"));
                }
                for (i, &q) in f_primes.iter().enumerate() {
                    let mut block = Complex64::new(0.0, 0.0);
                    for m in ceil_div(s - u, q)..=floor_div(s + u, q) {
                        if m != 0 {
                            let gv = self.g.coeff(s - q * m).expect("inside the stored window");
                            block += self.f.term(i, m) * gv;
                        }
                    }
                    acc.add(block);
                }
            }
            Plan::DenseF { g_primes } => match g_primes {
                Some(gp) => {
                    acc.add(self.g0 * self.f_at(s)?);
                    for (k, &p) in gp.iter().enumerate() {
                        let mut block = Complex64::new(0.0, 0.0);
                        for n in 1..=u / p {
                            block += self.g.term(k, n) * self.f_at(s - n * p)?;
                            block += self.g.term(k, -n) * self.f_at(s + n * p)?;
                        }
                        acc.add(block);
                    }
                }
                None => {
                    for t in -u..=u {
                        acc.add(self.g.coeff(t).expect("inside the stored window") * self.f_at(s - t)?);
                    }
                }
            },
        }
        Ok(acc.value())
    }
}
