//! Decay fits, the normality criterion for multiplication by `a`, and the summary
//! report.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{fit_line, Neumaier};
use crate::params::{derive_exponents, ExponentSet};
use crate::spectral::{Lookup, Mode, SpectralVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `ln|v(s)|` against `ln|s|`.
    pub exponent: f64,
    /// Two standard errors either side.
    pub band: (f64, f64),
    pub range: (f64, f64),
    pub used: usize,
    pub zeros: usize,
    /// `max(0, −2·exponent)`.
    pub dimension: f64,
}

/// Least-squares decay over the stored coefficients with `|s|` in `range`.
pub fn fit_decay(v: &SpectralVector, range: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = range;
    if !(lo >= 1.0 && hi >= 100.0 * lo) {
        return Err(Error::InvalidInput(format!("range {lo}..{hi} must span two decades above 1")));
    }
    let (mut xs, mut ys, mut zeros) = (Vec::new(), Vec::new(), 0);
    for (s, c) in v.iter() {
        let a = s.unsigned_abs() as f64;
        if s <= 0 || a < lo || a > hi {
            continue;
        }
        if c.norm() == 0.0 {
            zeros += 1;
        } else {
            xs.push(a.ln());
            ys.push(c.norm().ln());
        }
    }
    if xs.len() < 100 {
        return Err(Error::TooFewPoints {
            needed: 100,
            have: xs.len(),
        });
    }
    let (a, b) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if b - a < 2.0 * std::f64::consts::LN_10 {
        return Err(Error::InvalidInput("nonzero coefficients span less than two decades".into()));
    }
    let fit = fit_line(&xs, &ys).expect("at least 100 points");
    Ok(DecayFit {
        exponent: fit.slope,
        band: (fit.slope - 2.0 * fit.slope_stderr, fit.slope + 2.0 * fit.slope_stderr),
        range,
        used: xs.len(),
        zeros,
        dimension: (-2.0 * fit.slope).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalitySum {
    pub a: u64,
    pub m: i64,
    pub n_max: usize,
    pub mode: Mode,
    /// `Σ_{n ≤ N} n^{-3} Σ_{j,k ≤ n} |v(m(a^j − a^k))|` for `N = 1..=n_max`.
    pub partial: Vec<f64>,
    /// Partial sum plus a bound on the terms `N > n_max`.
    pub certified: f64,
    /// Part of the final partial sum that comes from tail-descriptor bounds or the
    /// trivial bound `v(0)` rather than stored coefficients.
    pub tail_contribution: f64,
    pub stored_terms: u64,
    pub tail_terms: u64,
    pub trivial_terms: u64,
}

impl NormalitySum {
    pub fn total(&self) -> f64 {
        *self.partial.last().unwrap_or(&0.0)
    }
}

/// `|m|(a^j − a^k)` for `j > k ≥ 1`, or `None` past `i64`.
fn frequency(a: u64, m: i64, j: u32, k: u32) -> Option<i64> {
    let aj = (a as i128).checked_pow(j)?;
    let ak = (a as i128).checked_pow(k)?;
    let s = (m.unsigned_abs() as i128).checked_mul(aj - ak)?;
    i64::try_from(s).ok()
}

enum Term {
    Stored(f64),
    Tail(f64),
    Trivial(f64),
}

/// Evaluates the normality double sum with absolute values, so every partial sum is
/// an upper bound for the one with the true phases.
pub fn normality_sum(v: &SpectralVector, a: u64, m: i64, n_max: usize, mode: Mode) -> Result<NormalitySum> {
    if a < 2 || m == 0 || n_max == 0 {
        return Err(Error::InvalidInput(format!("need a >= 2, m != 0, N_max >= 1; got a = {a}, m = {m}, N_max = {n_max}")));
    }
    let v0 = v.get(0).map(|c| c.norm()).ok_or_else(|| Error::InvalidInput("v(0) is not stored".into()))?;
    let t = v.tail;
    let lookup = |s: i64| -> Term {
        match v.lookup(s) {
            Lookup::Stored(c) => Term::Stored(c.norm()),
            Lookup::Tail(b) => Term::Tail(b),
            Lookup::Unknown => Term::Trivial(v0),
        }
    };
    // A row n is negligible once the bound at its smallest frequency |m| a^{n−1}(a−1)
    // underflows; only valid past every stored and unknown coefficient.
    let ln_a = (a as f64).ln();
    let row_bound = |n: usize| -> Option<f64> {
        let ln_s = (m.unsigned_abs() as f64).ln() + (n as f64 - 1.0) * ln_a + ((a - 1) as f64).ln();
        let s = ln_s.exp();
        let beyond = s > v.tail_from.max(v.reach() as f64);
        beyond.then(|| t.amplitude * (-(s / t.scale).sqrt()).exp())
    };

    let (mut stored_terms, mut tail_terms, mut trivial_terms) = (0u64, 0u64, 0u64);
    let mut diag = Neumaier::new();
    let mut off = Neumaier::new();
    let mut off_tail = Neumaier::new();
    let mut total = Neumaier::new();
    let mut tail_total = Neumaier::new();
    let mut partial = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        diag.add(v0);
        // row n against k < n, counted twice by symmetry
        let mut row = Neumaier::new();
        let mut row_tail = Neumaier::new();
        match row_bound(n) {
            Some(b) if n > 1 => {
                let r = 2.0 * (n - 1) as f64 * b;
                row.add(r);
                row_tail.add(r);
                tail_terms += 2 * (n as u64 - 1);
            }
            _ => {
                for k in 1..n {
                    let term = match frequency(a, m, n as u32, k as u32) {
                        Some(s) => lookup(s),
                        None => match row_bound(n) {
                            Some(b) => Term::Tail(b),
                            None => Term::Trivial(v0),
                        },
                    };
                    let x = match term {
                        Term::Stored(x) => {
                            stored_terms += 2;
                            x
                        }
                        Term::Tail(x) => {
                            tail_terms += 2;
                            row_tail.add(2.0 * x);
                            x
                        }
                        Term::Trivial(x) => {
                            trivial_terms += 2;
                            row_tail.add(2.0 * x);
                            x
                        }
                    };
                    row.add(2.0 * x);
                }
            }
        }
        off.add(row.value());
        off_tail.add(row_tail.value());
        let w = (n as f64).powi(-3);
        total.add(w * (diag.value() + off.value()));
        tail_total.add(w * off_tail.value());
        partial.push(total.value());
    }
    stored_terms += n_max as u64;
    // terms N > n_max: N^{-3}(N v0 + O(N)) with O(N) ≤ O(n_max) + Σ_{rows > n_max} bounds
    let mut later = Neumaier::new();
    let mut n = n_max + 1;
    while let Some(b) = row_bound(n) {
        let r = 2.0 * (n - 1) as f64 * b;
        later.add(r);
        if r < 1e-300 || n > n_max + 10_000 {
            break;
        }
        n += 1;
    }
    let o_inf = off.value() + later.value();
    let nm = n_max as f64;
    let remainder = v0 / nm + o_inf / (2.0 * nm * nm);
    let last = total.value();
    Ok(NormalitySum {
        a,
        m,
        n_max,
        mode,
        partial,
        certified: last + remainder,
        tail_contribution: tail_total.value(),
        stored_terms,
        tail_terms,
        trivial_terms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub schema_version: u32,
    pub mode: Mode,
    pub params: (f64, f64, f64, f64),
    pub admissible: bool,
    pub error: Option<String>,
    pub alpha_theory: Option<f64>,
    pub delta: Option<f64>,
    pub delta_minus_eps: Option<f64>,
    pub fit: Option<DecayFit>,
    pub margins: Vec<Margin>,
}

/// Collects theory and measurements; for inadmissible parameters the exponents are
/// still given, next to the error.
pub fn dimension_report(
    gamma: f64,
    tau1: f64,
    tau2: f64,
    epsilon: f64,
    mode: Mode,
    fit: Option<DecayFit>,
    margins: Vec<Margin>,
) -> DimensionReport {
    let error = derive_exponents(gamma, tau1, tau2, epsilon).err().map(|e| e.to_string());
    let e = ExponentSet::compute(gamma, tau1, tau2, epsilon);
    let finite = |x: f64| x.is_finite().then_some(x);
    DimensionReport {
        schema_version: SCHEMA_VERSION,
        mode,
        params: (gamma, tau1, tau2, epsilon),
        admissible: error.is_none(),
        error,
        alpha_theory: finite(e.alpha),
        delta: finite(e.delta),
        delta_minus_eps: finite(e.delta - e.epsilon),
        fit,
        margins,
    }
}
