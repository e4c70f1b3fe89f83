//! Passing between the line and the torus: lifting a compactly supported function
//! to `[0, 1)`, and windowing a periodic measure back to the line.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bump::BumpSpec;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numeric::{e, fit_line, phased_sum, sinc, ComplexSum};
use crate::spectral::{Lookup, SpectralVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftReport {
    pub n: usize,
    pub max_discrepancy: f64,
    pub worst_s: i64,
    /// The mass of `f`, equal to both sides at `s = 0`.
    pub mass: f64,
}

/// `φ((x − center)/width)/width` on the torus grid `j/n`, over the nodes covering
/// `[center − width/2, center + width/2]` (not reduced mod 1).
pub fn bump_on_torus(spec: &BumpSpec, center: f64, width: f64, n: usize) -> Result<GridFunction> {
    if !(width > 0.0 && width <= 1.0) || n == 0 {
        return Err(Error::InvalidInput(format!("width {width} and n {n} must satisfy 0 < width <= 1, n > 0")));
    }
    let lo = ((center - width / 2.0) * n as f64).floor() as i64;
    let hi = ((center + width / 2.0) * n as f64).ceil() as i64;
    let h = 1.0 / n as f64;
    let values: Vec<f64> = (lo..=hi)
        .into_par_iter()
        .map(|j| spec.eval((j as f64 * h - center) / width) / width)
        .collect();
    Ok(GridFunction::new(lo as f64 * h, h, values))
}

/// Compares the torus coefficients of the periodization `f^P` (trapezoid rule on
/// `n = 1/step` nodes) with the line transform of the interpolant of `f`, over `s_set`.
/// The grid of `f` must lie on the torus grid and span at most one period.
pub fn lift_check(f: &GridFunction, s_set: &[i64]) -> Result<LiftReport> {
    let n_f = 1.0 / f.step;
    let n = n_f.round() as usize;
    if (n_f - n as f64).abs() > 1e-9 * n_f {
        return Err(Error::InvalidInput(format!("step {} is not 1/N for an integer N", f.step)));
    }
    let offset = f.start * n as f64;
    if (offset - offset.round()).abs() > 1e-6 {
        return Err(Error::InvalidInput("grid nodes are not on the torus grid".into()));
    }
    if f.len() > n + 1 {
        return Err(Error::InvalidInput(format!("support spans {} nodes, more than one period of {n}", f.len())));
    }
    let s_max = s_set.iter().map(|s| s.unsigned_abs()).max().unwrap_or(0) as usize;
    if n < 8 * s_max.max(1) {
        return Err(Error::ResolutionTooCoarse {
            required: 8 * s_max,
            got: n,
        });
    }
    let first = offset.round() as i64;
    let mut torus = vec![0.0; n];
    for (j, &v) in f.values.iter().enumerate() {
        torus[(first + j as i64).rem_euclid(n as i64) as usize] += v;
    }
    let h = f.step;
    let mass = f.trapezoid_mass();
    let d: Vec<(i64, f64)> = s_set
        .par_iter()
        .map(|&s| {
            // trapezoid on the torus of f^P(x) e(sx)
            let t = phased_sum(&torus, 0.0, h, -(s as f64)) * h;
            // the interpolant's transform: hat functions on the unwrapped nodes
            let mut acc = ComplexSum::new();
            for (j, &v) in f.values.iter().enumerate() {
                acc.add(e(s as f64 * f.node(j)) * v);
            }
            let line = acc.value() * (h * sinc(s as f64 * h).powi(2));
            (s, (t - line).norm())
        })
        .collect();
    let (worst_s, max_discrepancy) = d
        .iter()
        .copied()
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Ok(LiftReport {
        n,
        max_discrepancy,
        worst_s,
        mass,
    })
}

/// `w(x) = φ(x − 1/2)`, supported in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Window {
    pub bump: BumpSpec,
}

impl Window {
    pub fn new(bump: BumpSpec) -> Self {
        Self { bump }
    }

    /// `ŵ(ξ) = e(ξ/2) φ̂(ξ)`.
    pub fn transform(&self, xi: f64) -> Complex64 {
        e(xi / 2.0) * self.bump.transform(xi)
    }

    /// Smallest integer `R` with `sup·Σ_{|ξ−s| > R} |ŵ(ξ − s)| ≤ tol`.
    pub fn radius_for(&self, sup: f64, tol: f64) -> Option<f64> {
        let mut r = 1.0;
        while sup * self.bump.envelope_tail_sum(r) > tol {
            r *= 1.25;
            if r > self.bump.faithful_limit() {
                return None;
            }
        }
        Some(r.ceil())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSample {
    pub xi: f64,
    pub value: Complex64,
    /// The part with `|s − ξ| ≤ |ξ|/2`.
    pub s1: Complex64,
    pub s2: Complex64,
    /// Bound on `|S₂|` from the decay of `ŵ`.
    pub s2_bound: f64,
    /// Truncation plus tail-descriptor contributions.
    pub error: f64,
}

/// `Σ_s ŵ(ξ − s) μ̂(s)` at each `ξ`, truncated to `|ξ − s| ≤ R` with `R` chosen so
/// the rest is below `tol`.
pub fn window_transform(mu: &SpectralVector, w: &Window, xis: &[f64], tol: f64) -> Result<Vec<WindowSample>> {
    let sup = mu
        .iter()
        .map(|(_, v)| v.norm())
        .fold(mu.tail.amplitude, f64::max);
    let r = w.radius_for(sup, tol).ok_or_else(|| Error::CertificationFailed {
        xi: 0.0,
        reason: format!("window decay cannot reach {tol:e} inside its faithful range"),
    })?;
    let truncation = sup * w.bump.envelope_tail_sum(r);
    xis.par_iter()
        .map(|&xi| {
            let lo = (xi - r).ceil() as i64;
            let hi = (xi + r).floor() as i64;
            let (mut s1, mut s2) = (ComplexSum::new(), ComplexSum::new());
            let mut error = truncation;
            let half = xi.abs() / 2.0;
            for s in lo..=hi {
                let u = xi - s as f64;
                match mu.lookup(s) {
                    Lookup::Stored(v) => {
                        let t = w.transform(u) * v;
                        if u.abs() <= half {
                            s1.add(t);
                        } else {
                            s2.add(t);
                        }
                    }
                    Lookup::Tail(b) => error += b * w.bump.envelope(u),
                    Lookup::Unknown => {
                        return Err(Error::CertificationFailed {
                            xi,
                            reason: format!("coefficient at s = {s} is neither stored nor covered by the tail"),
                        })
                    }
                }
            }
            let (s1, s2) = (s1.value(), s2.value());
            Ok(WindowSample {
                xi,
                value: s1 + s2,
                s1,
                s2,
                s2_bound: sup * w.bump.envelope_tail_sum(half),
                error,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealDecay {
    /// Fitted `p` in `|v(ξ)| ≈ C (1 + |ξ|)^p`.
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub fitted_constant: f64,
    pub residual_rms: f64,
    /// `sup |v(ξ)| (1 + |ξ|)^{decay}`.
    pub c2: f64,
    pub decay: f64,
    pub decades: f64,
    /// The fitted exponent is worse than `−decay` by more than 0.05.
    pub flagged: bool,
}

/// Fits the decay of windowed values against `(1 + |ξ|)^{−decay}`; for the product
/// measures `decay = δ − ε`.
pub fn verify_real_decay(samples: &[(f64, f64)], decay: f64) -> Result<RealDecay> {
    let pts: Vec<(f64, f64)> = samples.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: pts.len(),
        });
    }
    let xs: Vec<f64> = pts.iter().map(|(x, _)| (1.0 + x.abs()).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or(Error::TooFewPoints {
        needed: 3,
        have: pts.len(),
    })?;
    let c2 = pts
        .iter()
        .map(|&(x, v)| v * (1.0 + x.abs()).powf(decay))
        .fold(0.0, f64::max);
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(RealDecay {
        exponent: fit.slope,
        exponent_stderr: fit.slope_stderr,
        fitted_constant: fit.intercept.exp(),
        residual_rms: fit.residual_rms,
        c2,
        decay,
        decades: (hi - lo) / std::f64::consts::LN_10,
        flagged: fit.slope > -decay + 0.05,
    })
}
