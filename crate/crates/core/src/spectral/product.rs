//! The finite products `μ^(k) = Π_{j ≤ k} f_{M_j}` in coefficient space, and the
//! bounds every level is expected to satisfy.

use num_complex::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    convolve, Coefficients, ConvolveOptions, LayerCoefficients, Mode, ScaleSchedule,
    SpectralVector, TailDescriptor,
};
use crate::error::{Error, Result};
use crate::layer::ScaleLayer;
use crate::numeric::log_space_int;
use crate::params::ExponentSet;

#[derive(Debug, Clone)]
pub struct MeasureOptions {
    /// Stored densely up to this `|s|`.
    pub dense_window: i64,
    /// Largest `|s|` of the log-spaced samples; `None` means `min(10⁷, M_k^{τ₂(1+ε)})`.
    pub window: Option<f64>,
    pub log_samples: usize,
    /// Samples past `M_k^{τ₂(1+ε)}`, up to `tail_extent` times it.
    pub tail_samples: usize,
    pub tail_extent: f64,
    /// Further points that must be evaluated exactly.
    pub probes: Vec<i64>,
    pub tol: f64,
    pub budget: u64,
    pub mode: Mode,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            dense_window: 100_000,
            window: None,
            log_samples: 2000,
            tail_samples: 200,
            tail_extent: 64.0,
            probes: Vec::new(),
            tol: 1e-12,
            budget: 1 << 26,
            mode: Mode::Desk,
        }
    }
}

/// `M^{τ₂(1+ε)}`
fn knee(m: u64, e: &ExponentSet) -> f64 {
    (m as f64).powf(e.tau2 * (1.0 + e.epsilon))
}

fn descriptor(m: u64, e: &ExponentSet) -> TailDescriptor {
    TailDescriptor {
        amplitude: 1.0,
        scale: 4.0 * (m as f64).powf(e.tau2),
    }
}

/// Output points of level `k` beyond the dense window.
fn sample_points(k_scale: u64, e: &ExponentSet, opts: &MeasureOptions) -> (i64, Vec<i64>) {
    let top = knee(k_scale, e);
    let w = opts.window.unwrap_or_else(|| top.min(1e7)).max(1.0);
    let dense = opts.dense_window.min(w.ceil() as i64);
    let mut pts = Vec::new();
    if (dense as f64) < w && opts.log_samples > 0 {
        pts.extend(log_space_int(dense + 1, w.ceil() as i64, opts.log_samples));
    }
    if opts.tail_samples > 0 {
        let lo = top.max(w).ceil() as i64 + 1;
        let hi = (top * opts.tail_extent).min(4e18) as i64;
        if hi > lo {
            pts.extend(log_space_int(lo, hi, opts.tail_samples));
        }
    }
    pts.extend(opts.probes.iter().map(|s| s.abs()).filter(|&s| s > dense));
    pts.sort_unstable();
    pts.dedup();
    (dense, pts)
}

/// `μ̂^(1), …, μ̂^(k)` with `k = layers.len()`, each with its bound report.
pub fn product_measure(
    schedule: &ScaleSchedule,
    layers: &[Arc<ScaleLayer>],
    exps: &ExponentSet,
    opts: &MeasureOptions,
) -> Result<Vec<(SpectralVector, BoundReport)>> {
    if layers.is_empty() || layers.len() > schedule.depth() {
        return Err(Error::InvalidInput(format!(
            "need 1..={} layers, got {}",
            schedule.depth(),
            layers.len()
        )));
    }
    for (l, &m) in layers.iter().zip(&schedule.scales) {
        if l.m != m {
            return Err(Error::InvalidInput(format!("layer at M = {} where the schedule has {m}", l.m)));
        }
    }
    let mut out: Vec<(SpectralVector, BoundReport)> = Vec::new();
    for (k, layer) in layers.iter().enumerate() {
        let m = layer.m;
        let (dense, pts) = sample_points(m, exps, opts);
        let label = format!("mu^({})", k + 1);
        let v = if k == 0 {
            let f = LayerCoefficients::new(layer.clone(), dense as f64);
            let mut v = SpectralVector::from_fn(
                dense,
                |s| f.coeff(s).expect("layers are total"),
                descriptor(m, exps),
                knee(m, exps),
                label,
            )?;
            let samples: BTreeMap<i64, Complex64> = pts
                .iter()
                .flat_map(|&s| {
                    let c = f.coeff(s).expect("layers are total");
                    [(s, c), (-s, c.conj())]
                })
                .collect();
            v = v.with_samples(samples);
            v.hermitian = true;
            v
        } else {
            let copts = ConvolveOptions {
                window: dense,
                samples: pts,
                tol: opts.tol,
                budget: opts.budget,
                tail: descriptor(m, exps),
                tail_from: knee(m, exps),
                label,
            };
            if k == 1 {
                let g = LayerCoefficients::new(layers[0].clone(), 0.0);
                let u = g.cut_for(opts.tol, opts.budget as f64).unwrap_or(0.0);
                let g = LayerCoefficients::new(layers[0].clone(), u);
                let f = LayerCoefficients::new(layer.clone(), dense as f64 + u);
                convolve(&f, &g, &copts)?
            } else {
                let f = LayerCoefficients::new(layer.clone(), dense as f64);
                convolve(&f, &out[k - 1].0, &copts)?
            }
        };
        let faithful_to = layers[..=k].iter().map(|l| l.faithful_s_limit()).fold(f64::INFINITY, f64::min);
        let report = check_inductive_bounds(&v, k + 1, schedule, exps, opts.mode, faithful_to);
        out.push((v, report));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandCheck {
    pub band: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `max |μ̂(s)| / bound(s)` over the band.
    pub max_ratio: f64,
    pub worst_s: i64,
    pub value_at_worst: f64,
    pub bound_at_worst: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub s: i64,
    pub band: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub mode: Mode,
    pub mass: f64,
    pub mass_interval: (f64, f64),
    pub mass_ok: bool,
    /// `Σ_j M_j^{-δ} < 1/100` over the whole schedule.
    pub mass_condition: bool,
    pub bands: Vec<BandCheck>,
    pub tail: Option<BandCheck>,
    pub hermitian_ok: bool,
    /// Largest stored `|s|` and the `M_k^{τ₂(1+ε)}` the bounds are stated up to.
    pub reach: i64,
    pub required_reach: f64,
    pub restricted: bool,
    /// Coefficients with `|s|` past this are counted in `beyond_faithful` only.
    pub faithful_to: f64,
    pub beyond_faithful: usize,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// Checks the level-`k` estimates on every stored coefficient with `|s|` up to
/// `faithful_to`; past it the truncated bump no longer represents the layers and
/// those coefficients are only counted. In paper-strict mode the mass condition on
/// the schedule is part of `pass`.
pub fn check_inductive_bounds(
    mu: &SpectralVector,
    k: usize,
    schedule: &ScaleSchedule,
    exps: &ExponentSet,
    mode: Mode,
    faithful_to: f64,
) -> BoundReport {
    let d = exps.delta;
    let k = k.clamp(1, schedule.depth());
    let scales = &schedule.scales[..k];
    let mass_sum = schedule.mass_sum(k, d);
    let slack = mu.error_bound;
    let mass = mu.get(0).map_or(f64::NAN, |v| v.re);
    let mass_interval = (1.0 - mass_sum, 1.0 + mass_sum);
    let mass_ok = mass > mass_interval.0 - slack && mass < mass_interval.1 + slack;

    // Band J covers (M_{J-1}^{τ₂(1+ε)}, M_J^{τ₂(1+ε)}] with M_0 = 0.
    let edges: Vec<f64> = std::iter::once(0.0)
        .chain(scales.iter().map(|&m| knee(m, exps)))
        .collect();
    let mut bands: Vec<BandCheck> = (1..=k)
        .map(|j| BandCheck {
            band: format!("J={j}"),
            lo: edges[j - 1],
            hi: edges[j],
            count: 0,
            max_ratio: 0.0,
            worst_s: 0,
            value_at_worst: 0.0,
            bound_at_worst: 0.0,
            pass: true,
        })
        .collect();
    let mut tail = BandCheck {
        band: "tail".into(),
        lo: edges[k],
        hi: f64::INFINITY,
        count: 0,
        max_ratio: 0.0,
        worst_s: 0,
        value_at_worst: 0.0,
        bound_at_worst: 0.0,
        pass: true,
    };
    let mut violations = Vec::new();
    let mut hermitian_ok = true;
    let mut beyond_faithful = 0;

    for (s, v) in mu.iter() {
        if let Some(w) = mu.get(-s) {
            if (w - v.conj()).norm() > 1e-13 * v.norm().max(1e-300) && (w - v.conj()).norm() > 1e-300 {
                hermitian_ok = false;
                violations.push(Violation {
                    s,
                    band: "hermitian".into(),
                    value: v.norm(),
                    bound: w.norm(),
                });
            }
        }
        if s == 0 {
            continue;
        }
        if s.unsigned_abs() as f64 > faithful_to {
            beyond_faithful += 1;
            continue;
        }
        let (band, bound) = inductive_bound(s, k, schedule, exps);
        let b = match band {
            Band::Medium(j) => &mut bands[j - 1],
            _ => &mut tail,
        };
        record(b, &mut violations, slack, s, v.norm(), bound);
    }
    let reach = mu.reach();
    let required_reach = edges[k];
    let mass_condition = schedule.mass_condition(d);
    let mut pass = mass_ok && hermitian_ok && bands.iter().all(|b| b.pass) && tail.pass;
    if mode == Mode::PaperStrict {
        pass &= mass_condition;
    }
    BoundReport {
        k,
        mode,
        mass,
        mass_interval,
        mass_ok,
        mass_condition,
        bands,
        tail: (tail.count > 0).then_some(tail),
        hermitian_ok,
        reach,
        required_reach,
        restricted: (reach as f64) < required_reach,
        faithful_to,
        beyond_faithful,
        violations,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Band {
    Mass,
    /// `(M_{J−1}^{τ₂(1+ε)}, M_J^{τ₂(1+ε)}]`
    Medium(usize),
    Tail,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Band::Mass => write!(f, "mass"),
            Band::Medium(j) => write!(f, "J={j}"),
            Band::Tail => write!(f, "tail"),
        }
    }
}

/// The band of `s` at level `k` and the bound `|μ̂^(k)(s)|` is held to there: the
/// upper end of the mass interval, `min(|s|^{−δ+ε} + Σ_{j ≥ J} M_j^{−δ}, 2|s|^{−δ+ε})`
/// on band `J`, and `exp(−√(|s|/M_k^{τ₂})/2)` beyond.
pub fn inductive_bound(s: i64, k: usize, schedule: &ScaleSchedule, exps: &ExponentSet) -> (Band, f64) {
    let (d, eps) = (exps.delta, exps.epsilon);
    let k = k.clamp(1, schedule.depth());
    if s == 0 {
        return (Band::Mass, 1.0 + schedule.mass_sum(k, d));
    }
    let a = s.unsigned_abs() as f64;
    let scales = &schedule.scales[..k];
    match scales.iter().position(|&m| a <= knee(m, exps)) {
        Some(i) => {
            let lead = a.powf(-d + eps);
            let bound = (lead + schedule.mass_sum(k, d) - schedule.mass_sum(i, d)).min(2.0 * lead);
            (Band::Medium(i + 1), bound)
        }
        None => {
            let t = (scales[k - 1] as f64).powf(exps.tau2);
            (Band::Tail, (-0.5 * (a / t).sqrt()).exp())
        }
    }
}

/// Below this both sides are rounding residue of products of tiny factors.
const UNDERFLOW: f64 = 1e-280;

fn record(b: &mut BandCheck, out: &mut Vec<Violation>, slack: f64, s: i64, value: f64, bound: f64) {
    b.count += 1;
    if value < UNDERFLOW && bound < UNDERFLOW {
        return;
    }
    let ratio = value / bound;
    if b.count == 1 || ratio > b.max_ratio {
        b.max_ratio = ratio;
        b.worst_s = s;
        b.value_at_worst = value;
        b.bound_at_worst = bound;
    }
    if value > bound + slack {
        b.pass = false;
        out.push(Violation {
            s,
            band: b.band.clone(),
            value,
            bound,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::default_bump;
    use crate::diophantine::ThetaSpec;
    use crate::layer::{verify_regimes, LayerParams, RegimeSampler};
    use crate::params::{derive_exponents, ApproxFunction};

    fn desk() -> (ExponentSet, ScaleSchedule, Vec<Arc<ScaleLayer>>) {
        let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
        let sched = ScaleSchedule::new(16, e.beta_eps, 2).unwrap();
        let p1 = ApproxFunction::power(e.tau1).unwrap();
        let p2 = ApproxFunction::power(e.tau2).unwrap();
        let params = LayerParams {
            psi1: p1,
            psi2: p2,
            epsilon: e.epsilon,
            theta: ThetaSpec::Zero,
            bump: Arc::new(default_bump()),
        };
        let layers = sched
            .scales
            .iter()
            .map(|&m| Arc::new(ScaleLayer::new(m, &params).unwrap()))
            .collect();
        (e, sched, layers)
    }

    #[test]
    fn level_one_is_the_layer() {
        let (e, sched, layers) = desk();
        let opts = MeasureOptions {
            dense_window: 2000,
            ..Default::default()
        };
        let out = product_measure(&sched, &layers[..1], &e, &opts).unwrap();
        let (v, r) = &out[0];
        assert_eq!(v.get(0), Some(Complex64::new(1.0, 0.0)));
        for s in 1..16 {
            assert_eq!(v.get(s), Some(Complex64::new(0.0, 0.0)));
        }
        assert_eq!(v.get(17 * 19), Some(layers[0].f_hat(17 * 19)));
        assert!(r.pass, "{r:?}");
        let regimes = verify_regimes(&layers[0], &RegimeSampler::default());
        assert!(regimes.zero.exact && r.bands[0].pass);
    }

    #[test]
    fn fault_injection_is_flagged_at_its_s() {
        let (e, sched, layers) = desk();
        let opts = MeasureOptions {
            dense_window: 2000,
            log_samples: 0,
            tail_samples: 0,
            ..Default::default()
        };
        let (mut v, _) = product_measure(&sched, &layers[..1], &e, &opts).unwrap().remove(0);
        let s = 17 * 3;
        let x = v.get(s).unwrap();
        v.set(s, -2.0 * x);
        let r = check_inductive_bounds(&v, 1, &sched, &e, Mode::Desk, f64::INFINITY);
        assert!(!r.pass && !r.hermitian_ok);
        assert!(r.violations.iter().any(|w| w.s == s || w.s == -s));
        // a value pushed over its band bound is named as well
        v.set(s, Complex64::new(5.0, 0.0));
        v.set(-s, Complex64::new(5.0, 0.0));
        let r = check_inductive_bounds(&v, 1, &sched, &e, Mode::Desk, f64::INFINITY);
        assert!(r.violations.iter().any(|w| w.s == s && w.band == "J=1"));
    }

    #[test]
    fn paper_strict_needs_the_mass_condition() {
        let (e, sched, layers) = desk();
        let opts = MeasureOptions {
            dense_window: 500,
            log_samples: 0,
            tail_samples: 0,
            mode: Mode::PaperStrict,
            ..Default::default()
        };
        let out = product_measure(&sched, &layers[..1], &e, &opts).unwrap();
        assert!(!out[0].1.mass_condition && !out[0].1.pass);
    }
}
