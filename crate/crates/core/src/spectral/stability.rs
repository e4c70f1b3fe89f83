//! Numerical check of the convolution stability estimate: `F` is a new layer at
//! scale `M'`, `G` the product so far at scale `M_j`, and `F * G` must stay close to
//! `G` on the small band while inheriting decay on the medium and large bands.
//!
//! Two inputs are supported. Synthetic envelopes put `F` and `G` exactly on their
//! hypothesis bounds with all phases aligned; sums over `t` then run over up to
//! `10¹⁸` terms and are done piecewise, with Euler–Maclaurin on the long smooth
//! stretches. Real inputs are layers, convolved with [`convolve`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{convolve, Coefficients, ConvolveOptions, Mode, TailDescriptor};
use crate::error::{Error, Result};
use crate::numeric::{integrate, log_space_int, Neumaier};
use crate::params::ExponentSet;

/// A radial piecewise envelope on the integers:
/// `at_zero` at `0`, zero on `1 ≤ |t| < gap`, `medium_amp·|t|^medium_exp` up to
/// `medium_to` (inclusive), and `exp(−tail_coef·√(|t|/tail_scale))` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub at_zero: f64,
    pub gap: f64,
    pub medium_amp: f64,
    pub medium_exp: f64,
    pub medium_to: f64,
    pub tail_coef: f64,
    pub tail_scale: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Piece {
    Zero,
    Gap,
    Medium,
    Tail,
}

impl Envelope {
    /// Largest integer of the gap and of the medium band.
    fn gap_last(&self) -> i64 {
        self.gap.ceil() as i64 - 1
    }

    fn medium_last(&self) -> i64 {
        self.medium_to.floor() as i64
    }

    fn piece(&self, x: f64) -> Piece {
        let a = x.abs();
        if a < 0.5 {
            Piece::Zero
        } else if a < self.gap_last() as f64 + 0.5 {
            Piece::Gap
        } else if a < self.medium_last() as f64 + 0.5 {
            Piece::Medium
        } else {
            Piece::Tail
        }
    }

    fn eval(&self, piece: Piece, x: f64) -> f64 {
        match piece {
            Piece::Zero => self.at_zero,
            Piece::Gap => 0.0,
            Piece::Medium => self.medium_amp * x.abs().powf(self.medium_exp),
            Piece::Tail => (-self.tail_coef * (x.abs() / self.tail_scale).sqrt()).exp(),
        }
    }

    pub fn value(&self, t: i64) -> f64 {
        let x = t as f64;
        self.eval(self.piece(x), x)
    }

    /// Integer points where a new piece starts.
    fn cuts(&self) -> [i64; 6] {
        let (g, m) = (self.gap_last(), self.medium_last());
        [-m, -g, 0, 1, g + 1, m + 1]
    }
}

/// The hypothesis envelopes at one step of the schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticEnvelopes {
    pub m_j: u64,
    pub m_next: u64,
    pub tau2: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// The medium-band constant of `F`.
    pub c_eps: f64,
    /// `G(0)`.
    pub g_at_zero: f64,
}

impl SyntheticEnvelopes {
    pub fn new(m_j: u64, exps: &ExponentSet) -> Self {
        Self {
            m_j,
            m_next: (m_j as f64).powf(exps.beta_eps).ceil() as u64,
            tau2: exps.tau2,
            epsilon: exps.epsilon,
            delta: exps.delta,
            c_eps: 1.0,
            g_at_zero: 2.0,
        }
    }

    pub fn f(&self) -> Envelope {
        let (m, t, e) = (self.m_next as f64, self.tau2, self.epsilon);
        Envelope {
            at_zero: 1.0,
            gap: m,
            medium_amp: self.c_eps * m.powf(-1.0 + e),
            medium_exp: 0.0,
            medium_to: m.powf(t * (1.0 + e / 2.0)),
            tail_coef: 1.0,
            tail_scale: m.powf(t),
        }
    }

    pub fn g(&self) -> Envelope {
        let (m, t, e) = (self.m_j as f64, self.tau2, self.epsilon);
        Envelope {
            at_zero: self.g_at_zero,
            gap: 1.0,
            medium_amp: 2.0,
            medium_exp: -self.delta + e,
            medium_to: m.powf(t * (1.0 + e)),
            tail_coef: 0.5,
            tail_scale: m.powf(t),
        }
    }
}

const DIRECT: i64 = 1000;

/// `Σ_{t ∈ [a, b]} h(t)` for `h` smooth on `[a, b]`; `h` takes the offset from `a`.
fn piece_sum(h: &dyn Fn(f64) -> f64, len: i64) -> f64 {
    let mut acc = Neumaier::new();
    if len <= 4 * DIRECT {
        for y in 0..len {
            acc.add(h(y as f64));
        }
        return acc.value();
    }
    for y in 0..DIRECT {
        acc.add(h(y as f64));
        acc.add(h((len - 1 - y) as f64));
    }
    // Euler–Maclaurin on the middle stretch [A, B].
    let (a, b) = (DIRECT as f64, (len - 1 - DIRECT) as f64);
    let d = |x: f64| (h(x + 1.0) - h(x - 1.0)) / 2.0;
    acc.add(0.5 * (h(a) + h(b)));
    acc.add((d(b) - d(a)) / 12.0);
    // integral, split geometrically from both ends
    let mid = 0.5 * (a + b);
    let mut edges = vec![a];
    let mut w = DIRECT as f64;
    while a + w < mid {
        edges.push(a + w);
        w *= 2.0;
    }
    let mut right = vec![b];
    let mut w = DIRECT as f64;
    while b - w > mid {
        right.push(b - w);
        w *= 2.0;
    }
    edges.push(mid);
    edges.extend(right.into_iter().rev());
    // a coarse pass sets the absolute tolerance, so negligible stretches are not
    // refined to full relative accuracy
    let coarse: f64 = edges
        .windows(2)
        .map(|p| integrate(&|x| h(x), p[0], p[1], 1.0, f64::INFINITY).abs())
        .sum();
    let abs = 1e-13 * (coarse + acc.value().abs()) / edges.len() as f64;
    for pair in edges.windows(2) {
        if pair[1] > pair[0] {
            acc.add(integrate(&|x| h(x), pair[0], pair[1], 1e-11, abs));
        }
    }
    acc.value()
}

/// `Σ_t F(t) G(s − t)` over all integers, leaving out `t = 0` when `skip_zero`.
fn envelope_convolution(f: &Envelope, g: &Envelope, s: i64, skip_zero: bool) -> f64 {
    let mut cuts: Vec<i64> = f.cuts().to_vec();
    // G(s − t) changes piece where |s − t| crosses its cut points
    for c in g.cuts() {
        cuts.push(s - c + 1);
    }
    cuts.sort_unstable();
    cuts.dedup();

    let term = |t: i64| f.value(t) * g.value(s - t);
    let smooth = |start: i64, len: i64| -> f64 {
        let (fp, gp) = (f.piece(start as f64), g.piece((s - start) as f64));
        if fp == Piece::Gap || gp == Piece::Gap {
            return 0.0;
        }
        if len <= 2 {
            return (0..len).map(|k| term(start + k)).sum();
        }
        let (t0, u0) = (start as f64, (s - start) as f64);
        let h = move |y: f64| f.eval(fp, t0 + y) * g.eval(gp, u0 - y);
        piece_sum(&h, len)
    };

    let mut acc = Neumaier::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1] - 1);
        if b < a {
            continue;
        }
        if skip_zero && a == 0 && b == 0 {
            continue;
        }
        acc.add(smooth(a, b - a + 1));
    }
    // the two unbounded stretches, in doubling blocks until they stop mattering
    for dir in [1i64, -1] {
        let mut start = if dir > 0 { *cuts.last().unwrap() } else { cuts[0] - 1 };
        let mut len = 1024i64;
        loop {
            let lo = if dir > 0 { start } else { start - len + 1 };
            let part = smooth(lo, len);
            acc.add(part);
            let edge = term(if dir > 0 { start + len } else { start - len });
            if edge == 0.0 || (part.abs() < 1e-18 * acc.value().abs() && edge < 1e-18 * acc.value().abs()) {
                break;
            }
            start += dir * len;
            if start.unsigned_abs() > 1 << 61 {
                break;
            }
            len = len.saturating_mul(2).min(1 << 60);
        }
    }
    acc.value()
}

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub mode: Mode,
    /// Samples on the small band `[0, M_j^{τ₂(1+ε)}]`.
    pub small_samples: usize,
    pub medium_samples: usize,
    pub tail_samples: usize,
    /// The large band is sampled up to `M'^{τ₂}·tail_reach²`.
    pub tail_reach: f64,
    /// The medium constant of `F` assumed in paper-strict mode.
    pub c_eps: f64,
    pub tol: f64,
    pub budget: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Desk,
            small_samples: 200,
            medium_samples: 200,
            tail_samples: 60,
            tail_reach: 100.0,
            c_eps: 1.0,
            tol: 1e-13,
            budget: 1 << 26,
        }
    }
}

/// One of the three conclusions, measured over its band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartCheck {
    pub part: char,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    /// Largest measured quantity (`|F*G − G|` for part a, `|F*G|` otherwise).
    pub sup: f64,
    /// Largest ratio of the measured quantity to its bound; below 1 passes.
    pub ratio: f64,
    /// `1 / ratio`.
    pub margin: f64,
    pub argmax: i64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub display: String,
    pub pass: bool,
    pub worst_s: i64,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub label: String,
    pub mode: Mode,
    pub m_j: u64,
    pub m_next: u64,
    pub hypotheses: Vec<HypothesisCheck>,
    /// `sup |F(t)|·M'^{1−ε}` over the medium band of `F`, when `F` is measured.
    pub c_eps_measured: Option<f64>,
    pub parts: Vec<PartCheck>,
    pub truncation_error: f64,
    pub pass: bool,
}

struct Bands {
    small: f64,
    medium: f64,
    tail_scale_next: f64,
}

fn bands(m_j: u64, m_next: u64, tau2: f64, eps: f64) -> Bands {
    Bands {
        small: (m_j as f64).powf(tau2 * (1.0 + eps)),
        medium: (m_next as f64).powf(tau2 * (1.0 + eps)),
        tail_scale_next: (m_next as f64).powf(tau2),
    }
}

fn sample_band(lo: f64, hi: f64, count: usize) -> Vec<i64> {
    let (lo, hi) = (lo.floor() as i64 + 1, hi.min(4e18).floor() as i64);
    if hi < lo || count == 0 {
        return Vec::new();
    }
    log_space_int(lo, hi, count)
}

fn part(name: char, lo: f64, hi: f64, pts: &[(i64, f64, f64)]) -> PartCheck {
    let mut out = PartCheck {
        part: name,
        lo,
        hi,
        samples: pts.len(),
        sup: 0.0,
        ratio: 0.0,
        margin: f64::INFINITY,
        argmax: 0,
        pass: true,
    };
    for &(s, value, bound) in pts {
        out.sup = out.sup.max(value);
        let r = value / bound;
        if r > out.ratio {
            out.ratio = r;
            out.argmax = s;
        }
    }
    out.margin = 1.0 / out.ratio;
    out.pass = out.ratio <= 1.0;
    out
}

/// The stability check with `F` and `G` exactly on their envelopes.
pub fn synthetic_stability(env: &SyntheticEnvelopes, opts: &StabilityOptions) -> Result<StabilityReport> {
    let (f, g) = (env.f(), env.g());
    let b = bands(env.m_j, env.m_next, env.tau2, env.epsilon);
    let small: Vec<i64> = {
        let mut v = vec![0];
        v.extend(sample_band(0.0, b.small, opts.small_samples));
        v.dedup();
        v
    };
    let medium = sample_band(b.small, b.medium, opts.medium_samples);
    let large = sample_band(b.medium, b.tail_scale_next * opts.tail_reach.powi(2), opts.tail_samples);
    let bound_a = (env.m_next as f64).powf(-env.delta);
    let (d, e) = (env.delta, env.epsilon);

    let a: Vec<(i64, f64, f64)> = small
        .par_iter()
        .map(|&s| (s, envelope_convolution(&f, &g, s, true), bound_a))
        .collect();
    let bm: Vec<(i64, f64, f64)> = medium
        .par_iter()
        .map(|&s| (s, envelope_convolution(&f, &g, s, false), (s as f64).powf(-d + e)))
        .collect();
    let c: Vec<(i64, f64, f64)> = large
        .par_iter()
        .map(|&s| {
            let bound = (-0.5 * (s as f64 / b.tail_scale_next).sqrt()).exp();
            (s, envelope_convolution(&f, &g, s, false), bound)
        })
        .collect();
    let parts = vec![
        part('a', 0.0, b.small, &a),
        part('b', b.small, b.medium, &bm),
        part('c', b.medium, b.tail_scale_next * opts.tail_reach.powi(2), &c),
    ];
    let pass = parts.iter().all(|p| p.pass);
    Ok(StabilityReport {
        label: "synthetic".into(),
        mode: opts.mode,
        m_j: env.m_j,
        m_next: env.m_next,
        hypotheses: Vec::new(),
        c_eps_measured: None,
        parts,
        truncation_error: 0.0,
        pass,
    })
}

fn hypothesis(display: &str, pts: impl Iterator<Item = (i64, f64, f64)>) -> HypothesisCheck {
    let mut out = HypothesisCheck {
        display: display.into(),
        pass: true,
        worst_s: 0,
        worst_ratio: 0.0,
    };
    for (s, value, bound) in pts {
        let r = if bound > 0.0 {
            value / bound
        } else if value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if r > out.worst_ratio {
            out.worst_ratio = r;
            out.worst_s = s;
        }
    }
    out.pass = out.worst_ratio <= 1.0;
    out
}

fn abs_at(c: &dyn Coefficients, s: i64) -> Result<f64> {
    c.coeff(s)
        .map(|v| v.norm())
        .ok_or_else(|| Error::InvalidInput(format!("coefficient at s = {s} is not available")))
}

/// The stability check for concrete `F` (scale `m_next`) and `G` (scale `m_j`).
/// Hypotheses are verified on samples first; in paper-strict mode a failed one is
/// an error.
pub fn check_stability(
    f: &dyn Coefficients,
    g: &dyn Coefficients,
    m_j: u64,
    m_next: u64,
    exps: &ExponentSet,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let (t2, e, d) = (exps.tau2, exps.epsilon, exps.delta);
    let b = bands(m_j, m_next, t2, e);
    let mn = m_next as f64;
    let f_knee = mn.powf(t2 * (1.0 + e / 2.0));
    let g_scale = (m_j as f64).powf(t2);
    let n = opts.medium_samples.max(50);

    let f_gap: Vec<i64> = sample_band(0.0, mn - 1.0, n);
    let f_med = sample_band(mn - 1.0, f_knee, n);
    let f_tail = sample_band(f_knee, f_knee * 16.0, n);
    let g_med = sample_band(0.0, b.small, n);
    let g_tail = sample_band(b.small, b.small * 16.0, n);
    let values = |c: &dyn Coefficients, pts: &[i64]| -> Result<Vec<(i64, f64)>> {
        pts.iter().map(|&s| Ok((s, abs_at(c, s)?))).collect()
    };
    let fm = values(f, &f_med)?;
    let c_meas = fm.iter().map(|&(_, v)| v).fold(0.0, f64::max) * mn.powf(1.0 - e);
    let c_eps = match opts.mode {
        Mode::Desk => c_meas.max(f64::MIN_POSITIVE),
        Mode::PaperStrict => opts.c_eps,
    };
    let f0 = f.at_zero();
    let g0 = g.at_zero().norm();
    let hyps = vec![
        hypothesis("F(0) = 1", std::iter::once((0, (f0 - 1.0).norm(), 0.0))),
        hypothesis(
            "F = 0 on 1 <= |t| < M'",
            values(f, &f_gap)?.into_iter().map(|(s, v)| (s, v, 0.0)),
        ),
        hypothesis(
            "|F| <= C M'^(-1+eps) on the medium band",
            fm.iter().map(|&(s, v)| (s, v, c_eps * mn.powf(-1.0 + e))),
        ),
        hypothesis(
            "|F| <= exp(-sqrt(t/M'^tau)) beyond",
            values(f, &f_tail)?
                .into_iter()
                .map(|(s, v)| (s, v, (-(s as f64 / mn.powf(t2)).sqrt()).exp())),
        ),
        hypothesis("G(0) <= 2", std::iter::once((0, g0, 2.0))),
        hypothesis(
            "|G(u)| <= 2|u|^(-delta+eps) on the small band",
            values(g, &g_med)?
                .into_iter()
                .map(|(s, v)| (s, v, 2.0 * (s as f64).powf(-d + e))),
        ),
        hypothesis(
            "|G(u)| <= exp(-sqrt(u/M_j^tau)/2) beyond",
            values(g, &g_tail)?
                .into_iter()
                .map(|(s, v)| (s, v, (-0.5 * (s as f64 / g_scale).sqrt()).exp())),
        ),
    ];
    if opts.mode == Mode::PaperStrict {
        if let Some(h) = hyps.iter().find(|h| !h.pass) {
            return Err(Error::HypothesisViolated {
                display: h.display.clone(),
                s: h.worst_s,
                detail: format!("ratio to the bound {:.3e}", h.worst_ratio),
            });
        }
    }

    let window = b.small.floor() as i64;
    let top = b.tail_scale_next * opts.tail_reach.powi(2);
    let mut samples = sample_band(b.small, b.medium, opts.medium_samples);
    samples.extend(sample_band(b.medium, top, opts.tail_samples));
    let fg = convolve(
        f,
        g,
        &ConvolveOptions {
            window,
            samples,
            tol: opts.tol,
            budget: opts.budget,
            tail: TailDescriptor {
                amplitude: 1.0,
                scale: 4.0 * b.tail_scale_next,
            },
            tail_from: b.medium,
            label: format!("F*G, M_j = {m_j}"),
        },
    )?;
    let bound_a = mn.powf(-d);
    let mut a = Vec::new();
    for s in 0..=window {
        let dev: Complex64 = fg.get(s).expect("dense") - g.coeff(s).expect("small band");
        a.push((s, dev.norm(), bound_a));
    }
    let (mut bm, mut c) = (Vec::new(), Vec::new());
    for (&s, v) in fg.samples.range(window + 1..) {
        let x = s as f64;
        if x <= b.medium {
            bm.push((s, v.norm(), x.powf(-d + e)));
        } else {
            c.push((s, v.norm(), (-0.5 * (x / b.tail_scale_next).sqrt()).exp()));
        }
    }
    let parts = vec![
        part('a', 0.0, b.small, &a),
        part('b', b.small, b.medium, &bm),
        part('c', b.medium, top, &c),
    ];
    let pass = hyps.iter().all(|h| h.pass) && parts.iter().all(|p| p.pass);
    Ok(StabilityReport {
        label: "real".into(),
        mode: opts.mode,
        m_j,
        m_next,
        hypotheses: hyps,
        c_eps_measured: Some(c_meas),
        parts,
        truncation_error: fg.error_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    fn brute(f: &Envelope, g: &Envelope, s: i64, range: i64, skip_zero: bool) -> f64 {
        let mut acc = Neumaier::new();
        for t in -range..=range {
            if skip_zero && t == 0 {
                continue;
            }
            acc.add(f.value(t) * g.value(s - t));
        }
        acc.value()
    }

    fn toy() -> (Envelope, Envelope) {
        let f = Envelope {
            at_zero: 1.0,
            gap: 50.0,
            medium_amp: 0.02,
            medium_exp: 0.0,
            medium_to: 9000.5,
            tail_coef: 1.0,
            tail_scale: 2500.0,
        };
        let g = Envelope {
            at_zero: 2.0,
            gap: 1.0,
            medium_amp: 2.0,
            medium_exp: -0.03,
            medium_to: 700.0,
            tail_coef: 0.5,
            tail_scale: 100.0,
        };
        (f, g)
    }

    #[test]
    fn envelope_pieces() {
        let (f, g) = toy();
        assert_eq!(f.value(0), 1.0);
        assert_eq!(f.value(49), 0.0);
        assert_eq!(f.value(-50), 0.02);
        assert_eq!(f.value(9000), 0.02);
        assert!((f.value(9001) - (-(9001f64 / 2500.0).sqrt()).exp()).abs() < 1e-15);
        assert_eq!(g.value(1), 2.0);
        assert!((g.value(-700) - 2.0 * 700f64.powf(-0.03)).abs() < 1e-15);
    }

    #[test]
    fn piecewise_sum_matches_brute_force() {
        let (f, g) = toy();
        // brute force to where both tails are below 1e-30
        for s in [0, 3, 49, 50, 699, 701, 5000, 9000, 9001, 20000, -777] {
            for skip in [false, true] {
                let fast = envelope_convolution(&f, &g, s, skip);
                let slow = brute(&f, &g, s, 3_000_000, skip);
                assert!((fast - slow).abs() <= 1e-9 * slow, "s={s} {fast} {slow}");
            }
        }
    }

    #[test]
    fn point_mass_g_has_infinite_margin_on_small_band() {
        let (f, mut g) = toy();
        g.at_zero = 1.0;
        g.medium_amp = 0.0;
        g.tail_coef = f64::INFINITY;
        for s in 0..49 {
            assert_eq!(envelope_convolution(&f, &g, s, true), 0.0);
        }
    }

    #[test]
    fn synthetic_report_has_three_parts() {
        let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
        let env = SyntheticEnvelopes::new(16, &e);
        assert_eq!(env.m_next, 1429);
        let opts = StabilityOptions {
            small_samples: 20,
            medium_samples: 20,
            tail_samples: 10,
            ..Default::default()
        };
        let r = synthetic_stability(&env, &opts).unwrap();
        assert_eq!(r.parts.len(), 3);
        assert!(r.parts.iter().all(|p| p.sup.is_finite() && p.samples > 0));
    }
}
