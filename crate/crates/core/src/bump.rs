//! A compactly supported nonnegative bump `φ`, realized as a convolution of
//! normalized indicators of widths `a_k = A k^{-4/3}`, whose transform is the
//! product of sincs and decays like `exp(-|ξ|^{3/4})` over a range that grows with
//! the depth.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numeric::{log_space, sinc};

#[derive(Debug, Clone, Serialize)]
pub struct BumpSpec {
    widths: Vec<f64>,
    #[serde(skip)]
    series: OnceLock<Vec<f64>>,
}

impl PartialEq for BumpSpec {
    fn eq(&self, other: &Self) -> bool {
        self.widths == other.widths
    }
}

impl BumpSpec {
    pub fn new(widths: Vec<f64>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::InvalidInput("bump needs at least one width".into()));
        }
        if widths.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput("bump widths must be positive".into()));
        }
        if widths.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("bump widths must be nonincreasing".into()));
        }
        let total: f64 = widths.iter().sum();
        if total > 1.0 {
            return Err(Error::InvalidInput(format!(
                "widths sum to {total} > 1, support leaves [-1/2, 1/2]"
            )));
        }
        Ok(Self {
            widths,
            series: OnceLock::new(),
        })
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn support_half_width(&self) -> f64 {
        0.5 * self.widths.iter().sum::<f64>()
    }

    /// `φ̂(ξ) = Π sinc(a_k ξ)`.
    #[inline]
    pub fn transform(&self, xi: f64) -> f64 {
        let mut v = 1.0;
        for &a in &self.widths {
            v *= sinc(a * xi);
        }
        v
    }

    /// `ln |φ̂(ξ)|`, finite even where the product underflows.
    pub fn ln_abs_transform(&self, xi: f64) -> f64 {
        self.widths.iter().map(|&a| sinc(a * xi).abs().ln()).sum()
    }

    /// `Π min(1, 1/(π a_k |ξ|))`, a bound on `|φ̂(ξ)|` that is nonincreasing in `|ξ|`.
    pub fn envelope(&self, xi: f64) -> f64 {
        self.ln_envelope(xi).exp()
    }

    pub fn ln_envelope(&self, xi: f64) -> f64 {
        let x = PI * xi.abs();
        self.widths
            .iter()
            .map(|&a| {
                let t = a * x;
                if t > 1.0 {
                    -t.ln()
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Bound on `Σ |φ̂(u_n)|` over any set of reals `u_n` with `|u_n| > r` and
    /// pairwise gaps at least 1 on each side of the origin.
    pub fn envelope_tail_sum(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        // The envelope is nonincreasing, so each point is dominated by the integral
        // over the unit interval to its left.
        let knee = 1.0 / (PI * self.widths[self.widths.len() - 1]);
        let k = self.widths.len() as f64;
        let mut total = 0.0;
        let mut x = r;
        // Below the knee, sum unit steps explicitly.
        while x < knee {
            let v = self.envelope(x);
            total += v;
            if v < 1e-300 {
                return 2.0 * total;
            }
            x += 1.0;
        }
        // Beyond it every factor is active: envelope(y) = envelope(x) (x/y)^K.
        let ex = self.envelope(x);
        if k > 1.0 {
            total += ex * (1.0 + x / (k - 1.0));
        } else {
            total = f64::INFINITY;
        }
        2.0 * total
    }

    /// `1/(π a_K)`: past this point all sinc factors are in their algebraic tail and
    /// the truncated product no longer tracks `exp(-|ξ|^{3/4})`.
    pub fn faithful_limit(&self) -> f64 {
        1.0 / (PI * self.widths[self.widths.len() - 1])
    }

    fn series_coefficients(&self) -> &[f64] {
        self.series.get_or_init(|| {
            // φ(y) = ½ Σ_n φ̂(n/2) e(ny/2) on |y| ≤ 1/2 (period 2 covers the support).
            let mut c = Vec::new();
            let mut n = 0usize;
            loop {
                let xi = 0.5 * n as f64;
                c.push(self.transform(xi));
                if n > 8 && self.envelope_tail_sum(xi) < 1e-19 {
                    break;
                }
                n += 1;
            }
            c
        })
    }

    /// Pointwise `φ(y)`, exactly zero outside the support.
    pub fn eval(&self, y: f64) -> f64 {
        if y.abs() > self.support_half_width() {
            return 0.0;
        }
        let c = self.series_coefficients();
        // Clenshaw for ½ c₀ + Σ_{n≥1} c_n cos(πny)
        let t = PI * y;
        let two_cos = 2.0 * t.cos();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c[1..].iter().rev() {
            let b0 = ck + two_cos * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        let tail = b1 * t.cos() - b2;
        0.5 * c[0] + tail
    }
}

/// `a_k = A k^{-4/3}` for `k = 1..=K`.
pub fn widths_schedule(depth: usize, prefactor: f64) -> Result<BumpSpec> {
    if depth < 2 {
        return Err(Error::InvalidInput(format!("depth must be at least 2, got {depth}")));
    }
    if !(prefactor > 0.0) {
        return Err(Error::InvalidInput("prefactor must be positive".into()));
    }
    let widths: Vec<f64> = (1..=depth)
        .map(|k| prefactor * (k as f64).powf(-4.0 / 3.0))
        .collect();
    let total: f64 = widths.iter().sum();
    if total > 1.0 {
        return Err(Error::InvalidInput(format!(
            "support violation: widths sum to {total} > 1 for A = {prefactor}"
        )));
    }
    BumpSpec::new(widths)
}

/// The default window and layer bump: depth 64, prefactor 0.27.
pub fn default_bump() -> BumpSpec {
    widths_schedule(64, 0.27).expect("default widths are admissible")
}

pub fn bump_transform(spec: &BumpSpec, xi: f64) -> f64 {
    spec.transform(xi)
}

/// Discrete version of `φ` on `[−1/2, 1/2]` with `N + 1` nodes: a unit mass at the
/// center convolved with cell-averaged indicator kernels.
pub fn bump_grid(spec: &BumpSpec, n: usize) -> Result<GridFunction> {
    if n < 1024 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "resolution must be a power of two >= 1024, got {n}"
        )));
    }
    let h = 1.0 / n as f64;
    let smallest = spec.widths[spec.widths.len() - 1];
    let cells = (smallest / h).floor() as usize;
    if cells < 4 {
        let required = (4.0 / smallest).ceil() as usize;
        return Err(Error::ResolutionTooCoarse {
            required: required.next_power_of_two(),
            got: n,
        });
    }
    let mut v = vec![0.0; n + 1];
    v[n / 2] = 1.0 / h;
    let mut prefix = vec![0.0; n + 2];
    for &a in &spec.widths {
        let half = 0.5 * a / h;
        let j = half.floor() as usize;
        let end = 0.5 + (half - j as f64);
        let w = h / a;
        for i in 0..=n {
            prefix[i + 1] = prefix[i] + v[i];
        }
        let at = |i: isize| -> f64 {
            if i < 0 || i > n as isize {
                0.0
            } else {
                v[i as usize]
            }
        };
        let mut out = vec![0.0; n + 1];
        for (i, o) in out.iter_mut().enumerate() {
            // offsets |d| < j carry weight 1, offsets ±j carry `end`
            let lo = i.saturating_sub(j - 1);
            let hi = (i + j - 1).min(n);
            let inner = prefix[hi + 1] - prefix[lo];
            let ends = at(i as isize - j as isize) + at(i as isize + j as isize);
            *o = w * (inner + end * ends);
        }
        v = out;
    }
    Ok(GridFunction::new(-0.5, h, v))
}

/// Outcome of a decay certification scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCertificate {
    /// Smallest `C` with `|φ̂(ξ)| ≤ C exp(-|ξ|^{3/4})` at every sample.
    pub c: f64,
    pub requested: (f64, f64),
    /// The part of the requested range where the truncated product is faithful.
    pub certified: (f64, f64),
    pub depth: usize,
    pub prefactor: f64,
    pub samples: usize,
    pub argmax: f64,
}

/// Scans `samples` log-spaced points of the faithful part of `range`.
pub fn certify_decay(spec: &BumpSpec, range: (f64, f64), samples: usize) -> Result<DecayCertificate> {
    let (lo, hi) = range;
    if !(lo >= 1.0 && hi <= 1e6 && hi > lo) {
        return Err(Error::InvalidInput(format!(
            "range must satisfy 1 <= lo < hi <= 1e6, got {lo}..{hi}"
        )));
    }
    let samples = samples.max(10_000);
    let limit = spec.faithful_limit();
    if lo >= limit {
        return Err(Error::CertificationFailed {
            xi: lo,
            reason: format!(
                "depth {} decays only like xi^-{} beyond {limit:.3}",
                spec.depth(),
                spec.depth()
            ),
        });
    }
    let top = hi.min(limit);
    let xs = log_space(lo, top, samples);
    let logs: Vec<f64> = xs
        .par_iter()
        .map(|&x| spec.ln_abs_transform(x) + x.powf(0.75))
        .collect();
    let (i, &lc) = logs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    // A maximum pinned at the top of a truncated range means C is still growing.
    if top < hi && i + 1 == xs.len() {
        return Err(Error::CertificationFailed {
            xi: xs[i],
            reason: "bound still increasing at the faithful limit".into(),
        });
    }
    Ok(DecayCertificate {
        c: lc.exp(),
        requested: range,
        certified: (lo, top),
        depth: spec.depth(),
        prefactor: spec.widths[0],
        samples,
        argmax: xs[i],
    })
}
