//! Small numerical helpers shared across modules.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Neumaier's variant of compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator (independent real and imaginary parts).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut acc = Neumaier::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}

/// `e(x) = exp(2πix)` after reducing `x` modulo 1.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let r = x - x.round();
    let (s, c) = (2.0 * PI * r).sin_cos();
    Complex64::new(c, s)
}

/// `sin(πx)/(πx)` with argument reduction, so large `x` keeps full accuracy.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0;
    }
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    let s = if (n as i64) & 1 == 0 { s } else { -s };
    s / (PI * x)
}

/// Ordinary least squares for `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub residual_rms: f64,
    pub n: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = compensated_sum(xs.iter().copied()) / nf;
    let my = compensated_sum(ys.iter().copied()) / nf;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = compensated_sum(
        xs.iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    );
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        intercept,
        slope,
        slope_stderr,
        residual_rms: (ssr / nf).sqrt(),
        n,
    })
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Distinct integers log-spaced over `[lo, hi]`, ascending.
pub fn log_space_int(lo: i64, hi: i64, count: usize) -> Vec<i64> {
    assert!(lo >= 1 && hi >= lo);
    let mut v: Vec<i64> = log_space(lo as f64, hi as f64, count)
        .into_iter()
        .map(|x| (x.round() as i64).clamp(lo, hi))
        .collect();
    v.dedup();
    v
}

/// `ln(Σ exp(x_i))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + compensated_sum(xs.iter().map(|x| (x - m).exp())).ln()
}

/// Sum of `f` at `x_j = x0 + j h`, `j = 0..values.len()`, weighted by `values`,
/// times `e(-s x_j)`. The phase is advanced by rotation and re-anchored every block
/// so rounding does not accumulate across a long grid.
pub fn phased_sum(values: &[f64], x0: f64, h: f64, s: f64) -> Complex64 {
    const BLOCK: usize = 512;
    let step = e(-s * h);
    let mut acc = ComplexSum::new();
    for (b, chunk) in values.chunks(BLOCK).enumerate() {
        let j0 = b * BLOCK;
        let mut w = e(-s * (x0 + j0 as f64 * h));
        let mut block = Complex64::new(0.0, 0.0);
        for &v in chunk {
            block += w * v;
            w *= step;
        }
        acc.add(block);
    }
    acc.value()
}

/// 15-point Gauss-Kronrod nodes and weights (with the embedded 7-point Gauss rule).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature to relative tolerance `rel` (or absolute `abs`).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64, abs: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
        let (val, err) = whole;
        if err <= tol || depth == 0 || (b - a).abs() < 1e-9 * a.abs().max(1.0) {
            return val;
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(f, a, b);
    // below this, subnormal noise never meets a relative tolerance
    let tol = (rel * whole.0.abs()).max(abs).max(1e-280);
    rec(f, a, b, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn sinc_zeros_and_reduction() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(3.0).abs() < 1e-17);
        let x = 1e6 + 0.25;
        let direct = (PI * 0.25).sin() / (PI * x);
        assert!((sinc(x) - direct).abs() < 1e-20);
        assert_eq!(sinc(2.7), sinc(-2.7));
    }

    #[test]
    fn line_fit_exact() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_kronrod_smooth() {
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 50.0, 1e-13, 0.0);
        assert!((v - (1.0 - (-50.0f64).exp())).abs() < 1e-13);
        let v = integrate(&|x: f64| x.powf(-0.3), 1.0, 1e8, 1e-12, 0.0);
        let exact = (1e8f64.powf(0.7) - 1.0) / 0.7;
        assert!((v / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phased_sum_matches_direct() {
        let vals: Vec<f64> = (0..5000).map(|j| ((j as f64) * 0.01).sin()).collect();
        let (x0, h, s) = (0.3, 1e-4, 37.0);
        let direct: Complex64 = vals
            .iter()
            .enumerate()
            .map(|(j, v)| e(-s * (x0 + j as f64 * h)) * v)
            .sum();
        assert!((phased_sum(&vals, x0, h, s) - direct).norm() < 1e-10);
    }
}
