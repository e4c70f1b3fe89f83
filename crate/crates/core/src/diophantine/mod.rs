//! The inhomogeneous shift `θ`, its continued fraction and approximation exponent,
//! and exhaustive searches for rational approximations inside annuli.

mod gap;
mod surd;

pub use gap::{
    annulus_hits, construct_gap_point, gap_experiment, violation_search, AnnulusParams,
    GapExperiment, GapExperimentReport, GapOutcome, GapPoint, GapReport, Point,
};
pub use surd::{isqrt, QuadSurd};

use num_integer::Integer;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::fit_line;

/// The shift `θ ∈ [0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSpec {
    Zero,
    Surd(QuadSurd),
    /// Digits `a_1, a_2, …` of `[0; a_1, a_2, …]`, read as a prefix of an
    /// infinite expansion.
    ContinuedFraction(Vec<u128>),
}

impl ThetaSpec {
    pub fn golden() -> Self {
        ThetaSpec::Surd(QuadSurd::golden_conjugate())
    }

    pub fn surd(x: QuadSurd) -> Result<Self> {
        if x.floor()? != 0 {
            return Err(Error::InvalidInput(format!(
                "theta must lie in [0, 1), got {}",
                x.to_f64()?
            )));
        }
        Ok(ThetaSpec::Surd(x))
    }

    pub fn continued_fraction(digits: Vec<u128>) -> Result<Self> {
        if digits.is_empty() || digits.iter().any(|&a| a == 0) {
            return Err(Error::InvalidInput(
                "continued fraction digits must be nonempty and positive".into(),
            ));
        }
        Ok(ThetaSpec::ContinuedFraction(digits))
    }

    /// The Diophantine exponent where it is known in closed form.
    pub fn known_exponent(&self) -> Option<f64> {
        match self {
            ThetaSpec::Zero => Some(1.0),
            ThetaSpec::Surd(_) => Some(2.0),
            ThetaSpec::ContinuedFraction(_) => None,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            ThetaSpec::Zero => 0.0,
            ThetaSpec::Surd(x) => x.to_f64().unwrap_or(f64::NAN),
            ThetaSpec::ContinuedFraction(d) => {
                let c = convergents(d);
                let (p, q) = c[c.len() - 1];
                p as f64 / q as f64
            }
        }
    }

    /// First `n` partial quotients, starting with the integer part `0`.
    pub fn partial_quotients(&self, n: usize) -> Result<Vec<u128>> {
        match self {
            ThetaSpec::Zero => Ok(Vec::new()),
            ThetaSpec::Surd(x) => Ok(x
                .partial_quotients(n)?
                .into_iter()
                .map(|a| a as u128)
                .collect()),
            ThetaSpec::ContinuedFraction(d) => Ok(std::iter::once(0)
                .chain(d.iter().copied())
                .take(n)
                .collect()),
        }
    }

    /// `k − mθ` as a float, accurate even when the two terms nearly cancel.
    pub fn affine(&self, k: i128, m: i128) -> Result<f64> {
        match self {
            ThetaSpec::Zero => Ok(k as f64),
            ThetaSpec::Surd(x) => x.mul_int(-m)?.add_int(k)?.to_f64(),
            ThetaSpec::ContinuedFraction(d) => {
                let (num, q, err) = cf_affine(d, k, m)?;
                let v = num as f64 / q as f64;
                if err > 1e-12 * v.abs().max(1e-300) {
                    return Err(Error::PrecisionExhausted(format!(
                        "continued fraction prefix too short for k - m theta at m = {m}"
                    )));
                }
                Ok(v)
            }
        }
    }

    /// Fractional part of `mθ` in `[0, 1)`, to absolute accuracy near 1e-15.
    pub fn frac_mul(&self, m: i64) -> Result<f64> {
        match self {
            ThetaSpec::Zero => Ok(0.0),
            ThetaSpec::Surd(x) => x.mul_int(m as i128)?.frac(),
            ThetaSpec::ContinuedFraction(d) => {
                let (f, err) = cf_frac(d, m as i128)?;
                if err > 1e-13 {
                    return Err(Error::PrecisionExhausted(format!(
                        "continued fraction prefix too short for frac({m} theta)"
                    )));
                }
                Ok(f)
            }
        }
    }

    /// `‖qθ‖`, accurate to 1e-12 relative, or a precision error.
    pub fn dist_to_nearest_int(&self, q: u64) -> Result<f64> {
        self.dist_with_tolerance(q, 1e-12)
    }

    fn dist_with_tolerance(&self, q: u64, rel: f64) -> Result<f64> {
        if q == 0 {
            return Err(Error::Domain("q must be >= 1".into()));
        }
        match self {
            ThetaSpec::Zero => Ok(0.0),
            ThetaSpec::Surd(x) => x.mul_int(q as i128)?.dist_to_int(),
            ThetaSpec::ContinuedFraction(d) => {
                let (f, err) = cf_frac(d, q as i128)?;
                let dist = f.min(1.0 - f);
                if err > rel * dist {
                    return Err(Error::PrecisionExhausted(format!(
                        "‖{q} theta‖ = {dist:e} known only to ±{err:e}"
                    )));
                }
                Ok(dist)
            }
        }
    }

    /// Denominators of the convergents up to `q_max`, ascending, starting at 1.
    pub fn convergent_denominators(&self, q_max: u128) -> Result<Vec<u128>> {
        let digits: Vec<u128> = match self {
            ThetaSpec::Zero => return Ok(Vec::new()),
            ThetaSpec::ContinuedFraction(d) => d.clone(),
            ThetaSpec::Surd(x) => {
                // Enough digits that the denominators pass q_max: they at least
                // grow like Fibonacci numbers.
                let n = 4 + (q_max as f64).log(1.6).ceil() as usize;
                x.partial_quotients(n + 1)?[1..]
                    .iter()
                    .map(|&a| a as u128)
                    .collect()
            }
        };
        Ok(convergents(&digits)
            .into_iter()
            .map(|(_, q)| q)
            .take_while(|&q| q <= q_max)
            .collect())
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSpec::Zero => write!(f, "0"),
            ThetaSpec::Surd(x) => write!(f, "surd:{},{},{},{}", x.p, x.r, x.d, x.s),
            ThetaSpec::ContinuedFraction(d) => {
                let s: Vec<String> = d.iter().map(|a| a.to_string()).collect();
                write!(f, "cf:{}", s.join(","))
            }
        }
    }
}

impl FromStr for ThetaSpec {
    type Err = Error;

    /// `0`, `golden`, `silver`, `surd:p,r,d,s` or `cf:a1,a2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let ints = |body: &str| -> Result<Vec<i128>> {
            body.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i128>()
                        .map_err(|_| Error::InvalidInput(format!("bad integer {t:?} in theta")))
                })
                .collect()
        };
        match s {
            "0" | "zero" => Ok(ThetaSpec::Zero),
            "golden" => Ok(ThetaSpec::golden()),
            "silver" => ThetaSpec::surd(QuadSurd::silver_conjugate()),
            _ => {
                if let Some(body) = s.strip_prefix("surd:") {
                    let v = ints(body)?;
                    if v.len() != 4 {
                        return Err(Error::InvalidInput("surd needs p,r,d,s".into()));
                    }
                    ThetaSpec::surd(QuadSurd::new(v[0], v[1], v[2], v[3])?)
                } else if let Some(body) = s.strip_prefix("cf:") {
                    let v = ints(body)?;
                    if v.iter().any(|&a| a < 1) {
                        return Err(Error::InvalidInput("cf digits must be positive".into()));
                    }
                    ThetaSpec::continued_fraction(v.into_iter().map(|a| a as u128).collect())
                } else {
                    Err(Error::InvalidInput(format!("unrecognized theta {s:?}")))
                }
            }
        }
    }
}

/// Convergents `p_n/q_n` of `[0; a_1, …]`, stopping before u128 overflow.
fn convergents(digits: &[u128]) -> Vec<(u128, u128)> {
    let mut out = vec![(0u128, 1u128)];
    let (mut p0, mut q0, mut p1, mut q1) = (1u128, 0u128, 0u128, 1u128);
    for &a in digits {
        let p = a.checked_mul(p1).and_then(|x| x.checked_add(p0));
        let q = a.checked_mul(q1).and_then(|x| x.checked_add(q0));
        match (p, q) {
            (Some(p), Some(q)) => {
                out.push((p, q));
                (p0, q0, p1, q1) = (p1, q1, p, q);
            }
            _ => break,
        }
    }
    out
}

/// Picks the deepest convergent usable with multiplier `m` and returns it with the
/// bound on `|θ − p/q|`.
fn cf_pick(digits: &[u128], m: i128) -> Result<(i128, i128, f64)> {
    let conv = convergents(digits);
    let am = m.unsigned_abs().max(1);
    let mut best = None;
    for n in 0..conv.len() {
        let (p, q) = conv[n];
        if q > 1u128 << 100 || p.checked_mul(am).map_or(true, |x| x > 1u128 << 120) {
            break;
        }
        let err = match conv.get(n + 1) {
            Some(&(_, qn)) => 1.0 / (q as f64 * qn as f64),
            None => {
                let qm = if n > 0 { conv[n - 1].1 } else { 0 };
                1.0 / (q as f64 * (q + qm) as f64)
            }
        };
        best = Some((p as i128, q as i128, err));
    }
    best.ok_or_else(|| Error::PrecisionExhausted("no usable convergent".into()))
}

fn cf_frac(digits: &[u128], m: i128) -> Result<(f64, f64)> {
    let (p, q, err) = cf_pick(digits, m)?;
    let r = (m * p).mod_floor(&q);
    Ok((r as f64 / q as f64, m.unsigned_abs() as f64 * err))
}

fn cf_affine(digits: &[u128], k: i128, m: i128) -> Result<(i128, i128, f64)> {
    let (p, q, err) = cf_pick(digits, m)?;
    let num = k
        .checked_mul(q)
        .and_then(|x| x.checked_sub(m.checked_mul(p)?))
        .ok_or_else(|| Error::PrecisionExhausted("overflow in k - m theta".into()))?;
    Ok((num, q, m.unsigned_abs() as f64 * err))
}

/// `‖q_nθ‖ = 1/(α_{n+1} q_n + q_{n−1})` at each convergent whose next digit is
/// known, with the complete quotient `α_{n+1}` evaluated from the remaining digits.
fn cf_convergent_dists(digits: &[u128]) -> Vec<(u128, f64)> {
    let conv = convergents(digits);
    let mut out = Vec::new();
    for n in 1..conv.len() {
        if n >= digits.len() {
            break;
        }
        let mut alpha = digits[digits.len() - 1] as f64;
        for &a in digits[n..digits.len() - 1].iter().rev() {
            alpha = a as f64 + 1.0 / alpha;
        }
        let (q, qm) = (conv[n].1 as f64, conv[n - 1].1 as f64);
        out.push((conv[n].1, 1.0 / (alpha * q + qm)));
    }
    out
}

/// Result of fitting the approximation exponent from convergents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub gamma: f64,
    /// The same fit restricted to `q ≤ √Qmax`, when enough convergents exist there.
    pub gamma_at_sqrt: Option<f64>,
    pub unbounded_trend: bool,
    /// `(q, ‖qθ‖)` at the convergent denominators used.
    pub points: Vec<(u128, f64)>,
}

fn fit_gamma(points: &[(u128, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: points.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|&(q, _)| (q as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| -d.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or(Error::TooFewPoints {
        needed: 3,
        have: points.len(),
    })?;
    Ok(fit.slope + 1.0)
}

/// Estimates `γ` as one plus the slope of `−log‖q_nθ‖` against `log q_n` over the
/// convergent denominators `2 ≤ q_n ≤ Qmax`.
pub fn estimate_exponent(theta: &ThetaSpec, q_max: u128) -> Result<ExponentEstimate> {
    if matches!(theta, ThetaSpec::Zero) {
        return Err(Error::InvalidInput("theta = 0 is rational".into()));
    }
    if q_max < 1000 {
        return Err(Error::InvalidInput("Qmax must be at least 1000".into()));
    }
    let mut points = Vec::new();
    if let ThetaSpec::ContinuedFraction(d) = theta {
        points = cf_convergent_dists(d)
            .into_iter()
            .filter(|&(q, _)| (2..=q_max).contains(&q))
            .collect();
    } else {
        for q in theta.convergent_denominators(q_max)? {
            if q < 2 {
                continue;
            }
            match theta.dist_with_tolerance(q as u64, 1e-3) {
                Ok(d) if d > 0.0 => points.push((q, d)),
                Ok(_) => break,
                Err(Error::PrecisionExhausted(_)) => break,
                Err(e) => return Err(e),
            }
        }
    }
    let gamma = fit_gamma(&points)?;
    let root = (q_max as f64).sqrt() as u128;
    let low: Vec<_> = points.iter().copied().filter(|&(q, _)| q <= root).collect();
    let gamma_at_sqrt = fit_gamma(&low).ok();
    let unbounded_trend = gamma_at_sqrt.map_or(false, |g| gamma - g > 0.25);
    Ok(ExponentEstimate {
        gamma,
        gamma_at_sqrt,
        unbounded_trend,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partial_quotients_examples() {
        assert_eq!(ThetaSpec::golden().partial_quotients(5).unwrap(), vec![0, 1, 1, 1, 1]);
        assert!(ThetaSpec::Zero.partial_quotients(5).unwrap().is_empty());
        let s: ThetaSpec = "silver".parse().unwrap();
        assert_eq!(s.partial_quotients(4).unwrap(), vec![0, 2, 2, 2]);
    }

    #[test]
    fn dist_examples() {
        assert_eq!(ThetaSpec::Zero.dist_to_nearest_int(17).unwrap(), 0.0);
        let g = ThetaSpec::golden();
        // mpmath, 50 digits
        let d = g.dist_to_nearest_int(13).unwrap();
        assert!((d / 0.034441853748633026659628846753295530 - 1.0).abs() < 1e-12);
        let mut fib = vec![1u64, 1];
        while fib.len() < 45 {
            let n = fib.len();
            fib.push(fib[n - 1] + fib[n - 2]);
        }
        let ds: Vec<f64> = fib[2..].iter().map(|&q| g.dist_to_nearest_int(q).unwrap()).collect();
        assert!(ds.windows(2).all(|w| w[1] < w[0]));
        // |F_n θ − F_{n−1}| = θ^n exactly
        let theta = g.value();
        for (i, d) in ds.iter().enumerate() {
            let n = i + 3;
            assert!((d / theta.powi(n as i32) - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn exponents_of_surds() {
        for t in [ThetaSpec::golden(), "silver".parse().unwrap()] {
            let est = estimate_exponent(&t, 1_000_000).unwrap();
            assert!((est.gamma - 2.0).abs() < 0.05, "{}", est.gamma);
            assert!(!est.unbounded_trend);
        }
    }

    #[test]
    fn doubly_exponential_digits_have_exponent_three() {
        // a_k = 2^{2^k}: the next digit is about twice the current denominator,
        // so ‖q_n θ‖ ≈ 1/(2 q_n²) and the exponent is 3, a bounded trend.
        let digits: Vec<u128> = (0..7).map(|k| 1u128 << (1u32 << k)).collect();
        let t = ThetaSpec::continued_fraction(digits).unwrap();
        let est = estimate_exponent(&t, 1u128 << 60).unwrap();
        assert!((est.gamma - 3.0).abs() < 0.15, "{}", est.gamma);
    }

    #[test]
    fn factorial_digits_flag_unbounded_trend() {
        // a_k = 2^{k!}
        let digits: Vec<u128> = [1u32, 2, 6, 24, 120].iter().map(|&e| 1u128 << e).collect();
        let t = ThetaSpec::continued_fraction(digits).unwrap();
        let small = estimate_exponent(&t, 1_000).unwrap();
        let wide = estimate_exponent(&t, 1u128 << 40).unwrap();
        assert!(wide.gamma > small.gamma + 0.5);
        assert!(wide.unbounded_trend);
        assert!(estimate_exponent(&t, 100_000).is_ok());
        let short = ThetaSpec::continued_fraction(vec![3, 5]).unwrap();
        assert!(matches!(
            estimate_exponent(&short, 1_000),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn zero_has_no_exponent_fit() {
        assert!(estimate_exponent(&ThetaSpec::Zero, 10_000).is_err());
        assert_eq!(ThetaSpec::Zero.known_exponent(), Some(1.0));
    }

    #[test]
    fn theta_parsing_round_trip() {
        for s in ["0", "surd:-1,1,5,2", "cf:2,4,16"] {
            let t: ThetaSpec = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("surd:3,1,2,1".parse::<ThetaSpec>().is_err());
        assert!("cf:1,0".parse::<ThetaSpec>().is_err());
        assert!("pi".parse::<ThetaSpec>().is_err());
    }

    #[test]
    fn cf_prefix_precision_is_explicit() {
        let t = ThetaSpec::continued_fraction(vec![1, 1, 1, 1, 1]).unwrap();
        assert!(matches!(
            t.dist_to_nearest_int(1_000_000),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn cf_matches_surd_for_golden() {
        let cf = ThetaSpec::continued_fraction(vec![1; 80]).unwrap();
        let g = ThetaSpec::golden();
        for q in [3u64, 13, 1000, 99_991] {
            let a = cf.dist_to_nearest_int(q).unwrap();
            let b = g.dist_to_nearest_int(q).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        // ‖qθ‖ ≥ q^{1−γ−η} for the golden ratio with γ = 2, η = 0.1 above a small cutoff.
        #[test]
        fn golden_lower_bound(q in 10u64..1_000_000) {
            let d = ThetaSpec::golden().dist_to_nearest_int(q).unwrap();
            prop_assert!(d >= (q as f64).powf(-1.1));
        }

        #[test]
        fn frac_mul_in_unit_interval(m in -1_000_000_000i64..1_000_000_000) {
            let f = ThetaSpec::golden().frac_mul(m).unwrap();
            prop_assert!((0.0..1.0).contains(&f));
        }
    }
}
