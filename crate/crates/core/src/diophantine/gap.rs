//! Exhaustive searches for rational approximations `(p − θ)/q` near a point.

use num_integer::Integer;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::ThetaSpec;
use crate::error::{Error, Result};
use crate::layer::primes_in_range;
use crate::params::ApproxFunction;

/// A point of `[0, 1)`. Points built from a fraction keep that fraction so that
/// distances to other fractions are formed from an exact integer numerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Point {
    Real(f64),
    /// `(p − θ)/q + offset`
    Anchored { p: i64, q: i64, offset: f64 },
}

impl Point {
    pub fn approx(&self, theta: &ThetaSpec) -> f64 {
        match *self {
            Point::Real(x) => x,
            Point::Anchored { p, q, offset } => (p as f64 - theta.value()) / q as f64 + offset,
        }
    }

    /// `x − (p − θ)/q`.
    pub fn offset_from(&self, p: i64, q: i64, theta: &ThetaSpec) -> Result<f64> {
        match *self {
            Point::Real(x) => Ok(x - (p as f64 - theta.value()) / q as f64),
            Point::Anchored {
                p: p0,
                q: q0,
                offset,
            } => {
                // (p0 − θ)/q0 − (p − θ)/q = (K − mθ)/(q q0), K = p0 q − p q0, m = q − q0
                let k = p0 as i128 * q as i128 - p as i128 * q0 as i128;
                let m = q as i128 - q0 as i128;
                let num = if k == 0 && m == 0 {
                    0.0
                } else {
                    theta.affine(k, m)?
                };
                Ok(num / (q as f64 * q0 as f64) + offset)
            }
        }
    }
}

/// What defines the annuli at each `q`: `ψ₁(q) − cψ₂(q) ≤ |x − (r−θ)/q| ≤ ψ₁(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusParams {
    pub psi1: ApproxFunction,
    pub psi2: ApproxFunction,
    pub c: f64,
    pub theta: ThetaSpec,
}

impl AnnulusParams {
    #[inline]
    pub fn inner(&self, q: f64) -> f64 {
        self.psi1.at(q) - self.c * self.psi2.at(q)
    }

    /// Center of the interval `I_{q,r}`.
    pub fn center_offset(&self, q: f64) -> f64 {
        self.psi1.at(q) - 0.5 * self.c * self.psi2.at(q)
    }
}

/// Numerators `p` with `|qx + θ − p| ≤ reach`, guarded against rounding in `qx + θ`.
fn candidates(v: f64, reach: f64) -> std::ops::RangeInclusive<i64> {
    let guard = 1e-9 * v.abs().max(1.0);
    let lo = (v - reach - guard).floor() as i64;
    let hi = (v + reach + guard).ceil() as i64;
    lo..=hi
}

/// All coprime `(r, q)` with `q` in `range` and `x` in the closed annulus at `(r, q)`.
pub fn annulus_hits(
    x: &Point,
    params: &AnnulusParams,
    range: std::ops::Range<i64>,
) -> Result<Vec<(i64, i64)>> {
    if range.start < 2 {
        return Err(Error::Domain("q range must start at 2 or above".into()));
    }
    let theta = params.theta.value();
    let xa = x.approx(&params.theta);
    let hits: Result<Vec<Vec<(i64, i64)>>> = range
        .into_par_iter()
        .map(|q| {
            let qf = q as f64;
            let outer = params.psi1.at(qf);
            let inner = params.inner(qf);
            let mut found = Vec::new();
            for r in candidates(qf * xa + theta, qf * outer) {
                let d = x.offset_from(r, q, &params.theta)?.abs();
                if d >= inner && d <= outer && r.gcd(&q) == 1 {
                    found.push((r, q));
                }
            }
            Ok(found)
        })
        .collect();
    Ok(hits?.into_iter().flatten().collect())
}

/// The first `(p, q)`, in ascending `q` over `q₁ < q < q₂`, with `gcd(p, q) = 1` and
/// `|x − (p−θ)/q| < ψ₁(q) − cψ₂(q)`.
pub fn violation_search(
    x: &Point,
    params: &AnnulusParams,
    q1: i64,
    q2: i64,
) -> Result<Option<(i64, i64)>> {
    if q1 < 1 || q2 <= q1 {
        return Err(Error::InvalidInput(format!("need 1 <= q1 < q2, got {q1}, {q2}")));
    }
    let theta = params.theta.value();
    let xa = x.approx(&params.theta);
    let found = (q1 + 1..q2).into_par_iter().find_map_first(|q| {
        let qf = q as f64;
        let bound = params.inner(qf);
        if bound <= 0.0 {
            return None;
        }
        let v = qf * xa + theta;
        let fl = v.floor();
        let fr = v - fl;
        let base = fl as i64;
        // |qx + θ − p| < qψ₁(q) < 1 leaves the two neighbours of qx + θ, widened
        // when qx + θ sits too close to an integer for its rounding to be trusted.
        let guard = 1e-7;
        let (lo, hi) = if qf * bound < 1.0 - guard && fr > guard && fr < 1.0 - guard {
            (base, base + 1)
        } else {
            let reach = (qf * bound).ceil() as i64;
            (base - reach, base + 1 + reach)
        };
        for p in lo..=hi {
            match x.offset_from(p, q, &params.theta) {
                Ok(d) if d.abs() < bound && p.gcd(&q) == 1 => return Some(Ok((p, q))),
                Ok(_) => {}
                Err(e) => return Some(Err(e)),
            }
        }
        None
    });
    found.transpose()
}

/// A point placed in the annuli of two primes `q₁ < q₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub q1: i64,
    pub r1: i64,
    pub q2: i64,
    pub p2: i64,
    pub x: Point,
}

/// Places `x` at the center of some `I_{q₂,p₂}` lying inside `I_{q₁,r₁}`, scanning
/// primes `q₂ ≥ q2_start` upward and giving up past `q2_limit`.
pub fn construct_gap_point(
    params: &AnnulusParams,
    q1: i64,
    r1: i64,
    q2_start: i64,
    q2_limit: i64,
) -> Result<Option<GapPoint>> {
    let q1f = q1 as f64;
    let (outer1, inner1) = (params.psi1.at(q1f), params.inner(q1f));
    let theta = params.theta.value();
    let frac1 = (r1 as f64 - theta) / q1f;
    let mut lo = q2_start.max(q1 + 1);
    while lo < q2_limit {
        let hi = (lo + 1_000_000).min(q2_limit);
        for q2 in primes_in_range(lo as u64, hi as u64) {
            let q2 = q2 as i64;
            let q2f = q2 as f64;
            let off2 = params.center_offset(q2f);
            let half2 = 0.5 * params.c * params.psi2.at(q2f);
            // p₂ with (p₂ − θ)/q₂ + off₂ in [frac₁ + inner₁, frac₁ + outer₁]
            let a = q2f * (frac1 + inner1 - off2) + theta;
            let b = q2f * (frac1 + outer1 - off2) + theta;
            for p2 in (a.floor() as i64)..=(b.ceil() as i64) {
                if p2.rem_euclid(q2) == 0 {
                    continue;
                }
                let x = Point::Anchored {
                    p: p2,
                    q: q2,
                    offset: off2,
                };
                let d = x.offset_from(r1, q1, &params.theta)?;
                // Keep the whole I_{q₂,p₂} inside I_{q₁,r₁}.
                if d - half2 > inner1 && d + half2 < outer1 {
                    return Ok(Some(GapPoint {
                        q1,
                        r1,
                        q2,
                        p2,
                        x,
                    }));
                }
            }
        }
        lo = hi;
    }
    Ok(None)
}

/// Outcome for a single constructed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapOutcome {
    pub point: GapPoint,
    pub violation: Option<(i64, i64)>,
}

/// Exhaustive search result for one window `(q₁, q₂)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub q1: i64,
    pub q2: i64,
    pub searched: (i64, i64),
    pub violations: Vec<(i64, i64)>,
    pub cutoff: Option<i64>,
}

/// Configuration of the randomized gap experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GapExperiment {
    pub params: AnnulusParams,
    pub beta_eps: f64,
    pub q1_range: (i64, i64),
    pub points: usize,
    /// Hard cap on `q₂`, bounding the cost of each exhaustive search.
    pub q2_cap: i64,
    /// Points tried per prime while scanning below `q1_range` for the cutoff.
    pub scan_points: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapExperimentReport {
    /// Largest `q₁` at which a violation was seen, if any.
    pub cutoff: Option<i64>,
    /// Smallest `q₁` reached by the downward scan.
    pub scanned_down_to: i64,
    pub outcomes: Vec<GapOutcome>,
    pub scan: Vec<GapOutcome>,
    pub violations_above_cutoff: usize,
}

fn random_point(
    exp: &GapExperiment,
    q1: i64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<GapPoint>> {
    let q1f = q1 as f64;
    let width = exp.params.c * exp.params.psi2.at(q1f);
    // Fractions with denominator q₂ start landing inside I_{q₁,r₁} once 1/q₂ < width.
    let lo = (1.0 / width).max(q1f + 1.0);
    let hi = q1f.powf(exp.beta_eps).min(exp.q2_cap as f64);
    if hi <= lo {
        return Ok(None);
    }
    let u: f64 = rng.gen();
    let start = (lo.ln() + u * (hi.ln() - lo.ln())).exp() as i64;
    let r1 = rng.gen_range(1..q1);
    construct_gap_point(&exp.params, q1, r1, start, hi as i64)
}

fn run_point(exp: &GapExperiment, p: GapPoint) -> Result<GapOutcome> {
    let violation = violation_search(&p.x, &exp.params, p.q1, p.q2)?;
    Ok(GapOutcome { point: p, violation })
}

/// Runs `points` constructions with `q₁` prime in `q1_range`, then scans primes
/// below the range downward until the first violation to locate the cutoff.
pub fn gap_experiment(exp: &GapExperiment) -> Result<GapExperimentReport> {
    let (a, b) = exp.q1_range;
    let primes: Vec<i64> = primes_in_range(a as u64, b as u64 + 1)
        .into_iter()
        .map(|p| p as i64)
        .collect();
    if primes.is_empty() {
        return Err(Error::InvalidInput("no primes in the q1 range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    let mut outcomes = Vec::with_capacity(exp.points);
    let mut attempts = 0;
    while outcomes.len() < exp.points {
        attempts += 1;
        if attempts > 20 * exp.points + 100 {
            return Err(Error::InvalidInput(
                "could not place points; raise q2_cap".into(),
            ));
        }
        let q1 = primes[rng.gen_range(0..primes.len())];
        if let Some(p) = random_point(exp, q1, &mut rng)? {
            outcomes.push(run_point(exp, p)?);
        }
    }

    let mut cutoff = outcomes
        .iter()
        .filter(|o| o.violation.is_some())
        .map(|o| o.point.q1)
        .max();
    let mut scan = Vec::new();
    let mut scanned_down_to = a;
    if cutoff.is_none() {
        let below: Vec<i64> = primes_in_range(2, a as u64)
            .into_iter()
            .rev()
            .map(|p| p as i64)
            .filter(|&p| p >= 3)
            .collect();
        'scan: for q1 in below {
            scanned_down_to = q1;
            for _ in 0..exp.scan_points {
                if let Some(p) = random_point(exp, q1, &mut rng)? {
                    let o = run_point(exp, p)?;
                    let hit = o.violation.is_some();
                    scan.push(o);
                    if hit {
                        cutoff = Some(q1);
                        break 'scan;
                    }
                }
            }
        }
    }
    let violations_above_cutoff = outcomes
        .iter()
        .filter(|o| o.violation.is_some() && cutoff.map_or(true, |c| o.point.q1 > c))
        .count();
    Ok(GapExperimentReport {
        cutoff,
        scanned_down_to,
        outcomes,
        scan,
        violations_above_cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(c: f64, theta: ThetaSpec) -> AnnulusParams {
        let p = ApproxFunction::power(3.0).unwrap();
        AnnulusParams {
            psi1: p,
            psi2: p,
            c,
            theta,
        }
    }

    #[test]
    fn center_is_its_own_hit() {
        let params = cubic(0.5, ThetaSpec::Zero);
        let x = Point::Anchored {
            p: 37,
            q: 101,
            offset: params.center_offset(101.0),
        };
        let hits = annulus_hits(&x, &params, 90..120).unwrap();
        assert!(hits.contains(&(37, 101)));
    }

    #[test]
    fn center_with_golden_shift() {
        let params = cubic(0.5, ThetaSpec::golden());
        let x = Point::Anchored {
            p: 37,
            q: 101,
            offset: params.center_offset(101.0),
        };
        // mpmath: (37 − θ)/101 + 0.75·101^{-3}
        assert!((x.approx(&params.theta) - 0.36021821320251297694).abs() < 1e-15);
        assert!(annulus_hits(&x, &params, 101..102).unwrap() == vec![(37, 101)]);
    }

    #[test]
    fn half_against_brute_force() {
        // x = 0.5 sits at distance 1/(2q) from every p/q with q odd, far outside q^-3.
        let params = cubic(0.5, ThetaSpec::Zero);
        let x = Point::Real(0.5);
        let fast = annulus_hits(&x, &params, 100..200).unwrap();
        let mut brute = Vec::new();
        for q in 100i64..200 {
            for r in 0..=q {
                let d = (0.5 - r as f64 / q as f64).abs();
                let (o, i) = (params.psi1.at(q as f64), params.inner(q as f64));
                if d >= i && d <= o && r.gcd(&q) == 1 {
                    brute.push((r, q));
                }
            }
        }
        assert_eq!(fast, brute);
        assert!(fast.is_empty());
    }

    #[test]
    fn far_point_has_no_hits() {
        let params = cubic(0.5, ThetaSpec::Zero);
        let x = Point::Real(std::f64::consts::FRAC_1_SQRT_2 - 0.5);
        assert!(annulus_hits(&x, &params, 20..3000).unwrap().is_empty());
    }

    #[test]
    fn empty_range_is_vacuous() {
        let params = cubic(0.5, ThetaSpec::Zero);
        assert_eq!(violation_search(&Point::Real(0.3), &params, 10, 11).unwrap(), None);
    }

    #[test]
    fn negative_control_finds_violation() {
        let p2 = ApproxFunction::power(2.0).unwrap();
        let params = AnnulusParams {
            psi1: p2,
            psi2: p2,
            c: 0.5,
            theta: ThetaSpec::Zero,
        };
        let x = Point::Anchored {
            p: 1,
            q: 150,
            offset: 1e-12,
        };
        assert_eq!(
            violation_search(&x, &params, 100, 200).unwrap(),
            Some((1, 150))
        );
        let xr = Point::Real(1.0 / 150.0 + 1e-12);
        assert_eq!(
            violation_search(&xr, &params, 100, 200).unwrap(),
            Some((1, 150))
        );
    }

    #[test]
    fn two_annuli_gap_example() {
        let params = cubic(0.5, ThetaSpec::Zero);
        let pt = construct_gap_point(&params, 101, 37, 2_100_000, 10_000_000)
            .unwrap()
            .expect("a point exists");
        assert!((pt.q2 as f64) < 101f64.powf(3.95));
        let hits = annulus_hits(&pt.x, &params, 101..102).unwrap();
        assert_eq!(hits, vec![(37, 101)]);
        assert_eq!(violation_search(&pt.x, &params, 101, pt.q2).unwrap(), None);
    }

    #[test]
    fn violations_are_ball_hits() {
        // Widening the violation to a ball (inner radius zero) must be seen by annulus_hits.
        let p2 = ApproxFunction::power(2.0).unwrap();
        let strict = AnnulusParams {
            psi1: p2,
            psi2: p2,
            c: 0.5,
            theta: ThetaSpec::golden(),
        };
        let ball = AnnulusParams { c: 1.0, ..strict.clone() };
        for k in 0..40 {
            let x = Point::Real(0.013 + 0.0247 * k as f64);
            if let Some((p, q)) = violation_search(&x, &strict, 1, 400).unwrap() {
                let hits = annulus_hits(&x, &ball, q..q + 1).unwrap();
                assert!(hits.contains(&(p, q)), "x={x:?} p={p} q={q}");
            }
        }
    }
}
