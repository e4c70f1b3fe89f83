//! Sampled verification of the four coefficient regimes of one layer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScaleLayer;
use crate::numeric::log_space;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Zero,
    Medium,
    Tail,
}

impl Regime {
    /// Band of `s` for a layer at scale `M` with order `τ₂`: `s = 0` and
    /// `[1, M)` are `Zero`, `[M, M^{τ₂(1+ε/2)})` is `Medium`, the rest `Tail`.
    pub fn classify(s: i64, m: u64, tau2: f64, epsilon: f64) -> Self {
        let a = s.unsigned_abs();
        if a < m {
            Regime::Zero
        } else if (a as f64) < (m as f64).powf(tau2 * (1.0 + 0.5 * epsilon)) {
            Regime::Medium
        } else {
            Regime::Tail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Zero => "zero",
            Regime::Medium => "medium",
            Regime::Tail => "tail",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeSampler {
    pub medium_samples: usize,
    pub tail_samples: usize,
    pub seed: u64,
}

impl Default for RegimeSampler {
    fn default() -> Self {
        Self {
            medium_samples: 2000,
            tail_samples: 2000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroBand {
    /// Number of `s` checked, both signs.
    pub checked: u64,
    pub nonzero: Vec<i64>,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MediumBand {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    pub sup_abs: f64,
    pub argmax: i64,
    /// `sup |f̂| · M / log M`
    pub normalized_sup: f64,
    /// `sup |f̂| · M^{1-ε}`
    pub c_eps: f64,
    pub max_divisors: usize,
    /// Largest divisor count never exceeded `log s / log M`.
    pub divisor_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBand {
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    /// `sup |f̂(s)| / exp(-(s/M^{τ₂})^{1/2})`
    pub sup_ratio: f64,
    pub argmax: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub m: u64,
    pub tau2: f64,
    pub epsilon: f64,
    pub zero: ZeroBand,
    pub medium: MediumBand,
    pub tail: Option<TailBand>,
}

/// Snaps log-spaced targets to multiples of seeded layer primes, so every sample
/// lands where `f̂` can be nonzero.
fn snapped(layer: &ScaleLayer, lo: f64, hi: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut out: Vec<i64> = log_space(lo, hi, count)
        .into_iter()
        .map(|t| {
            let q = layer.primes[rng.gen_range(0..layer.primes.len())] as f64;
            let k = (t / q).round().max((lo / q).ceil()).min((hi / q).floor());
            (k.max(1.0) * q) as i64
        })
        .filter(|&s| s as f64 >= lo && s as f64 <= hi)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn verify_regimes(layer: &ScaleLayer, sampler: &RegimeSampler) -> RegimeReport {
    let m = layer.m;
    let mf = m as f64;
    let tau2 = layer.psi2.order();
    let eps = layer.epsilon;

    let nonzero: Vec<i64> = (1..m as i64)
        .into_par_iter()
        .flat_map_iter(|s| [s, -s])
        .filter(|&s| layer.f_hat(s).re != 0.0 || layer.f_hat(s).im != 0.0)
        .collect();
    let zero = ZeroBand {
        checked: 2 * (m - 1),
        exact: nonzero.is_empty(),
        nonzero,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let knee = mf.powf(tau2 * (1.0 + 0.5 * eps));
    let med = snapped(layer, mf, knee, sampler.medium_samples, &mut rng);
    let med_vals: Vec<(i64, f64, usize)> = med
        .par_iter()
        .map(|&s| (s, layer.f_hat(s).norm(), layer.divisors(s).count()))
        .collect();
    let (argmax, sup_abs) = med_vals
        .iter()
        .map(|&(s, v, _)| (s, v))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let max_divisors = med_vals.iter().map(|t| t.2).max().unwrap_or(0);
    let divisor_bound_holds = med_vals
        .iter()
        .all(|&(s, _, n)| n as f64 <= (s as f64).ln() / mf.ln() + 1e-12);
    let medium = MediumBand {
        lo: mf,
        hi: knee,
        samples: med.len(),
        sup_abs,
        argmax,
        normalized_sup: sup_abs * mf / mf.ln(),
        c_eps: sup_abs * mf.powf(1.0 - eps),
        max_divisors,
        divisor_bound_holds,
    };

    // Past the faithful limit of the widest term the truncated bump decays only
    // algebraically, so the tail scan stops there.
    let top = layer.faithful_s_limit().min(9.0e18);
    let tail = (top > knee && sampler.tail_samples > 0).then(|| {
        let ss = snapped(layer, knee, top, sampler.tail_samples, &mut rng);
        let scale = mf.powf(tau2);
        let ratios: Vec<(i64, f64)> = ss
            .par_iter()
            .map(|&s| (s, (layer.ln_abs_f_hat(s) + (s as f64 / scale).sqrt()).exp()))
            .collect();
        let (argmax, sup_ratio) = ratios
            .iter()
            .copied()
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        TailBand {
            lo: knee,
            hi: top,
            samples: ss.len(),
            sup_ratio,
            argmax,
        }
    });

    RegimeReport {
        m,
        tau2,
        epsilon: eps,
        zero,
        medium,
        tail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::default_bump;
    use crate::diophantine::ThetaSpec;
    use crate::layer::LayerParams;
    use crate::params::ApproxFunction;
    use std::sync::Arc;

    fn layer(m: u64) -> ScaleLayer {
        let p = ApproxFunction::power(2.7).unwrap();
        let params = LayerParams {
            psi1: p,
            psi2: p,
            epsilon: 0.05,
            theta: ThetaSpec::golden(),
            bump: Arc::new(default_bump()),
        };
        ScaleLayer::new(m, &params).unwrap()
    }

    #[test]
    fn classify_bands() {
        assert_eq!(Regime::classify(0, 64, 2.7, 0.05), Regime::Zero);
        assert_eq!(Regime::classify(-63, 64, 2.7, 0.05), Regime::Zero);
        assert_eq!(Regime::classify(64, 64, 2.7, 0.05), Regime::Medium);
        assert_eq!(Regime::classify(1 << 40, 64, 2.7, 0.05), Regime::Tail);
    }

    #[test]
    fn report_at_64() {
        let r = verify_regimes(&layer(64), &RegimeSampler::default());
        assert!(r.zero.exact);
        assert_eq!(r.zero.checked, 126);
        assert!(r.medium.samples >= 1000, "{}", r.medium.samples);
        assert!(r.medium.normalized_sup.is_finite() && r.medium.normalized_sup > 0.0);
        assert!(r.medium.divisor_bound_holds);
        let t = r.tail.unwrap();
        assert!(t.sup_ratio.is_finite() && t.samples > 100);
    }

    #[test]
    fn deterministic() {
        let l = layer(64);
        let s = RegimeSampler::default();
        assert_eq!(verify_regimes(&l, &s), verify_regimes(&l, &s));
    }
}
