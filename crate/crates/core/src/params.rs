//! Approximation functions and the exponent algebra tying the orders `τ₁, τ₂`
//! and the shift exponent `γ` to the decay rate `δ` and dimension bound `α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fit_line;

/// Shape of an approximation function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `q^{-τ}`
    Power,
    /// `q^{-τ} (log q)^a`
    PowerLog { log_power: f64 },
}

/// A positive nonincreasing `ψ(q) = A q^{-τ} (log q)^a` on integers `q ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxFunction {
    pub family: Family,
    pub tau: f64,
    pub prefactor: f64,
}

impl ApproxFunction {
    pub fn power(tau: f64) -> Result<Self> {
        Self::new(Family::Power, tau, 1.0)
    }

    pub fn power_log(tau: f64, log_power: f64) -> Result<Self> {
        Self::new(Family::PowerLog { log_power }, tau, 1.0)
    }

    pub fn new(family: Family, tau: f64, prefactor: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidInput(format!("order tau must be positive, got {tau}")));
        }
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::InvalidInput(format!(
                "prefactor must be positive, got {prefactor}"
            )));
        }
        if let Family::PowerLog { log_power } = family {
            if !log_power.is_finite() {
                return Err(Error::InvalidInput("log power must be finite".into()));
            }
            // d/dq log ψ = (a / log q - τ) / q, which must be ≤ 0 from q = 2 on.
            if log_power > tau * 2f64.ln() {
                return Err(Error::InvalidInput(format!(
                    "q^-{tau} (log q)^{log_power} is not decreasing from q = 2"
                )));
            }
        }
        Ok(Self {
            family,
            tau,
            prefactor,
        })
    }

    /// `ψ(q)` for `q ≥ 2`.
    pub fn eval(&self, q: u64) -> Result<f64> {
        if q < 2 {
            return Err(Error::Domain(format!("psi is defined for q >= 2, got {q}")));
        }
        Ok(self.at(q as f64))
    }

    /// Unchecked evaluation at a real argument; callers guarantee `q ≥ 2`.
    #[inline]
    pub fn at(&self, q: f64) -> f64 {
        self.ln_at(q).exp()
    }

    #[inline]
    pub fn ln_at(&self, q: f64) -> f64 {
        let l = q.ln();
        let base = self.prefactor.ln() - self.tau * l;
        match self.family {
            Family::Power => base,
            Family::PowerLog { log_power } => base + log_power * l.ln(),
        }
    }

    /// The order `λ(ψ) = -lim log ψ(q) / log q`, exact for the family.
    pub fn order(&self) -> f64 {
        self.tau
    }

    /// Least-squares estimate of the order from samples over `[q_lo, q_hi]`.
    ///
    /// `log ψ` is regressed on both `log q` and `log log q`; a plain log-log slope
    /// is biased by the slowly varying factor over any finite range.
    pub fn fit_order(&self, q_lo: f64, q_hi: f64, samples: usize) -> Result<f64> {
        if !(q_lo >= 2.0 && q_hi > q_lo) || samples < 3 {
            return Err(Error::InvalidInput("need q_hi > q_lo >= 2 and 3 samples".into()));
        }
        let qs = crate::numeric::log_space(q_lo, q_hi, samples);
        let ys: Vec<f64> = qs.iter().map(|&q| self.ln_at(q)).collect();
        let x1: Vec<f64> = qs.iter().map(|q| q.ln()).collect();
        let x2: Vec<f64> = qs.iter().map(|q| q.ln().ln()).collect();
        let slope = match self.family {
            Family::Power => {
                fit_line(&x1, &ys)
                    .ok_or_else(|| Error::InvalidInput("degenerate fit".into()))?
                    .slope
            }
            Family::PowerLog { .. } => two_regressor_slope(&x1, &x2, &ys),
        };
        Ok(-slope)
    }
}

/// Coefficient of `x1` in the least-squares fit `y ≈ c + b1 x1 + b2 x2`.
fn two_regressor_slope(x1: &[f64], x2: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (m1, m2, my) = (mean(x1), mean(x2), mean(y));
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let (a, b, c) = (x1[i] - m1, x2[i] - m2, y[i] - my);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
    }
    (s1y * s22 - s2y * s12) / (s11 * s22 - s12 * s12)
}

/// Threshold on `τ` above which `β(τ) > τ` for the given `γ`.
pub fn tau_threshold(gamma: f64) -> f64 {
    let b = 2.0 + gamma * gamma;
    (b + (b * b - 4.0).sqrt()) / 2.0
}

/// `c_M = M^{-ε/100}`.
pub fn c_of_m(m: u64, epsilon: f64) -> f64 {
    (m as f64).powf(-epsilon / 100.0)
}

/// All exponents derived from `(γ, τ₁, τ₂, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub beta_eps: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl ExponentSet {
    /// Computes every constant without judging admissibility.
    pub fn compute(gamma: f64, tau1: f64, tau2: f64, epsilon: f64) -> Self {
        let beta = (tau1 - 1.0).powi(2) / (gamma * gamma);
        let beta_eps = beta - epsilon;
        let delta = (beta_eps * (1.0 - epsilon) - tau2 * (1.0 + epsilon).powi(2))
            / (tau2 * (beta_eps - 1.0) * (1.0 + epsilon));
        let alpha = 2.0 * (beta - tau2) / (tau2 * (beta - 1.0));
        Self {
            gamma,
            tau1,
            tau2,
            epsilon,
            beta,
            beta_eps,
            delta,
            alpha,
        }
    }

    /// The first failing admissibility inequality, if any.
    pub fn violated_condition(&self) -> Option<(String, String)> {
        if self.beta_eps <= self.tau2 {
            return Some((
                "beta_eps > tau2".into(),
                format!("beta_eps = {} <= tau2 = {}", self.beta_eps, self.tau2),
            ));
        }
        if self.delta - self.epsilon <= 0.0 {
            return Some((
                "delta - epsilon > 0".into(),
                format!("delta = {} <= epsilon = {}", self.delta, self.epsilon),
            ));
        }
        None
    }

    pub fn is_admissible(&self) -> bool {
        self.violated_condition().is_none()
    }

    pub fn report(&self) -> ExponentReport {
        let violated = self.violated_condition();
        ExponentReport {
            gamma: self.gamma,
            tau1: self.tau1,
            tau2: self.tau2,
            epsilon: self.epsilon,
            beta: self.beta,
            beta_eps: self.beta_eps,
            delta: self.delta,
            alpha: self.alpha,
            tau_threshold: tau_threshold(self.gamma),
            admissible: violated.is_none(),
            violated_condition: violated.map(|v| v.0),
        }
    }
}

/// Validates preconditions and admissibility and returns the derived constants.
pub fn derive_exponents(gamma: f64, tau1: f64, tau2: f64, epsilon: f64) -> Result<ExponentSet> {
    if !(gamma >= 1.0) {
        return Err(Error::InvalidInput(format!("gamma must be >= 1, got {gamma}")));
    }
    if !(tau2 >= 2.0 && tau1 >= tau2) {
        return Err(Error::InvalidInput(format!(
            "need tau1 >= tau2 >= 2, got tau1 = {tau1}, tau2 = {tau2}"
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let set = ExponentSet::compute(gamma, tau1, tau2, epsilon);
    match set.violated_condition() {
        Some((condition, detail)) => Err(Error::Inadmissible { condition, detail }),
        None => Ok(set),
    }
}

/// Serializable summary of an exponent set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub gamma: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub beta_eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub tau_threshold: f64,
    pub admissible: bool,
    pub violated_condition: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psi_values() {
        let p3 = ApproxFunction::power(3.0).unwrap();
        assert!((p3.eval(10).unwrap() - 1e-3).abs() < 1e-18);
        let p2 = ApproxFunction::power(2.0).unwrap();
        assert!((p2.eval(1000).unwrap() - 1e-6).abs() < 1e-20);
        // mpmath, 40 digits
        let v = ApproxFunction::power(2.7).unwrap().eval(128).unwrap();
        assert!((v / 2.044245648453317955e-6 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psi_domain() {
        let p = ApproxFunction::power(3.0).unwrap();
        assert!(matches!(p.eval(1), Err(Error::Domain(_))));
        assert!(matches!(p.eval(0), Err(Error::Domain(_))));
    }

    #[test]
    fn orders() {
        assert_eq!(ApproxFunction::power(3.0).unwrap().order(), 3.0);
        let pl = ApproxFunction::power_log(2.7, 1.0).unwrap();
        assert_eq!(pl.order(), 2.7);
        let fitted = pl.fit_order(1e3, 1e6, 200).unwrap();
        assert!((fitted - 2.7).abs() < 0.05, "{fitted}");
        let fitted = ApproxFunction::power(3.0).unwrap().fit_order(1e3, 1e6, 50).unwrap();
        assert!((fitted - 3.0).abs() < 1e-10);
    }

    #[test]
    fn homogeneous_tau3() {
        let e = ExponentSet::compute(1.0, 3.0, 3.0, 0.0);
        assert_eq!(e.beta, 4.0);
        assert_eq!(e.alpha, 2.0 / 9.0);
        assert!((e.delta - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn below_threshold_is_inadmissible() {
        let err = derive_exponents(1.0, 2.5, 2.5, 0.05).unwrap_err();
        match err {
            Error::Inadmissible { condition, .. } => assert_eq!(condition, "beta_eps > tau2"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn delta_too_small_is_named() {
        // At tau = 3 the margin delta - epsilon closes near epsilon = 0.048.
        let err = derive_exponents(1.0, 3.0, 3.0, 0.05).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { ref condition, .. } if condition == "delta - epsilon > 0"));
        let ok = derive_exponents(1.0, 3.0, 3.0, 0.02).unwrap();
        assert!((ok.delta - 0.085449839891213756).abs() < 1e-15);
    }

    #[test]
    fn gamma_two_tau_eight() {
        let e = derive_exponents(2.0, 8.0, 8.0, 0.01).unwrap();
        assert_eq!(e.beta, 12.25);
        assert!((e.alpha - 0.094444444444444444).abs() < 1e-15);
        assert!((tau_threshold(2.0) - 5.8284271247461901).abs() < 1e-14);
        // delta falls below epsilon well before 0.05 here
        assert!(derive_exponents(2.0, 8.0, 8.0, 0.05).is_err());
    }

    #[test]
    fn desk_preset() {
        let e = derive_exponents(1.0, 2.634, 2.0, 0.05).unwrap();
        assert!((e.delta - 0.083470285906648376).abs() < 1e-14);
        assert!((e.beta_eps - 2.619956).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_fixed_point() {
        let t = tau_threshold(1.0);
        assert!((t - 2.6180339887498948).abs() < 1e-15);
        let b = ExponentSet::compute(1.0, t, t, 0.0).beta;
        assert!((b - t).abs() < 1e-12);
    }

    #[test]
    fn delta_limit() {
        let e = ExponentSet::compute(1.0, 3.0, 3.0, 1e-6);
        assert!((e.delta - e.alpha / 2.0).abs() < 1e-4);
        assert!((e.delta - 0.11110981481549383).abs() < 1e-13);
    }

    #[test]
    fn c_values() {
        assert!((c_of_m(10_000, 0.1) - 0.99083194489276757).abs() < 1e-15);
        assert_eq!(c_of_m(2, 100.0), 0.5);
        assert!((c_of_m(128, 1.0) - 0.95263799804393739).abs() < 1e-15);
    }

    #[test]
    fn power_log_must_decrease() {
        assert!(ApproxFunction::power_log(2.0, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn psi_positive_nonincreasing(tau in 0.5f64..6.0, a in -3.0f64..1.0, q in 2u64..1_000_000) {
            prop_assume!(a <= tau * 2f64.ln());
            let f = ApproxFunction::power_log(tau, a).unwrap();
            let (x, y) = (f.eval(q).unwrap(), f.eval(q + 1).unwrap());
            prop_assert!(x > 0.0 && y <= x);
        }

        #[test]
        fn beta_increases_with_tau1(g in 1.0f64..3.0, t in 2.0f64..9.0, dt in 1e-3f64..1.0, eps in 1e-4f64..0.2) {
            let a = ExponentSet::compute(g, t, 2.0, eps);
            let b = ExponentSet::compute(g, t + dt, 2.0, eps);
            prop_assert!(b.beta > a.beta && b.beta_eps > a.beta_eps);
        }

        #[test]
        fn delta_decreases_in_eps(e1 in 1e-6f64..0.04, de in 1e-6f64..0.01) {
            let a = ExponentSet::compute(1.0, 3.0, 3.0, e1);
            let b = ExponentSet::compute(1.0, 3.0, 3.0, e1 + de);
            prop_assert!(b.delta < a.delta);
        }
    }
}
