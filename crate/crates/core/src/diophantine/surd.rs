//! Exact arithmetic on quadratic irrationals `(p + r√d) / s`.

use num_integer::{Integer, Roots};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadSurd {
    pub p: i128,
    pub r: i128,
    pub d: i128,
    pub s: i128,
}

fn overflow(what: &str) -> Error {
    Error::PrecisionExhausted(format!("i128 overflow in {what}"))
}

/// `⌊√n⌋` for `n ≥ 0`.
pub fn isqrt(n: i128) -> i128 {
    debug_assert!(n >= 0);
    (n as u128).sqrt() as i128
}

impl QuadSurd {
    pub fn new(p: i128, r: i128, d: i128, s: i128) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidInput("surd denominator is zero".into()));
        }
        if d <= 1 {
            return Err(Error::InvalidInput(format!("surd radicand must exceed 1, got {d}")));
        }
        let t = isqrt(d);
        if t * t == d {
            return Err(Error::InvalidInput(format!("{d} is a perfect square")));
        }
        Ok(Self { p, r, d, s })
    }

    /// `(√5 − 1)/2`
    pub fn golden_conjugate() -> Self {
        Self { p: -1, r: 1, d: 5, s: 2 }
    }

    /// `√2 − 1`
    pub fn silver_conjugate() -> Self {
        Self { p: -1, r: 1, d: 2, s: 1 }
    }

    pub fn mul_int(&self, m: i128) -> Result<Self> {
        Ok(Self {
            p: self.p.checked_mul(m).ok_or_else(|| overflow("mul_int"))?,
            r: self.r.checked_mul(m).ok_or_else(|| overflow("mul_int"))?,
            ..*self
        })
    }

    /// `k − self` for an integer `k`.
    pub fn sub_from_int(&self, k: i128) -> Result<Self> {
        let ks = k.checked_mul(self.s).ok_or_else(|| overflow("sub_from_int"))?;
        Ok(Self {
            p: ks.checked_sub(self.p).ok_or_else(|| overflow("sub_from_int"))?,
            r: -self.r,
            ..*self
        })
    }

    pub fn add_int(&self, k: i128) -> Result<Self> {
        let ks = k.checked_mul(self.s).ok_or_else(|| overflow("add_int"))?;
        Ok(Self {
            p: self.p.checked_add(ks).ok_or_else(|| overflow("add_int"))?,
            ..*self
        })
    }

    /// Nearest binary64 value. When `p` and `r√d` nearly cancel the numerator is
    /// rewritten as `(p² − r²d)/(p − r√d)`, whose top is an exact integer.
    pub fn to_f64(&self) -> Result<f64> {
        let root = (self.d as f64).sqrt();
        let (p, r, s) = (self.p, self.r, self.s);
        if p == 0 || r == 0 || (p > 0) == (r > 0) {
            return Ok((p as f64 + r as f64 * root) / s as f64);
        }
        let p2 = p.checked_mul(p).ok_or_else(|| overflow("to_f64"))?;
        let r2d = r
            .checked_mul(r)
            .and_then(|x| x.checked_mul(self.d))
            .ok_or_else(|| overflow("to_f64"))?;
        let num = p2 - r2d;
        let den = p as f64 - r as f64 * root;
        Ok(num as f64 / den / s as f64)
    }

    pub fn floor(&self) -> Result<i128> {
        if self.r == 0 {
            return Ok(Integer::div_floor(&self.p, &self.s));
        }
        let dd = self
            .r
            .checked_mul(self.r)
            .and_then(|x| x.checked_mul(self.d))
            .ok_or_else(|| overflow("floor"))?;
        // Rewrite as (P + √D)/Q.
        let (pp, qq) = if self.r > 0 {
            (self.p, self.s)
        } else {
            (-self.p, -self.s)
        };
        let t = isqrt(dd);
        let exact = t * t == dd;
        let top = if qq > 0 || exact { pp + t } else { pp + t + 1 };
        Ok(Integer::div_floor(&top, &qq))
    }

    /// Fractional part in `[0, 1)`.
    pub fn frac(&self) -> Result<f64> {
        let f = self.floor()?;
        self.add_int(-f)?.to_f64()
    }

    /// Distance to the nearest integer, accurate to a few ulps.
    pub fn dist_to_int(&self) -> Result<f64> {
        let f = self.floor()?;
        let lower = self.add_int(-f)?.to_f64()?;
        let upper = self.sub_from_int(f + 1)?.to_f64()?;
        Ok(lower.min(upper).max(0.0))
    }

    /// Partial quotients of the continued fraction, starting with the integer part.
    pub fn partial_quotients(&self, n: usize) -> Result<Vec<i128>> {
        // Bring to (P + √D)/Q with Q | D − P², which keeps the recurrence integral.
        let d = self
            .r
            .checked_mul(self.r)
            .and_then(|x| x.checked_mul(self.d))
            .ok_or_else(|| overflow("partial_quotients"))?;
        let (mut pp, mut qq) = if self.r > 0 {
            (self.p, self.s)
        } else {
            (-self.p, -self.s)
        };
        let mut dd = d;
        if (dd - pp * pp) % qq != 0 {
            let a = qq.abs();
            pp = pp.checked_mul(a).ok_or_else(|| overflow("partial_quotients"))?;
            dd = dd
                .checked_mul(a * a)
                .ok_or_else(|| overflow("partial_quotients"))?;
            qq = qq.checked_mul(a).ok_or_else(|| overflow("partial_quotients"))?;
        }
        let t = isqrt(dd);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let top = if qq > 0 { pp + t } else { pp + t + 1 };
            let a = Integer::div_floor(&top, &qq);
            out.push(a);
            pp = a * qq - pp;
            qq = (dd - pp * pp) / qq;
        }
        Ok(out)
    }
}
