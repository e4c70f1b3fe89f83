//! Uniformly sampled real functions, used as cross-check oracles.

use serde::Serialize;

use crate::numeric::compensated_sum;

/// Samples `values[j] = f(start + j·step)`, `j = 0..n`, of a function vanishing
/// outside the sampled interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        assert!(step > 0.0 && !values.is_empty());
        Self {
            start,
            step,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.start + self.step * j as f64
    }

    /// Piecewise-linear interpolant, zero outside the grid.
    pub fn interp(&self, x: f64) -> f64 {
        let t = (x - self.start) / self.step;
        if t < 0.0 || t > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let j = (t.floor() as usize).min(self.values.len() - 1);
        if j + 1 == self.values.len() {
            return self.values[j];
        }
        let w = t - j as f64;
        self.values[j] * (1.0 - w) + self.values[j + 1] * w
    }

    pub fn trapezoid_mass(&self) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return 0.0;
        }
        let inner = compensated_sum(self.values[1..n - 1].iter().copied());
        self.step * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// `(first, last)` node positions carrying a nonzero value.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|&v| v != 0.0)?;
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((self.node(first), self.node(last)))
    }

    /// The same samples on the affinely mapped domain `x ↦ a + b x`, rescaled to keep
    /// the mass.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        assert!(b > 0.0);
        Self {
            start: a + b * self.start,
            step: b * self.step,
            values: self.values.iter().map(|v| v / b).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interp_and_mass() {
        let g = GridFunction::new(0.0, 0.5, vec![0.0, 2.0, 0.0]);
        assert_eq!(g.interp(0.25), 1.0);
        assert_eq!(g.interp(-0.1), 0.0);
        assert_eq!(g.interp(1.0), 0.0);
        assert_eq!(g.trapezoid_mass(), 1.0);
        let h = g.affine(0.3, 0.1);
        assert!((h.trapezoid_mass() - 1.0).abs() < 1e-15);
        assert!((h.end() - 0.4).abs() < 1e-15);
        assert_eq!(h.support(), Some((h.node(1), h.node(1))));
    }
}
