//! The sampled path: `g_M` on a uniform grid of the torus, used only as an oracle
//! for the closed-form coefficients.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::ScaleLayer;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// `g_M` periodized onto `[0, 1)` and sampled at `N` nodes `j/N`.
pub fn layer_grid(layer: &ScaleLayer, n: usize) -> Result<GridFunction> {
    let narrowest = (0..layer.primes.len())
        .map(|i| layer.width(i))
        .fold(f64::INFINITY, f64::min);
    if narrowest * (n as f64) < 8.0 {
        return Err(Error::ResolutionTooCoarse {
            required: (8.0 / narrowest).ceil() as usize,
            got: n,
        });
    }
    let nf = n as f64;
    let half = layer.bump.support_half_width();
    let mut values = vec![0.0; n];
    for (i, &q) in layer.primes.iter().enumerate() {
        let w = layer.width(i);
        for r in 0..q {
            let x0 = layer.center(q, r)?;
            let lo = ((x0 - half * w) * nf).floor() as i64;
            let hi = ((x0 + half * w) * nf).ceil() as i64;
            for j in lo..=hi {
                let y = (j as f64 / nf - x0) / w;
                let v = layer.bump.eval(y);
                if v != 0.0 {
                    values[j.rem_euclid(n as i64) as usize] += v / w;
                }
            }
        }
    }
    Ok(GridFunction::new(0.0, 1.0 / nf, values))
}

/// Torus coefficients `(1/N) Σ_j v_j e(s j/N)` of a grid on `[0, 1)` for
/// `s = -s_max..=s_max`, index `s + s_max`.
pub fn grid_transform(grid: &GridFunction, s_max: usize) -> Result<Vec<Complex64>> {
    let n = grid.len();
    if 2 * s_max >= n {
        return Err(Error::ResolutionTooCoarse {
            required: 2 * s_max + 1,
            got: n,
        });
    }
    let mut buf: Vec<Complex64> = grid.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    Ok((-(s_max as i64)..=s_max as i64)
        .map(|s| buf[(-s).rem_euclid(n as i64) as usize] * inv)
        .collect())
}

/// `max_{|s| ≤ s_max} |ĝ(s) − grid coefficient| / ĝ(0)`.
pub fn grid_oracle_discrepancy(layer: &ScaleLayer, n: usize, s_max: usize) -> Result<f64> {
    let grid = layer_grid(layer, n)?;
    let dense = grid_transform(&grid, s_max)?;
    let worst = dense
        .iter()
        .enumerate()
        .map(|(k, d)| (layer.g_hat(k as i64 - s_max as i64) - d).norm())
        .fold(0.0, f64::max);
    Ok(worst / layer.g_hat_0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::default_bump;
    use crate::diophantine::ThetaSpec;
    use crate::layer::LayerParams;
    use crate::params::ApproxFunction;
    use std::sync::Arc;

    fn layer(m: u64, primes: Option<Vec<u64>>) -> ScaleLayer {
        let p = ApproxFunction::power(2.2).unwrap();
        let params = LayerParams {
            psi1: p,
            psi2: p,
            epsilon: 0.05,
            theta: ThetaSpec::Zero,
            bump: Arc::new(default_bump()),
        };
        match primes {
            Some(v) => ScaleLayer::with_primes(m, &params, v).unwrap(),
            None => ScaleLayer::new(m, &params).unwrap(),
        }
    }

    #[test]
    fn mass_matches_g_hat_0() {
        let l = layer(10, None);
        let g = layer_grid(&l, 1 << 16).unwrap();
        let mass = g.values.iter().sum::<f64>() * g.step;
        assert!((mass - l.g_hat_0).abs() < 1e-9 * l.g_hat_0, "{mass} vs {}", l.g_hat_0);
    }

    #[test]
    fn single_prime_has_three_bumps() {
        let l = layer(2, Some(vec![3]));
        let g = layer_grid(&l, 1 << 14).unwrap();
        let top = g.values.iter().copied().fold(0.0, f64::max);
        let mut runs = 0;
        let mut inside = false;
        for &v in &g.values {
            let on = v > 1e-9 * top;
            if on && !inside {
                runs += 1;
            }
            inside = on;
        }
        assert_eq!(runs, 3);
        assert!((g.values.iter().sum::<f64>() * g.step - 3.0).abs() < 1e-9);
    }

    #[test]
    fn too_coarse() {
        let l = layer(10, None);
        match layer_grid(&l, 1024) {
            Err(Error::ResolutionTooCoarse { required, .. }) => assert!(required > 1024),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_small() {
        let l = layer(10, None);
        let d = grid_oracle_discrepancy(&l, 1 << 17, 10_000).unwrap();
        assert!(d < 1e-6, "{d}");
    }
}
