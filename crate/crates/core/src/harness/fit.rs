//! Least-squares power laws in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual in `ln` units.
    pub rms_residual: f64,
    pub n_samples: usize,
}

impl RateFit {
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

/// Fits `ln value = intercept + slope ln t` over samples with `t` in `window`.
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    let tol = 1e-12;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo * (1.0 - tol) && *t <= hi * (1.0 + tol))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Degenerate(format!(
            "{} samples in [{lo:e}, {hi:e}]; at least 4 needed",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(t, v)| !(*v > 0.0) || !(*t > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-positive sample {v:e} at t = {t:e}")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all samples at one time".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit { slope, intercept, window, rms_residual: (rss / k).sqrt(), n_samples: pts.len() })
}

/// `n` points spaced geometrically over `[lo, hi]`, ends included.
pub fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    out[n - 1] = hi;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = log_times(10.0, 1e4, 20).into_iter().map(|t| (t, 7.0 * t.powf(-2.5))).collect();
        let f = fit_rate(&s, (10.0, 1e4)).unwrap();
        assert!((f.slope + 2.5).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
        assert_eq!(f.n_samples, 20);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Vec<(f64, f64)> = log_times(10.0, 1e4, 40)
            .into_iter()
            .map(|t| (t, t.powf(-1.0 / 3.0) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0))))
            .collect();
        let f = fit_rate(&s, (10.0, 1e4)).unwrap();
        assert!((f.slope + 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn too_few_or_nonpositive() {
        let s = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.3)];
        assert!(matches!(fit_rate(&s, (0.5, 5.0)), Err(Error::Degenerate(_))));
        let s = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.1)];
        assert!(matches!(fit_rate(&s, (0.5, 5.0)), Err(Error::Degenerate(_))));
    }
}
