//! Uniform grids in `s = ln r` and the scaled radial unknown `W = r^σ w`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn new(s_min: f64, s_max: f64, points: usize) -> Result<Self> {
        if !(s_min.is_finite() && s_max.is_finite() && s_min < s_max) {
            return Err(Error::Domain(format!("need s_min < s_max, got [{s_min}, {s_max}]")));
        }
        if points < 16 {
            return Err(Error::Domain(format!("grid needs at least 16 points, got {points}")));
        }
        Ok(Self { s_min, s_max, points })
    }

    /// Grid over radii `[r_min, r_max]`.
    pub fn from_radii(r_min: f64, r_max: f64, points: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) {
            return Err(Error::Domain(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        Self::new(r_min.ln(), r_max.ln(), points)
    }

    /// Grid over `[r_min, r_max]` whose spacing does not exceed `h`.
    pub fn with_spacing(r_min: f64, r_max: f64, h: f64) -> Result<Self> {
        let span = (r_max / r_min).ln();
        let points = (span / h).ceil() as usize + 1;
        Self::from_radii(r_min, r_max, points.max(16))
    }

    /// `[ln 10⁻⁶, ln 10⁴]` with 2048 nodes.
    pub fn standard() -> Self {
        Self::from_radii(1e-6, 1e4, 2048).expect("valid default grid")
    }

    pub fn h(&self) -> f64 {
        (self.s_max - self.s_min) / (self.points - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.h()
    }

    pub fn r(&self, i: usize) -> f64 {
        self.s(i).exp()
    }

    pub fn s_nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.s(i)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.r(i)).collect()
    }

    pub fn r_min(&self) -> f64 {
        self.s_min.exp()
    }

    pub fn r_max(&self) -> f64 {
        self.s_max.exp()
    }

    /// Trapezoid weights in `s`.
    pub fn trapezoid(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }

    /// Index of the node closest to radius `r` (clamped to the grid).
    pub fn nearest(&self, r: f64) -> usize {
        let x = (r.ln() - self.s_min) / self.h();
        x.round().clamp(0.0, (self.points - 1) as f64) as usize
    }
}

/// `W(s) = r^σ w(r)` sampled on a [`LogGrid`] at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: LogGrid,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub t: f64,
}

impl RadialField {
    pub fn new(grid: LogGrid, values: Vec<f64>, sigma: f64, t: f64) -> Result<Self> {
        if values.len() != grid.points {
            return Err(Error::Domain(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("W at node {i}")));
        }
        Ok(Self { grid, values, sigma, t })
    }

    pub fn zeros(grid: LogGrid, sigma: f64) -> Self {
        Self { grid, values: vec![0.0; grid.points], sigma, t: 0.0 }
    }

    /// Samples an unscaled radial function `w(r)` and stores `r^σ w(r)`.
    pub fn from_unscaled(grid: LogGrid, sigma: f64, w: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.points)
            .map(|i| {
                let s = grid.s(i);
                (sigma * s).exp() * w(s.exp())
            })
            .collect();
        Self::new(grid, values, sigma, 0.0)
    }

    /// `w(r_i) = e^{-σ s_i} W_i`.
    pub fn unscaled(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &w)| (-self.sigma * self.grid.s(i)).exp() * w)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_nodes() {
        let g = LogGrid::new(0.0, 1.0, 21).unwrap();
        assert!((g.h() - 0.05).abs() < 1e-15);
        assert!((g.s(20) - 1.0).abs() < 1e-15);
        assert_eq!(g.nearest(0.5f64.exp()), 10);
        assert!(LogGrid::new(1.0, 0.0, 32).is_err());
        assert!(LogGrid::new(0.0, 1.0, 8).is_err());
    }

    #[test]
    fn scaling_round_trip() {
        let g = LogGrid::from_radii(1e-2, 1e2, 64).unwrap();
        let f = RadialField::from_unscaled(g, 2.5, |r| (-r).exp()).unwrap();
        for (i, w) in f.unscaled().into_iter().enumerate() {
            let r = g.r(i);
            assert!((w - (-r).exp()).abs() <= 1e-12 * (-r).exp());
        }
    }

    #[test]
    fn rejects_nan() {
        let g = LogGrid::new(0.0, 1.0, 16).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(RadialField::new(g, v, 0.0, 0.0), Err(Error::NonFinite(_))));
    }
}
