//! The singular state `v_∞` and the regular family `ψ_k`.
//!
//! Radial steady states are integrated in Emden–Fowler form: with `s = ln r` and
//! `ψ = r^{-m} Y(s)`, the radial equation becomes
//! `Y'' + a Y' - L^{p-1} Y + Y^p = 0` with `a = n - 2 - 2m`, whose constant
//! solution `Y ≡ L` is `v_∞`. The integrator works on the gap `D = L - Y`, so the
//! sign of `v_∞ - ψ` is read off directly even where the two agree to many digits.
//! Scaling `ψ_k(r) = k ψ_1(k^{1/m} r)` is a shift in `s`.

use ode_solvers::{Dopri5, System, Vector2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::nonlinear::convex_remainder;

/// Radius where the series start hands over to the integrator.
pub const SERIES_RADIUS: f64 = 1e-3;

/// Sampled radial profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(Error::Domain("profile needs at least two matching samples".into()));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("profile radii must be positive and strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("profile value {} at index {i} is not a finite nonnegative number", values[i])));
        }
        Ok(Self { radii, values })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }

    pub fn positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }
}

/// `L r^{-2/(p-1)}`.
pub fn v_infinity(r: f64, params: &ProblemParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("v_∞ is singular at r = {r}")));
    }
    Ok(params.prefactor()? * r.powf(-params.m()))
}

/// Residual of `ψ'' + (n-1)/r ψ' + ψ^p` for `ψ = v_∞`, relative to `ψ''`.
pub fn v_infinity_residual(r: f64, params: &ProblemParams) -> Result<f64> {
    let l = params.prefactor()?;
    let m = params.m();
    let n = params.n as f64;
    let v = l * r.powf(-m);
    let d1 = -m * v / r;
    let d2 = m * (m + 1.0) * v / (r * r);
    Ok((d2 + (n - 1.0) / r * d1 + v.powf(params.p)).abs() / d2.abs())
}

struct GapSystem {
    drift: f64,
    stiffness: f64,
    l: f64,
    lp: f64,
    p: f64,
}

impl System<f64, Vector2<f64>> for GapSystem {
    fn system(&self, _s: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        dy[0] = y[1];
        dy[1] = -self.drift * y[1] - self.stiffness * y[0] + self.lp * convex_remainder(y[0] / self.l, self.p);
    }
}

/// Regular steady state `ψ` with `ψ(0) = k`, stored as the Emden–Fowler gap.
#[derive(Debug, Clone, Serialize)]
pub struct SteadyProfile {
    pub params: ProblemParams,
    pub k: f64,
    /// Nodes in `s = ln r`.
    pub s: Vec<f64>,
    /// `L - r^m ψ(r)` at the nodes.
    pub gap: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
    l: f64,
}

/// Integrates the radial steady equation from `ψ(0) = k` out to `r_max`.
///
/// `ds` is the output spacing in `ln r`; `tol` the relative tolerance of the
/// embedded Runge–Kutta pair.
pub fn integrate_psi(params: &ProblemParams, k: f64, r_max: f64, tol: f64, ds: f64) -> Result<SteadyProfile> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    if params.n < 3 {
        return Err(Error::Domain(format!("dimension {} < 3", params.n)));
    }
    if !(r_max > SERIES_RADIUS * 10.0) {
        return Err(Error::Domain(format!("r_max = {r_max} too small")));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::Domain(format!("tol = {tol} outside (0, 1e-4]")));
    }
    let n = params.n as f64;
    let p = params.p;
    let m = params.m();
    // Constant solution of the Emden–Fowler equation; valid whenever n - 2 - m > 0.
    let c1 = m * (n - 2.0 - m);
    if !(c1 > 0.0) {
        return Err(Error::Domain(format!("no singular state for p = {p} ≤ n/(n-2)")));
    }
    let l = c1.powf(1.0 / (p - 1.0));
    let r0 = SERIES_RADIUS;
    let kp = k.powf(p);
    let psi0 = k - kp * r0 * r0 / (2.0 * n) + p * k.powf(2.0 * p - 1.0) * r0.powi(4) / (8.0 * n * (n + 2.0));
    let dpsi0 = -kp * r0 / n + p * k.powf(2.0 * p - 1.0) * r0.powi(3) / (2.0 * n * (n + 2.0));
    let rm = r0.powf(m);
    let y0 = rm * psi0;
    let dy0 = rm * (m * psi0 + r0 * dpsi0);
    let system = GapSystem { drift: n - 2.0 - 2.0 * m, stiffness: (p - 1.0) * c1, l, lp: l.powf(p), p };
    let s0 = r0.ln();
    let s1 = r_max.ln();
    // The system is autonomous; integrating in s - s0 keeps the independent
    // variable nonnegative, which the dense output of the solver requires.
    let mut solver = Dopri5::new(system, 0.0, s1 - s0, ds, Vector2::new(l - y0, -dy0), tol, tol * 1e-22);
    solver
        .integrate()
        .map_err(|e| Error::Solve(format!("steady-state integration failed: {e:?}")))?;
    let mut s = Vec::with_capacity(solver.x_out().len());
    let mut gap = Vec::with_capacity(s.capacity());
    for (x, y) in solver.x_out().iter().zip(solver.y_out()) {
        let x = x + s0;
        if s.last().is_some_and(|&last| x <= last) {
            continue;
        }
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFinite(format!("steady state at r = {:e}", x.exp())));
        }
        if y[0] >= l {
            return Err(Error::Blowdown { radius: x.exp() });
        }
        s.push(x);
        gap.push(y[0]);
    }
    let slopes = fritsch_carlson_slopes(&s, &gap);
    Ok(SteadyProfile { params: *params, k, s, gap, slopes, l })
}

/// `ψ_1` on `[10⁻³, r_max]`.
pub fn integrate_psi1(params: &ProblemParams, r_max: f64, tol: f64) -> Result<SteadyProfile> {
    if params.p < params.p_sobolev() {
        return Err(Error::Domain(format!(
            "p = {} below the Sobolev exponent {}: no global positive profile",
            params.p,
            params.p_sobolev()
        )));
    }
    if r_max < 10.0 {
        return Err(Error::Domain(format!("r_max = {r_max} must be at least 10")));
    }
    integrate_psi(params, 1.0, r_max, tol, 5e-3)
}

impl SteadyProfile {
    pub fn prefactor(&self) -> f64 {
        self.l
    }

    pub fn r_min(&self) -> f64 {
        self.s[0].exp()
    }

    pub fn r_max(&self) -> f64 {
        self.s[self.s.len() - 1].exp()
    }

    /// `L - r^m ψ(r)` by monotone cubic interpolation; the series is used below the first node.
    pub fn gap_at(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius {r} must be positive")));
        }
        let x = r.ln();
        let last = self.s.len() - 1;
        if x > self.s[last] * (1.0 + 1e-14) + 1e-14 {
            return Err(Error::Range(format!("r = {r:e} beyond computed range {:e}", self.r_max())));
        }
        if x <= self.s[0] {
            let n = self.params.n as f64;
            let p = self.params.p;
            let k = self.k;
            let psi = k - k.powf(p) * r * r / (2.0 * n)
                + p * k.powf(2.0 * p - 1.0) * r.powi(4) / (8.0 * n * (n + 2.0));
            return Ok(self.l - r.powf(self.params.m()) * psi);
        }
        let j = match self.s.partition_point(|&v| v <= x) {
            0 => 0,
            i if i > last => last - 1,
            i => i - 1,
        };
        Ok(hermite(self.s[j], self.s[j + 1], self.gap[j], self.gap[j + 1], self.slopes[j], self.slopes[j + 1], x))
    }

    /// `ψ(r)` for this profile's own `k`.
    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(r.powf(-self.params.m()) * (self.l - self.gap_at(r)?))
    }

    /// `ψ_k(r) = k ψ(k^{1/m} r)` relative to this profile, which must have `k = 1`.
    pub fn psi_k(&self, k: f64, r: f64) -> Result<f64> {
        Ok(r.powf(-self.params.m()) * (self.l - self.gap_k(k, r)?))
    }

    /// Gap of `ψ_k`: `L - r^m ψ_k(r)`.
    pub fn gap_k(&self, k: f64, r: f64) -> Result<f64> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("k = {k} must be positive")));
        }
        let scale = (k / self.k).powf(1.0 / self.params.m());
        self.gap_at(scale * r)
    }

    /// `v_∞(r) - ψ(r)`.
    pub fn distance_to_singular(&self, r: f64) -> Result<f64> {
        Ok(r.powf(-self.params.m()) * self.gap_at(r)?)
    }

    /// Profile sampled at the integrator's nodes.
    pub fn to_profile(&self) -> Result<RadialProfile> {
        let m = self.params.m();
        let radii: Vec<f64> = self.s.iter().map(|s| s.exp()).collect();
        let values = radii.iter().zip(&self.gap).map(|(r, d)| r.powf(-m) * (self.l - d)).collect();
        RadialProfile::new(radii, values)
    }

    /// Radii where `ψ - v_∞` changes sign, refined by bisection to `tol` in `r`.
    pub fn crossings(&self, tol: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for j in 0..self.gap.len() - 1 {
            let (a, b) = (self.gap[j], self.gap[j + 1]);
            if a == 0.0 {
                out.push(self.s[j].exp());
                continue;
            }
            if a * b >= 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (self.s[j].exp(), self.s[j + 1].exp());
            let mut f_lo = a;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let f_mid = self.gap_at(mid).unwrap_or(f_lo);
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if f_mid * f_lo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    f_lo = f_mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }
}

/// Ordering of a regular steady state relative to `v_∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateSummary {
    pub n: u32,
    pub p: f64,
    pub k: f64,
    pub r_max: f64,
    pub nodes: usize,
    pub positive: bool,
    pub strictly_decreasing: bool,
    pub below_v_infinity: bool,
    pub crossings: Vec<f64>,
    pub min_gap: f64,
}

pub fn summarize(profile: &SteadyProfile) -> Result<SteadyStateSummary> {
    let sampled = profile.to_profile()?;
    Ok(SteadyStateSummary {
        n: profile.params.n,
        p: profile.params.p,
        k: profile.k,
        r_max: profile.r_max(),
        nodes: profile.s.len(),
        positive: sampled.positive(),
        strictly_decreasing: sampled.strictly_decreasing(),
        below_v_infinity: profile.gap.iter().all(|&d| d > 0.0),
        crossings: profile.crossings(1e-8),
        min_gap: profile.gap.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Fritsch–Carlson slopes for monotone cubic Hermite interpolation.
fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let a = d[i] / delta[i];
        let b = d[i + 1] / delta[i];
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            d[i] = tau * a * delta[i];
            d[i + 1] = tau * b * delta[i];
        }
    }
    d
}

fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}
