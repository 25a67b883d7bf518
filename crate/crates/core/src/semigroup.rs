//! The linear flow `e^{-tH}`, `H = -Δ - λ|x|^{-2}`, its weights and weighted norms.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{LogGrid, RadialField};
use crate::nonlinear::InitialDataSpec;
use crate::radial_pde::{evolve, NoReaction, RadialOperator, RightBoundary, SolverSetup, Trajectory};

/// `φ_σ(r,t) = (√t/r)^σ` inside the parabolic ball, `1` outside.
pub fn phi(r: f64, t: f64, sigma: f64) -> f64 {
    let root = t.sqrt();
    if r <= root {
        (root / r).powf(sigma)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightEvaluator {
    pub sigma: f64,
}

impl WeightEvaluator {
    pub fn new(sigma: f64) -> Self {
        Self { sigma }
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        phi(r, t, self.sigma)
    }

    /// `φ_σ^{-1}(r_i,t) w(r_i)` for a scaled field, without forming `r^{-σ}`.
    pub fn reduce(&self, field: &RadialField, i: usize, t: f64) -> f64 {
        let s = field.grid.s(i);
        let half_log_t = 0.5 * t.ln();
        let w_scaled = field.values[i];
        // w = e^{-σ' s} W with σ' the field's scaling exponent.
        if s <= half_log_t {
            w_scaled * ((self.sigma - field.sigma) * s - self.sigma * half_log_t).exp()
        } else {
            w_scaled * (-field.sigma * s).exp()
        }
    }
}

/// `q ∈ [1, ∞]` and the time at which the weight is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormSpec {
    pub q: f64,
    pub t: f64,
}

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: u32) -> f64 {
    // 2π^{n/2} / Γ(n/2), with Γ(n/2) built by the half-integer recursion.
    let even = n.is_multiple_of(2);
    let mut gamma = if even { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if even { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma
}

/// Fraction of the integral allowed at an end of the grid before the integrand is
/// declared non-integrable there.
const END_FRACTION: f64 = 1e-6;

/// `‖f‖_{q,φ_σ(t)} = (∫ |f φ^{-1}|^q φ² dx)^{1/q}`, or `sup φ^{-1}|f|` for `q = ∞`.
pub fn weighted_norm(field: &RadialField, n: u32, sigma: f64, spec: WeightedNormSpec) -> Result<f64> {
    let WeightedNormSpec { q, t } = spec;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("q = {q} must be ≥ 1")));
    }
    let weight = WeightEvaluator::new(sigma);
    if q.is_infinite() {
        return Ok((0..field.grid.points).fold(0.0, |m, i| m.max(weight.reduce(field, i, t).abs())));
    }
    let grid = &field.grid;
    let half_log_t = 0.5 * t.ln();
    let nf = n as f64;
    let trap = grid.trapezoid();
    let mut terms = Vec::with_capacity(grid.points);
    for i in 0..grid.points {
        let w = field.values[i].abs();
        if w == 0.0 {
            terms.push(0.0);
            continue;
        }
        let s = grid.s(i);
        let ln_phi = if s <= half_log_t { sigma * (half_log_t - s) } else { 0.0 };
        let ln_w = w.ln() - field.sigma * s;
        // |w φ^{-1}|^q φ² r^n in ds
        terms.push((q * (ln_w - ln_phi) + 2.0 * ln_phi + nf * s).exp());
    }
    let total: f64 = terms.iter().zip(&trap).map(|(a, b)| a * b).sum();
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("weighted {q}-norm integrand overflows")));
    }
    if total > 0.0 {
        let ends = terms[0].max(terms[grid.points - 1]);
        if ends > END_FRACTION * total {
            return Err(Error::NonFinite(format!(
                "weighted {q}-norm integrand is not integrable on [{:e}, {:e}]",
                grid.r_min(),
                grid.r_max()
            )));
        }
    }
    Ok((sphere_area(n) * total).powf(1.0 / q))
}

/// Plain radial `L²` norm of `w`.
pub fn l2_norm(field: &RadialField, n: u32) -> f64 {
    let grid = &field.grid;
    let total: f64 = grid
        .trapezoid()
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let s = grid.s(i);
            h * field.values[i].powi(2) * ((n as f64 - 2.0 * field.sigma) * s).exp()
        })
        .sum();
    (sphere_area(n) * total).sqrt()
}

/// Linear operator `Δ + λ/r²` described by `n` and `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyFlow {
    pub n: u32,
    pub sigma: f64,
    /// Exponent on which the stencil is made exact, if any.
    pub exact_exponent: Option<f64>,
}

impl HardyFlow {
    /// Flow of the linearisation around `v_∞`; shares its stencil with the nonlinear problem.
    pub fn from_exponents(exps: &ExponentSet) -> Self {
        Self { n: exps.n, sigma: exps.sigma, exact_exponent: Some(exps.cap_exponent()) }
    }

    /// `λ = 0`: the free heat flow.
    pub fn free(n: u32) -> Self {
        Self { n, sigma: 0.0, exact_exponent: None }
    }

    pub fn drift(&self) -> f64 {
        self.n as f64 - 2.0 - 2.0 * self.sigma
    }

    pub fn operator(&self, grid: LogGrid, right: RightBoundary) -> RadialOperator {
        let op = RadialOperator::new(grid, self.drift(), right);
        match self.exact_exponent {
            Some(k) => op.exact_on_power(k),
            None => op,
        }
    }
}

/// Evolves `w0` under the linear flow, recording the requested times.
pub fn linear_trajectory(w0: &RadialField, flow: &HardyFlow, times: &[f64], setup: &SolverSetup) -> Result<Trajectory> {
    if (w0.sigma - flow.sigma).abs() > 1e-14 {
        return Err(Error::Domain(format!("field scaled with σ = {} but flow has σ = {}", w0.sigma, flow.sigma)));
    }
    let op = flow.operator(w0.grid, setup.right);
    evolve(w0, &op, &NoReaction, &setup.config(times)?)
}

/// `e^{-tH} w0`.
pub fn apply_semigroup(w0: &RadialField, flow: &HardyFlow, t: f64, setup: &SolverSetup) -> Result<RadialField> {
    let traj = linear_trajectory(w0, flow, &[t], setup)?;
    Ok(traj.snapshots.into_iter().next().expect("one snapshot"))
}

/// `sup_r φ_σ^{-1}(r,t)|w(r)|` over grid nodes.
pub fn sup_weighted(field: &RadialField, sigma: f64, t: f64) -> f64 {
    let weight = WeightEvaluator::new(sigma);
    (0..field.grid.points).fold(0.0, |m, i| m.max(weight.reduce(field, i, t).abs()))
}

/// `(t, sup φ_σ^{-1}|e^{-tH} w0|)` for linear data built from `spec`.
pub fn decay_series_linear(
    spec: &InitialDataSpec,
    exps: &ExponentSet,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<Vec<(f64, f64)>> {
    let w0 = spec.sample(&setup.grid, exps)?;
    let traj = linear_trajectory(&w0, &HardyFlow::from_exponents(exps), times, setup)?;
    Ok(traj.snapshots.iter().map(|f| (f.t, sup_weighted(f, exps.sigma, f.t))).collect())
}

/// `(t, t^{σ/2} sup φ_σ^{-1}|e^{-tH} w0|)`.
pub fn vanishing_series_linear(
    spec: &InitialDataSpec,
    exps: &ExponentSet,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<Vec<(f64, f64)>> {
    Ok(decay_series_linear(spec, exps, times, setup)?
        .into_iter()
        .map(|(t, v)| (t, t.powf(exps.sigma / 2.0) * v))
        .collect())
}

/// `‖e^{-tH}w0‖_{q,φ(t)} / (t^{-(n/2)(1/r-1/q)} ‖w0‖_{r,φ(t)})`; `None` for a zero field.
pub fn smoothing_ratio(
    w0: &RadialField,
    flow: &HardyFlow,
    t: f64,
    q: f64,
    r: f64,
    setup: &SolverSetup,
) -> Result<Option<f64>> {
    let evolved = apply_semigroup(w0, flow, t, setup)?;
    smoothing_ratio_of(w0, &evolved, flow, t, q, r)
}

/// [`smoothing_ratio`] for an already evolved field.
pub fn smoothing_ratio_of(
    w0: &RadialField,
    evolved: &RadialField,
    flow: &HardyFlow,
    t: f64,
    q: f64,
    r: f64,
) -> Result<Option<f64>> {
    if !(1.0 <= r && r <= q) {
        return Err(Error::Domain(format!("need 1 ≤ r ≤ q, got r = {r}, q = {q}")));
    }
    let top = weighted_norm(evolved, flow.n, flow.sigma, WeightedNormSpec { q, t })?;
    let bottom = weighted_norm(w0, flow.n, flow.sigma, WeightedNormSpec { q: r, t })?;
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let scale = t.powf(-(flow.n as f64 / 2.0) * (1.0 / r - inv_q));
    match (top == 0.0, bottom == 0.0) {
        (true, true) => Ok(None),
        (false, true) => Err(Error::Division),
        _ => Ok(Some(top / (scale * bottom))),
    }
}

/// Normalised bump of width `4h` in `s` centred at the node nearest `rho`.
pub fn annular_bump(grid: LogGrid, n: u32, sigma: f64, rho: f64) -> Result<RadialField> {
    let centre = grid.nearest(rho);
    if centre < 2 || centre + 2 >= grid.points {
        return Err(Error::Domain(format!("bump radius {rho} too close to the grid ends")));
    }
    let h = grid.h();
    let sc = grid.s(centre);
    let trap = grid.trapezoid();
    let mut w = vec![0.0; grid.points];
    let mut mass = 0.0;
    for i in centre - 2..=centre + 2 {
        let x = (grid.s(i) - sc) / (2.0 * h);
        let v = (0.5 * std::f64::consts::PI * x).cos().powi(2);
        w[i] = v;
        mass += trap[i] * v * (n as f64 * grid.s(i)).exp();
    }
    let norm = 1.0 / (sphere_area(n) * mass);
    let values = w.iter().enumerate().map(|(i, v)| norm * v * (sigma * grid.s(i)).exp()).collect();
    RadialField::new(grid, values, sigma, 0.0)
}

/// Angular quadrature for the spherical mean of a Gaussian.
#[derive(Debug, Clone)]
pub struct RadialGaussian {
    n: u32,
    rule: GaussLegendre,
    fine: GaussLegendre,
    ln_sphere_norm: f64,
}

impl RadialGaussian {
    pub fn new(n: u32, nodes: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("spherical mean needs n ≥ 2".into()));
        }
        let nodes = nodes.max(64);
        let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("nonzero"));
        let fine = GaussLegendre::new(NonZeroUsize::new(2 * nodes).expect("nonzero"));
        let mut out = Self { n, rule, fine, ln_sphere_norm: 0.0 };
        let exponent = n as f64 - 2.0;
        let norm = out.rule.integrate(0.0, std::f64::consts::PI, |th: f64| th.sin().powf(exponent));
        out.ln_sphere_norm = norm.ln();
        Ok(out)
    }

    /// `ln G_rad(r, ρ, τ)`: log of the mean of the standard heat kernel
    /// `(4πτ)^{-n/2} e^{-|x-y|²/(4τ)}` over `|x| = r`, `|y| = ρ`.
    pub fn ln_mean(&self, r: f64, rho: f64, tau: f64) -> Result<f64> {
        let nf = self.n as f64;
        let z = r * rho / (2.0 * tau);
        let theta_max = if z <= 20.0 { std::f64::consts::PI } else { (1.0 - 40.0 / z).acos() };
        let exponent = nf - 2.0;
        let f = |th: f64| (-z * (1.0 - th.cos())).exp() * th.sin().powf(exponent);
        let coarse = self.rule.integrate(0.0, theta_max, f);
        let fine = self.fine.integrate(0.0, theta_max, f);
        let rel = (coarse - fine).abs() / fine.abs();
        if !(rel <= 1e-8) {
            return Err(Error::Quadrature(rel));
        }
        Ok(-(nf / 2.0) * (4.0 * std::f64::consts::PI * tau).ln() - (r - rho).powi(2) / (4.0 * tau) + fine.ln()
            - self.ln_sphere_norm)
    }
}

/// Outcome of the pointwise kernel bound sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub rho: f64,
    pub times: Vec<f64>,
    pub cs: Vec<f64>,
    /// `max_ratio[c][t]`.
    pub max_ratio: Vec<Vec<f64>>,
    /// Max over `t` divided by min over `t`, per `c`.
    pub variation: Vec<f64>,
    pub best_c: Option<f64>,
    /// Log-slope of the evolved column on `[10⁻⁴√t, 10⁻¹√t]`, per `t`.
    pub origin_slopes: Vec<f64>,
}

/// Nodes whose bound value is below this fraction of its maximum are not compared.
const KERNEL_MASK: f64 = 1e-10;

/// Largest admissible variation of the ratio across the sweep.
pub const KERNEL_VARIATION_LIMIT: f64 = 3.0;

/// Ratio of `e^{-tH}b` to `φ_σ(x,t) φ_σ(ρ,t) G_rad(|x|, ρ, ct)` over grid nodes.
pub fn kernel_ratio(column: &RadialField, flow: &HardyFlow, rho: f64, c: f64, gauss: &RadialGaussian) -> Result<f64> {
    let t = column.t;
    let grid = &column.grid;
    let ln_phi_rho = phi(rho, t, flow.sigma).ln();
    let mut logs = Vec::with_capacity(grid.points);
    for i in 0..grid.points {
        let r = grid.r(i);
        logs.push(phi(r, t, flow.sigma).ln() + ln_phi_rho + gauss.ln_mean(r, rho, c * t)?);
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = top + KERNEL_MASK.ln();
    let mut best: f64 = 0.0;
    for (i, &lb) in logs.iter().enumerate() {
        if lb < cutoff {
            continue;
        }
        let w = column.values[i] * (-flow.sigma * grid.s(i)).exp();
        best = best.max(w / lb.exp());
    }
    Ok(best)
}

/// Least-squares slope of `ln w` against `ln r` for `r ∈ [lo, hi]`.
pub fn log_slope(field: &RadialField, lo: f64, hi: f64) -> Result<f64> {
    let grid = &field.grid;
    let mut pts = Vec::new();
    for i in 0..grid.points {
        let r = grid.r(i);
        if r >= lo && r <= hi {
            let w = field.values[i] * (-field.sigma * grid.s(i)).exp();
            if w <= 0.0 {
                return Err(Error::Degenerate(format!("nonpositive value at r = {r:e}")));
            }
            pts.push((grid.s(i), w.ln()));
        }
    }
    if pts.len() < 4 {
        return Err(Error::EmptyRegion(lo));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Evolves a normalised bump at `rho` and compares it with the weighted Gaussian
/// bound for every `c` in `cs` and `t` in `times`.
pub fn kernel_bound_check(
    rho: f64,
    times: &[f64],
    flow: &HardyFlow,
    cs: &[f64],
    setup: &SolverSetup,
) -> Result<KernelCheck> {
    let bump = annular_bump(setup.grid, flow.n, flow.sigma, rho)?;
    let traj = linear_trajectory(&bump, flow, times, setup)?;
    let gauss = RadialGaussian::new(flow.n, 64)?;
    let mut max_ratio = Vec::with_capacity(cs.len());
    for &c in cs {
        let row = traj
            .snapshots
            .iter()
            .map(|col| kernel_ratio(col, flow, rho, c, &gauss))
            .collect::<Result<Vec<_>>>()?;
        max_ratio.push(row);
    }
    let variation: Vec<f64> = max_ratio
        .iter()
        .map(|row| {
            let hi = row.iter().copied().fold(0.0, f64::max);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        })
        .collect();
    let best_c = cs
        .iter()
        .zip(&variation)
        .find(|(_, v)| **v <= KERNEL_VARIATION_LIMIT)
        .map(|(c, _)| *c);
    let origin_slopes = traj
        .snapshots
        .iter()
        .map(|col| log_slope(col, 1e-4 * col.t.sqrt(), 1e-1 * col.t.sqrt()))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelCheck { rho, times: times.to_vec(), cs: cs.to_vec(), max_ratio, variation, best_c, origin_slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{compute_exponents, ProblemParams};

    fn exps() -> ExponentSet {
        compute_exponents(ProblemParams::new(11, 7.0).unwrap()).unwrap()
    }

    #[test]
    fn weight_values() {
        assert_eq!(phi(2.0, 4.0, 3.0), 1.0);
        assert!((phi(1.0, 4.0, 2.0) - 4.0).abs() < 1e-15);
        assert_eq!(phi(4.0, 4.0, 2.0), 1.0);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * std::f64::consts::PI.powi(2)).abs() < 1e-13);
    }

    #[test]
    fn q2_norm_is_plain_l2() {
        let g = LogGrid::from_radii(1e-3, 1e2, 300).unwrap();
        let e = exps();
        let f = RadialField::from_unscaled(g, e.sigma, |r| (-r * r).exp()).unwrap();
        for t in [0.3, 1.0, 50.0] {
            let a = weighted_norm(&f, 11, e.sigma, WeightedNormSpec { q: 2.0, t }).unwrap();
            let b = l2_norm(&f, 11);
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn sup_of_weight_is_one() {
        let g = LogGrid::from_radii(1e-3, 1e2, 300).unwrap();
        let t = 2.0;
        let f = RadialField::from_unscaled(g, 1.5, |r| phi(r, t, 1.5)).unwrap();
        let v = weighted_norm(&f, 11, 1.5, WeightedNormSpec { q: f64::INFINITY, t }).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_integrable_is_flagged() {
        let g = LogGrid::from_radii(1e-3, 1e2, 300).unwrap();
        let f = RadialField::from_unscaled(g, 0.0, |r| r.powf(-5.0)).unwrap();
        let r = weighted_norm(&f, 11, 0.0, WeightedNormSpec { q: 1.0, t: 1.0 });
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn gaussian_mean_matches_one_dimensional_limit() {
        // ρ → 0: the mean is the Gaussian at |x| = r
        let g = RadialGaussian::new(3, 64).unwrap();
        let v = g.ln_mean(1.3, 1e-9, 0.7).unwrap();
        let exact = -1.5 * (4.0 * std::f64::consts::PI * 0.7).ln() - 1.69 / 2.8;
        assert!((v - exact).abs() < 1e-8);
        // n = 3 closed form: sinh(z)/z factor
        let (r, rho, tau) = (2.0, 3.0, 5.0);
        let z: f64 = r * rho / (2.0 * tau);
        let closed = -1.5 * (4.0 * std::f64::consts::PI * tau).ln() - (r * r + rho * rho) / (4.0 * tau) + (z.sinh() / z).ln();
        assert!((g.ln_mean(r, rho, tau).unwrap() - closed).abs() < 1e-10);
        // large z exercises the truncated angle
        let (r, rho, tau) = (50.0, 60.0, 0.1);
        let z: f64 = r * rho / (2.0 * tau);
        let closed = -1.5 * (4.0 * std::f64::consts::PI * tau).ln() - (r - rho).powi(2) / (4.0 * tau)
            + ((1.0 - (-2.0 * z).exp()) / (2.0 * z)).ln();
        assert!((g.ln_mean(r, rho, tau).unwrap() - closed).abs() < 1e-8);
    }

    #[test]
    fn bump_is_normalised() {
        let g = LogGrid::standard();
        let e = exps();
        let b = annular_bump(g, 11, e.sigma, 1.0).unwrap();
        let mass = weighted_norm(&b, 11, 0.0, WeightedNormSpec { q: 1.0, t: 1e-30 }).unwrap();
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
    }
}
