//! Nonlinear dynamics in the gap variable `w = v_∞ - u`.
//!
//! `w` solves `w_t = Δw + λ|x|^{-2} w - N(w)` with the convex remainder
//! `N(w) = (v_∞ - w)^p - v_∞^p + p v_∞^{p-1} w ≥ 0`. In the scaled unknown
//! `W = r^σ w` the Hardy term is absorbed by the operator and `N` becomes a
//! node-wise sink, so the linear flow dominates the nonlinear one and both `0`
//! and `r^σ v_∞` are discrete steady states.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{ExponentSet, HardyBranch};
use crate::grid::{LogGrid, RadialField};
use crate::radial_pde::{assemble_operator, evolve_with, Boundaries, RadialOperator, Reaction, SolverSetup, Trajectory};
use crate::semigroup::{l2_norm, linear_trajectory, HardyFlow};
use crate::steady_states::SteadyProfile;

/// `f(x) = (1-x)_+^p - 1 + p x`, so that `N(w) = v_∞^p f(w/v_∞)`.
///
/// Summed as a binomial series for small `|x|`, where the closed form cancels.
pub fn convex_remainder(x: f64, p: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = -p * x;
        let mut sum = 0.0;
        for k in 2..60 {
            term *= (p - (k - 1) as f64) / k as f64 * -x;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else if x >= 1.0 {
        p * x - 1.0
    } else {
        (p * (-x).ln_1p()).exp() - 1.0 + p * x
    }
}

/// `f'(x) = p (1 - (1-x)_+^{p-1})`.
pub fn convex_remainder_derivative(x: f64, p: f64) -> f64 {
    if x >= 1.0 {
        p
    } else {
        -p * ((p - 1.0) * (-x).ln_1p()).exp_m1()
    }
}

/// `N(w)` at radius `r`.
pub fn nonlinear_defect(w: f64, r: f64, exps: &ExponentSet) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius {r} must be positive")));
    }
    let v = exps.v_infinity(r);
    let slack = 1e-10 * v;
    if !(w >= -slack && w <= v + slack) {
        return Err(Error::Domain(format!("w = {w} outside [0, v_∞(r) = {v}]")));
    }
    Ok(v.powf(exps.p) * convex_remainder(w / v, exps.p))
}

/// Radial initial gap `w0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDataSpec {
    /// `b r^{-m}` inside the unit ball, `b r^{-ℓ}` outside.
    PowerTail { b: f64, ell: f64 },
    /// `b min(r^{-m}, r^{-σ}/ln(e + r))`.
    SigmaTail { b: f64 },
    /// Smooth bump of height `b` supported in `[r_lo, r_hi]`.
    Annulus { b: f64, r_lo: f64, r_hi: f64 },
    /// Deficit `ψ_k - u0` given by an annular bump of height `b`.
    PsiKGap { k: f64, b: f64, r_lo: f64, r_hi: f64 },
}

/// `C^∞` bump equal to 1 at the centre of `[lo, hi]` and 0 outside.
pub fn smooth_bump(r: f64, lo: f64, hi: f64) -> f64 {
    let x = (2.0 * r - lo - hi) / (hi - lo);
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

fn check_amplitude(b: f64, cap: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Domain(format!("amplitude b = {b} must be nonnegative")));
    }
    if b > cap {
        return Err(Error::Domain(format!("amplitude b = {b} exceeds {cap}: u0 would be negative")));
    }
    Ok(())
}

fn check_annulus(r_lo: f64, r_hi: f64) -> Result<()> {
    if !(r_lo > 0.0 && r_hi > r_lo && r_hi.is_finite()) {
        return Err(Error::Domain(format!("annulus [{r_lo}, {r_hi}] needs 0 < r_lo < r_hi")));
    }
    Ok(())
}

impl InitialDataSpec {
    pub fn power_tail(b: f64, ell: f64, exps: &ExponentSet) -> Result<Self> {
        check_amplitude(b, exps.l)?;
        if !(ell >= exps.m) {
            return Err(Error::Domain(format!("ℓ = {ell} below m = {}", exps.m)));
        }
        Ok(Self::PowerTail { b, ell })
    }

    pub fn sigma_tail(b: f64, exps: &ExponentSet) -> Result<Self> {
        check_amplitude(b, exps.l)?;
        Ok(Self::SigmaTail { b })
    }

    pub fn annulus(b: f64, r_lo: f64, r_hi: f64, exps: &ExponentSet) -> Result<Self> {
        check_annulus(r_lo, r_hi)?;
        check_amplitude(b, exps.v_infinity(r_hi))?;
        Ok(Self::Annulus { b, r_lo, r_hi })
    }

    /// The amplitude is checked against `ψ_k` by [`evolve_near_psik`].
    pub fn psi_k_gap(k: f64, b: f64, r_lo: f64, r_hi: f64) -> Result<Self> {
        check_annulus(r_lo, r_hi)?;
        if !(k > 0.0) {
            return Err(Error::Domain(format!("k = {k} must be positive")));
        }
        check_amplitude(b, f64::INFINITY)?;
        Ok(Self::PsiKGap { k, b, r_lo, r_hi })
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Self::PowerTail { b, .. } | Self::SigmaTail { b } | Self::Annulus { b, .. } | Self::PsiKGap { b, .. } => b,
        }
    }

    pub fn with_amplitude(mut self, value: f64) -> Self {
        match &mut self {
            Self::PowerTail { b, .. } | Self::SigmaTail { b } | Self::Annulus { b, .. } | Self::PsiKGap { b, .. } => {
                *b = value
            }
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude() == 0.0
    }

    /// `w0(r)`.
    pub fn value(&self, r: f64, exps: &ExponentSet) -> f64 {
        match *self {
            Self::PowerTail { b, ell } => {
                if r <= 1.0 {
                    b * r.powf(-exps.m)
                } else {
                    b * r.powf(-ell)
                }
            }
            Self::SigmaTail { b } => {
                b * r.powf(-exps.m).min(r.powf(-exps.sigma) / (std::f64::consts::E + r).ln())
            }
            Self::Annulus { b, r_lo, r_hi } | Self::PsiKGap { b, r_lo, r_hi, .. } => b * smooth_bump(r, r_lo, r_hi),
        }
    }

    /// `W0 = r^σ w0` on `grid`.
    pub fn sample(&self, grid: &LogGrid, exps: &ExponentSet) -> Result<RadialField> {
        let sigma = exps.sigma;
        let values = (0..grid.points)
            .map(|i| {
                let s = grid.s(i);
                let r = s.exp();
                match *self {
                    // Scaled directly to keep the small-r values exact.
                    Self::PowerTail { b, ell } if r <= 1.0 => {
                        let _ = ell;
                        b * ((sigma - exps.m) * s).exp()
                    }
                    _ => (sigma * s).exp() * self.value(r, exps),
                }
            })
            .collect();
        RadialField::new(*grid, values, sigma, 0.0)
    }
}

/// Node-wise sink `S(W) = -(c_i W + a_i f(W / κ_i))` with `c_i ≥ 0`.
#[derive(Debug, Clone)]
pub struct DefectReaction {
    p: f64,
    linear: Vec<f64>,
    cap: Vec<f64>,
    /// `a_i / κ_i`.
    rate: Vec<f64>,
}

impl DefectReaction {
    /// Cap of node `i`: the scaled state whose defect is `a_i f(1)`.
    pub fn cap(&self) -> &[f64] {
        &self.cap
    }

    pub fn sink(&self, i: usize, w: f64) -> f64 {
        let c = self.cap[i];
        self.linear[i] * w + self.rate[i] * c * convex_remainder(w / c, self.p)
    }
}

impl Reaction for DefectReaction {
    fn source(&self, node: usize, w: f64) -> f64 {
        -self.sink(node, w)
    }

    fn derivative(&self, node: usize, w: f64) -> f64 {
        -(self.linear[node] + self.rate[node] * convex_remainder_derivative(w / self.cap[node], self.p))
    }
}

/// Defect around `v_∞` for `op`, which must be exact on `r^{σ-m}`.
///
/// The zero-flux row at the left end is not exact on `r^σ v_∞`; a linear sink on
/// that node restores it as a steady state without disturbing `W ≡ 0`.
pub fn singular_reaction(op: &RadialOperator, exps: &ExponentSet) -> Result<DefectReaction> {
    let grid = op.grid();
    let kappa = exps.cap_exponent();
    let lp1 = exps.l.powf(exps.p - 1.0);
    let cap: Vec<f64> = (0..grid.points).map(|i| exps.l * (kappa * grid.s(i)).exp()).collect();
    let rate: Vec<f64> = (0..grid.points).map(|i| lp1 * (-2.0 * grid.s(i)).exp()).collect();
    let mut linear = vec![0.0; grid.points];
    let left = op.upper()[0] * (kappa * grid.h()).exp_m1() - (exps.p - 1.0) * rate[0];
    if left < 0.0 {
        return Err(Error::Domain(format!("grid spacing {} too coarse for the left boundary row", grid.h())));
    }
    linear[0] = left;
    Ok(DefectReaction { p: exps.p, linear, cap, rate })
}

/// Defect around `ψ_k`, including the bounded term `p(v_∞^{p-1} - ψ_k^{p-1}) v ≥ 0`.
pub fn psi_reaction(grid: &LogGrid, exps: &ExponentSet, psi1: &SteadyProfile, k: f64) -> Result<DefectReaction> {
    let p = exps.p;
    let l = exps.l;
    let lp1 = l.powf(p - 1.0);
    let mut linear = Vec::with_capacity(grid.points);
    let mut cap = Vec::with_capacity(grid.points);
    let mut rate = Vec::with_capacity(grid.points);
    for i in 0..grid.points {
        let s = grid.s(i);
        let d = psi1.gap_k(k, s.exp())?;
        let e2 = (-2.0 * s).exp();
        // v_∞^{p-1} - ψ^{p-1} = r^{-2} (L^{p-1} - (L-D)^{p-1})
        linear.push((-p * e2 * lp1 * ((p - 1.0) * (-d / l).ln_1p()).exp_m1()).max(0.0));
        cap.push(((exps.sigma - exps.m) * s).exp() * (l - d));
        rate.push(e2 * (l - d).powf(p - 1.0));
    }
    Ok(DefectReaction { p, linear, cap, rate })
}

fn ordering_check(field: &RadialField, cap: &[f64], tol: f64) -> Result<()> {
    for (i, (&w, &c)) in field.values.iter().zip(cap).enumerate() {
        let excess = if w < -tol * c {
            -w / c
        } else if w > (1.0 + tol) * c {
            w / c - 1.0
        } else {
            continue;
        };
        return Err(Error::ComparisonViolation { time: field.t, radius: field.grid.r(i), excess });
    }
    Ok(())
}

/// Relative tolerance on `0 ≤ w ≤ v_∞`.
pub const ORDER_TOLERANCE: f64 = 1e-8;

fn require_jl(exps: &ExponentSet) -> Result<()> {
    if exps.branch != HardyBranch::JlBranch {
        return Err(Error::Admissibility(format!("p = {} is below p_JL = {}", exps.p, exps.p_jl)));
    }
    Ok(())
}

/// Nonlinear gap `w(t)` from `w0`, checking `0 ≤ w ≤ v_∞` after every step.
pub fn evolve_nonlinear_field(
    w0: &RadialField,
    exps: &ExponentSet,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<Trajectory> {
    require_jl(exps)?;
    let op = assemble_operator(w0.grid, exps, Boundaries { right: setup.right })?;
    let reaction = singular_reaction(&op, exps)?;
    ordering_check(w0, reaction.cap(), ORDER_TOLERANCE)?;
    let cap = reaction.cap().to_vec();
    evolve_with(w0, &op, &reaction, &setup.config(times)?, |f| ordering_check(f, &cap, ORDER_TOLERANCE))
}

pub fn evolve_nonlinear(
    spec: &InitialDataSpec,
    exps: &ExponentSet,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<Trajectory> {
    if matches!(spec, InitialDataSpec::PsiKGap { .. }) {
        return Err(Error::Domain("ψ_k gap data evolves with evolve_near_psik".into()));
    }
    evolve_nonlinear_field(&spec.sample(&setup.grid, exps)?, exps, times, setup)
}

/// Linear and nonlinear flows from the same data.
#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub linear: Trajectory,
    pub nonlinear: Trajectory,
    /// `max (w_nonlinear - w_linear)` over snapshots and nodes, unscaled, clipped at 0.
    pub max_violation: f64,
    /// `max w0` over nodes.
    pub max_w0: f64,
    /// `min (w_linear - w_nonlinear)` over snapshots and nodes, in scaled units.
    pub min_gap: f64,
}

impl ComparisonRun {
    pub fn relative_violation(&self) -> f64 {
        if self.max_w0 > 0.0 {
            self.max_violation / self.max_w0
        } else {
            self.max_violation
        }
    }
}

fn max_unscaled(field: &RadialField) -> f64 {
    field.unscaled().into_iter().fold(0.0, f64::max)
}

/// Runs both flows and measures how far the nonlinear gap rises above the linear one.
pub fn comparison_monitor(
    spec: &InitialDataSpec,
    exps: &ExponentSet,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<ComparisonRun> {
    let w0 = spec.sample(&setup.grid, exps)?;
    let flow = HardyFlow::from_exponents(exps);
    let (linear, nonlinear) = rayon::join(
        || linear_trajectory(&w0, &flow, times, setup),
        || evolve_nonlinear_field(&w0, exps, times, setup),
    );
    let (linear, nonlinear) = (linear?, nonlinear?);
    let mut max_violation: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for (a, b) in nonlinear.snapshots.iter().zip(&linear.snapshots) {
        for (i, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
            let d = x - y;
            min_gap = min_gap.min(-d);
            if d > 0.0 {
                max_violation = max_violation.max(d * (-exps.sigma * a.grid.s(i)).exp());
            }
        }
    }
    Ok(ComparisonRun { linear, nonlinear, max_violation, max_w0: max_unscaled(&w0), min_gap })
}

/// Evolution of `v = ψ_k - u` with its linear majorant.
#[derive(Debug, Clone)]
pub struct PsikRun {
    pub k: f64,
    pub nonlinear: Trajectory,
    pub linear: Trajectory,
    /// `max (v - e^{-tH}v0)` relative to `max v0`.
    pub max_excess_over_linear: f64,
    /// `min v` relative to `max v0`.
    pub min_value: f64,
    /// `max v/ψ_k - 1` over snapshots, a discretisation diagnostic.
    pub max_overshoot: f64,
    /// `‖v(t)‖₂` at the snapshots, after `‖v0‖₂`.
    pub l2: Vec<(f64, f64)>,
}

/// Evolves the gap below `ψ_k` for data `spec`; `psi1` must cover `k^{1/m}` times the grid.
pub fn evolve_near_psik(
    spec: &InitialDataSpec,
    exps: &ExponentSet,
    psi1: &SteadyProfile,
    times: &[f64],
    setup: &SolverSetup,
) -> Result<PsikRun> {
    let InitialDataSpec::PsiKGap { k, b, r_lo, r_hi } = *spec else {
        return Err(Error::Domain("evolve_near_psik needs ψ_k gap data".into()));
    };
    require_jl(exps)?;
    if exps.n < 11 || exps.p <= exps.p_jl {
        return Err(Error::Admissibility(format!("need n ≥ 11 and p > p_JL, got ({}, {})", exps.n, exps.p)));
    }
    if b > 0.0 {
        let floor = [r_lo, 0.5 * (r_lo + r_hi), r_hi]
            .iter()
            .map(|&r| psi1.psi_k(k, r))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        check_amplitude(b, floor)?;
    }
    let grid = setup.grid;
    let reaction = psi_reaction(&grid, exps, psi1, k)?;
    let v0 = spec.sample(&grid, exps)?;
    let op = assemble_operator(grid, exps, Boundaries { right: setup.right })?;
    let cfg = setup.config(times)?;
    let flow = HardyFlow::from_exponents(exps);
    let (linear, nonlinear) = rayon::join(
        || linear_trajectory(&v0, &flow, times, setup),
        || evolve_with(&v0, &op, &reaction, &cfg, |_| Ok(())),
    );
    let (linear, nonlinear) = (linear?, nonlinear?);
    let scale = max_unscaled(&v0).max(f64::MIN_POSITIVE);
    let mut excess: f64 = 0.0;
    let mut min_value: f64 = 0.0;
    let mut overshoot = f64::NEG_INFINITY;
    for (a, b) in nonlinear.snapshots.iter().zip(&linear.snapshots) {
        for i in 0..grid.points {
            let damp = (-exps.sigma * grid.s(i)).exp();
            excess = excess.max((a.values[i] - b.values[i]) * damp);
            min_value = min_value.min(a.values[i] * damp);
            overshoot = overshoot.max(a.values[i] / reaction.cap()[i] - 1.0);
        }
    }
    let mut l2 = vec![(0.0, l2_norm(&v0, exps.n))];
    l2.extend(nonlinear.snapshots.iter().map(|f| (f.t, l2_norm(f, exps.n))));
    Ok(PsikRun {
        k,
        nonlinear,
        linear,
        max_excess_over_linear: excess / scale,
        min_value: min_value / scale,
        max_overshoot: overshoot,
        l2,
    })
}
