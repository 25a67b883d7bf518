//! θ-method time stepping for `W_t = T W + b + S(W)`.

use serde::Serialize;

use super::operator::RadialOperator;
use super::tridiag::solve_tridiagonal;
use crate::error::{Error, Result};
use crate::grid::RadialField;

/// Node-wise source `S(W_i)` and its derivative.
pub trait Reaction: Sync {
    fn source(&self, node: usize, w: f64) -> f64;

    fn derivative(&self, _node: usize, _w: f64) -> f64 {
        0.0
    }

    /// True when the source vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

/// `S ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl Reaction for NoReaction {
    fn source(&self, _node: usize, _w: f64) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// How the source term enters a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReactionScheme {
    /// Source evaluated at the old iterate; one linear solve per step.
    SemiImplicit,
    /// Source treated with the same θ as the operator, solved by Newton iteration.
    #[default]
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionConfig {
    pub t0: f64,
    pub t1: f64,
    pub dt0: f64,
    pub growth: f64,
    pub theta: f64,
    pub snapshot_times: Vec<f64>,
    pub scheme: ReactionScheme,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: 1.0,
            dt0: 1e-4,
            growth: 1.05,
            theta: 1.0,
            snapshot_times: vec![1.0],
            scheme: ReactionScheme::Implicit,
        }
    }
}

impl EvolutionConfig {
    pub fn with_snapshots(t1: f64, snapshot_times: Vec<f64>) -> Self {
        Self { t1, snapshot_times, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= 0.0 && self.t1 > self.t0) {
            return Err(Error::Domain(format!("need 0 ≤ t0 < t1, got [{}, {}]", self.t0, self.t1)));
        }
        if !(self.dt0 > 0.0) {
            return Err(Error::Domain(format!("dt0 = {} must be positive", self.dt0)));
        }
        if !(1.0..=1.1).contains(&self.growth) {
            return Err(Error::Domain(format!("growth = {} outside [1, 1.1]", self.growth)));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Domain(format!("theta = {} outside [0.5, 1]", self.theta)));
        }
        let mut last = f64::NEG_INFINITY;
        for &t in &self.snapshot_times {
            if !(t >= self.t0 && t <= self.t1) || t <= last {
                return Err(Error::Domain(format!(
                    "snapshot times must increase within [{}, {}]",
                    self.t0, self.t1
                )));
            }
            last = t;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub t: f64,
    pub dt: f64,
    pub max_abs: f64,
    pub nonnegative: bool,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<RadialField>,
    pub diagnostics: Vec<StepDiagnostic>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.t).collect()
    }

    pub fn at(&self, t: f64) -> Option<&RadialField> {
        self.snapshots.iter().find(|f| (f.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

const NEWTON_RTOL: f64 = 1e-12;
const NEWTON_ATOL: f64 = 1e-250;
const NEWTON_MAX_ITER: usize = 80;

fn check_finite(values: &[f64], t: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("node {i} at t = {t:e}"))),
        None => Ok(()),
    }
}

/// Explicit part of the θ-step: `W + (1-θ) dt T W + dt b`.
fn explicit_part(op: &RadialOperator, w: &[f64], dt: f64, theta: f64) -> Vec<f64> {
    let mut rhs = w.to_vec();
    if theta < 1.0 {
        let tw = op.apply_linear(w);
        for (r, v) in rhs.iter_mut().zip(tw) {
            *r += (1.0 - theta) * dt * v;
        }
    }
    for (r, b) in rhs.iter_mut().zip(op.offset()) {
        *r += dt * b;
    }
    rhs
}

/// Solves `(I - θ dt (T + diag(jac))) x = rhs` on the free nodes; pinned nodes copy `rhs`.
fn solve_shifted(op: &RadialOperator, dt: f64, theta: f64, jac: Option<&[f64]>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let free = op.free_nodes();
    let c = theta * dt;
    let mut lower = vec![0.0; free];
    let mut diag = vec![0.0; free];
    let mut upper = vec![0.0; free];
    let mut b = rhs[..free].to_vec();
    for i in 0..free {
        lower[i] = -c * op.lower()[i];
        upper[i] = -c * op.upper()[i];
        diag[i] = 1.0 - c * op.diag()[i] - jac.map_or(0.0, |j| c * j[i]);
    }
    if free < n {
        // Dirichlet neighbour moves to the right-hand side.
        b[free - 1] -= upper[free - 1] * rhs[free];
        upper[free - 1] = 0.0;
    }
    let mut x = solve_tridiagonal(&lower, &diag, &upper, &b)?;
    x.extend_from_slice(&rhs[free..]);
    Ok(x)
}

/// One θ-step with the source evaluated at the old iterate:
/// `(I - θ dt T) W⁺ = W + dt((1-θ) T W + b + S(W))`.
pub fn step_implicit(
    field: &RadialField,
    op: &RadialOperator,
    reaction: &dyn Reaction,
    dt: f64,
    theta: f64,
) -> Result<RadialField> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    let mut rhs = explicit_part(op, &field.values, dt, theta);
    if !reaction.is_zero() {
        for i in 0..op.free_nodes() {
            rhs[i] += dt * reaction.source(i, field.values[i]);
        }
    }
    let values = solve_shifted(op, dt, theta, None, &rhs)?;
    check_finite(&values, field.t + dt)?;
    Ok(RadialField { values, t: field.t + dt, ..field.clone() })
}

/// One θ-step with an implicit source, solved by Newton's method.
///
/// Each iterate solves `(I - θ dt (T + S'(W_k))) W_{k+1} = r + θ dt (S(W_k) - S'(W_k) W_k)`
/// with `r` the explicit part, so no stiff residual is ever formed. Returns the
/// new field and the number of Newton iterations.
pub fn step_newton(
    field: &RadialField,
    op: &RadialOperator,
    reaction: &dyn Reaction,
    dt: f64,
    theta: f64,
) -> Result<(RadialField, usize)> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    if reaction.is_zero() {
        return step_implicit(field, op, reaction, dt, theta).map(|f| (f, 1));
    }
    let free = op.free_nodes();
    let mut base = explicit_part(op, &field.values, dt, theta);
    if theta < 1.0 {
        for i in 0..free {
            base[i] += (1.0 - theta) * dt * reaction.source(i, field.values[i]);
        }
    }
    let c = theta * dt;
    let mut current = field.values.clone();
    let mut jac = vec![0.0; free];
    let mut rhs = base.clone();
    for iteration in 1..=NEWTON_MAX_ITER {
        for i in 0..free {
            let w = current[i];
            let d = reaction.derivative(i, w);
            jac[i] = d;
            rhs[i] = base[i] + c * (reaction.source(i, w) - d * w);
        }
        let next = solve_shifted(op, dt, theta, Some(&jac), &rhs)?;
        check_finite(&next, field.t + dt)?;
        let converged = next
            .iter()
            .zip(&current)
            .all(|(a, b)| (a - b).abs() <= NEWTON_RTOL * a.abs() + NEWTON_ATOL);
        current = next;
        if converged {
            return Ok((RadialField { values: current, t: field.t + dt, ..field.clone() }, iteration));
        }
    }
    Err(Error::Solve(format!(
        "Newton iteration did not converge in {NEWTON_MAX_ITER} iterations at t = {:e}",
        field.t + dt
    )))
}

/// Marches from `config.t0` to `config.t1` with a geometric step schedule.
///
/// Steps are shortened to land exactly on every snapshot time; the nominal step
/// keeps growing independently of these cuts. The initial field is taken to be at
/// `config.t0` regardless of its stored time.
pub fn evolve(
    field: &RadialField,
    op: &RadialOperator,
    reaction: &dyn Reaction,
    config: &EvolutionConfig,
) -> Result<Trajectory> {
    evolve_with(field, op, reaction, config, |_| Ok(()))
}

/// [`evolve`] with a hook run on every accepted step.
pub fn evolve_with(
    field: &RadialField,
    op: &RadialOperator,
    reaction: &dyn Reaction,
    config: &EvolutionConfig,
    mut on_step: impl FnMut(&RadialField) -> Result<()>,
) -> Result<Trajectory> {
    config.validate()?;
    let mut current = RadialField { t: config.t0, ..field.clone() };
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut diagnostics = Vec::new();
    let mut pending = config.snapshot_times.iter().copied().peekable();
    while let Some(&target) = pending.peek() {
        if target <= config.t0 {
            snapshots.push(current.clone());
            pending.next();
        } else {
            break;
        }
    }
    let mut dt = config.dt0;
    let end = config.t1;
    while current.t < end {
        let target = pending.peek().copied().unwrap_or(end).min(end);
        let remaining = target - current.t;
        let (step, hits) = if dt >= remaining * (1.0 - 1e-12) { (remaining, true) } else { (dt, false) };
        let (mut next, iterations) = match config.scheme {
            ReactionScheme::SemiImplicit => (step_implicit(&current, op, reaction, step, config.theta)?, 1),
            ReactionScheme::Implicit => step_newton(&current, op, reaction, step, config.theta)?,
        };
        if hits {
            next.t = target;
        }
        on_step(&next)?;
        diagnostics.push(StepDiagnostic {
            t: next.t,
            dt: step,
            max_abs: next.max_abs(),
            nonnegative: next.values.iter().all(|&v| v >= 0.0),
            newton_iterations: iterations,
        });
        current = next;
        while let Some(&t) = pending.peek() {
            if t <= current.t * (1.0 + 1e-14) {
                snapshots.push(RadialField { t, ..current.clone() });
                pending.next();
            } else {
                break;
            }
        }
        dt *= config.growth;
    }
    Ok(Trajectory { snapshots, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LogGrid;
    use crate::radial_pde::operator::RightBoundary;

    fn bump(grid: LogGrid) -> RadialField {
        let values = grid.s_nodes().iter().map(|s| (-(s * s)).exp()).collect();
        RadialField::new(grid, values, 0.0, 0.0).unwrap()
    }

    #[test]
    fn constant_is_stationary() {
        let g = LogGrid::from_radii(1e-3, 1e3, 64).unwrap();
        let op = RadialOperator::new(g, 0.4, RightBoundary::ZeroFlux);
        let f = RadialField::new(g, vec![1.0; 64], 0.0, 0.0).unwrap();
        let next = step_implicit(&f, &op, &NoReaction, 0.3, 1.0).unwrap();
        assert!(next.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn richardson_first_order() {
        let g = LogGrid::from_radii(0.1, 10.0, 64).unwrap();
        let op = RadialOperator::new(g, 1.0 / 3.0, RightBoundary::ZeroFlux);
        let f = bump(g);
        let march = |dt: f64, steps: usize| {
            let mut cur = f.clone();
            for _ in 0..steps {
                cur = step_implicit(&cur, &op, &NoReaction, dt, 1.0).unwrap();
            }
            cur
        };
        // full steps against half steps over the same interval
        let diff = |steps: usize| {
            let dt = 0.1 / steps as f64;
            let full = march(dt, steps);
            let half = march(dt / 2.0, 2 * steps);
            full.values.iter().zip(&half.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let ratio = diff(50) / diff(100);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn schedule_hits_snapshots() {
        let g = LogGrid::from_radii(0.1, 10.0, 32).unwrap();
        let op = RadialOperator::new(g, 0.0, RightBoundary::Dirichlet);
        let cfg = EvolutionConfig {
            t0: 0.0,
            t1: 2.0,
            dt0: 1e-3,
            growth: 1.1,
            theta: 1.0,
            snapshot_times: vec![0.0, 0.0123, 0.5, 2.0],
            scheme: ReactionScheme::SemiImplicit,
        };
        let traj = evolve(&bump(g), &op, &NoReaction, &cfg).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.0123, 0.5, 2.0]);
        assert!(traj.diagnostics.iter().all(|d| d.nonnegative));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = EvolutionConfig { snapshot_times: vec![2.0], ..EvolutionConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = EvolutionConfig { growth: 1.5, ..EvolutionConfig::default() };
        assert!(cfg.validate().is_err());
    }

    struct Quadratic;
    impl Reaction for Quadratic {
        fn source(&self, _node: usize, w: f64) -> f64 {
            -w * w
        }
        fn derivative(&self, _node: usize, w: f64) -> f64 {
            -2.0 * w
        }
    }

    #[test]
    fn newton_solves_implicit_equation() {
        let g = LogGrid::from_radii(0.1, 10.0, 32).unwrap();
        let op = RadialOperator::new(g, 0.2, RightBoundary::ZeroFlux);
        let f = bump(g);
        let dt = 0.05;
        let (next, iters) = step_newton(&f, &op, &Quadratic, dt, 1.0).unwrap();
        assert!(iters > 1);
        let tw = op.apply(&next.values);
        for i in 0..32 {
            let residual = next.values[i] - dt * (tw[i] - next.values[i].powi(2)) - f.values[i];
            assert!(residual.abs() < 1e-10, "node {i}: {residual}");
        }
    }
}
