//! Flux-form discretisation of `𝓛W = e^{-2s}(W_ss + a W_s)`, `a = n - 2 - 2σ`.
//!
//! With `w = e^{-σs} W` and `σ(n-2-σ) = λ`, the operator `Δ + λ/r²` acting on
//! radial `w` becomes `e^{-σs} 𝓛W`: the inverse-square potential disappears.
//! Writing `𝓛W = μ^{-1}(ρ W_s)_s` with `ρ = e^{as}` and `μ = e^{(a+2)s}` gives a
//! three-point stencil that is exactly symmetric in the trapezoid measure
//! `μ_i h_i`, which is also the measure of the radial L² norm of `w`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{ExponentSet, HardyBranch};
use crate::grid::LogGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RightBoundary {
    /// Homogeneous Neumann (zero flux).
    ZeroFlux,
    /// The last node keeps its initial value.
    #[default]
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct RadialOperator {
    grid: LogGrid,
    drift: f64,
    scale: f64,
    right: RightBoundary,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    offset: Vec<f64>,
}

impl RadialOperator {
    /// Plain second-order stencil for drift `a`; the left end is zero flux.
    pub fn new(grid: LogGrid, drift: f64, right: RightBoundary) -> Self {
        let mut op = Self {
            grid,
            drift,
            scale: 1.0,
            right,
            lower: Vec::new(),
            diag: Vec::new(),
            upper: Vec::new(),
            offset: vec![0.0; grid.points],
        };
        op.fill();
        op
    }

    /// Rescales the stencil by `γ = 1 + O(h²)` so that `e^{κs}` is mapped to
    /// `(κ² + aκ) e^{(κ-2)s}` exactly at interior nodes.
    pub fn exact_on_power(mut self, kappa: f64) -> Self {
        let h = self.grid.h();
        let a = self.drift;
        let discrete = ((0.5 * a * h).exp() * (kappa * h).exp_m1()
            + (-0.5 * a * h).exp() * (-kappa * h).exp_m1())
            / (h * h);
        let exact = kappa * kappa + a * kappa;
        if kappa != 0.0 && discrete != 0.0 {
            self.scale = exact / discrete;
        }
        self.fill();
        self
    }

    fn fill(&mut self) {
        let n = self.grid.points;
        let h = self.grid.h();
        let up = (0.5 * self.drift * h).exp();
        let down = (-0.5 * self.drift * h).exp();
        self.lower = vec![0.0; n];
        self.diag = vec![0.0; n];
        self.upper = vec![0.0; n];
        for i in 0..n {
            let c = self.scale * (-2.0 * self.grid.s(i)).exp() / (h * h);
            if i == 0 {
                self.upper[0] = 2.0 * c * up;
                self.diag[0] = -self.upper[0];
            } else if i == n - 1 {
                match self.right {
                    RightBoundary::ZeroFlux => {
                        self.lower[i] = 2.0 * c * down;
                        self.diag[i] = -self.lower[i];
                    }
                    RightBoundary::Dirichlet => {}
                }
            } else {
                self.upper[i] = c * up;
                self.lower[i] = c * down;
                self.diag[i] = -(self.upper[i] + self.lower[i]);
            }
        }
    }

    /// Adds a constant source to the left boundary row, making the operator affine.
    pub fn with_left_offset(mut self, value: f64) -> Self {
        self.offset[0] = value;
        self
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn right_boundary(&self) -> RightBoundary {
        self.right
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    /// Number of nodes that actually evolve.
    pub fn free_nodes(&self) -> usize {
        match self.right {
            RightBoundary::ZeroFlux => self.grid.points,
            RightBoundary::Dirichlet => self.grid.points - 1,
        }
    }

    /// Linear part `T W` (no offset), evaluated with differences first.
    pub fn apply_linear(&self, w: &[f64]) -> Vec<f64> {
        let n = w.len();
        (0..n)
            .map(|i| {
                let mut v = 0.0;
                if i + 1 < n {
                    v += self.upper[i] * (w[i + 1] - w[i]);
                }
                if i > 0 {
                    v += self.lower[i] * (w[i - 1] - w[i]);
                }
                v
            })
            .collect()
    }

    /// `T W + offset`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = self.apply_linear(w);
        for (o, b) in out.iter_mut().zip(&self.offset) {
            *o += b;
        }
        out
    }

    /// Weights `μ_i` of the discrete inner product in which `T` is symmetric on the
    /// free nodes. Equal to the trapezoid rule for `∫ w² r^{n-1} dr` in `s`.
    pub fn measure(&self) -> Vec<f64> {
        let a = self.drift;
        self.grid
            .trapezoid()
            .into_iter()
            .enumerate()
            .map(|(i, t)| t * ((a + 2.0) * self.grid.s(i)).exp())
            .collect()
    }
}

/// Boundary choices for [`assemble_operator`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Boundaries {
    pub right: RightBoundary,
}

/// Hardy-absorbed operator for an admissible exponent set.
///
/// The stencil is made exact on `r^σ v_∞ ∝ e^{(σ-m)s}`, so the singular state is a
/// discrete steady state of the nonlinear problem.
pub fn assemble_operator(grid: LogGrid, exps: &ExponentSet, boundaries: Boundaries) -> Result<RadialOperator> {
    if exps.branch == HardyBranch::Inadmissible || !exps.sigma.is_finite() {
        return Err(Error::Admissibility("σ is not real".into()));
    }
    Ok(RadialOperator::new(grid, exps.drift(), boundaries.right).exact_on_power(exps.cap_exponent()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{compute_exponents, joseph_lundgren, ProblemParams};

    fn exps(p: f64) -> ExponentSet {
        compute_exponents(ProblemParams::new(11, p).unwrap()).unwrap()
    }

    #[test]
    fn drift_values() {
        assert!((exps(7.0).drift() - 1.0 / 3.0).abs() < 1e-13);
        assert!(exps(joseph_lundgren(11)).drift().abs() < 1e-15);
    }

    #[test]
    fn constants_are_annihilated() {
        let g = LogGrid::standard();
        for right in [RightBoundary::ZeroFlux, RightBoundary::Dirichlet] {
            let op = assemble_operator(g, &exps(7.0), Boundaries { right }).unwrap();
            let lw = op.apply(&vec![1.0; g.points]);
            assert!(lw.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn power_exactness() {
        let g = LogGrid::from_radii(1e-3, 1e3, 400).unwrap();
        let e = exps(7.0);
        let op = assemble_operator(g, &e, Boundaries::default()).unwrap();
        let k = e.cap_exponent();
        let w: Vec<f64> = g.s_nodes().iter().map(|s| (k * s).exp()).collect();
        let lw = op.apply(&w);
        for i in 1..g.points - 1 {
            let exact = (k * k + e.drift() * k) * ((k - 2.0) * g.s(i)).exp();
            assert!((lw[i] - exact).abs() <= 1e-9 * exact, "node {i}");
        }
        assert!((op.scale() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn symmetric_in_measure() {
        let g = LogGrid::from_radii(1e-2, 1e2, 50).unwrap();
        for right in [RightBoundary::ZeroFlux, RightBoundary::Dirichlet] {
            let op = assemble_operator(g, &exps(7.0), Boundaries { right }).unwrap();
            let mu = op.measure();
            for i in 0..op.free_nodes() - 1 {
                let a = mu[i] * op.upper()[i];
                let b = mu[i + 1] * op.lower()[i + 1];
                assert!((a - b).abs() <= 1e-12 * a.abs(), "row {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn jl_boundary_reduces_to_pure_diffusion() {
        let g = LogGrid::from_radii(1e-2, 1e2, 64).unwrap();
        let op = assemble_operator(g, &exps(joseph_lundgren(11)), Boundaries::default()).unwrap();
        for i in 1..g.points - 1 {
            assert!((op.upper()[i] - op.lower()[i]).abs() <= 1e-12 * op.upper()[i]);
        }
    }
}
