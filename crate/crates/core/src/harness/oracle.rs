//! Dense eigendecomposition of the discrete operator: the exact matrix
//! exponential against which the time stepper is checked.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::radial_pde::{RadialOperator, RightBoundary};

/// Largest grid accepted by the dense oracle.
pub const MAX_ORACLE_NODES: usize = 128;

/// `exp(tT)` for the tridiagonal operator `T` on its free nodes.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    eigenvalues: DVector<f64>,
    vectors: DMatrix<f64>,
    sqrt_mu: Vec<f64>,
    free: usize,
    right: RightBoundary,
    /// `T_{f,pinned}`: coupling of the last free node to a Dirichlet node.
    coupling: f64,
    symmetry_residual: f64,
}

impl DenseOracle {
    pub fn new(op: &RadialOperator) -> Result<Self> {
        let points = op.grid().points;
        if points > MAX_ORACLE_NODES {
            return Err(Error::Domain(format!("dense oracle limited to {MAX_ORACLE_NODES} nodes, got {points}")));
        }
        let free = op.free_nodes();
        let mu = op.measure();
        let sqrt_mu: Vec<f64> = mu[..free].iter().map(|m| m.sqrt()).collect();
        // S = D^{1/2} T D^{-1/2}
        let mut s = DMatrix::<f64>::zeros(free, free);
        for i in 0..free {
            s[(i, i)] = op.diag()[i];
            if i + 1 < free {
                s[(i, i + 1)] = op.upper()[i] * sqrt_mu[i] / sqrt_mu[i + 1];
            }
            if i > 0 {
                s[(i, i - 1)] = op.lower()[i] * sqrt_mu[i] / sqrt_mu[i - 1];
            }
        }
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut residual: f64 = 0.0;
        for i in 0..free.saturating_sub(1) {
            residual = residual.max((s[(i, i + 1)] - s[(i + 1, i)]).abs() / scale);
        }
        if residual > 1e-10 {
            return Err(Error::Eigen(format!("symmetrisation residual {residual:e} exceeds 1e-10")));
        }
        let sym = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let coupling = if free < points { op.upper()[free - 1] } else { 0.0 };
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            vectors: eig.eigenvectors,
            sqrt_mu,
            free,
            right: op.right_boundary(),
            coupling,
            symmetry_residual: residual,
        })
    }

    pub fn symmetry_residual(&self) -> f64 {
        self.symmetry_residual
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    /// `exp(tS)` applied to `x` in symmetrised coordinates.
    fn exp_sym(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut c = self.vectors.transpose() * x;
        for (ci, l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci *= (t * l).exp();
        }
        &self.vectors * c
    }

    /// `S^{-1} x` in symmetrised coordinates.
    fn solve_sym(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut c = self.vectors.transpose() * x;
        for (ci, l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci /= l;
        }
        &self.vectors * c
    }

    /// Exact solution of `W' = T W` at time `t`; a Dirichlet node keeps its value.
    pub fn propagate(&self, w0: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("t = {t} must be nonnegative")));
        }
        let y0 = DVector::from_iterator(self.free, (0..self.free).map(|i| self.sqrt_mu[i] * w0[i]));
        let y = match self.right {
            RightBoundary::Dirichlet if w0[self.free] != 0.0 => {
                // Affine system: y' = S y + g with the pinned value entering the last row.
                let mut g = DVector::zeros(self.free);
                g[self.free - 1] = self.sqrt_mu[self.free - 1] * self.coupling * w0[self.free];
                let fixed = -self.solve_sym(&g);
                self.exp_sym(&(y0 - &fixed), t) + fixed
            }
            _ => self.exp_sym(&y0, t),
        };
        let mut out: Vec<f64> = (0..self.free).map(|i| y[i] / self.sqrt_mu[i]).collect();
        out.extend_from_slice(&w0[self.free..]);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LogGrid;

    #[test]
    fn identity_at_zero_and_constants_kept() {
        let g = LogGrid::from_radii(0.1, 10.0, 40).unwrap();
        let op = RadialOperator::new(g, 1.0 / 3.0, RightBoundary::ZeroFlux);
        let o = DenseOracle::new(&op).unwrap();
        let w: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin() + 2.0).collect();
        let same = o.propagate(&w, 0.0).unwrap();
        assert!(same.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
        let ones = o.propagate(&vec![1.0; 40], 3.0).unwrap();
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(o.symmetry_residual() < 1e-14);
    }

    #[test]
    fn dirichlet_fixed_point() {
        let g = LogGrid::from_radii(0.1, 10.0, 40).unwrap();
        let op = RadialOperator::new(g, 0.5, RightBoundary::Dirichlet);
        let o = DenseOracle::new(&op).unwrap();
        // constants solve the Dirichlet problem with matching boundary value
        let w = o.propagate(&vec![0.7; 40], 5.0).unwrap();
        assert!(w.iter().all(|v| (v - 0.7).abs() < 1e-10));
    }

    #[test]
    fn rejects_large_grids() {
        let op = RadialOperator::new(LogGrid::standard(), 0.0, RightBoundary::ZeroFlux);
        assert!(DenseOracle::new(&op).is_err());
    }
}
