use serde::Serialize;

use super::operator::RightBoundary;
use super::stepper::{EvolutionConfig, ReactionScheme};
use crate::error::Result;
use crate::grid::LogGrid;

/// Grid, boundary and step schedule shared by every evolution of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSetup {
    pub grid: LogGrid,
    pub right: RightBoundary,
    pub dt0: f64,
    pub growth: f64,
    pub theta: f64,
    pub scheme: ReactionScheme,
}

impl Default for SolverSetup {
    fn default() -> Self {
        Self {
            grid: LogGrid::standard(),
            right: RightBoundary::Dirichlet,
            dt0: 1e-4,
            growth: 1.05,
            theta: 1.0,
            scheme: ReactionScheme::Implicit,
        }
    }
}

impl SolverSetup {
    pub fn with_grid(grid: LogGrid) -> Self {
        Self { grid, ..Self::default() }
    }

    /// Schedule from `t = 0` to the last snapshot.
    pub fn config(&self, snapshot_times: &[f64]) -> Result<EvolutionConfig> {
        let t1 = snapshot_times.iter().copied().fold(0.0, f64::max);
        let cfg = EvolutionConfig {
            t0: 0.0,
            t1,
            dt0: self.dt0,
            growth: self.growth,
            theta: self.theta,
            snapshot_times: snapshot_times.to_vec(),
            scheme: self.scheme,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
