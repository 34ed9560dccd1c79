//! Semi-Lagrangian value iteration on a discretized junction, value fields
//! and diagnostic operators.

mod diagnostics;
mod export;
mod grid;
mod scheme;

pub use diagnostics::{
    continuity_across_gamma, continuity_across_gamma_in, gradient_bound_check, sup_convolution_lipschitz_bound,
    sup_convolution_x0, ContinuityReport, GradientReport,
};
pub use export::{write_field_csv, write_plane_csv};
pub use grid::{JunctionGrid, Stencil};
pub use scheme::{value_iteration, value_iteration_from, SchemeConfig, SemiLagrangianScheme};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::JunctionPoint;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveMeta {
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub residual: f64,
    pub dt: f64,
    /// Discount factor bounding the sweep's Lipschitz constant.
    pub contraction: f64,
    pub converged: bool,
    /// Sup-norm update of every sweep.
    pub diff_history: Vec<f64>,
}

/// Values on every node of a [`JunctionGrid`], in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: JunctionGrid,
    pub values: Vec<f64>,
    /// Nodes where no control was admissible (value set to `M_ℓ/λ`).
    pub flagged: Vec<bool>,
    pub meta: SolveMeta,
}

impl ValueField {
    /// Samples `f` at every node; nothing is flagged.
    pub fn from_fn(grid: JunctionGrid, f: impl Fn(&JunctionPoint) -> f64) -> Self {
        let values = grid.nodes().map(|(k, ii, i0)| f(&grid.node_point(k, ii, i0))).collect();
        ValueField { grid, values, flagged: vec![false; grid.len()], meta: SolveMeta::default() }
    }

    pub fn value(&self, plane: usize, ii: usize, i0: usize) -> f64 {
        self.values[self.grid.index(plane, ii, i0)]
    }

    /// Bilinear interpolation inside the point's plane; Γ points read the
    /// shared row.
    pub fn interpolate(&self, p: &JunctionPoint) -> Result<f64> {
        Ok(self.grid.locate(p)?.apply(&self.values))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}
