//! Diagnostics on value fields: sup-convolution in `x0`, gradient bounds
//! near Γ and continuity across Γ.

use serde::{Deserialize, Serialize};

use super::{SolveMeta, ValueField};
use crate::error::{JunctionError, Result};
use crate::geometry::{geodesic_distance, JunctionPoint};
use crate::problem::{check_h3, JunctionProblem};

fn psi(s: f64, alpha: f64, p: f64) -> f64 {
    (s * s / (alpha * alpha) + alpha).powf(0.5 * p)
}

fn psi_prime(s: f64, alpha: f64, p: f64) -> f64 {
    p * s / (alpha * alpha) * (s * s / (alpha * alpha) + alpha).powf(0.5 * p - 1.0)
}

/// Half-width of the `x0` window outside which a candidate `z0` cannot
/// realize the supremum: `ψ(s) ≤ 2‖u‖∞ + α^{p/2}`.
fn window(sup_norm: f64, alpha: f64, p: f64) -> f64 {
    let r = (2.0 * sup_norm + alpha.powf(0.5 * p)).powf(2.0 / p) - alpha;
    alpha * r.max(0.0).sqrt()
}

/// Row-wise sup-convolution
/// `u_α(x) = max_{z0} [u(z0, xi) - (|z0 - x0|²/α² + α)^{p/2}]` over the
/// grid nodes of each row.
pub fn sup_convolution_x0(field: &ValueField, alpha: f64, p: f64) -> Result<ValueField> {
    if !(alpha > 0.0 && p > 0.0) {
        return Err(JunctionError::InvalidArgument(format!("alpha and p must be > 0, got {alpha}, {p}")));
    }
    let g = field.grid;
    let dx = g.dx0();
    let reach = (window(field.sup_norm(), alpha, p) / dx + 1e-9).floor() as usize;
    let mut values = vec![0.0; g.len()];
    for row in 0..g.n_rows() {
        let base = row * g.n0;
        let u = &field.values[base..base + g.n0];
        for j in 0..g.n0 {
            let lo = j.saturating_sub(reach);
            let hi = (j + reach).min(g.n0 - 1);
            let mut best = f64::NEG_INFINITY;
            for z in lo..=hi {
                let s = (z as f64 - j as f64) * dx;
                best = best.max(u[z] - psi(s, alpha, p));
            }
            values[base + j] = best;
        }
    }
    Ok(ValueField { grid: g, values, flagged: field.flagged.clone(), meta: SolveMeta::default() })
}

/// Bound on the `x0` difference quotients of [`sup_convolution_x0`] between
/// nodes `dx0` apart: `max |ψ'(s)|` over `|s| ≤ W + dx0`, with `W` the
/// search window for a field of sup-norm `sup_norm`.
pub fn sup_convolution_lipschitz_bound(sup_norm: f64, alpha: f64, p: f64, dx0: f64) -> f64 {
    let smax = window(sup_norm, alpha, p) + dx0;
    // |ψ'| increases on [0, ∞) when p ≥ 1; for p < 1 it peaks at
    // s² = α³/(1 - p).
    let s = if p >= 1.0 { smax } else { smax.min((alpha.powi(3) / (1.0 - p)).sqrt()) };
    psi_prime(s, alpha, p).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub delta: f64,
    /// `2(λ M_u + M_ℓ)/δ` with `M_u = M_ℓ/λ`.
    pub c_star: f64,
    /// `2·max(dx0, dxi)·C*`.
    pub slack: f64,
    pub max_quotient: f64,
    pub pairs_checked: usize,
    pub violations: usize,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Geodesic difference quotients between neighbouring unflagged nodes with
/// `xi ≤ radius`, including the pairs of first rows of two planes, which are
/// `2·dxi` apart through Γ.
pub fn gradient_bound_check(field: &ValueField, problem: &JunctionProblem, radius: f64) -> Result<GradientReport> {
    let g = field.grid;
    let mut delta = f64::INFINITY;
    for i0 in 0..g.n0 {
        for r in check_h3(problem, &JunctionPoint::gamma(g.x0_at(i0)))? {
            delta = delta.min(r);
        }
    }
    let d = problem.declared();
    let lambda = problem.lambda();
    let m_u = d.m_ell / lambda;
    let c_star = if delta > 0.0 { 2.0 * (lambda * m_u + d.m_ell) / delta } else { f64::INFINITY };
    let slack = 2.0 * g.dx0().max(g.dxi()) * c_star;
    let top = ((radius / g.dxi()) + 1e-9).floor().min((g.ni - 1) as f64) as usize;

    let mut rep = GradientReport { delta, c_star, slack, max_quotient: 0.0, pairs_checked: 0, violations: 0 };
    let mut visit = |a: (usize, usize, usize), b: (usize, usize, usize)| {
        let (ia, ib) = (g.index(a.0, a.1, a.2), g.index(b.0, b.1, b.2));
        if field.flagged[ia] || field.flagged[ib] {
            return;
        }
        let dist = geodesic_distance(&g.node_point(a.0, a.1, a.2), &g.node_point(b.0, b.1, b.2));
        let q = (field.values[ia] - field.values[ib]).abs() / dist;
        rep.pairs_checked += 1;
        rep.max_quotient = rep.max_quotient.max(q);
        if q > c_star + slack {
            rep.violations += 1;
        }
    };
    for k in 1..=g.n_planes {
        for ii in 0..=top {
            if ii == 0 && k > 1 {
                continue;
            }
            for i0 in 0..g.n0 {
                if i0 + 1 < g.n0 {
                    visit((k, ii, i0), (k, ii, i0 + 1));
                }
                if ii < top {
                    visit((k, ii, i0), (k, ii + 1, i0));
                }
                if ii == 1 {
                    for k2 in k + 1..=g.n_planes {
                        visit((k, 1, i0), (k2, 1, i0));
                    }
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// `max |2 v(k, 1, j) - v(k, 2, j) - v(Γ, j)|` over planes and columns.
    pub max_mismatch: f64,
    pub per_plane: Vec<f64>,
    pub worst_x0: f64,
}

/// Mismatch between the linear extrapolation to `xi = 0` of each plane's
/// first two rows and the shared Γ row.
pub fn continuity_across_gamma(field: &ValueField) -> Result<ContinuityReport> {
    let d = field.grid.domain;
    continuity_across_gamma_in(field, (d.x0_min, d.x0_max))
}

/// [`continuity_across_gamma`] restricted to Γ nodes with `x0` in `window`;
/// columns touching a flagged node are skipped.
pub fn continuity_across_gamma_in(field: &ValueField, window: (f64, f64)) -> Result<ContinuityReport> {
    let g = field.grid;
    if g.ni < 3 {
        return Err(JunctionError::InvalidArgument("continuity check needs ni >= 3".into()));
    }
    let mut rep = ContinuityReport { max_mismatch: 0.0, per_plane: vec![0.0; g.n_planes], worst_x0: f64::NAN };
    for i0 in 0..g.n0 {
        let x0 = g.x0_at(i0);
        if x0 < window.0 - 1e-12 || x0 > window.1 + 1e-12 {
            continue;
        }
        let ig = g.index(1, 0, i0);
        for k in 1..=g.n_planes {
            let (i1, i2) = (g.index(k, 1, i0), g.index(k, 2, i0));
            if field.flagged[ig] || field.flagged[i1] || field.flagged[i2] {
                continue;
            }
            let m = (2.0 * field.values[i1] - field.values[i2] - field.values[ig]).abs();
            rep.per_plane[k - 1] = rep.per_plane[k - 1].max(m);
            if m > rep.max_mismatch || rep.worst_x0.is_nan() {
                rep.max_mismatch = rep.max_mismatch.max(m);
                rep.worst_x0 = x0;
            }
        }
    }
    Ok(rep)
}
