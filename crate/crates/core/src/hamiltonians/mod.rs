//! Hamiltonians of the junction problem as exact finite maxima of affine
//! pieces, the minimizing set of normal shifts, tangential mixing and the
//! relaxed generator set at Γ.

mod regularity;

pub use regularity::{hamiltonian_regularity_report, RegularityConfig, RegularityReport};

use serde::{Deserialize, Serialize};

use crate::error::{JunctionError, Result};
use crate::geometry::JunctionPoint;
use crate::problem::{
    fl_interface_set, fl_plus_set, fl_set, mix_pair, require_gamma, FLPoint, JunctionProblem,
};

/// Covector `p0 e0 + pi ei` of one plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub p0: f64,
    pub pi: f64,
}

impl Covector {
    pub fn new(p0: f64, pi: f64) -> Self {
        Covector { p0, pi }
    }

    pub fn norm(&self) -> f64 {
        self.p0.hypot(self.pi)
    }

    /// `p + d·ei`.
    pub fn shifted(&self, d: f64) -> Self {
        Covector { p0: self.p0, pi: self.pi + d }
    }
}

/// Flat bottom `[delta_min, delta_max]` of `d ↦ H_i(x, p + d·ei)` and the
/// minimal value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSet {
    pub delta_min: f64,
    pub delta_max: f64,
    pub value: f64,
}

/// Where a tangential point comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixSource {
    Native(usize),
    /// Indices of the `fi > 0` and `fi < 0` points.
    Pair { pos: usize, neg: usize },
}

fn max_piece(points: &[FLPoint], p: &Covector) -> Option<f64> {
    points.iter().map(|q| q.hamiltonian_piece(p.p0, p.pi)).reduce(f64::max)
}

/// `H_i(x, p) = max_a (-p·f_i(x, a) - ℓ_i(x, a))`.
pub fn h_i(problem: &JunctionProblem, plane: usize, x: &JunctionPoint, p: &Covector) -> Result<f64> {
    max_piece(&fl_set(problem, plane, x)?, p).ok_or(JunctionError::EmptyControlSet(plane))
}

/// `H_i⁺(x, p)` at a point of Γ: the max over controls that do not leave the
/// plane (including zero-normal mixes when the problem is convexified).
pub fn h_i_plus(problem: &JunctionProblem, plane: usize, x: &JunctionPoint, p: &Covector) -> Result<f64> {
    max_piece(&fl_plus_set(problem, plane, x)?, p)
        .ok_or_else(|| JunctionError::EmptyAdmissibleSet(format!("plane {plane} at {x:?}")))
}

/// `H₀(x, p0)` over the interface controls; `None` when there are none.
pub fn h_zero(problem: &JunctionProblem, x: &JunctionPoint, p0: f64) -> Result<Option<f64>> {
    Ok(max_piece(&fl_interface_set(problem, x)?, &Covector::new(p0, 0.0)))
}

/// `H_Γ(x, p_1, …, p_N) = max(H₀(x, p0), max_i H_i⁺(x, p_i))`. All covectors
/// must share the same `p0`.
pub fn h_gamma(problem: &JunctionProblem, x: &JunctionPoint, ps: &[Covector]) -> Result<f64> {
    require_gamma(x)?;
    if ps.len() != problem.n_planes() {
        return Err(JunctionError::InvalidArgument(format!(
            "expected {} covectors, got {}",
            problem.n_planes(),
            ps.len()
        )));
    }
    if ps.iter().any(|p| p.p0 != ps[0].p0) {
        return Err(JunctionError::MismatchedTangential);
    }
    let mut h = f64::NEG_INFINITY;
    for (k, p) in problem.shape().planes().zip(ps) {
        h = h.max(h_i_plus(problem, k, x, p)?);
    }
    if let Some(h0) = h_zero(problem, x, ps[0].p0)? {
        h = h.max(h0);
    }
    Ok(h)
}

/// `H_Γ,iᵀ(x, p0)`: the max over native zero-normal controls of plane `i`
/// and every zero-normal pairwise mix. Mixing is always applied here.
pub fn h_gamma_t_i(problem: &JunctionProblem, plane: usize, x: &JunctionPoint, p0: f64) -> Result<f64> {
    require_gamma(x)?;
    let t = tangential_mixing(&fl_set(problem, plane, x)?);
    max_piece(&t, &Covector::new(p0, 0.0)).ok_or(JunctionError::EmptyTangentialSet(plane))
}

/// `H_Γᵀ(x, p0) = max(H₀(x, p0), max_i H_Γ,iᵀ(x, p0))`.
pub fn h_gamma_t(problem: &JunctionProblem, x: &JunctionPoint, p0: f64) -> Result<f64> {
    let mut h = f64::NEG_INFINITY;
    for k in problem.shape().planes() {
        h = h.max(h_gamma_t_i(problem, k, x, p0)?);
    }
    if let Some(h0) = h_zero(problem, x, p0)? {
        h = h.max(h0);
    }
    Ok(h)
}

/// Zero-normal points obtainable from `points`: native `fi == 0` entries,
/// then, for each pair with `fi_a > 0 > fi_b`, the combination with weight
/// `θ = -fi_b / (fi_a - fi_b)` on `a`. The output `fi` is exactly 0.
pub fn tangential_mixing(points: &[FLPoint]) -> Vec<FLPoint> {
    tangential_mixing_indexed(points).into_iter().map(|(_, p)| p).collect()
}

/// [`tangential_mixing`] with provenance.
pub fn tangential_mixing_indexed(points: &[FLPoint]) -> Vec<(MixSource, FLPoint)> {
    let mut out: Vec<(MixSource, FLPoint)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.fi == 0.0)
        .map(|(k, p)| (MixSource::Native(k), FLPoint { fi: 0.0, ..*p }))
        .collect();
    for (a, pa) in points.iter().enumerate().filter(|(_, p)| p.fi > 0.0) {
        for (b, pb) in points.iter().enumerate().filter(|(_, p)| p.fi < 0.0) {
            out.push((MixSource::Pair { pos: a, neg: b }, mix_pair(pa, pb)));
        }
    }
    out
}

/// Generators of the relaxed set at `x ∈ Γ` seen from plane `plane`:
/// `FL_i⁺(x)`, the tangential points of every other plane, and `FL₀(x)`.
/// Its convex hull is represented by these generators.
pub fn relaxed_fl(problem: &JunctionProblem, x: &JunctionPoint, plane: usize) -> Result<Vec<FLPoint>> {
    require_gamma(x)?;
    let mut out = fl_plus_set(problem, plane, x)?;
    for k in problem.shape().planes().filter(|&k| k != plane) {
        out.extend(tangential_mixing(&fl_set(problem, k, x)?));
    }
    out.extend(fl_interface_set(problem, x)?);
    Ok(out)
}

/// Exact minimizing set of the convex piecewise-linear map
/// `φ(d) = H_i(x, p + d·ei) = max_a (c_a - fi_a·d)` at a point of Γ.
///
/// The upper envelope of the lines is built after sorting them by slope
/// `-fi`; the minimum sits where the envelope slope changes sign.
pub fn delta_min_set(problem: &JunctionProblem, plane: usize, x: &JunctionPoint, p: &Covector) -> Result<MinimizerSet> {
    require_gamma(x)?;
    let fl = fl_set(problem, plane, x)?;
    if !(fl.iter().any(|q| q.fi > 0.0) && fl.iter().any(|q| q.fi < 0.0)) {
        return Err(JunctionError::NotCoercive(plane));
    }
    // (slope, intercept)
    let mut lines: Vec<(f64, f64)> = fl.iter().map(|q| (-q.fi, q.hamiltonian_piece(p.p0, p.pi))).collect();
    lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    // Keep the highest intercept per slope.
    let mut uniq: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for l in lines {
        match uniq.last_mut() {
            Some(last) if last.0 == l.0 => *last = l,
            _ => uniq.push(l),
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(uniq.len());
    for l3 in uniq {
        while hull.len() >= 2 {
            let (m1, c1) = hull[hull.len() - 2];
            let (m2, c2) = hull[hull.len() - 1];
            let (m3, c3) = l3;
            // l2 never strictly exceeds max(l1, l3).
            if (c1 - c2) * (m3 - m2) >= (c2 - c3) * (m2 - m1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l3);
    }
    let cut = |a: (f64, f64), b: (f64, f64)| (a.1 - b.1) / (b.0 - a.0);
    let j = hull.iter().position(|l| l.0 >= 0.0).expect("a line with fi < 0 exists");
    debug_assert!(j > 0);
    if hull[j].0 == 0.0 {
        let lo = cut(hull[j - 1], hull[j]);
        let hi = cut(hull[j], hull[j + 1]);
        Ok(MinimizerSet { delta_min: lo, delta_max: hi, value: hull[j].1 })
    } else {
        let d = cut(hull[j - 1], hull[j]);
        let value = hull[j - 1].1 + hull[j - 1].0 * d;
        Ok(MinimizerSet { delta_min: d, delta_max: d, value })
    }
}
