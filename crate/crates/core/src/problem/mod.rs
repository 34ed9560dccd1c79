//! Control sets, dynamics, running costs and the discounted problem on a
//! junction, plus the `(f, ℓ)` set constructors used by every other module.

mod checks;

pub use checks::{
    check_h0_h1, check_h2, check_h3, check_h3_tilde, controllability_radius, Domain, H0H1Report,
    H2Report, RadiusMode,
};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{JunctionError, Result};
use crate::geometry::{JunctionPoint, JunctionShape};
use crate::hamiltonians::{tangential_mixing_indexed, MixSource};

type VectorFn = dyn Fn(&JunctionPoint) -> (f64, f64) + Send + Sync;
type ScalarFn = dyn Fn(&JunctionPoint) -> f64 + Send + Sync;

/// Dynamics `f(x, a) = f0 e0 + fi ei` of one control atom.
#[derive(Clone)]
pub enum Dynamics {
    Constant { f0: f64, fi: f64 },
    /// `f = offset + matrix · (x0, xi)`.
    Affine { offset: [f64; 2], matrix: [[f64; 2]; 2] },
    /// Programmatic dynamics with a declared Lipschitz constant.
    Custom { eval: Arc<VectorFn>, lipschitz: f64 },
}

impl Dynamics {
    pub fn eval(&self, x: &JunctionPoint) -> (f64, f64) {
        match self {
            Dynamics::Constant { f0, fi } => (*f0, *fi),
            Dynamics::Affine { offset, matrix } => (
                offset[0] + matrix[0][0] * x.x0 + matrix[0][1] * x.xi,
                offset[1] + matrix[1][0] * x.x0 + matrix[1][1] * x.xi,
            ),
            Dynamics::Custom { eval, .. } => eval(x),
        }
    }

    /// Lipschitz constant of `x ↦ f(x)` (operator 2-norm for affine maps).
    pub fn lipschitz(&self) -> f64 {
        match self {
            Dynamics::Constant { .. } => 0.0,
            Dynamics::Affine { matrix, .. } => spectral_norm(matrix),
            Dynamics::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Dynamics::Constant { .. })
    }
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Constant { f0, fi } => write!(f, "Constant({f0}, {fi})"),
            Dynamics::Affine { offset, matrix } => write!(f, "Affine({offset:?}, {matrix:?})"),
            Dynamics::Custom { lipschitz, .. } => write!(f, "Custom(L = {lipschitz})"),
        }
    }
}

/// Running cost `ℓ(x, a)` of one control atom.
#[derive(Clone)]
pub enum Cost {
    Constant(f64),
    /// `ℓ = offset + gradient · (x0, xi)`.
    Affine { offset: f64, gradient: [f64; 2] },
    Custom { eval: Arc<ScalarFn>, lipschitz: f64 },
}

impl Cost {
    pub fn eval(&self, x: &JunctionPoint) -> f64 {
        match self {
            Cost::Constant(c) => *c,
            Cost::Affine { offset, gradient } => offset + gradient[0] * x.x0 + gradient[1] * x.xi,
            Cost::Custom { eval, .. } => eval(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Cost::Constant(_) => 0.0,
            Cost::Affine { gradient, .. } => gradient[0].hypot(gradient[1]),
            Cost::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Cost::Constant(_))
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Constant(c) => write!(f, "Constant({c})"),
            Cost::Affine { offset, gradient } => write!(f, "Affine({offset}, {gradient:?})"),
            Cost::Custom { lipschitz, .. } => write!(f, "Custom(L = {lipschitz})"),
        }
    }
}

fn spectral_norm(m: &[[f64; 2]; 2]) -> f64 {
    // Largest singular value from the eigenvalues of MᵀM.
    let a = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let b = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let d = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
    (0.5 * (tr + disc)).max(0.0).sqrt()
}

/// A labelled control with its dynamics and running cost.
#[derive(Debug, Clone)]
pub struct ControlAtom {
    pub id: String,
    pub dynamics: Dynamics,
    pub cost: Cost,
}

impl ControlAtom {
    pub fn new(id: impl Into<String>, dynamics: Dynamics, cost: Cost) -> Self {
        ControlAtom { id: id.into(), dynamics, cost }
    }

    pub fn constant(id: impl Into<String>, f0: f64, fi: f64, ell: f64) -> Self {
        ControlAtom::new(id, Dynamics::Constant { f0, fi }, Cost::Constant(ell))
    }

    pub fn eval(&self, x: &JunctionPoint) -> FLPoint {
        let (f0, fi) = self.dynamics.eval(x);
        FLPoint { f0, fi, ell: self.cost.eval(x) }
    }

    /// True when both dynamics and cost are independent of the state.
    pub fn is_uniform(&self) -> bool {
        self.dynamics.is_constant() && self.cost.is_constant()
    }

    /// Constant dynamics sampled on the circle `center + radius·(cos θ, sin θ)`
    /// at `samples` equally spaced angles starting from θ = 0. Ids are
    /// `"{prefix}#{k}"`.
    pub fn disc_family(
        prefix: &str,
        center: [f64; 2],
        radius: f64,
        samples: usize,
        cost: Cost,
    ) -> Vec<ControlAtom> {
        Self::filled_disc_family(prefix, center, radius, samples, 1, cost)
    }

    /// Like [`ControlAtom::disc_family`] but with `rings` concentric circles
    /// of radii `radius·r/rings`, plus the center when `rings > 1`.
    pub fn filled_disc_family(
        prefix: &str,
        center: [f64; 2],
        radius: f64,
        samples: usize,
        rings: usize,
        cost: Cost,
    ) -> Vec<ControlAtom> {
        let rings = rings.max(1);
        let mut out = Vec::with_capacity(samples * rings + 1);
        // Components below this are rounding residue of cos/sin at multiples
        // of π/2; snapping them keeps exact zero-normal atoms exact.
        let snap = |v: f64| if v.abs() < 1e-12 * radius.max(1.0) { 0.0 } else { v };
        for r in (1..=rings).rev() {
            let rad = radius * r as f64 / rings as f64;
            for k in 0..samples {
                let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                let id = if rings == 1 {
                    format!("{prefix}#{k}")
                } else {
                    format!("{prefix}#{r}.{k}")
                };
                out.push(ControlAtom::new(
                    id,
                    Dynamics::Constant {
                        f0: center[0] + snap(rad * th.cos()),
                        fi: center[1] + snap(rad * th.sin()),
                    },
                    cost.clone(),
                ));
            }
        }
        if rings > 1 {
            out.push(ControlAtom::new(
                format!("{prefix}#0"),
                Dynamics::Constant { f0: center[0], fi: center[1] },
                cost,
            ));
        }
        out
    }
}

/// Declared bounds: `|f| ≤ M_f`, `|ℓ| ≤ M_ℓ`, `f` is `L_f`-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub m_f: f64,
    pub m_ell: f64,
    pub l_f: f64,
}

/// One value of `(f, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FLPoint {
    pub f0: f64,
    pub fi: f64,
    pub ell: f64,
}

impl FLPoint {
    /// The affine piece `-p·f - ℓ`.
    pub fn hamiltonian_piece(&self, p0: f64, pi: f64) -> f64 {
        -p0 * self.f0 - pi * self.fi - self.ell
    }
}

/// Location of an atom inside a problem. Planes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlRef {
    Plane { plane: usize, index: usize },
    Interface { index: usize },
    /// Zero-normal convex combination of atom `pos` (`fi > 0`) and atom
    /// `neg` (`fi < 0`) of `plane`, weighted so that the normal part cancels.
    Mix { plane: usize, pos: usize, neg: usize },
}

/// The discounted infinite-horizon problem on a junction.
#[derive(Debug, Clone)]
pub struct JunctionProblem {
    shape: JunctionShape,
    plane_controls: Vec<Vec<ControlAtom>>,
    interface_controls: Vec<ControlAtom>,
    lambda: f64,
    declared: DeclaredConstants,
    convexify: bool,
    ids: HashMap<String, ControlRef>,
}

impl JunctionProblem {
    /// `plane_controls[k]` is the control set of plane `k + 1`.
    pub fn new(
        plane_controls: Vec<Vec<ControlAtom>>,
        lambda: f64,
        declared: DeclaredConstants,
    ) -> Result<Self> {
        let shape = JunctionShape::new(plane_controls.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(JunctionError::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
        }
        for (name, v) in [("M_f", declared.m_f), ("M_ell", declared.m_ell), ("L_f", declared.l_f)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(JunctionError::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        let mut ids = HashMap::new();
        for (k, atoms) in plane_controls.iter().enumerate() {
            if atoms.is_empty() {
                return Err(JunctionError::EmptyControlSet(k + 1));
            }
            for (index, a) in atoms.iter().enumerate() {
                if ids.insert(a.id.clone(), ControlRef::Plane { plane: k + 1, index }).is_some() {
                    return Err(JunctionError::InvalidArgument(format!("duplicate control id `{}`", a.id)));
                }
            }
        }
        Ok(JunctionProblem {
            shape,
            plane_controls,
            interface_controls: Vec::new(),
            lambda,
            declared,
            convexify: false,
            ids,
        })
    }

    /// Adds the interface control set A₀. The normal component of every
    /// interface atom is discarded: these controls move along Γ only.
    pub fn with_interface_controls(mut self, atoms: Vec<ControlAtom>) -> Result<Self> {
        for (index, a) in atoms.iter().enumerate() {
            if self.ids.insert(a.id.clone(), ControlRef::Interface { index }).is_some() {
                return Err(JunctionError::InvalidArgument(format!("duplicate control id `{}`", a.id)));
            }
        }
        self.interface_controls = atoms;
        Ok(self)
    }

    pub fn with_convexify(mut self, convexify: bool) -> Self {
        self.convexify = convexify;
        self
    }

    pub fn shape(&self) -> JunctionShape {
        self.shape
    }

    pub fn n_planes(&self) -> usize {
        self.shape.n_planes()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn declared(&self) -> DeclaredConstants {
        self.declared
    }

    pub fn convexify(&self) -> bool {
        self.convexify
    }

    /// Control set of plane `plane` (1-based).
    pub fn plane_controls(&self, plane: usize) -> &[ControlAtom] {
        &self.plane_controls[plane - 1]
    }

    pub fn interface_controls(&self) -> &[ControlAtom] {
        &self.interface_controls
    }

    pub fn has_interface_controls(&self) -> bool {
        !self.interface_controls.is_empty()
    }

    pub fn lookup(&self, id: &str) -> Result<ControlRef> {
        self.ids.get(id).copied().ok_or_else(|| JunctionError::UnknownAtom(id.to_string()))
    }

    pub fn atom(&self, r: ControlRef) -> Option<&ControlAtom> {
        match r {
            ControlRef::Plane { plane, index } => self.plane_controls.get(plane.checked_sub(1)?)?.get(index),
            ControlRef::Interface { index } => self.interface_controls.get(index),
            ControlRef::Mix { .. } => None,
        }
    }

    /// Human-readable label of a control reference.
    pub fn label(&self, r: ControlRef) -> String {
        match r {
            ControlRef::Mix { plane, pos, neg } => {
                let a = &self.plane_controls[plane - 1];
                format!("mix({}|{})", a[pos].id, a[neg].id)
            }
            other => self.atom(other).map(|a| a.id.clone()).unwrap_or_default(),
        }
    }

    /// `(f, ℓ)` of a control at `x`. Interface atoms have `fi = 0` exactly.
    /// A mix is `None` when its two atoms do not straddle `fi = 0` at `x`.
    pub fn eval_control(&self, r: ControlRef, x: &JunctionPoint) -> Option<FLPoint> {
        match r {
            ControlRef::Plane { .. } => Some(self.atom(r)?.eval(x)),
            ControlRef::Interface { index } => {
                let mut p = self.interface_controls.get(index)?.eval(x);
                p.fi = 0.0;
                Some(p)
            }
            ControlRef::Mix { plane, pos, neg } => {
                let atoms = self.plane_controls.get(plane.checked_sub(1)?)?;
                let a = atoms.get(pos)?.eval(x);
                let b = atoms.get(neg)?.eval(x);
                (a.fi > 0.0 && b.fi < 0.0).then(|| mix_pair(&a, &b))
            }
        }
    }

    fn check_plane(&self, plane: usize) -> Result<()> {
        if plane == 0 || plane > self.n_planes() {
            return Err(JunctionError::InvalidArgument(format!(
                "plane {plane} out of range 1..={}",
                self.n_planes()
            )));
        }
        Ok(())
    }
}

/// Zero-normal convex combination of `a` (`fi > 0`) and `b` (`fi < 0`).
pub(crate) fn mix_pair(a: &FLPoint, b: &FLPoint) -> FLPoint {
    let theta = -b.fi / (a.fi - b.fi);
    FLPoint {
        f0: theta * a.f0 + (1.0 - theta) * b.f0,
        fi: 0.0,
        ell: theta * a.ell + (1.0 - theta) * b.ell,
    }
}

fn require_in_plane(problem: &JunctionProblem, plane: usize, x: &JunctionPoint) -> Result<()> {
    problem.check_plane(plane)?;
    if !x.in_plane(plane) {
        return Err(JunctionError::InvalidPoint(format!("{x:?} is not in plane {plane}")));
    }
    Ok(())
}

pub(crate) fn require_gamma(x: &JunctionPoint) -> Result<()> {
    if !x.on_gamma() {
        return Err(JunctionError::InvalidPoint(format!("{x:?} is not on Γ")));
    }
    Ok(())
}

/// `FL_i(x)`: one entry per atom of plane `plane`, in atom order.
pub fn fl_set(problem: &JunctionProblem, plane: usize, x: &JunctionPoint) -> Result<Vec<FLPoint>> {
    require_in_plane(problem, plane, x)?;
    Ok(problem.plane_controls(plane).iter().map(|a| a.eval(x)).collect())
}

/// `FL_i⁺(x)` at a point of Γ: atoms with `fi ≥ 0`, followed by the pairwise
/// zero-normal mixes of `FL_i(x)` when the problem is convexified.
pub fn fl_plus_set(problem: &JunctionProblem, plane: usize, x: &JunctionPoint) -> Result<Vec<FLPoint>> {
    Ok(fl_plus_indexed(problem, plane, x)?.into_iter().map(|(_, p)| p).collect())
}

/// [`fl_plus_set`] with the control realizing each entry.
pub fn fl_plus_indexed(
    problem: &JunctionProblem,
    plane: usize,
    x: &JunctionPoint,
) -> Result<Vec<(ControlRef, FLPoint)>> {
    require_gamma(x)?;
    let all = fl_set(problem, plane, x)?;
    let mut out: Vec<(ControlRef, FLPoint)> = all
        .iter()
        .enumerate()
        .filter(|(_, p)| p.fi >= 0.0)
        .map(|(index, p)| (ControlRef::Plane { plane, index }, *p))
        .collect();
    if problem.convexify() {
        for (src, p) in tangential_mixing_indexed(&all) {
            if let MixSource::Pair { pos, neg } = src {
                out.push((ControlRef::Mix { plane, pos, neg }, p));
            }
        }
    }
    Ok(out)
}

/// `FL₀(x)`: interface controls at a point of Γ, with `fi = 0`.
pub fn fl_interface_set(problem: &JunctionProblem, x: &JunctionPoint) -> Result<Vec<FLPoint>> {
    require_gamma(x)?;
    Ok((0..problem.interface_controls().len())
        .map(|index| problem.eval_control(ControlRef::Interface { index }, x).expect("valid index"))
        .collect())
}

/// `FL(x)` at a point of Γ: `∪_i FL_i⁺(x) ∪ FL₀(x)`, each entry tagged with
/// its plane (0 for interface controls).
pub fn fl_gamma_set(problem: &JunctionProblem, x: &JunctionPoint) -> Result<Vec<(usize, FLPoint)>> {
    let mut out = Vec::new();
    for k in problem.shape().planes() {
        out.extend(fl_plus_set(problem, k, x)?.into_iter().map(|p| (k, p)));
    }
    out.extend(fl_interface_set(problem, x)?.into_iter().map(|p| (0, p)));
    Ok(out)
}
