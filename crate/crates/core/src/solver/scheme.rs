//! Semi-Lagrangian value iteration on the junction grid.
//!
//! One sweep applies the discrete dynamic programming operator
//! `v(x) ← min_a [ℓ(x,a)(1 - e^{-λτ})/λ + e^{-λτ} I[v](x + τ f(x,a))]`,
//! where `τ = dt` unless the foot crosses Γ, in which case `τ` is the exact
//! hitting time and the foot is on Γ. Sweeps are Jacobi: each one reads only
//! the previous iterate, so the result does not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::JunctionGrid;
use super::{SolveMeta, ValueField};
use crate::error::{JunctionError, Result};
use crate::geometry::JunctionPoint;
use crate::hamiltonians::{tangential_mixing_indexed, MixSource};
use crate::problem::{ControlRef, FLPoint, JunctionProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SchemeConfig {
    pub fn new(dt: f64, tol: f64, max_iter: usize) -> Self {
        SchemeConfig { dt, tol, max_iter }
    }
}

/// One admissible control at one node, with interpolation weights already
/// multiplied by the discount factor.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    run: f64,
    w: [f64; 4],
    lo: u32,
    hi: u32,
}

impl Candidate {
    #[inline]
    fn eval(&self, v: &[f64]) -> f64 {
        let lo = self.lo as usize;
        let hi = self.hi as usize;
        self.run + self.w[0] * v[lo] + self.w[1] * v[lo + 1] + self.w[2] * v[hi] + self.w[3] * v[hi + 1]
    }
}

/// A state-independent atom of one plane whose foot is a fixed grid shift
/// away from every node in a rectangle of rows `rows` and columns `cols`.
#[derive(Debug, Clone)]
struct UniformBlock {
    plane: usize,
    shift0: isize,
    shifti: isize,
    run: f64,
    w: [f64; 4],
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
}

impl UniformBlock {
    fn covers(&self, ii: usize, i0: usize) -> bool {
        self.rows.contains(&ii) && self.cols.contains(&i0)
    }
}

/// The precomputed discrete operator.
#[derive(Debug, Clone)]
pub struct SemiLagrangianScheme {
    grid: JunctionGrid,
    dt: f64,
    blocks: Vec<UniformBlock>,
    offsets: Vec<u32>,
    candidates: Vec<Candidate>,
    flagged: Vec<bool>,
    fallback: f64,
    contraction: f64,
}

fn in_range(lo: isize, hi: isize) -> std::ops::Range<usize> {
    if hi < lo {
        0..0
    } else {
        lo.max(0) as usize..(hi + 1).max(0) as usize
    }
}

impl SemiLagrangianScheme {
    pub fn new(problem: &JunctionProblem, grid: &JunctionGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(JunctionError::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if grid.n_planes != problem.n_planes() {
            return Err(JunctionError::InvalidArgument(format!(
                "grid has {} planes, problem has {}",
                grid.n_planes,
                problem.n_planes()
            )));
        }
        if grid.len() >= u32::MAX as usize {
            return Err(JunctionError::InvalidArgument("grid too large".into()));
        }
        let lambda = problem.lambda();
        let (dx0, dxi) = (grid.dx0(), grid.dxi());
        let (n0, ni) = (grid.n0 as isize, grid.ni as isize);

        let mut blocks = Vec::new();
        // block_of[k - 1][a]: fast block of atom `a` of plane `k`, if any.
        let mut block_of: Vec<Vec<Option<usize>>> = Vec::new();
        let mut contraction: f64 = 0.0;
        for k in problem.shape().planes() {
            let mut row = Vec::new();
            for a in problem.plane_controls(k) {
                if !a.is_uniform() {
                    row.push(None);
                    continue;
                }
                let fl = a.eval(&JunctionPoint::gamma(0.0));
                let s0 = dt * fl.f0 / dx0;
                let si = dt * fl.fi / dxi;
                let (f0s, fis) = (s0.floor(), si.floor());
                let (ca, cb) = (s0 - f0s, si - fis);
                let (f0s, fis) = (f0s as isize, fis as isize);
                let disc = (-lambda * dt).exp();
                let block = UniformBlock {
                    plane: k,
                    shift0: f0s,
                    shifti: fis,
                    run: fl.ell * -(-lambda * dt).exp_m1() / lambda,
                    w: [
                        disc * (1.0 - ca) * (1.0 - cb),
                        disc * ca * (1.0 - cb),
                        disc * (1.0 - ca) * cb,
                        disc * ca * cb,
                    ],
                    // Both stencil rows must be plane rows (>= 1) inside the grid.
                    rows: in_range(1.max(1 - fis), (ni - 1).min(ni - 2 - fis)),
                    cols: in_range(-f0s, (n0 - 1).min(n0 - 2 - f0s)),
                };
                if block.rows.is_empty() || block.cols.is_empty() {
                    row.push(None);
                } else {
                    contraction = contraction.max(disc);
                    row.push(Some(blocks.len()));
                    blocks.push(block);
                }
            }
            block_of.push(row);
        }

        let mut offsets = Vec::with_capacity(grid.len() + 1);
        let mut candidates = Vec::new();
        let mut flagged = Vec::with_capacity(grid.len());
        offsets.push(0u32);
        for (k, ii, i0) in grid.nodes() {
            let before = candidates.len();
            let x = grid.node_point(k, ii, i0);
            let mut push = |fl: &FLPoint, tau: f64, foot: JunctionPoint| {
                if let Ok(s) = grid.locate(&foot) {
                    let disc = (-lambda * tau).exp();
                    contraction = contraction.max(disc);
                    candidates.push(Candidate {
                        run: fl.ell * -(-lambda * tau).exp_m1() / lambda,
                        w: s.w.map(|w| w * disc),
                        lo: s.lo as u32,
                        hi: s.hi as u32,
                    });
                }
            };
            let mut covered = false;
            if ii == 0 {
                for_each_gamma_control(problem, &x, |r, fl| {
                    let foot = match r {
                        ControlRef::Plane { plane, .. } if dt * fl.fi > 1e-12 => {
                            JunctionPoint { plane, x0: x.x0 + dt * fl.f0, xi: dt * fl.fi }
                        }
                        _ => JunctionPoint::gamma(x.x0 + dt * fl.f0),
                    };
                    push(&fl, dt, foot);
                });
            } else {
                for (a, atom) in problem.plane_controls(k).iter().enumerate() {
                    if let Some(b) = block_of[k - 1][a] {
                        if blocks[b].covers(ii, i0) {
                            covered = true;
                            continue;
                        }
                    }
                    let fl = atom.eval(&x);
                    let (tau, foot) = foot_in_plane(&x, &fl, dt);
                    push(&fl, tau, foot);
                }
            }
            flagged.push(candidates.len() == before && !covered);
            offsets.push(candidates.len() as u32);
        }
        Ok(SemiLagrangianScheme {
            grid: *grid,
            dt,
            blocks,
            offsets,
            candidates,
            flagged,
            fallback: problem.declared().m_ell / lambda,
            contraction,
        })
    }

    pub fn grid(&self) -> &JunctionGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest discount factor over all candidates, `e^{-λ min τ}`.
    pub fn contraction(&self) -> f64 {
        self.contraction
    }

    /// Nodes without any admissible control; they hold `M_ℓ/λ`.
    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    /// Applies the discrete operator once: `output = T(input)`.
    pub fn sweep(&self, input: &[f64], output: &mut [f64]) {
        let n0 = self.grid.n0;
        assert_eq!(input.len(), self.grid.len());
        assert_eq!(output.len(), self.grid.len());
        output.par_chunks_mut(n0).enumerate().for_each(|(row, out)| {
            let (k, ii) = self.grid.row_id(row);
            let base = row * n0;
            out.fill(f64::INFINITY);
            if ii > 0 {
                for b in self.blocks.iter().filter(|b| b.plane == k && b.rows.contains(&ii)) {
                    let r = (ii as isize + b.shifti) as usize;
                    let lo = self.grid.row_start(k, r) as isize + b.shift0;
                    let hi = self.grid.row_start(k, r + 1) as isize + b.shift0;
                    let (c0, c1) = (b.cols.start, b.cols.end);
                    let len = c1 - c0;
                    let l0 = &input[(lo + c0 as isize) as usize..][..len + 1];
                    let h0 = &input[(hi + c0 as isize) as usize..][..len + 1];
                    let o = &mut out[c0..c1];
                    for j in 0..len {
                        let v = b.run + b.w[0] * l0[j] + b.w[1] * l0[j + 1] + b.w[2] * h0[j] + b.w[3] * h0[j + 1];
                        if v < o[j] {
                            o[j] = v;
                        }
                    }
                }
            }
            for (j, o) in out.iter_mut().enumerate() {
                let n = base + j;
                let cands = &self.candidates[self.offsets[n] as usize..self.offsets[n + 1] as usize];
                for c in cands {
                    let v = c.eval(input);
                    if v < *o {
                        *o = v;
                    }
                }
                if self.flagged[n] {
                    *o = self.fallback;
                }
            }
        });
    }
}

/// Foot of an off-Γ node under `fl`, with the exact hitting time when the
/// Euler step would cross Γ.
fn foot_in_plane(x: &JunctionPoint, fl: &FLPoint, dt: f64) -> (f64, JunctionPoint) {
    let xi = x.xi + dt * fl.fi;
    if xi > 1e-12 {
        (dt, JunctionPoint { plane: x.plane, x0: x.x0 + dt * fl.f0, xi })
    } else if xi >= -1e-12 {
        (dt, JunctionPoint::gamma(x.x0 + dt * fl.f0))
    } else {
        let tau = x.xi / -fl.fi;
        (tau, JunctionPoint::gamma(x.x0 + tau * fl.f0))
    }
}

/// Controls admissible at a point of Γ: plane atoms with `fi ≥ 0`, pairwise
/// zero-normal mixes when convexified, and interface atoms.
pub(crate) fn for_each_gamma_control(problem: &JunctionProblem, x: &JunctionPoint, mut f: impl FnMut(ControlRef, FLPoint)) {
    for k in problem.shape().planes() {
        let fl: Vec<FLPoint> = problem.plane_controls(k).iter().map(|a| a.eval(x)).collect();
        for (index, p) in fl.iter().enumerate() {
            if p.fi >= 0.0 {
                f(ControlRef::Plane { plane: k, index }, *p);
            }
        }
        if problem.convexify() {
            for (src, p) in tangential_mixing_indexed(&fl) {
                if let MixSource::Pair { pos, neg } = src {
                    f(ControlRef::Mix { plane: k, pos, neg }, p);
                }
            }
        }
    }
    for index in 0..problem.interface_controls().len() {
        let r = ControlRef::Interface { index };
        f(r, problem.eval_control(r, x).expect("valid interface index"));
    }
}

/// Runs Jacobi sweeps from `v⁰ ≡ 0` until the sup-norm update falls below
/// `tol·(1 - κ)`, which bounds the distance to the fixed point by `tol`.
pub fn value_iteration(problem: &JunctionProblem, grid: &JunctionGrid, config: &SchemeConfig) -> Result<ValueField> {
    value_iteration_from(problem, grid, config, None)
}

/// [`value_iteration`] from a given initial iterate.
pub fn value_iteration_from(
    problem: &JunctionProblem,
    grid: &JunctionGrid,
    config: &SchemeConfig,
    initial: Option<&[f64]>,
) -> Result<ValueField> {
    let scheme = SemiLagrangianScheme::new(problem, grid, config.dt)?;
    iterate(&scheme, config, initial)
}

pub(crate) fn iterate(scheme: &SemiLagrangianScheme, config: &SchemeConfig, initial: Option<&[f64]>) -> Result<ValueField> {
    let grid = *scheme.grid();
    let mut cur = match initial {
        Some(v) if v.len() == grid.len() => v.to_vec(),
        Some(v) => {
            return Err(JunctionError::InvalidArgument(format!(
                "initial field has {} values, grid has {}",
                v.len(),
                grid.len()
            )))
        }
        None => vec![0.0; grid.len()],
    };
    let mut next = vec![0.0; grid.len()];
    let kappa = scheme.contraction();
    let threshold = config.tol * (1.0 - kappa);
    let mut history = Vec::new();
    for it in 1..=config.max_iter {
        scheme.sweep(&cur, &mut next);
        let diff = cur
            .par_chunks(grid.n0)
            .zip(next.par_chunks(grid.n0))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut cur, &mut next);
        history.push(diff);
        if diff <= threshold {
            return Ok(ValueField {
                grid,
                values: cur,
                flagged: scheme.flagged().to_vec(),
                meta: SolveMeta {
                    iterations: it,
                    residual: diff,
                    dt: scheme.dt(),
                    contraction: kappa,
                    converged: true,
                    diff_history: history,
                },
            });
        }
    }
    Err(JunctionError::NotConverged {
        iterations: config.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}
