//! Brute-force minimization over piecewise-constant laws with equal segment
//! lengths, and the dynamic-programming residual of a value field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{discounted_running, n_steps, step, Choice, ControlLaw, LawStep, Piece};
use crate::error::{JunctionError, Result};
use crate::geometry::JunctionPoint;
use crate::problem::{ControlRef, JunctionProblem};
use crate::solver::ValueField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n_segments: usize,
    pub seg_duration: f64,
    pub dt: f64,
    /// Hard cap on the number of enumerated laws.
    pub budget: u64,
    /// Also enumerate zero-normal pairwise mixes at Γ.
    pub include_mixes: bool,
}

impl OracleConfig {
    pub fn new(n_segments: usize, seg_duration: f64, dt: f64) -> Self {
        OracleConfig { n_segments, seg_duration, dt, budget: 1_000_000, include_mixes: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Smallest finite-horizon cost over the enumerated feasible laws.
    pub value: f64,
    /// `truncation + integration`.
    pub bracket: f64,
    pub truncation: f64,
    pub integration: f64,
    pub best_law: ControlLaw,
    pub laws_evaluated: u64,
}

struct Search<'a, F> {
    problem: &'a JunctionProblem,
    n_segments: usize,
    seg_duration: f64,
    dt: f64,
    include_mixes: bool,
    terminal: &'a F,
}

impl<'a, F> Search<'a, F>
where
    F: Fn(&JunctionPoint) -> Option<f64> + Sync,
{
    /// Controls worth trying from `x`. Off Γ only the atoms of the current
    /// plane are admissible; on Γ, atoms with `fi ≥ 0`, interface atoms and,
    /// optionally, straddling pairs.
    fn alphabet(&self, x: &JunctionPoint) -> Vec<Choice> {
        let p = self.problem;
        if !x.on_gamma() {
            return (0..p.plane_controls(x.plane).len())
                .map(|index| Choice::Fixed(ControlRef::Plane { plane: x.plane, index }))
                .collect();
        }
        let mut out = Vec::new();
        for k in p.shape().planes() {
            let atoms = p.plane_controls(k);
            let fis: Vec<f64> = atoms.iter().map(|a| a.eval(x).fi).collect();
            for (index, &fi) in fis.iter().enumerate() {
                if fi >= 0.0 {
                    out.push(Choice::Fixed(ControlRef::Plane { plane: k, index }));
                }
            }
            if self.include_mixes {
                for (a, _) in fis.iter().enumerate().filter(|(_, &f)| f > 0.0) {
                    for (b, _) in fis.iter().enumerate().filter(|(_, &f)| f < 0.0) {
                        out.push(Choice::Mix { plane: k, a, b });
                    }
                }
            }
        }
        out.extend((0..p.interface_controls().len()).map(|index| Choice::Fixed(ControlRef::Interface { index })));
        out
    }

    /// Static upper bound on the alphabet size at any state.
    fn alphabet_bound(&self) -> f64 {
        let p = self.problem;
        let mut off = 0usize;
        let mut on = p.interface_controls().len();
        for k in p.shape().planes() {
            let atoms = p.plane_controls(k);
            off = off.max(atoms.len());
            let may = |pred: fn(f64) -> bool| {
                atoms
                    .iter()
                    .filter(|a| !a.dynamics.is_constant() || pred(a.eval(&JunctionPoint::gamma(0.0)).fi))
                    .count()
            };
            on += may(|f| f >= 0.0);
            if self.include_mixes {
                on += may(|f| f > 0.0) * may(|f| f < 0.0);
            }
        }
        off.max(on) as f64
    }

    /// Integrates one segment; returns the end point and the discounted cost
    /// accrued on it, or `None` if the segment is infeasible.
    fn segment(&self, x: JunctionPoint, t0: f64, choice: Choice) -> Option<(JunctionPoint, f64)> {
        let lambda = self.problem.lambda();
        let n = n_steps(self.seg_duration, self.dt);
        let h = self.seg_duration / n as f64;
        let mut x = x;
        let mut acc = 0.0;
        for m in 0..n {
            let mut t = t0 + m as f64 * h;
            let mut end = x;
            let ok = step(self.problem, x, choice, h, &mut |p: Piece| {
                acc += discounted_running(lambda, t, p.tau, p.fl.ell);
                t += p.tau;
                end = p.end;
            });
            if !ok {
                return None;
            }
            x = end;
        }
        Some((x, acc))
    }

    /// Depth-first minimum over all continuations of a prefix.
    fn dfs(&self, x: JunctionPoint, depth: usize, acc: f64, prefix: &mut Vec<Choice>, best: &mut Best, evaluated: &mut u64) {
        if depth == self.n_segments {
            *evaluated += 1;
            if let Some(term) = (self.terminal)(&x) {
                let t = self.n_segments as f64 * self.seg_duration;
                let v = acc + (-self.problem.lambda() * t).exp() * term;
                if best.value.map_or(true, |b| v < b) {
                    best.value = Some(v);
                    best.law = prefix.clone();
                }
            }
            return;
        }
        let t0 = depth as f64 * self.seg_duration;
        for c in self.alphabet(&x) {
            if let Some((y, inc)) = self.segment(x, t0, c) {
                prefix.push(c);
                self.dfs(y, depth + 1, acc + inc, prefix, best, evaluated);
                prefix.pop();
            }
        }
    }

    fn run(&self, start: JunctionPoint) -> (Option<f64>, Vec<Choice>, u64) {
        if self.n_segments == 0 {
            return ((self.terminal)(&start), Vec::new(), 1);
        }
        let branches: Vec<(Best, u64)> = self
            .alphabet(&start)
            .into_par_iter()
            .map(|c| {
                let mut best = Best { value: None, law: Vec::new() };
                let mut evaluated = 0;
                if let Some((y, inc)) = self.segment(start, 0.0, c) {
                    let mut prefix = vec![c];
                    self.dfs(y, 1, inc, &mut prefix, &mut best, &mut evaluated);
                }
                (best, evaluated)
            })
            .collect();
        // Ordered reduction: ties resolve to the earliest branch.
        let mut best = Best { value: None, law: Vec::new() };
        let mut total = 0;
        for (b, e) in branches {
            total += e;
            if let Some(v) = b.value {
                if best.value.map_or(true, |w| v < w) {
                    best = b;
                }
            }
        }
        (best.value, best.law, total)
    }

    fn check_budget(&self, budget: u64) -> Result<()> {
        let needed = self.alphabet_bound().powi(self.n_segments as i32);
        if needed > budget as f64 {
            return Err(JunctionError::BudgetExceeded { needed, budget });
        }
        Ok(())
    }
}

struct Best {
    value: Option<f64>,
    law: Vec<Choice>,
}

fn validate(seg_duration: f64, dt: f64) -> Result<()> {
    if !(seg_duration > 0.0 && dt > 0.0 && seg_duration.is_finite() && dt.is_finite()) {
        return Err(JunctionError::InvalidArgument(format!(
            "segment duration and dt must be > 0, got {seg_duration} and {dt}"
        )));
    }
    Ok(())
}

/// Minimum finite-horizon cost over every feasible law made of
/// `n_segments` constant pieces of equal length. The bracket adds the tail
/// bound `M_ℓ e^{-λT}/λ` and a first-order integration term
/// `(L_ℓ M_f / λ + M_ℓ)·dt`; the latter is an estimate, not a proof.
pub fn brute_force_value(problem: &JunctionProblem, start: &JunctionPoint, config: &OracleConfig) -> Result<OracleResult> {
    validate(config.seg_duration, config.dt)?;
    let start = crate::geometry::canonicalize(*start)?;
    let terminal = |_: &JunctionPoint| Some(0.0);
    let search = Search {
        problem,
        n_segments: config.n_segments,
        seg_duration: config.seg_duration,
        dt: config.dt,
        include_mixes: config.include_mixes,
        terminal: &terminal,
    };
    search.check_budget(config.budget)?;
    let (value, law, evaluated) = search.run(start);
    let value = value.ok_or(JunctionError::AllLawsInfeasible)?;
    let d = problem.declared();
    let lambda = problem.lambda();
    let horizon = config.n_segments as f64 * config.seg_duration;
    let truncation = d.m_ell * (-lambda * horizon).exp() / lambda;
    let l_ell = problem
        .shape()
        .planes()
        .flat_map(|k| problem.plane_controls(k).iter())
        .chain(problem.interface_controls())
        .map(|a| a.cost.lipschitz())
        .fold(0.0, f64::max);
    let integration = (l_ell * d.m_f / lambda + d.m_ell) * config.dt;
    Ok(OracleResult {
        value,
        bracket: truncation + integration,
        truncation,
        integration,
        best_law: ControlLaw {
            schedule: law
                .into_iter()
                .map(|c| LawStep { duration: config.seg_duration, control: c.to_law_atom(problem) })
                .collect(),
        },
        laws_evaluated: evaluated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppConfig {
    pub n_segments: usize,
    pub dt: f64,
    pub budget: u64,
    pub include_mixes: bool,
}

impl Default for DppConfig {
    fn default() -> Self {
        DppConfig { n_segments: 1, dt: 0.01, budget: 1_000_000, include_mixes: false }
    }
}

/// `|v(x) - min_law {∫₀ᵗ ℓ e^{-λs} ds + e^{-λt} v(y(t))}|` over the budgeted
/// laws on `[0, t]`. Laws whose endpoint leaves the field are skipped.
pub fn dpp_residual(
    problem: &JunctionProblem,
    field: &ValueField,
    x: &JunctionPoint,
    t: f64,
    config: &DppConfig,
) -> Result<f64> {
    let n = config.n_segments.max(1);
    validate(t, config.dt)?;
    let x = crate::geometry::canonicalize(*x)?;
    let vx = field.interpolate(&x)?;
    let terminal = |y: &JunctionPoint| field.interpolate(y).ok();
    let search = Search {
        problem,
        n_segments: n,
        seg_duration: t / n as f64,
        dt: config.dt,
        include_mixes: config.include_mixes,
        terminal: &terminal,
    };
    search.check_budget(config.budget)?;
    let (value, _, _) = search.run(x);
    let best = value.ok_or_else(|| JunctionError::OutOfDomain(format!("every law from {x:?} leaves the grid")))?;
    Ok((vx - best).abs())
}
