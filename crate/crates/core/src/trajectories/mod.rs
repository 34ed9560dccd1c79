//! Piecewise-constant control laws, explicit Euler integration on the
//! junction with exact sub-stepping at Γ, and discounted costs.

mod oracle;

pub use oracle::{brute_force_value, dpp_residual, DppConfig, OracleConfig, OracleResult};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{JunctionError, Result};
use crate::geometry::{geodesic_distance, JunctionPoint};
use crate::problem::{ControlRef, FLPoint, JunctionProblem};

/// Control applied during one step of a law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawAtom {
    Atom(String),
    /// Zero-normal combination of two atoms of the same plane; the weights
    /// are recomputed at every integration step.
    Mix([String; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawStep {
    pub duration: f64,
    #[serde(flatten)]
    pub control: LawAtom,
}

/// Ordered schedule of `(duration, control)` pieces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlLaw {
    pub schedule: Vec<LawStep>,
}

impl ControlLaw {
    pub fn new() -> Self {
        ControlLaw::default()
    }

    pub fn then(mut self, duration: f64, id: &str) -> Self {
        self.schedule.push(LawStep { duration, control: LawAtom::Atom(id.to_string()) });
        self
    }

    pub fn then_mix(mut self, duration: f64, a: &str, b: &str) -> Self {
        self.schedule.push(LawStep { duration, control: LawAtom::Mix([a.to_string(), b.to_string()]) });
        self
    }

    pub fn total_horizon(&self) -> f64 {
        self.schedule.iter().map(|s| s.duration).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    HitGamma,
    EnterPlane(usize),
    Infeasible,
}

impl Event {
    pub fn label(&self) -> String {
        match self {
            Event::HitGamma => "hit_gamma".into(),
            Event::EnterPlane(k) => format!("enter_plane_{k}"),
            Event::Infeasible => "infeasible".into(),
        }
    }
}

/// State at time `t`; `control` is the control used on the interval ending
/// at `t` (none for the initial sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub point: JunctionPoint,
    pub control: Option<ControlRef>,
    pub event: Option<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub feasible: bool,
    pub infeasible_at: Option<f64>,
}

impl Trajectory {
    /// Recorded crossing events `(t, event)`.
    pub fn crossings(&self) -> Vec<(f64, Event)> {
        self.samples
            .iter()
            .filter_map(|s| match s.event {
                Some(e @ (Event::HitGamma | Event::EnterPlane(_))) => Some((s.t, e)),
                _ => None,
            })
            .collect()
    }

    pub fn end(&self) -> &Sample {
        self.samples.last().expect("trajectory has an initial sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostResult {
    pub value: f64,
    /// `M_ℓ e^{-λT} / λ`: bound on the cost accrued after the horizon `T`.
    pub truncation_bound: f64,
}

/// A control resolved against a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Choice {
    Fixed(ControlRef),
    Mix { plane: usize, a: usize, b: usize },
}

impl Choice {
    pub(crate) fn resolve(problem: &JunctionProblem, atom: &LawAtom) -> Result<Choice> {
        match atom {
            LawAtom::Atom(id) => Ok(Choice::Fixed(problem.lookup(id)?)),
            LawAtom::Mix([a, b]) => match (problem.lookup(a)?, problem.lookup(b)?) {
                (ControlRef::Plane { plane, index: ia }, ControlRef::Plane { plane: pb, index: ib }) if plane == pb => {
                    Ok(Choice::Mix { plane, a: ia, b: ib })
                }
                _ => Err(JunctionError::InvalidArgument(format!(
                    "mix `{a}`/`{b}` must combine two atoms of the same plane"
                ))),
            },
        }
    }

    pub(crate) fn to_law_atom(self, problem: &JunctionProblem) -> LawAtom {
        match self {
            Choice::Fixed(r) => LawAtom::Atom(problem.label(r)),
            Choice::Mix { plane, a, b } => {
                let atoms = problem.plane_controls(plane);
                LawAtom::Mix([atoms[a].id.clone(), atoms[b].id.clone()])
            }
        }
    }

    /// The concrete control at `x`; `None` when a mix does not straddle
    /// `fi = 0` there.
    fn at(self, problem: &JunctionProblem, x: &JunctionPoint) -> Option<(ControlRef, FLPoint)> {
        let r = match self {
            Choice::Fixed(r) => r,
            Choice::Mix { plane, a, b } => {
                let atoms = problem.plane_controls(plane);
                let fa = atoms[a].eval(x).fi;
                let fb = atoms[b].eval(x).fi;
                if fa > 0.0 && fb < 0.0 {
                    ControlRef::Mix { plane, pos: a, neg: b }
                } else if fb > 0.0 && fa < 0.0 {
                    ControlRef::Mix { plane, pos: b, neg: a }
                } else {
                    return None;
                }
            }
        };
        Some((r, problem.eval_control(r, x)?))
    }
}

/// One constant-control piece of a step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub tau: f64,
    pub fl: FLPoint,
    pub control: ControlRef,
    pub end: JunctionPoint,
    pub event: Option<Event>,
}

/// Values of `xi` within this distance of 0 are snapped onto Γ.
const GAMMA_SNAP: f64 = 1e-12;

fn point_in(plane: usize, x0: f64, xi: f64) -> JunctionPoint {
    if xi <= GAMMA_SNAP {
        JunctionPoint::gamma(x0)
    } else {
        JunctionPoint { plane, x0, xi }
    }
}

/// Advances `x` by one Euler step of length `h`, splitting the step at the
/// exact time the normal coordinate reaches 0. Pieces are passed to `emit`;
/// returns `false` when the control is inadmissible at some point of the step.
pub(crate) fn step(
    problem: &JunctionProblem,
    mut x: JunctionPoint,
    choice: Choice,
    h: f64,
    emit: &mut impl FnMut(Piece),
) -> bool {
    let mut rem = h;
    loop {
        let Some((control, fl)) = choice.at(problem, &x) else { return false };
        let plane = match control {
            ControlRef::Plane { plane, .. } | ControlRef::Mix { plane, .. } => Some(plane),
            ControlRef::Interface { .. } => None,
        };
        let x0 = x.x0 + rem * fl.f0;
        if x.on_gamma() {
            let end = match plane {
                None => JunctionPoint::gamma(x0),
                Some(_) if fl.fi < 0.0 => return false,
                Some(k) => point_in(k, x0, rem * fl.fi),
            };
            let event = (!end.on_gamma()).then(|| Event::EnterPlane(end.plane));
            emit(Piece { tau: rem, fl, control, end, event });
            return true;
        }
        match plane {
            Some(k) if k == x.plane => {}
            _ => return false,
        }
        let xi = x.xi + rem * fl.fi;
        if xi >= -GAMMA_SNAP {
            let end = point_in(x.plane, x0, xi);
            let event = end.on_gamma().then_some(Event::HitGamma);
            emit(Piece { tau: rem, fl, control, end, event });
            return true;
        }
        let tau = x.xi / -fl.fi;
        let end = JunctionPoint::gamma(x.x0 + tau * fl.f0);
        emit(Piece { tau, fl, control, end, event: Some(Event::HitGamma) });
        rem -= tau;
        if rem <= 1e-9 * h {
            return true;
        }
        x = end;
    }
}

/// Number of equal steps of length at most `dt` covering `duration`.
pub(crate) fn n_steps(duration: f64, dt: f64) -> usize {
    ((duration / dt - 1e-9).ceil() as usize).max(1)
}

pub(crate) fn discounted_running(lambda: f64, t: f64, tau: f64, ell: f64) -> f64 {
    ell * (-lambda * t).exp() * -(-lambda * tau).exp_m1() / lambda
}

/// Integrates `law` from `start` with explicit Euler steps of length at most
/// `dt`. Integration stops at the first inadmissible step and the trajectory
/// is marked infeasible.
pub fn integrate(problem: &JunctionProblem, start: &JunctionPoint, law: &ControlLaw, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(JunctionError::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let start = crate::geometry::canonicalize(*start)?;
    let mut choices = Vec::with_capacity(law.schedule.len());
    for s in &law.schedule {
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            return Err(JunctionError::InvalidArgument(format!("durations must be > 0, got {}", s.duration)));
        }
        choices.push(Choice::resolve(problem, &s.control)?);
    }
    let mut samples = vec![Sample { t: 0.0, point: start, control: None, event: None }];
    let mut x = start;
    let mut t_seg = 0.0;
    for (s, &choice) in law.schedule.iter().zip(&choices) {
        let n = n_steps(s.duration, dt);
        let h = s.duration / n as f64;
        for m in 0..n {
            let mut t = t_seg + m as f64 * h;
            let ok = step(problem, x, choice, h, &mut |p: Piece| {
                t += p.tau;
                samples.push(Sample { t, point: p.end, control: Some(p.control), event: p.event });
            });
            x = samples.last().expect("non-empty").point;
            if !ok {
                let t = samples.last().expect("non-empty").t;
                samples.push(Sample { t, point: x, control: None, event: Some(Event::Infeasible) });
                return Ok(Trajectory { samples, feasible: false, infeasible_at: Some(t) });
            }
            let last = samples.last_mut().expect("non-empty");
            last.t = t_seg + (m + 1) as f64 * h;
        }
        t_seg += s.duration;
    }
    Ok(Trajectory { samples, feasible: true, infeasible_at: None })
}

/// Discounted cost of a feasible trajectory, with the running cost frozen at
/// the start of each piece and the discount integrated exactly.
pub fn cost(problem: &JunctionProblem, traj: &Trajectory) -> Result<CostResult> {
    if !traj.feasible {
        return Err(JunctionError::Infeasible { t: traj.infeasible_at.unwrap_or(0.0) });
    }
    let lambda = problem.lambda();
    let mut value = 0.0;
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let Some(c) = b.control else { continue };
        let fl = problem
            .eval_control(c, &a.point)
            .ok_or_else(|| JunctionError::Infeasible { t: a.t })?;
        value += discounted_running(lambda, a.t, b.t - a.t, fl.ell);
    }
    let horizon = traj.end().t;
    Ok(CostResult { value, truncation_bound: problem.declared().m_ell * (-lambda * horizon).exp() / lambda })
}

/// Writes `t, plane, x0, xi, atom_id, event`; Γ points have plane 0.
pub fn write_trajectory_csv<W: Write>(problem: &JunctionProblem, traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "plane", "x0", "xi", "atom_id", "event"])?;
    for s in &traj.samples {
        w.write_record([
            s.t.to_string(),
            s.point.plane.to_string(),
            s.point.x0.to_string(),
            s.point.xi.to_string(),
            s.control.map(|c| problem.label(c)).unwrap_or_default(),
            s.event.map(|e| e.label()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Largest ratio `d(y(s), y(t)) / |t - s|` over consecutive samples.
pub fn max_speed(traj: &Trajectory) -> f64 {
    traj.samples
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| geodesic_distance(&w[0].point, &w[1].point) / (w[1].t - w[0].t))
        .fold(0.0, f64::max)
}
