//! Sampled verification of the regularity, coercivity and monotonicity
//! inequalities satisfied by `H_i` and `H_i⁺`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{h_i, h_i_plus, Covector};
use crate::error::Result;
use crate::geometry::JunctionPoint;
use crate::problem::{check_h3_tilde, controllability_radius, Domain, JunctionProblem, RadiusMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConfig {
    pub samples: usize,
    pub seed: u64,
    /// Covector components are drawn from `[-p_max, p_max]`.
    pub p_max: f64,
    /// Normal controllability constant; estimated on Γ when `None`.
    pub delta: Option<f64>,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        RegularityConfig { samples: 500, seed: 0, p_max: 5.0, delta: None }
    }
}

/// Largest observed violation (`lhs - rhs`, clamped at 0) of each inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub lipschitz_x: f64,
    pub lipschitz_p: f64,
    pub coercivity: f64,
    pub pi_monotonicity: f64,
    pub pseudo_coercivity: f64,
    pub tech02: f64,
    pub delta: f64,
    pub radius: f64,
    pub l_ell: f64,
    pub c_m: f64,
}

impl RegularityReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.lipschitz_x,
            self.lipschitz_p,
            self.coercivity,
            self.pi_monotonicity,
            self.pseudo_coercivity,
            self.tech02,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn violation(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).max(0.0)
}

/// Samples points, point pairs and covectors over `domain` and reports how
/// far each inequality is from holding with the declared constants. The
/// modulus of ℓ is the linear one built from the cost Lipschitz constants.
pub fn hamiltonian_regularity_report(
    problem: &JunctionProblem,
    domain: &Domain,
    config: &RegularityConfig,
) -> Result<RegularityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = problem.declared();
    let l_ell = problem
        .shape()
        .planes()
        .flat_map(|k| problem.plane_controls(k).iter())
        .chain(problem.interface_controls())
        .map(|a| a.cost.lipschitz())
        .fold(0.0, f64::max);
    let c_m = d.m_f.max(d.m_ell);
    let delta = match config.delta {
        Some(v) => v,
        None => {
            let mut v = f64::INFINITY;
            for j in 0..=100 {
                let x0 = domain.x0_min + (domain.x0_max - domain.x0_min) * j as f64 / 100.0;
                for r in check_h3_tilde(problem, &JunctionPoint::gamma(x0))? {
                    v = v.min(r);
                }
            }
            v
        }
    };
    let radius = controllability_radius(problem, domain, RadiusMode::H3Tilde, 50, 21);
    let m_const = d.l_f * (1.0 + 2.0 * d.m_f / delta);
    let omega = |t: f64| l_ell * t + 2.0 * d.m_ell * d.l_f * t / delta;

    let pm = config.p_max;
    let mut rep = RegularityReport {
        lipschitz_x: 0.0,
        lipschitz_p: 0.0,
        coercivity: 0.0,
        pi_monotonicity: 0.0,
        pseudo_coercivity: 0.0,
        tech02: 0.0,
        delta,
        radius,
        l_ell,
        c_m,
    };
    let x0r = domain.x0_min..=domain.x0_max;
    for k in problem.shape().planes() {
        for _ in 0..config.samples {
            let x = JunctionPoint::new(k, rng.gen_range(x0r.clone()), rng.gen_range(0.0..=domain.xi_max))?;
            let y = JunctionPoint::new(k, rng.gen_range(x0r.clone()), rng.gen_range(0.0..=domain.xi_max))?;
            let p = Covector::new(rng.gen_range(-pm..=pm), rng.gen_range(-pm..=pm));
            let q = Covector::new(rng.gen_range(-pm..=pm), rng.gen_range(-pm..=pm));
            let hxp = h_i(problem, k, &x, &p)?;
            let dxy = (x.x0 - y.x0).hypot(x.xi - y.xi);
            rep.lipschitz_x = rep.lipschitz_x.max(violation(
                (hxp - h_i(problem, k, &y, &p)?).abs(),
                d.l_f * dxy * p.norm() + l_ell * dxy,
            ));
            let dpq = (p.p0 - q.p0).hypot(p.pi - q.pi);
            rep.lipschitz_p = rep.lipschitz_p.max(violation((hxp - h_i(problem, k, &x, &q)?).abs(), d.m_f * dpq));

            if radius > 0.0 {
                let t = JunctionPoint::new(k, x.x0, rng.gen_range(0.0..=radius))?;
                rep.coercivity = rep.coercivity.max(violation(
                    0.5 * delta * p.pi.abs() - c_m * (1.0 + p.p0.abs()),
                    h_i(problem, k, &t, &p)?,
                ));
            }

            let g = JunctionPoint::gamma(x.x0);
            let g2 = JunctionPoint::gamma(y.x0);
            let (lo, hi) = if p.pi <= q.pi { (p.pi, q.pi) } else { (q.pi, p.pi) };
            rep.pi_monotonicity = rep.pi_monotonicity.max(violation(
                h_i_plus(problem, k, &g, &Covector::new(p.p0, hi))?,
                h_i_plus(problem, k, &g, &Covector::new(p.p0, lo))?,
            ));
            let hg = h_i_plus(problem, k, &g, &p)?;
            rep.pseudo_coercivity =
                rep.pseudo_coercivity.max(violation(-delta * p.pi - c_m * (1.0 + p.p0.abs()), hg));
            let dg = (g.x0 - g2.x0).abs();
            rep.tech02 = rep.tech02.max(violation(
                (hg - h_i_plus(problem, k, &g2, &p)?).abs(),
                m_const * dg * p.norm() + omega(dg),
            ));
        }
    }
    Ok(rep)
}
