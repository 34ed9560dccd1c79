//! Empirical checks of the standing assumptions on a concrete problem:
//! boundedness and Lipschitz continuity, convexity of the finite `(f, ℓ)`
//! sets, and (normal) controllability near Γ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fl_set, require_gamma, FLPoint, JunctionProblem};
use crate::error::Result;
use crate::geometry::JunctionPoint;

/// Bounded computational domain `x0 ∈ [x0_min, x0_max]`, `xi ∈ [0, xi_max]`
/// in every plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x0_min: f64,
    pub x0_max: f64,
    pub xi_max: f64,
}

impl Domain {
    pub fn new(x0_min: f64, x0_max: f64, xi_max: f64) -> Self {
        Domain { x0_min, x0_max, xi_max }
    }

    pub fn contains(&self, p: &JunctionPoint) -> bool {
        p.x0 >= self.x0_min && p.x0 <= self.x0_max && p.xi >= 0.0 && p.xi <= self.xi_max
    }

    fn random_point<R: Rng>(&self, rng: &mut R, plane: usize) -> JunctionPoint {
        let x0 = rng.gen_range(self.x0_min..=self.x0_max);
        let xi = rng.gen_range(0.0..=self.xi_max);
        JunctionPoint::new(plane, x0, xi).expect("in-domain point")
    }

    fn corners(&self, plane: usize) -> Vec<JunctionPoint> {
        let mut v = Vec::new();
        for x0 in [self.x0_min, self.x0_max] {
            for xi in [0.0, self.xi_max] {
                v.push(JunctionPoint::new(plane, x0, xi).expect("corner"));
            }
        }
        v
    }

    fn clamp(&self, plane: usize, x0: f64, xi: f64) -> JunctionPoint {
        JunctionPoint::new(
            plane,
            x0.clamp(self.x0_min, self.x0_max),
            xi.clamp(0.0, self.xi_max),
        )
        .expect("clamped point")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H0H1Report {
    pub m_f_est: f64,
    pub m_ell_est: f64,
    pub l_f_est: f64,
    /// Largest sampled difference quotient of ℓ, i.e. the slope of a linear
    /// modulus of continuity.
    pub omega_ell_est: f64,
    pub m_f_violated: bool,
    pub m_ell_violated: bool,
    pub l_f_violated: bool,
}

impl H0H1Report {
    pub fn any_violation(&self) -> bool {
        self.m_f_violated || self.m_ell_violated || self.l_f_violated
    }
}

fn exceeds(est: f64, declared: f64) -> bool {
    est > declared * (1.0 + 1e-12) + 1e-12
}

/// Samples bounds and difference quotients of every atom over `domain`.
/// Corners are always included; pairs are probed both along the axes and in
/// random directions.
pub fn check_h0_h1(problem: &JunctionProblem, domain: &Domain, samples: usize, seed: u64) -> H0H1Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut m_f, mut m_ell, mut l_f, mut om) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let scale = (domain.x0_max - domain.x0_min).max(domain.xi_max).max(1e-12);
    let mut visit = |atoms: &[super::ControlAtom], x: &JunctionPoint, y: Option<&JunctionPoint>, tangential: bool| {
        for a in atoms {
            let mut p = a.eval(x);
            if tangential {
                p.fi = 0.0;
            }
            m_f = m_f.max(p.f0.hypot(p.fi));
            m_ell = m_ell.max(p.ell.abs());
            if let Some(y) = y {
                let d = (x.x0 - y.x0).hypot(x.xi - y.xi);
                if d > 0.0 {
                    let mut q = a.eval(y);
                    if tangential {
                        q.fi = 0.0;
                    }
                    l_f = l_f.max((p.f0 - q.f0).hypot(p.fi - q.fi) / d);
                    om = om.max((p.ell - q.ell).abs() / d);
                }
            }
        }
    };
    for k in problem.shape().planes() {
        let atoms = problem.plane_controls(k);
        for c in domain.corners(k) {
            visit(atoms, &c, None, false);
        }
        for s in 0..samples {
            let x = domain.random_point(&mut rng, k);
            let h = scale * rng.gen_range(1e-3..0.1);
            let (u0, ui) = match s % 3 {
                0 => (1.0, 0.0),
                1 => (0.0, 1.0),
                _ => {
                    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    (th.cos(), th.sin())
                }
            };
            let y = domain.clamp(k, x.x0 + h * u0, x.xi + h * ui);
            visit(atoms, &x, Some(&y), false);
        }
    }
    let iface = problem.interface_controls();
    if !iface.is_empty() {
        for x0 in [domain.x0_min, domain.x0_max] {
            visit(iface, &JunctionPoint::gamma(x0), None, true);
        }
        for _ in 0..samples {
            let x = JunctionPoint::gamma(rng.gen_range(domain.x0_min..=domain.x0_max));
            let y0 = (x.x0 + scale * rng.gen_range(-0.1..0.1)).clamp(domain.x0_min, domain.x0_max);
            visit(iface, &x, Some(&JunctionPoint::gamma(y0)), true);
        }
    }
    let d = problem.declared();
    H0H1Report {
        m_f_est: m_f,
        m_ell_est: m_ell,
        l_f_est: l_f,
        omega_ell_est: om,
        m_f_violated: exceeds(m_f, d.m_f),
        m_ell_violated: exceeds(m_ell, d.m_ell),
        l_f_violated: exceeds(l_f, d.l_f),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    /// Largest distance in `(f0, fi, ℓ)` from the midpoint of an atom pair to
    /// the nearest atom. Zero means every midpoint is realized.
    pub max_hull_violation: f64,
    pub pairs_checked: usize,
}

/// Convexity gap of the finite set `FL_i(x)`. All pairs are examined when
/// there are at most `max_pairs` of them; otherwise `max_pairs` pairs are
/// drawn with a fixed seed.
pub fn check_h2(problem: &JunctionProblem, plane: usize, x: &JunctionPoint, max_pairs: usize) -> Result<H2Report> {
    let fl = fl_set(problem, plane, x)?;
    let n = fl.len();
    let gap = |a: &FLPoint, b: &FLPoint| {
        let m = [0.5 * (a.f0 + b.f0), 0.5 * (a.fi + b.fi), 0.5 * (a.ell + b.ell)];
        fl.iter()
            .map(|c| ((c.f0 - m[0]).powi(2) + (c.fi - m[1]).powi(2) + (c.ell - m[2]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let total = n * (n - 1) / 2;
    let mut worst = 0.0f64;
    let mut checked = 0;
    if total <= max_pairs {
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max(gap(&fl[i], &fl[j]));
                checked += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..max_pairs {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            worst = worst.max(gap(&fl[i], &fl[j]));
            checked += 1;
        }
    }
    Ok(H2Report { max_hull_violation: worst, pairs_checked: checked })
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Radius of the largest origin-centred ball inside the convex hull.
fn inner_radius(points: &[FLPoint]) -> f64 {
    let hull = convex_hull(points.iter().map(|p| (p.f0, p.fi)).collect());
    if hull.len() < 3 {
        return 0.0;
    }
    let mut r = f64::INFINITY;
    for k in 0..hull.len() {
        let a = hull[k];
        let b = hull[(k + 1) % hull.len()];
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let signed = cross(a, b, (0.0, 0.0)) / len;
        if signed < 0.0 {
            return 0.0;
        }
        r = r.min(signed);
    }
    r
}

fn normal_range(points: &[FLPoint]) -> f64 {
    let hi = points.iter().map(|p| p.fi).fold(f64::NEG_INFINITY, f64::max);
    let lo = points.iter().map(|p| p.fi).fold(f64::INFINITY, f64::min);
    hi.min(-lo).max(0.0)
}

/// Per plane, the largest `r` with `B(0, r) ⊂ co F_i(x)` for `x` on Γ.
pub fn check_h3(problem: &JunctionProblem, x: &JunctionPoint) -> Result<Vec<f64>> {
    require_gamma(x)?;
    problem.shape().planes().map(|k| Ok(inner_radius(&fl_set(problem, k, x)?))).collect()
}

/// Per plane, `min(max fi, -min fi)` clamped at 0, for `x` on Γ.
pub fn check_h3_tilde(problem: &JunctionProblem, x: &JunctionPoint) -> Result<Vec<f64>> {
    require_gamma(x)?;
    problem.shape().planes().map(|k| Ok(normal_range(&fl_set(problem, k, x)?))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusMode {
    H3,
    H3Tilde,
}

/// Largest sampled tube radius `R` around Γ such that the controllability
/// estimate stays `≥ δ/2` at every sampled point with `xi ≤ R`, where `δ` is
/// the smallest estimate over sampled points of Γ. Levels `xi_max·k/levels`
/// and `x0_samples` equally spaced abscissae are scanned.
pub fn controllability_radius(
    problem: &JunctionProblem,
    domain: &Domain,
    mode: RadiusMode,
    levels: usize,
    x0_samples: usize,
) -> f64 {
    let est = |k: usize, x: &JunctionPoint| {
        let fl = fl_set(problem, k, x).expect("point in plane");
        match mode {
            RadiusMode::H3 => inner_radius(&fl),
            RadiusMode::H3Tilde => normal_range(&fl),
        }
    };
    let m = x0_samples.max(2);
    let xs: Vec<f64> = (0..m)
        .map(|j| domain.x0_min + (domain.x0_max - domain.x0_min) * j as f64 / (m - 1) as f64)
        .collect();
    let mut delta = f64::INFINITY;
    for k in problem.shape().planes() {
        for &x0 in &xs {
            delta = delta.min(est(k, &JunctionPoint::gamma(x0)));
        }
    }
    if !(delta > 0.0) {
        return 0.0;
    }
    let levels = levels.max(1);
    let mut radius = 0.0;
    for l in 1..=levels {
        let r = domain.xi_max * l as f64 / levels as f64;
        let ok = problem.shape().planes().all(|k| {
            xs.iter().all(|&x0| est(k, &JunctionPoint::new(k, x0, r).expect("level point")) >= 0.5 * delta)
        });
        if !ok {
            break;
        }
        radius = r;
    }
    radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ControlAtom, Cost, DeclaredConstants, Dynamics};
    use proptest::prelude::*;

    fn decl(m_f: f64, m_ell: f64, l_f: f64) -> DeclaredConstants {
        DeclaredConstants { m_f, m_ell, l_f }
    }

    fn with_plane1(atoms: Vec<ControlAtom>, d: DeclaredConstants) -> JunctionProblem {
        let other = ControlAtom::disc_family("other", [0.0, 0.0], 1.0, 8, Cost::Constant(0.0));
        JunctionProblem::new(vec![atoms, other], 1.0, d).unwrap()
    }

    #[test]
    fn h0_h1_constant_atom() {
        let p = with_plane1(vec![ControlAtom::constant("a", 1.0, 0.0, 3.0)], decl(1.0, 3.0, 0.0));
        let r = check_h0_h1(&p, &Domain::new(-2.0, 2.0, 2.0), 200, 1);
        assert_eq!(r.m_f_est, 1.0);
        assert_eq!(r.m_ell_est, 3.0);
        assert_eq!(r.l_f_est, 0.0);
        assert!(!r.any_violation());
    }

    #[test]
    fn h0_h1_linear_map_and_violation() {
        let lin = ControlAtom::new(
            "lin",
            Dynamics::Affine { offset: [0.0, 0.0], matrix: [[1.0, 0.0], [0.0, 0.0]] },
            Cost::Constant(0.0),
        );
        let p = with_plane1(vec![lin.clone()], decl(2.0, 1.0, 1.0));
        let dom = Domain::new(-2.0, 2.0, 1.0);
        let r = check_h0_h1(&p, &dom, 2000, 7);
        assert!((r.m_f_est - 2.0).abs() < 1e-12);
        assert!((r.l_f_est - 1.0).abs() < 1e-9, "{}", r.l_f_est);
        assert!(!r.any_violation());
        let p = with_plane1(vec![lin], decl(1.5, 1.0, 1.0));
        assert!(check_h0_h1(&p, &dom, 100, 7).m_f_violated);
    }

    #[test]
    fn h2_examples() {
        let x = JunctionPoint::gamma(0.0);
        let p = with_plane1(
            vec![ControlAtom::constant("a", 1.0, 0.5, 2.0), ControlAtom::constant("b", 1.0, 0.5, 2.0)],
            decl(9.0, 9.0, 9.0),
        );
        assert_eq!(check_h2(&p, 1, &x, 1000).unwrap().max_hull_violation, 0.0);
        let p = with_plane1(
            vec![ControlAtom::constant("a", 1.0, 0.0, 0.0), ControlAtom::constant("b", -1.0, 0.0, 0.0)],
            decl(9.0, 9.0, 9.0),
        );
        assert_eq!(check_h2(&p, 1, &x, 1000).unwrap().max_hull_violation, 1.0);
    }

    #[test]
    fn h2_gap_shrinks_for_filled_disc() {
        let x = JunctionPoint::gamma(0.0);
        let mut gaps = Vec::new();
        for (m, rings) in [(8, 2), (16, 4), (32, 8)] {
            let atoms = ControlAtom::filled_disc_family("d", [0.0, 0.0], 1.0, m, rings, Cost::Constant(1.0));
            let p = with_plane1(atoms, decl(9.0, 9.0, 9.0));
            gaps.push(check_h2(&p, 1, &x, 200_000).unwrap().max_hull_violation);
        }
        // The nearest-atom distance of a midpoint is bounded by the sampling
        // mesh, which halves at each step.
        assert!(gaps[1] < 0.75 * gaps[0] && gaps[2] < 0.75 * gaps[1], "{gaps:?}");
        assert!(gaps[2] < 0.11, "{gaps:?}");
    }

    #[test]
    fn h3_examples() {
        let x = JunctionPoint::gamma(0.0);
        let disc = ControlAtom::disc_family("d", [0.0, 0.0], 1.0, 256, Cost::Constant(0.0));
        let p = with_plane1(disc, decl(9.0, 9.0, 9.0));
        let r = check_h3(&p, &x).unwrap();
        let analytic = (std::f64::consts::PI / 256.0).cos();
        assert!((r[0] - analytic).abs() < 1e-12);
        let t = check_h3_tilde(&p, &x).unwrap();
        assert_eq!(t[0], 1.0);

        let p = with_plane1(vec![ControlAtom::constant("a", 1.0, 0.0, 0.0)], decl(9.0, 9.0, 9.0));
        assert_eq!(check_h3(&p, &x).unwrap()[0], 0.0);

        let sq = vec![
            ControlAtom::constant("a", 1.0, 0.0, 0.0),
            ControlAtom::constant("b", -1.0, 0.0, 0.0),
            ControlAtom::constant("c", 0.0, 1.0, 0.0),
            ControlAtom::constant("d", 0.0, -1.0, 0.0),
        ];
        let p = with_plane1(sq, decl(9.0, 9.0, 9.0));
        assert!((check_h3(&p, &x).unwrap()[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(check_h3(&p, &JunctionPoint::new(1, 0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn h3_tilde_examples() {
        let x = JunctionPoint::gamma(0.0);
        let p = with_plane1(
            vec![ControlAtom::constant("a", 0.0, -2.0, 0.0), ControlAtom::constant("b", 0.0, 3.0, 0.0)],
            decl(9.0, 9.0, 9.0),
        );
        assert_eq!(check_h3_tilde(&p, &x).unwrap()[0], 2.0);
        let p = with_plane1(
            vec![ControlAtom::constant("a", 0.0, 1.0, 0.0), ControlAtom::constant("b", 0.0, 2.0, 0.0)],
            decl(9.0, 9.0, 9.0),
        );
        assert_eq!(check_h3_tilde(&p, &x).unwrap()[0], 0.0);
    }

    #[test]
    fn radius_examples() {
        let dom = Domain::new(-1.0, 1.0, 3.0);
        let disc = ControlAtom::disc_family("d", [0.0, 0.0], 1.0, 16, Cost::Constant(0.0));
        let p = with_plane1(disc, decl(9.0, 9.0, 9.0));
        assert_eq!(controllability_radius(&p, &dom, RadiusMode::H3, 30, 5), 3.0);
        assert_eq!(controllability_radius(&p, &dom, RadiusMode::H3Tilde, 30, 5), 3.0);

        // Normal range 1 - xi/2: the δ/2 threshold is crossed at xi = 1.
        let shrink = |id: &str, s: f64| {
            ControlAtom::new(
                id,
                Dynamics::Affine { offset: [0.0, s], matrix: [[0.0, 0.0], [0.0, -0.5 * s]] },
                Cost::Constant(0.0),
            )
        };
        let p = with_plane1(vec![shrink("up", 1.0), shrink("down", -1.0)], decl(9.0, 9.0, 9.0));
        let r = controllability_radius(&p, &dom, RadiusMode::H3Tilde, 300, 5);
        assert!((r - 1.0).abs() < 1e-12, "{r}");

        let p = with_plane1(vec![ControlAtom::constant("a", 1.0, 1.0, 0.0)], decl(9.0, 9.0, 9.0));
        assert_eq!(controllability_radius(&p, &dom, RadiusMode::H3Tilde, 30, 5), 0.0);
    }

    proptest! {
        #[test]
        fn ball_radius_below_normal_range(
            pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..15),
        ) {
            let atoms: Vec<ControlAtom> = pts.iter().enumerate()
                .map(|(k, &(a, b))| ControlAtom::constant(format!("a{k}"), a, b, 0.0))
                .collect();
            let p = with_plane1(atoms, decl(9.0, 9.0, 9.0));
            let x = JunctionPoint::gamma(0.0);
            let h3 = check_h3(&p, &x).unwrap();
            let ht = check_h3_tilde(&p, &x).unwrap();
            for k in 0..2 {
                prop_assert!(h3[k] <= ht[k] + 1e-12);
            }
        }
    }
}
