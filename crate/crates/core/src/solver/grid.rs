use serde::{Deserialize, Serialize};

use crate::error::{JunctionError, Result};
use crate::geometry::{JunctionPoint, GAMMA};
use crate::problem::Domain;

/// Uniform grids on every plane sharing one interface row.
///
/// Storage order: the Γ row (`n0` values), then for each plane `k = 1..=N`
/// its rows `ii = 1..ni-1`, each of length `n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionGrid {
    pub n_planes: usize,
    pub domain: Domain,
    pub n0: usize,
    pub ni: usize,
}

/// Bilinear interpolation weights over `v[lo], v[lo+1], v[hi], v[hi+1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub lo: usize,
    pub hi: usize,
    pub w: [f64; 4],
}

impl Stencil {
    pub fn apply(&self, v: &[f64]) -> f64 {
        self.w[0] * v[self.lo] + self.w[1] * v[self.lo + 1] + self.w[2] * v[self.hi] + self.w[3] * v[self.hi + 1]
    }
}

impl JunctionGrid {
    pub fn new(n_planes: usize, domain: Domain, n0: usize, ni: usize) -> Result<Self> {
        if n_planes < 2 {
            return Err(JunctionError::InvalidShape(n_planes));
        }
        if n0 < 2 || ni < 2 {
            return Err(JunctionError::InvalidArgument(format!("grid needs n0, ni >= 2, got {n0}x{ni}")));
        }
        if !(domain.x0_max > domain.x0_min && domain.xi_max > 0.0) {
            return Err(JunctionError::InvalidArgument(format!("degenerate domain {domain:?}")));
        }
        Ok(JunctionGrid { n_planes, domain, n0, ni })
    }

    pub fn dx0(&self) -> f64 {
        (self.domain.x0_max - self.domain.x0_min) / (self.n0 - 1) as f64
    }

    pub fn dxi(&self) -> f64 {
        self.domain.xi_max / (self.ni - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n0 * (1 + self.n_planes * (self.ni - 1))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of stored rows (Γ plus every plane row).
    pub fn n_rows(&self) -> usize {
        1 + self.n_planes * (self.ni - 1)
    }

    /// Offset of row `ii` of `plane`; row 0 is the shared Γ row.
    pub fn row_start(&self, plane: usize, ii: usize) -> usize {
        if ii == 0 {
            0
        } else {
            self.n0 * (1 + (plane - 1) * (self.ni - 1) + (ii - 1))
        }
    }

    /// `(plane, ii)` of storage row `row`; Γ is `(0, 0)`.
    pub fn row_id(&self, row: usize) -> (usize, usize) {
        if row == 0 {
            (GAMMA, 0)
        } else {
            ((row - 1) / (self.ni - 1) + 1, (row - 1) % (self.ni - 1) + 1)
        }
    }

    pub fn index(&self, plane: usize, ii: usize, i0: usize) -> usize {
        self.row_start(plane, ii) + i0
    }

    pub fn x0_at(&self, i0: usize) -> f64 {
        if i0 == self.n0 - 1 {
            self.domain.x0_max
        } else {
            self.domain.x0_min + i0 as f64 * self.dx0()
        }
    }

    pub fn xi_at(&self, ii: usize) -> f64 {
        if ii == self.ni - 1 {
            self.domain.xi_max
        } else {
            ii as f64 * self.dxi()
        }
    }

    pub fn node_point(&self, plane: usize, ii: usize, i0: usize) -> JunctionPoint {
        if ii == 0 {
            JunctionPoint::gamma(self.x0_at(i0))
        } else {
            JunctionPoint { plane, x0: self.x0_at(i0), xi: self.xi_at(ii) }
        }
    }

    /// Every stored node as `(plane, ii, i0)`, in storage order; the Γ row
    /// is listed once with plane 0.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_rows()).flat_map(move |row| {
            let (k, ii) = self.row_id(row);
            (0..self.n0).map(move |i0| (k, ii, i0))
        })
    }

    fn tol(&self) -> f64 {
        1e-12 * (self.domain.x0_max - self.domain.x0_min).max(self.domain.xi_max)
    }

    pub fn contains(&self, p: &JunctionPoint) -> bool {
        let e = self.tol();
        p.x0 >= self.domain.x0_min - e
            && p.x0 <= self.domain.x0_max + e
            && p.xi <= self.domain.xi_max + e
            && (p.on_gamma() || (1..=self.n_planes).contains(&p.plane))
    }

    /// Interpolation stencil of `p` within its plane; Γ points use the shared
    /// row only.
    pub fn locate(&self, p: &JunctionPoint) -> Result<Stencil> {
        if !self.contains(p) {
            return Err(JunctionError::OutOfDomain(format!("{p:?}")));
        }
        let s0 = ((p.x0 - self.domain.x0_min) / self.dx0()).clamp(0.0, (self.n0 - 1) as f64);
        let j = (s0.floor() as usize).min(self.n0 - 2);
        let a = s0 - j as f64;
        if p.on_gamma() {
            return Ok(Stencil { lo: j, hi: j, w: [1.0 - a, a, 0.0, 0.0] });
        }
        let si = (p.xi / self.dxi()).clamp(0.0, (self.ni - 1) as f64);
        let r = (si.floor() as usize).min(self.ni - 2);
        let b = si - r as f64;
        Ok(Stencil {
            lo: self.row_start(p.plane, r) + j,
            hi: self.row_start(p.plane, r + 1) + j,
            w: [(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b],
        })
    }
}
