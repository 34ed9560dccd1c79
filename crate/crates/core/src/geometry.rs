//! Intrinsic coordinates on the junction and its geodesic metric.
//!
//! A point is a triple `(plane, x0, xi)`: `x0` runs along the shared line Γ,
//! `xi >= 0` is the distance to Γ inside half-plane `plane`. Points with
//! `xi == 0` lie on Γ and carry the plane marker `0` once canonicalized.

use serde::{Deserialize, Serialize};

use crate::error::{JunctionError, Result};

/// Plane marker used for canonical points on Γ.
pub const GAMMA: usize = 0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JunctionPoint {
    pub plane: usize,
    pub x0: f64,
    pub xi: f64,
}

impl JunctionPoint {
    /// Builds a validated, canonical point. `plane` is 1-based; it is ignored
    /// when `xi == 0`.
    pub fn new(plane: usize, x0: f64, xi: f64) -> Result<Self> {
        canonicalize(JunctionPoint { plane, x0, xi })
    }

    /// The point of Γ with tangential coordinate `x0`.
    pub fn gamma(x0: f64) -> Self {
        JunctionPoint { plane: GAMMA, x0, xi: 0.0 }
    }

    pub fn on_gamma(&self) -> bool {
        self.xi == 0.0
    }

    /// True when the point belongs to the closed half-plane `plane`.
    pub fn in_plane(&self, plane: usize) -> bool {
        self.on_gamma() || self.plane == plane
    }
}

impl PartialEq for JunctionPoint {
    fn eq(&self, other: &Self) -> bool {
        if self.on_gamma() && other.on_gamma() {
            self.x0 == other.x0
        } else {
            self.plane == other.plane && self.x0 == other.x0 && self.xi == other.xi
        }
    }
}

/// Number of half-planes glued along Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionShape {
    n_planes: usize,
}

impl JunctionShape {
    pub fn new(n_planes: usize) -> Result<Self> {
        if n_planes < 2 {
            return Err(JunctionError::InvalidShape(n_planes));
        }
        Ok(JunctionShape { n_planes })
    }

    pub fn n_planes(&self) -> usize {
        self.n_planes
    }

    /// Iterator over the 1-based plane indices.
    pub fn planes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_planes
    }
}

/// Returns the canonical representative of `p`.
///
/// Off Γ the point is returned unchanged; on Γ the plane marker becomes
/// [`GAMMA`] and `-0.0` is normalized to `0.0`.
pub fn canonicalize(p: JunctionPoint) -> Result<JunctionPoint> {
    if !p.x0.is_finite() || !p.xi.is_finite() {
        return Err(JunctionError::InvalidPoint(format!("non-finite coordinates {p:?}")));
    }
    if p.xi < 0.0 {
        return Err(JunctionError::InvalidPoint(format!("negative xi = {}", p.xi)));
    }
    if p.xi == 0.0 {
        return Ok(JunctionPoint::gamma(p.x0));
    }
    if p.plane == GAMMA {
        return Err(JunctionError::InvalidPoint(format!(
            "plane marker 0 is reserved for Γ but xi = {}",
            p.xi
        )));
    }
    Ok(p)
}

/// Shortest-path distance on the junction. Paths between different planes
/// go through Γ, which unfolds the second plane onto the first.
pub fn geodesic_distance(x: &JunctionPoint, y: &JunctionPoint) -> f64 {
    let d0 = x.x0 - y.x0;
    let dn = if x.on_gamma() || y.on_gamma() || x.plane == y.plane {
        x.xi - y.xi
    } else {
        x.xi + y.xi
    };
    d0.hypot(dn)
}

pub fn dist_to_interface(p: &JunctionPoint) -> f64 {
    p.xi
}
