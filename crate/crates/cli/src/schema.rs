//! Declarative problem files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "lambda": 1.0,
//!   "planes": [
//!     { "name": "P1", "controls": [
//!       { "id": "a", "dynamics": { "type": "disc", "center": [0, 0], "radius": 1 },
//!         "cost": { "type": "constant", "value": 1 } } ] },
//!     { "name": "P2", "controls": [
//!       { "id": "b", "dynamics": { "type": "constant", "f": [0, 1] },
//!         "cost": { "type": "affine", "offset": 0.5, "gradient": [0.1, 0] } } ] }
//!   ],
//!   "domain": { "x0": [-1, 1], "xi_max": 1 },
//!   "grid": { "n0": 41, "ni": 21 },
//!   "scheme": { "dt": 0.05, "tol": 1e-8, "max_iter": 100000 },
//!   "declared": { "M_f": 1, "M_ell": 1, "L_f": 0 }
//! }
//! ```
//!
//! A `disc` control expands into `disc_samples` atoms `id#k` on the circle
//! (or `id#r.k` plus `id#0` when `rings > 1`).

use std::path::Path;

use junction_core::prelude::{ControlAtom, Cost, DeclaredConstants, Domain, Dynamics, JunctionGrid, JunctionProblem, SchemeConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_disc_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub lambda: f64,
    pub planes: Vec<PlaneSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interface_controls: Vec<AtomSpec>,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub scheme: SchemeSpec,
    pub declared: DeclaredSpec,
    #[serde(default)]
    pub convexify: bool,
    #[serde(default = "default_disc_samples")]
    pub disc_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub name: String,
    pub controls: Vec<AtomSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub id: String,
    pub dynamics: DynamicsSpec,
    pub cost: CostSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Constant {
        f: [f64; 2],
    },
    Affine {
        offset: [f64; 2],
        matrix: [[f64; 2]; 2],
    },
    Disc {
        center: [f64; 2],
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rings: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Constant { value: f64 },
    Affine { offset: f64, gradient: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub x0: [f64; 2],
    pub xi_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n0: usize,
    pub ni: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredSpec {
    #[serde(rename = "M_f")]
    pub m_f: f64,
    #[serde(rename = "M_ell")]
    pub m_ell: f64,
    #[serde(rename = "L_f")]
    pub l_f: f64,
}

fn schema(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::schema(format!("{}: {msg}", field.into()))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(field, format!("must be a finite number > 0, got {v}")))
    }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates; serde errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::schema(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem files always serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        positive("lambda", self.lambda)?;
        if self.planes.len() < 2 {
            return Err(schema("planes", format!("need at least 2 planes, got {}", self.planes.len())));
        }
        if self.disc_samples < 3 {
            return Err(schema("disc_samples", "must be >= 3"));
        }
        let mut ids = std::collections::HashSet::new();
        for (k, plane) in self.planes.iter().enumerate() {
            if plane.controls.is_empty() {
                return Err(schema(format!("planes[{k}].controls"), "must not be empty"));
            }
            for (j, c) in plane.controls.iter().enumerate() {
                let at = format!("planes[{k}].controls[{j}]");
                self.validate_atom(&at, c, false)?;
                if !ids.insert(c.id.as_str()) {
                    return Err(schema(format!("{at}.id"), format!("duplicate id `{}`", c.id)));
                }
            }
        }
        for (j, c) in self.interface_controls.iter().enumerate() {
            let at = format!("interface_controls[{j}]");
            self.validate_atom(&at, c, true)?;
            if !ids.insert(c.id.as_str()) {
                return Err(schema(format!("{at}.id"), format!("duplicate id `{}`", c.id)));
            }
        }
        let d = self.domain;
        if !(d.x0[0] < d.x0[1] && d.x0.iter().all(|v| v.is_finite())) {
            return Err(schema("domain.x0", "must be [min, max] with min < max"));
        }
        positive("domain.xi_max", d.xi_max)?;
        if self.grid.n0 < 2 || self.grid.ni < 2 {
            return Err(schema("grid", "n0 and ni must be >= 2"));
        }
        positive("scheme.dt", self.scheme.dt)?;
        positive("scheme.tol", self.scheme.tol)?;
        if self.scheme.max_iter == 0 {
            return Err(schema("scheme.max_iter", "must be >= 1"));
        }
        for (name, v) in [("declared.M_f", self.declared.m_f), ("declared.M_ell", self.declared.m_ell), ("declared.L_f", self.declared.l_f)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(schema(name, format!("must be a finite number >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn validate_atom(&self, at: &str, c: &AtomSpec, interface: bool) -> Result<(), CliError> {
        if c.id.is_empty() || c.id.contains('#') {
            return Err(schema(format!("{at}.id"), "must be non-empty and must not contain `#`"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &c.dynamics {
            DynamicsSpec::Constant { f } => {
                if !finite(f) {
                    return Err(schema(format!("{at}.dynamics.f"), "must be finite"));
                }
                if interface && f[1] != 0.0 {
                    return Err(schema(format!("{at}.dynamics.f"), "interface controls move along Γ only: f[1] must be 0"));
                }
            }
            DynamicsSpec::Affine { offset, matrix } => {
                if !finite(offset) || !finite(&matrix[0]) || !finite(&matrix[1]) {
                    return Err(schema(format!("{at}.dynamics"), "entries must be finite"));
                }
                if interface && (offset[1] != 0.0 || matrix[1] != [0.0, 0.0]) {
                    return Err(schema(format!("{at}.dynamics"), "interface controls move along Γ only: normal row must be 0"));
                }
            }
            DynamicsSpec::Disc { center, radius, rings } => {
                if interface {
                    return Err(schema(format!("{at}.dynamics.type"), "disc is not allowed for interface controls"));
                }
                if !finite(center) {
                    return Err(schema(format!("{at}.dynamics.center"), "must be finite"));
                }
                positive(&format!("{at}.dynamics.radius"), *radius)?;
                if *rings == Some(0) {
                    return Err(schema(format!("{at}.dynamics.rings"), "must be >= 1"));
                }
            }
        }
        let ok = match c.cost {
            CostSpec::Constant { value } => value.is_finite(),
            CostSpec::Affine { offset, gradient } => offset.is_finite() && finite(&gradient),
        };
        if !ok {
            return Err(schema(format!("{at}.cost"), "entries must be finite"));
        }
        Ok(())
    }

    fn atoms(&self, c: &AtomSpec) -> Vec<ControlAtom> {
        let cost = match c.cost {
            CostSpec::Constant { value } => Cost::Constant(value),
            CostSpec::Affine { offset, gradient } => Cost::Affine { offset, gradient },
        };
        match c.dynamics {
            DynamicsSpec::Constant { f } => vec![ControlAtom::new(c.id.clone(), Dynamics::Constant { f0: f[0], fi: f[1] }, cost)],
            DynamicsSpec::Affine { offset, matrix } => vec![ControlAtom::new(c.id.clone(), Dynamics::Affine { offset, matrix }, cost)],
            DynamicsSpec::Disc { center, radius, rings } => {
                ControlAtom::filled_disc_family(&c.id, center, radius, self.disc_samples, rings.unwrap_or(1), cost)
            }
        }
    }

    pub fn problem(&self) -> Result<JunctionProblem, CliError> {
        let planes = self.planes.iter().map(|p| p.controls.iter().flat_map(|c| self.atoms(c)).collect()).collect();
        let d = self.declared;
        let mut problem = JunctionProblem::new(planes, self.lambda, DeclaredConstants { m_f: d.m_f, m_ell: d.m_ell, l_f: d.l_f })
            .map_err(|e| CliError::schema(e.to_string()))?
            .with_convexify(self.convexify);
        if !self.interface_controls.is_empty() {
            let atoms = self.interface_controls.iter().flat_map(|c| self.atoms(c)).collect();
            problem = problem.with_interface_controls(atoms).map_err(|e| CliError::schema(e.to_string()))?;
        }
        Ok(problem)
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.domain.x0[0], self.domain.x0[1], self.domain.xi_max)
    }

    pub fn grid(&self) -> Result<JunctionGrid, CliError> {
        JunctionGrid::new(self.planes.len(), self.domain(), self.grid.n0, self.grid.ni)
            .map_err(|e| schema("grid", e))
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig::new(self.scheme.dt, self.scheme.tol, self.scheme.max_iter)
    }
}
