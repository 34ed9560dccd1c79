//! Discounted infinite-horizon optimal control on junctions: `N ≥ 2`
//! half-planes glued along a common line Γ.
//!
//! The crate provides the geometry of the junction, problem definitions with
//! assumption checkers, exact evaluators for the plane, interface and
//! tangential Hamiltonians, a trajectory integrator with a brute-force value
//! oracle, and a semi-Lagrangian value-iteration solver with diagnostics.
//!
//! ```
//! use junction_core::prelude::*;
//!
//! let disc = |p: &str, c: f64| ControlAtom::disc_family(p, [0.0, 0.0], 1.0, 16, Cost::Constant(c));
//! let problem = JunctionProblem::new(
//!     vec![disc("a", 1.0), disc("b", 0.0)],
//!     1.0,
//!     DeclaredConstants { m_f: 1.0, m_ell: 1.0, l_f: 0.0 },
//! )
//! .unwrap();
//! let grid = JunctionGrid::new(2, Domain::new(-1.0, 1.0, 1.0), 11, 11).unwrap();
//! let field = value_iteration(&problem, &grid, &SchemeConfig::new(0.1, 1e-8, 10_000)).unwrap();
//! let v = field.interpolate(&JunctionPoint::new(1, 0.0, 0.5).unwrap()).unwrap();
//! assert!((v - (1.0 - (-0.5f64).exp())).abs() < 0.05);
//! ```

pub mod error;
pub mod geometry;
pub mod hamiltonians;
pub mod problem;
pub mod solver;
pub mod trajectories;

pub use error::{JunctionError, Result};

/// Commonly used types and functions.
pub mod prelude {
    pub use crate::error::{JunctionError, Result};
    pub use crate::geometry::{canonicalize, dist_to_interface, geodesic_distance, JunctionPoint, JunctionShape};
    pub use crate::hamiltonians::{
        delta_min_set, h_gamma, h_gamma_t, h_gamma_t_i, h_i, h_i_plus, h_zero, hamiltonian_regularity_report,
        relaxed_fl, tangential_mixing, Covector, MinimizerSet, RegularityConfig,
    };
    pub use crate::problem::{
        check_h0_h1, check_h2, check_h3, check_h3_tilde, controllability_radius, fl_gamma_set, fl_plus_set, fl_set,
        ControlAtom, ControlRef, Cost, DeclaredConstants, Domain, Dynamics, FLPoint, JunctionProblem, RadiusMode,
    };
    pub use crate::solver::{
        continuity_across_gamma, gradient_bound_check, sup_convolution_x0, value_iteration, JunctionGrid,
        SchemeConfig, ValueField,
    };
    pub use crate::trajectories::{
        brute_force_value, cost, dpp_residual, integrate, ControlLaw, DppConfig, OracleConfig, Trajectory,
    };
}
