//! Shared fixtures for the benchmarks.

use junction_core::prelude::*;

/// Two planes with sampled unit discs; cost 1 on plane 1, 0 on plane 2.
pub fn closed_form(samples: usize) -> JunctionProblem {
    let a = ControlAtom::disc_family("a", [0.0, 0.0], 1.0, samples, Cost::Constant(1.0));
    let b = ControlAtom::disc_family("b", [0.0, 0.0], 1.0, samples, Cost::Constant(0.0));
    JunctionProblem::new(vec![a, b], 1.0, DeclaredConstants { m_f: 1.0, m_ell: 1.0, l_f: 0.0 })
        .expect("valid problem")
}

pub fn grid(n0: usize, ni: usize) -> JunctionGrid {
    JunctionGrid::new(2, Domain::new(-2.0, 2.0, 2.0), n0, ni).expect("valid grid")
}
