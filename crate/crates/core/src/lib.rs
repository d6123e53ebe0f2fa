//! Hamilton-Jacobi equations twisted by a closed one-form, on weighted graphs.
//!
//! The crate works on a finite connected graph carrying a probability measure
//! and a Dirichlet form ([`space::GraphSpace`]). On it you can
//!
//! * describe closed one-forms as cocycles or local charts ([`forms`]) and
//!   unroll them on a covering graph where they become exact ([`cover`]),
//! * compute the deterministic value function by a Bellman recursion over
//!   walks ([`inviscid`]),
//! * solve the viscous equation through the Cole-Hopf transform, by Picard
//!   iteration on the Duhamel formula, by method of lines, by a minimizing
//!   movement scheme, or directly ([`viscous`]),
//! * check the Fokker-Planck duality that characterizes the viscous value
//!   ([`fokker_planck`]).
//!
//! ```
//! use twisted_hj::prelude::*;
//!
//! let space = GraphSpace::cycle(64, 1.0)?;
//! let form = Cocycle::constant(&space, 2.0);
//! let grid = TimeGrid::new(-1.0, 1e-3)?;
//! let problem = ViscousProblem::new(&space, &form, &Potential::Zero, 1.0, ScalarField::zeros(64), grid)?;
//! let u = cole_hopf_log(&mol_solve(&problem, Scheme::CrankNicolson)?.v, 1.0)?;
//! assert!((u.initial_value()[0] + 2.0).abs() < 1e-3);
//! # Ok::<(), twisted_hj::Error>(())
//! ```

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cover;
pub mod error;
pub mod fokker_planck;
pub mod forms;
pub mod grid;
pub mod inviscid;
pub mod potential;
pub mod space;
pub mod testing;
pub mod viscous;

pub use error::{Error, Result};

/// The types most programs need.
pub mod prelude {
    pub use crate::cover::CoverWindow;
    pub use crate::error::{Error, Result};
    pub use crate::fokker_planck::{duality_check, fp_solve, DriftPath, DualityReport};
    pub use crate::forms::{gamma_hat, ChartForm, Cocycle, CycleBasis, VertexPath};
    pub use crate::grid::{ScalarFieldPath, TimeGrid};
    pub use crate::inviscid::{solve_value, InviscidProblem, ValueTable};
    pub use crate::potential::Potential;
    pub use crate::space::{Edge, GraphSpace, HeatBackend, ScalarField};
    pub use crate::viscous::{
        cole_hopf_exp, cole_hopf_log, mol_solve, picard_solve, solve_viscous_hj_direct, PicardOptions, Scheme,
        ViscousProblem,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/forms.md")]
    mod forms {}
    #[doc = include_str!("../../../book/src/covers.md")]
    mod covers {}
    #[doc = include_str!("../../../book/src/inviscid.md")]
    mod inviscid {}
    #[doc = include_str!("../../../book/src/viscous.md")]
    mod viscous {}
    #[doc = include_str!("../../../book/src/fokker_planck.md")]
    mod fokker_planck {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
