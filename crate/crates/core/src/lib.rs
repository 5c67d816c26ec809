//! Five-moment HyQMOM closure and a positivity-preserving Lax-Wendroff discontinuous Galerkin
//! solver for the resulting one-dimensional moment system, with a BGK relaxation extension.

// `!(x > 0.0)` is the NaN-rejecting test throughout; index loops mirror the matrix formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod basis_quadrature;
pub mod bgk;
pub mod cli_harness;
pub mod error;
pub mod hyqmom_closure;
pub mod kinetic_state;
pub mod limiters;
pub mod lxw_dg_solver;

pub use error::{Error, Result};
pub mod qmom_diagnostics;
pub mod reference_solvers;
