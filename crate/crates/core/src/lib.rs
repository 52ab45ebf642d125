//! Numerical tools for fibered sets over the unit circle.
//!
//! A scenario is a defining function `rho(z, w)` on `Γ × Cⁿ` together with a
//! constraint level. From it the crate computes:
//!
//! * the H∞ min-max value `inf_f max_z rho(z, f(z))` over truncated analytic
//!   maps, with flatness, uniqueness and conjugate-symmetry diagnostics
//!   ([`solver`]);
//! * polynomial-hull membership of interior points, hull slices and the
//!   empty / single-graph / many-graphs classification ([`hull`]);
//! * complex-tangent Hessian margins, center selection, smooth-max surgery
//!   and the dual-complement transform of the fibers ([`fiber`]);
//! * extremal discs, left inverses and the Green-type function `u₁` on ball
//!   and ellipsoid model fibers ([`lempert`]).
//!
//! [`hardy`] holds the discrete Hardy-space plumbing, [`scenario_file`] and
//! [`report`] the file formats used by the `hullscope` binary.

pub mod cvec;
pub mod error;
pub mod fiber;
pub mod hardy;
pub mod hull;
pub mod lempert;
pub mod optim;
pub mod report;
pub mod scenario_file;
pub mod solver;

pub use error::{Error, Result};
pub use fiber::{FamilyId, FiberScenario};
pub use hardy::{AnalyticMap, CircleGrid};
pub use solver::{SolveConfig, SolveResult};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
