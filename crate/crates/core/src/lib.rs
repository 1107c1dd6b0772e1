//! First-order methods for smooth, strongly convex minimization that all
//! maintain the same computable potential: a squared radius `sigma_k^2` with
//!
//! ```text
//! sigma_k^2 >= |y_k - x*|^2 + 2 (f(x_k) - f*) / ell
//! ```
//!
//! that shrinks by at least `1 - sqrt(ell / L)` per iteration. The potential
//! needs only `ell`, `L`, gradients and function-value differences.
//!
//! * [`geometry`]: ball-intersection bounds behind every potential update.
//! * [`problems`]: the [`Objective`] contract, quadratics, smoothed basis
//!   pursuit denoising over DCT rows, and a smoothed hinge loss.
//! * [`potential`]: initialization, the `y` update and the sigma update.
//! * [`solvers`]: geometric descent, accelerated gradient, linear CG,
//!   Hager–Zhang nonlinear CG and the hybrid NCG (plus two ablations).
//! * [`oracle`]: the idealized algorithm for quadratics, used as ground truth.

pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod potential;
pub mod problems;
pub mod solvers;

pub use problems::{LineRestriction, Objective};
pub use solvers::{IterationRecord, SolveResult, SolverError, SolverOptions, StepKind};
