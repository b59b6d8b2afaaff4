//! Numerical toolkit for Poincaré functions of quadratic polynomials.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyncore`]: quadratic maps in `λw + w²` and `z² + c` form, fixed points,
//!   cycles and multipliers.
//! * [`series`]: truncated power series with a certified evaluation radius.
//! * [`siegel`]: linearizers of Siegel fixed points and Siegel cycles.
//! * [`poincare`]: Poincaré functions at repelling fixed points, evaluated on
//!   the whole plane through the functional equation.
//! * [`sets`]: Borel sets with certified density decay and Monte Carlo density.
//! * [`preimage`]: inverse branches of the Poincaré function over the Siegel
//!   disk, orbit preimages and argument-principle counting.
//! * [`exceptional`]: the exceptional-preimage growth experiment.
//! * [`littlewood`]: spherical-derivative integrals of polynomials over the
//!   unit disk.
//! * [`chebfamily`]: parameter searches near the Chebyshev polynomial `z² − 2`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebfamily;
pub mod cplx;
pub mod dyncore;
pub mod error;
pub mod exceptional;
pub mod littlewood;
pub mod poincare;
pub mod preimage;
pub mod series;
pub mod sets;
pub mod siegel;

pub use error::{Error, Result};
pub use num_complex::Complex64 as Complex;
