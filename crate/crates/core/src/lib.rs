//! Distributed-order fractional dynamics on graphs.
//!
//! * [`fracfn`]: gamma, binomial and Mittag-Leffler functions, waiting-time
//!   normalizers and a Marchaud-Weyl quadrature.
//! * [`measure`]: order measures and their trapezoid discretization.
//! * [`solvers`]: predictor (Strategy I) and Grünwald-Letnikov solvers for
//!   multi-term Caputo equations.
//! * [`graphdyn`]: random-walk Laplacian and linear graph diffusion.
//! * [`randwalk`]: Monte-Carlo non-Markovian graph walker and waiting-time
//!   span fitting.
//! * [`visco`]: viscoelastic toy data and order-measure identification.
//! * [`io`]: edge-list, CSV and JSON formats.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fracfn;
pub mod graphdyn;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod randwalk;
pub mod solvers;
pub mod visco;

pub use error::{DragonError, Result};
pub use fracfn::AlphaOrder;
pub use measure::{MultiTermSpec, OrderMeasure};
pub use solvers::{Backend, FdeProblem, Trajectory};
