//! D-optimal designs for polynomial regression with prior information.
//!
//! The objective, a generalized Hankel determinant of the design's moments,
//! is evaluated from canonical moments through discrete Toda recurrences and
//! maximized over the canonical-moment box. The optimal measure is read off
//! its Jacobi matrix.
//!
//! ```
//! use dopt_core::{solve, ModelSpec, SolveOptions};
//!
//! let r = solve(&ModelSpec::unconstrained(2), &SolveOptions::default()).unwrap();
//! assert!((r.objective - 0.25).abs() < 1e-9);
//! ```

pub mod apps;
pub mod canonical;
pub mod check;
pub mod error;
pub mod measure;
pub mod nelder_mead;
pub mod optimize;
pub mod oracle;
pub mod scalar;
pub mod toda;

pub use canonical::{CanonicalSequence, Terminal, ZetaSequence};
pub use error::{DesignError, Result};
pub use measure::{DesignMeasure, Domain, MomentSequence};
pub use optimize::{solve, DesignResult, Diagnostics, SolveOptions};
pub use scalar::{Rational, Scalar};
pub use toda::{evaluate_objective, ModelSpec, PriorMultiset, ZetaTable};
