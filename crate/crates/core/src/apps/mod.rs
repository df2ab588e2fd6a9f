//! Application solvers built on the objective pipeline.

pub mod maximin;
pub mod quadrature;
pub mod robust;
