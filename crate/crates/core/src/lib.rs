//! Exact Jaynes-Cummings and trapped-ion dynamics of a two-level system
//! coupled to one bosonic mode, the emergent-Hamiltonian frequency shift
//! obtained by minimal dissipation, and virtual Ramsey experiments with their
//! analysis pipelines.

// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod experiments;
pub mod hilbert;
pub mod models;
pub mod renorm;
pub mod scenario;
pub mod tcl;
