//! Reversible KAM machinery for coupled nonlinear Schrödinger lattices: lattice
//! bookkeeping, sparse polynomial vector fields, the lattice model and its
//! action-angle form, homological solver, KAM iteration and resonance measure.

pub mod error;
pub mod homological;
pub mod kam;
pub mod lattice;
pub mod nls;
pub mod resonance;
pub mod vfield;

pub use error::KamError;
