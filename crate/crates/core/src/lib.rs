//! Lindbladian dynamics of lossy fermionic Gaussian states and the topology
//! of their modular Hamiltonians.
//!
//! The crate is organized bottom-up:
//!
//! * [`algebra`]: closed-form 2×2 kernel (Pauli forms, biorthogonal
//!   eigensystems, propagators, Hermitian logarithms).
//! * [`model`]: lattice models, Bloch blocks, damping matrices, PT
//!   classification and the chiral axis.
//! * [`dynamics`]: correlation-matrix evolution engines.
//! * [`topology`]: modular Hamiltonians, winding numbers and dynamic
//!   transitions.
//! * [`phasemap`]: parameter sweeps and threshold search.

pub mod algebra;
pub mod dynamics;
pub mod model;
pub mod phasemap;
pub mod topology;

pub use algebra::{Complex2x2, EigenSystem2, PauliForm, C64};
pub use model::{BlochBlock, ChiralFrame, LatticeModel, PtLabel, PtPhase};
