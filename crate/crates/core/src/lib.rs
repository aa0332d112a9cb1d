//! Exact numerical engine for the driven-dissipative Bose-Hubbard dimer:
//! Lindbladian spectra, dissipative quantum dynamics, steady states,
//! frequency-resolved Green's functions, a semiclassical companion solver,
//! and closed-form U = 0 references used for validation.

pub mod elliptic;
pub mod error;
pub mod fock;
pub mod greens;
pub mod liouvillian;
pub mod ode;
pub mod par;
pub mod semiclassical;
pub mod spectral;
pub mod u0;

pub use error::{DimerError, Result};
pub use fock::{DimerParams, FockBasis, OperatorMatrix, Site};
