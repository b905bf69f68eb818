//! Solution operators for the linearized (Stokes) Navier-Stokes equations on the
//! whole space, together with the mollifier calculus and numerical certificates
//! for the inequalities that govern them.

pub mod analysis;
pub mod calculus;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod grid;
pub mod lerf;
pub mod mollifier;
pub mod profiles;
pub mod quadrature;
pub mod singular;
pub mod stokes;

pub use calculus::{
    derive, diagnostics, divergence, energy, integrate, seminorm_jm, sup_derivative, sup_norm,
    DiagnosticsSample, SupNorm,
};
pub use error::{Error, Result};
pub use grid::{Grid3, ScalarField, VectorField3};
