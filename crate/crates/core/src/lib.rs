//! Numerical laboratory for small solutions of the cubic-type NLS
//! `i u_t = (-∂²ₓ + V) u + g(|u|²) u` on the line with a single-eigenvalue
//! trapping potential.

pub mod branch;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod modulation;
pub mod nonlinearity;
pub mod operator;
pub mod parallel;
pub mod potential;
pub mod propagator;
pub mod random;
pub mod scattering;
pub mod special;
pub mod spectrum;

pub use error::{LabError, Result};
pub use branch::{BoundStatePoint, BranchSettings, BranchSolver};
pub use field::ComplexField;
pub use nonlinearity::Nonlinearity;
pub use grid::{Boundary, Grid};
pub use operator::{Hamiltonian, Stencil};
pub use potential::Potential;
pub use spectrum::SpectralData;
