//! Jost solutions, resolvent kernels and smoothing functionals.

pub mod duhamel;
pub mod jost;
pub mod ode;
pub mod resolvent;
pub mod smoothing;

pub use resolvent::{limiting_absorption_norm, ResolventKernel, ResolventSign};
pub use jost::{
    compute_jost, resonance_indicator, transmission, JostPair, JostSolution, ResonanceClass,
    ResonanceReport, ScatteringSummary, Side,
};

