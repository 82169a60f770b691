//! Optimal dividend barriers for spectrally positive Lévy processes with phase-type jumps.
//!
//! The crate computes `q`-scale functions in closed form from the roots of `psi(s) = q`,
//! solves the dividend-until-ruin and capital-injection problems, and verifies the
//! solutions through their variational inequalities and by Monte Carlo simulation.

pub mod dividend;
pub mod error;
pub mod exec;
pub mod injection;
pub mod levy;
pub mod presets;
pub mod quad;
pub mod scale;
pub mod sim;
pub mod verify;

pub use dividend::DividendSolution;
pub use error::{Error, Result};
pub use injection::InjectionSolution;
pub use levy::{validate_model, LevyModel, ModelSpec, PathVariation, PhaseType};
pub use scale::ScaleFunction;
