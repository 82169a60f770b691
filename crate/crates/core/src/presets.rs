//! Parameter sets of the two figure sweeps.
//!
//! The jump law ships as a data file rather than literals in code.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::levy::{LevyModel, PhaseType};

/// The bundled six-phase representation, verbatim.
pub const PHASE_TYPE_DATA: &str = include_str!("../data/phase_type_normal6.toml");

pub const DISCOUNT_Q: f64 = 0.05;
pub const JUMP_RATE: f64 = 3.5;
/// Drift sweep of the dividend-until-ruin figure.
pub const FIGURE1_DRIFTS: [f64; 4] = [2.0, 2.33, 2.67, 3.0];
/// Injection-cost sweep of the capital-injection figure.
pub const FIGURE2_COSTS: [f64; 4] = [1.001, 1.5, 2.0, 5.0];
pub const FIGURE2_DRIFT: f64 = 2.33;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseTypeFile {
    alpha: Vec<f64>,
    #[serde(rename = "T")]
    t_matrix: Vec<Vec<f64>>,
}

/// Parses a phase-type data file (`alpha`, `T`), renormalizing `alpha`.
pub fn parse_phase_type(text: &str) -> Result<PhaseType> {
    let file: PhaseTypeFile = toml::from_str(text).map_err(|e| Error::Data(e.to_string()))?;
    PhaseType::normalized(file.alpha, file.t_matrix)
}

/// The bundled six-phase jump law.
pub fn bundled_phase_type() -> PhaseType {
    parse_phase_type(PHASE_TYPE_DATA).expect("bundled phase-type data is valid")
}

/// Bundled jump law with rate 3.5 and the given drift and Gaussian coefficient.
pub fn bundled_model(drift_d: f64, sigma: f64) -> Result<LevyModel> {
    LevyModel::new(drift_d, sigma, JUMP_RATE, bundled_phase_type())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_loads() {
        let pt = bundled_phase_type();
        assert_eq!(pt.phases(), 6);
        assert!((pt.alpha().sum() - 1.0).abs() < 1e-15);
        // close to E|N(0,1)| = sqrt(2/pi)
        assert!((pt.mean() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
    }

    #[test]
    fn malformed_file_rejected() {
        assert!(parse_phase_type("alpha = [1.0]\nT = [[-1.0]]\nextra = 1").is_err());
        assert!(parse_phase_type("alpha = [2.0]\nT = [[-1.0]]").is_err());
    }
}
