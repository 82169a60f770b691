//! Spectrally positive Lévy processes with phase-type jumps.
//!
//! The surplus moves as `X_t - X_0 = -d t + sigma B_t + sum_{n <= N_t} Z_n` where `N` is a
//! Poisson process of rate `lambda` and the `Z_n` are phase-type `(alpha, T)`. Its Laplace
//! exponent `psi(s) = log E[exp(-s X_1)]` is the rational function
//!
//! ```text
//! psi(s) = d s + sigma^2 s^2 / 2 + lambda (alpha (sI - T)^-1 t - 1),   t = -T 1.
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(alpha) = 1`.
const ALPHA_SUM_TOL: f64 = 1e-12;

/// Relative distance to the spectrum of `T` below which the resolvent is refused.
const RESOLVENT_GUARD: f64 = 1e-10;

/// Phase-type law of the absorption time of a finite Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: DVector<f64>,
    generator: DMatrix<f64>,
    exit: DVector<f64>,
    mean: f64,
}

impl PhaseType {
    /// Validates `(alpha, T)` and caches the exit vector `t = -T 1`.
    pub fn new(alpha: Vec<f64>, generator: Vec<Vec<f64>>) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(Error::InvalidPhaseType("at least one phase is required".into()));
        }
        if generator.len() != m || generator.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "alpha has {m} entries but T is not {m}x{m}"
            )));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidPhaseType("alpha entries must be finite and >= 0".into()));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > ALPHA_SUM_TOL {
            return Err(Error::InvalidPhaseType(format!(
                "alpha must sum to 1 (sum = {total:.15})"
            )));
        }

        let t_mat = DMatrix::from_fn(m, m, |i, j| generator[i][j]);
        if t_mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPhaseType("T has non-finite entries".into()));
        }
        let scale = t_mat.amax().max(1.0);
        let mut exit = DVector::zeros(m);
        for i in 0..m {
            if t_mat[(i, i)] >= 0.0 {
                return Err(Error::InvalidPhaseType(format!(
                    "diagonal entry T[{i}][{i}] must be negative"
                )));
            }
            for j in 0..m {
                if i != j && t_mat[(i, j)] < 0.0 {
                    return Err(Error::InvalidPhaseType(format!(
                        "off-diagonal entry T[{i}][{j}] must be nonnegative"
                    )));
                }
            }
            let row_sum: f64 = t_mat.row(i).sum();
            if row_sum > ALPHA_SUM_TOL * scale {
                return Err(Error::InvalidPhaseType(format!(
                    "row {i} of T sums to {row_sum} > 0"
                )));
            }
            exit[i] = (-row_sum).max(0.0);
        }
        if t_mat.clone().complex_eigenvalues().iter().any(|ev| ev.re >= 0.0) {
            return Err(Error::InvalidPhaseType(
                "T is not a proper subgenerator (eigenvalue with nonnegative real part)".into(),
            ));
        }
        let mean = t_mat
            .clone()
            .lu()
            .solve(&DVector::from_element(m, -1.0))
            .map(|x| DVector::from_vec(alpha.clone()).dot(&x))
            .ok_or_else(|| Error::InvalidPhaseType("T is singular".into()))?;

        Ok(Self { alpha: DVector::from_vec(alpha), generator: t_mat, exit, mean })
    }

    /// Like [`PhaseType::new`], but rescales `alpha` to unit mass first. Fitted representations
    /// are usually published rounded to a few digits, so their `alpha` misses 1 by rounding
    /// error; anything further off than `1e-3` is still rejected.
    pub fn normalized(alpha: Vec<f64>, generator: Vec<Vec<f64>>) -> Result<Self> {
        let total: f64 = alpha.iter().sum();
        if !(total - 1.0).abs().le(&1e-3) {
            return Err(Error::InvalidPhaseType(format!(
                "alpha sums to {total}, too far from 1 to renormalize"
            )));
        }
        Self::new(alpha.iter().map(|a| a / total).collect(), generator)
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn exit_vector(&self) -> &DVector<f64> {
        &self.exit
    }

    /// `E[Z] = alpha (-T)^-1 1`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Density `alpha exp(T z) t` for `z >= 0`.
    pub fn density(&self, z: f64) -> f64 {
        let e = (&self.generator * z).exp();
        self.alpha.dot(&(e * &self.exit)).max(0.0)
    }
}

/// Path regularity of the surplus process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathVariation {
    BoundedVariation,
    UnboundedVariation,
}

/// Unvalidated model parameters as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub drift_d: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    #[serde(rename = "T")]
    pub t_matrix: Vec<Vec<f64>>,
}

/// Validates a raw parameter set.
pub fn validate_model(spec: &ModelSpec) -> Result<LevyModel> {
    let jumps = PhaseType::new(spec.alpha.clone(), spec.t_matrix.clone())?;
    LevyModel::new(spec.drift_d, spec.sigma, spec.lambda, jumps)
}

/// A validated spectrally positive Lévy process with phase-type jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    drift_d: f64,
    sigma: f64,
    lambda: f64,
    jumps: PhaseType,
    spectrum: Vec<Complex64>,
    guard: f64,
}

impl LevyModel {
    pub fn new(drift_d: f64, sigma: f64, lambda: f64, jumps: PhaseType) -> Result<Self> {
        if !drift_d.is_finite() {
            return Err(Error::InvalidParameter("drift_d must be finite".into()));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0 (got {sigma})")));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be > 0 (got {lambda})")));
        }
        if sigma == 0.0 && drift_d <= 0.0 {
            return Err(Error::NotSubordinatorViolation { drift_d });
        }
        let spectrum: Vec<Complex64> = jumps.generator.clone().complex_eigenvalues().iter().copied().collect();
        let guard = RESOLVENT_GUARD * jumps.generator.norm().max(1.0);
        Ok(Self { drift_d, sigma, lambda, jumps, spectrum, guard })
    }

    /// Same jump law and Gaussian part, different drift.
    pub fn with_drift(&self, drift_d: f64) -> Result<Self> {
        Self::new(drift_d, self.sigma, self.lambda, self.jumps.clone())
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.drift_d, sigma, self.lambda, self.jumps.clone())
    }

    pub fn drift_d(&self) -> f64 {
        self.drift_d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn jumps(&self) -> &PhaseType {
        &self.jumps
    }

    /// Eigenvalues of `T`, i.e. the poles of `psi`.
    pub fn poles(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn spec(&self) -> ModelSpec {
        let m = self.jumps.phases();
        ModelSpec {
            drift_d: self.drift_d,
            sigma: self.sigma,
            lambda: self.lambda,
            alpha: self.jumps.alpha.iter().copied().collect(),
            t_matrix: (0..m).map(|i| self.jumps.generator.row(i).iter().copied().collect()).collect(),
        }
    }

    /// Solves `(sI - T) y = rhs`.
    pub fn resolvent_apply(&self, s: Complex64, rhs: &DVector<f64>) -> Result<DVector<Complex64>> {
        let singular = Error::SingularResolvent { re: s.re, im: s.im };
        if self.spectrum.iter().any(|ev| (s - ev).norm() < self.guard) {
            return Err(singular);
        }
        let m = self.jumps.phases();
        let shifted = DMatrix::from_fn(m, m, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.jumps.generator[(i, j)], 0.0)
        });
        let rhs = rhs.map(|v| Complex64::new(v, 0.0));
        shifted.lu().solve(&rhs).ok_or(singular)
    }

    /// Laplace exponent `psi(s)`.
    ///
    /// The jump part is evaluated as `-lambda s alpha (sI - T)^-1 1`, which equals
    /// `lambda (alpha (sI - T)^-1 t - 1)` and vanishes identically at `s = 0`.
    pub fn laplace_exponent(&self, s: Complex64) -> Result<Complex64> {
        let m = self.jumps.phases();
        let y = self.resolvent_apply(s, &DVector::from_element(m, 1.0))?;
        let alpha_y = complex_dot(&self.jumps.alpha, &y);
        Ok(self.drift_d * s + 0.5 * self.sigma * self.sigma * s * s - self.lambda * s * alpha_y)
    }

    /// `psi'(s) = d + sigma^2 s - lambda alpha (sI - T)^-2 t`.
    pub fn laplace_exponent_deriv(&self, s: Complex64) -> Result<Complex64> {
        let y = self.resolvent_apply(s, &self.jumps.exit)?;
        let m = self.jumps.phases();
        let shifted = DMatrix::from_fn(m, m, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.jumps.generator[(i, j)], 0.0)
        });
        let y2 = shifted.lu().solve(&y).ok_or(Error::SingularResolvent { re: s.re, im: s.im })?;
        let alpha_y2 = complex_dot(&self.jumps.alpha, &y2);
        Ok(self.drift_d + self.sigma * self.sigma * s - self.lambda * alpha_y2)
    }

    /// Real-argument convenience wrapper around [`LevyModel::laplace_exponent`].
    pub fn psi(&self, s: f64) -> Result<f64> {
        Ok(self.laplace_exponent(Complex64::new(s, 0.0))?.re)
    }

    pub fn psi_prime(&self, s: f64) -> Result<f64> {
        Ok(self.laplace_exponent_deriv(Complex64::new(s, 0.0))?.re)
    }

    /// `mu = E[X_1] = -d + lambda E[Z]`.
    pub fn drift_mu(&self) -> f64 {
        -self.drift_d + self.lambda * self.jumps.mean
    }

    /// Density of the Lévy measure, `lambda alpha exp(T z) t`.
    pub fn jump_density(&self, z: f64) -> f64 {
        self.lambda * self.jumps.density(z)
    }

    pub fn path_variation(&self) -> PathVariation {
        if self.sigma > 0.0 {
            PathVariation::UnboundedVariation
        } else {
            PathVariation::BoundedVariation
        }
    }

    /// `int_(0,1) z nu(dz)`.
    pub fn small_jump_mean(&self) -> f64 {
        // int_0^1 z e^{Tz} dz = T^-1 e^T - T^-2 (e^T - I)
        let t_mat = &self.jumps.generator;
        let e = t_mat.exp();
        let lu = t_mat.clone().lu();
        let w = &e * &self.jumps.exit;
        let first = lu.solve(&w).expect("T is nonsingular");
        let second = lu
            .solve(&lu.solve(&(&w - &self.jumps.exit)).expect("T is nonsingular"))
            .expect("T is nonsingular");
        self.lambda * self.jumps.alpha.dot(&(first - second))
    }

    /// Drift `c` of the compensated triplet form, `c = d - int_(0,1) z nu(dz)`.
    pub fn triplet_drift_c(&self) -> f64 {
        self.drift_d - self.small_jump_mean()
    }
}

pub(crate) fn complex_dot(real: &DVector<f64>, v: &DVector<Complex64>) -> Complex64 {
    real.iter().zip(v.iter()).map(|(a, b)| *a * b).sum()
}
