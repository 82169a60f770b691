//! Dividends paid until ruin under a barrier strategy.

use crate::error::Result;
use crate::levy::{LevyModel, PathVariation};
use crate::scale::{invert_increasing, ScaleFunction};

/// First and (unbounded variation only) second derivative of a value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDerivatives {
    pub first: f64,
    pub second: Option<f64>,
}

/// Optimal barrier `a*` and the value functions `v_a` of the dividend-until-ruin problem.
#[derive(Debug, Clone)]
pub struct DividendSolution {
    pub q: f64,
    pub a_star: f64,
    pub mu: f64,
    pub sf: ScaleFunction,
    /// `v_{a*}(a*)`.
    pub value_at_barrier: f64,
}

/// Builds the scale function and locates `a*`.
pub fn optimal_barrier_a(model: &LevyModel, q: f64) -> Result<DividendSolution> {
    DividendSolution::from_scale(ScaleFunction::build(model, q)?)
}

impl DividendSolution {
    /// `a* = Zbar^-1(mu/q)` when `mu > 0`, else `0`.
    pub fn from_scale(sf: ScaleFunction) -> Result<Self> {
        let q = sf.q();
        let mu = sf.mu();
        let a_star = if mu > 0.0 {
            invert_increasing(|a| sf.zbar(a), |a| sf.z(a), mu / q, 0.0)?
        } else {
            0.0
        };
        let mut sol = Self { q, a_star, mu, sf, value_at_barrier: 0.0 };
        sol.value_at_barrier = sol.value_opt(a_star);
        Ok(sol)
    }

    /// `k(y) = Zbar(y) - Z(y)/Phi(q) - mu/q`; linear for `y <= 0`.
    pub fn k_fn(&self, y: f64) -> f64 {
        self.sf.zbar(y) - self.sf.z(y) / self.sf.phi() - self.mu / self.q
    }

    /// `Lambda(a) = 1/Phi(q) + k(a)/Z(a)`, zero exactly at `a*` when `mu > 0`.
    pub fn lambda_fn(&self, a: f64) -> f64 {
        1.0 / self.sf.phi() + self.k_fn(a) / self.sf.z(a)
    }

    /// `v_a(x) = -k(a - x) + Z(a - x) k(a) / Z(a)`, valid on both sides of the barrier.
    pub fn value(&self, a: f64, x: f64) -> f64 {
        -self.k_fn(a - x) + self.sf.z(a - x) / self.sf.z(a) * self.k_fn(a)
    }

    /// `v_{a*}(x)`.
    pub fn value_opt(&self, x: f64) -> f64 {
        if self.mu > 0.0 {
            self.sf.barrier_value(self.a_star, x)
        } else {
            x
        }
    }

    /// `v_a'(x)` and `v_a''(x)`; at `x = a` the left limits are returned.
    pub fn derivatives(&self, a: f64, x: f64) -> ValueDerivatives {
        let y = a - x;
        let lam = self.lambda_fn(a);
        let first = self.sf.z(y) - self.q * self.sf.w(y) * lam;
        let second = match self.sf.model().path_variation() {
            PathVariation::UnboundedVariation => {
                Some(-self.q * self.sf.w(y) + self.q * self.sf.w_prime(y) * lam)
            }
            PathVariation::BoundedVariation => None,
        };
        ValueDerivatives { first, second }
    }

    /// Derivatives of `v_{a*}`; for `mu <= 0` the value is `x` with slope 1.
    pub fn derivatives_opt(&self, x: f64) -> ValueDerivatives {
        if self.mu > 0.0 {
            self.derivatives(self.a_star, x)
        } else {
            let second = match self.sf.model().path_variation() {
                PathVariation::UnboundedVariation => Some(0.0),
                PathVariation::BoundedVariation => None,
            };
            ValueDerivatives { first: 1.0, second }
        }
    }
}
