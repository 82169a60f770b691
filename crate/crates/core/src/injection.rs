//! Dividends with capital injections: the surplus is reflected at `0` (injections, unit
//! cost `phi > 1`) and at the upper barrier `b` (dividends).

use crate::dividend::ValueDerivatives;
use crate::error::{Error, Result};
use crate::levy::PathVariation;
use crate::scale::{invert_increasing, ScaleFunction};

#[derive(Debug, Clone)]
pub struct InjectionSolution {
    pub q: f64,
    pub phi_cost: f64,
    pub b_star: f64,
    pub mu: f64,
    pub sf: ScaleFunction,
}

/// `b* = Z^-1(phi)`.
pub fn optimal_barrier_b(sf: &ScaleFunction, phi_cost: f64) -> Result<InjectionSolution> {
    if !(phi_cost > 1.0) || !phi_cost.is_finite() {
        return Err(Error::InvalidCost(phi_cost));
    }
    let q = sf.q();
    let b_star = invert_increasing(|b| sf.z(b), |b| q * sf.w(b), phi_cost, 0.0)?;
    Ok(InjectionSolution { q, phi_cost, b_star, mu: sf.mu(), sf: sf.clone() })
}

impl InjectionSolution {
    /// `E_x[int e^{-qt} dL^b]` for the doubly reflected process, `0 <= x <= b`.
    pub fn expected_dividends(&self, b: f64, x: f64) -> f64 {
        let sf = &self.sf;
        -sf.zbar(b - x) + self.mu / self.q + sf.z(b) / (self.q * sf.w(b)) * sf.z(b - x)
    }

    /// `E_x[int e^{-qt} dR^0]` for the doubly reflected process, `0 <= x <= b`.
    pub fn expected_injections(&self, b: f64, x: f64) -> f64 {
        self.sf.z(b - x) / (self.q * self.sf.w(b))
    }

    /// `vbar_b(x)`, extended linearly with slope `phi` below zero.
    pub fn value(&self, b: f64, x: f64) -> f64 {
        if x < 0.0 {
            return self.phi_cost * x + self.value(b, 0.0);
        }
        let sf = &self.sf;
        -sf.zbar(b - x) + self.mu / self.q
            + (sf.z(b) - self.phi_cost) / (self.q * sf.w(b)) * sf.z(b - x)
    }

    /// `vbar_{b*}(x) = mu/q - Zbar(b* - x)`.
    pub fn value_opt(&self, x: f64) -> f64 {
        if x < 0.0 {
            return self.phi_cost * x + self.value_opt(0.0);
        }
        self.sf.barrier_value(self.b_star, x)
    }

    /// `vbar_b'(x)`, `vbar_b''(x)`; left limits at `x = b`.
    pub fn derivatives(&self, b: f64, x: f64) -> ValueDerivatives {
        let unbounded = self.sf.model().path_variation() == PathVariation::UnboundedVariation;
        if x < 0.0 {
            return ValueDerivatives { first: self.phi_cost, second: unbounded.then_some(0.0) };
        }
        let sf = &self.sf;
        let y = b - x;
        let gap = (sf.z(b) - self.phi_cost) / sf.w(b);
        let first = sf.z(y) - sf.w(y) * gap;
        let second = unbounded.then(|| -self.q * sf.w(y) + sf.w_prime(y) * gap);
        ValueDerivatives { first, second }
    }

    pub fn derivatives_opt(&self, x: f64) -> ValueDerivatives {
        self.derivatives(self.b_star, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LevyModel, PhaseType};

    fn sf(sigma: f64) -> ScaleFunction {
        let jumps = PhaseType::new(vec![1.0], vec![vec![-1.0]]).unwrap();
        ScaleFunction::build(&LevyModel::new(1.0, sigma, 1.5, jumps).unwrap(), 0.05).unwrap()
    }

    #[test]
    fn rejects_unit_cost() {
        assert!(matches!(optimal_barrier_b(&sf(0.0), 1.0), Err(Error::InvalidCost(_))));
        assert!(optimal_barrier_b(&sf(0.0), 0.5).is_err());
    }

    #[test]
    fn barrier_solves_z_equals_phi() {
        let s = sf(0.0);
        let mut last = 0.0;
        for phi in [1.001, 1.5, 2.0, 5.0] {
            let sol = optimal_barrier_b(&s, phi).unwrap();
            assert!((s.z(sol.b_star) - phi).abs() < 1e-9);
            assert!(sol.b_star > last);
            last = sol.b_star;
        }
    }

    #[test]
    fn value_decomposes_into_dividends_minus_injections() {
        let sol = optimal_barrier_b(&sf(0.6), 2.0).unwrap();
        for b in [0.5 * sol.b_star, sol.b_star, 3.0] {
            for i in 0..=10 {
                let x = b * i as f64 / 10.0;
                let recombined = sol.expected_dividends(b, x) - sol.phi_cost * sol.expected_injections(b, x);
                assert!((sol.value(b, x) - recombined).abs() < 1e-10);
            }
        }
        assert!((sol.value(sol.b_star, -1.0) - (sol.value(sol.b_star, 0.0) - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn optimal_forms_agree() {
        let sol = optimal_barrier_b(&sf(0.0), 2.0).unwrap();
        for i in 0..=30 {
            let x = 0.1 * i as f64 * sol.b_star;
            assert!((sol.value(sol.b_star, x) - sol.value_opt(x)).abs() < 1e-10);
        }
        assert!((sol.value_opt(sol.b_star) - sol.mu / sol.q).abs() < 1e-12);
        assert_eq!(sol.derivatives_opt(-0.5).first, 2.0);
    }
}
