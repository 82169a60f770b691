//! Variational-inequality checks through the integro-differential generator.
//!
//! Value functions of both problems are exponential polynomials below their barrier and
//! linear with slope one above it. On that class the jump integral of the generator
//!
//! ```text
//! L f(x) = -d f'(x) + sigma^2 f''(x) / 2 + int_0^inf (f(x + z) - f(x)) nu(dz)
//! ```
//!
//! reduces to matrix exponentials and resolvents of `T`, so it is evaluated exactly; an
//! adaptive quadrature route is kept as an independent cross-check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::fmt::Write as _;

use crate::dividend::DividendSolution;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::injection::InjectionSolution;
use crate::levy::{complex_dot, LevyModel, PathVariation};
use crate::quad;
use crate::scale::ScaleFunction;

/// Default pass/fail threshold for the inequalities.
pub const VI_TOLERANCE: f64 = 1e-6;

/// `g(y) = constant + slope y + Re sum_k c_k exp(s_k y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    pub constant: f64,
    pub slope: f64,
    pub terms: Vec<(Complex64, Complex64)>,
}

impl ExpPoly {
    fn zero(terms: &[Complex64]) -> Self {
        Self { constant: 0.0, slope: 0.0, terms: terms.iter().map(|s| (Complex64::new(0.0, 0.0), *s)).collect() }
    }

    /// `Z(y)` for `y >= 0`.
    pub fn z(sf: &ScaleFunction) -> Self {
        let q = sf.q();
        let mut p = Self::zero(sf.roots());
        let mut sum = Complex64::new(0.0, 0.0);
        for ((c, s), r) in p.terms.iter_mut().zip(sf.coeffs()) {
            *c = q * r / *s;
            sum += r / *s;
        }
        p.constant = 1.0 - q * sum.re;
        p
    }

    /// `Zbar(y)` for `y >= 0`.
    pub fn zbar(sf: &ScaleFunction) -> Self {
        let q = sf.q();
        let mut p = Self::zero(sf.roots());
        let (mut s1, mut s2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for ((c, s), r) in p.terms.iter_mut().zip(sf.coeffs()) {
            *c = q * r / (*s * *s);
            s1 += r / *s;
            s2 += r / (*s * *s);
        }
        p.constant = -q * s2.re;
        p.slope = 1.0 - q * s1.re;
        p
    }

    /// `a * self + b * other + shift`; both must share the same exponents.
    pub fn combine(&self, a: f64, other: &Self, b: f64, shift: f64) -> Self {
        debug_assert_eq!(self.terms.len(), other.terms.len());
        Self {
            constant: a * self.constant + b * other.constant + shift,
            slope: a * self.slope + b * other.slope,
            terms: self
                .terms
                .iter()
                .zip(&other.terms)
                .map(|((c1, s), (c2, _))| (a * c1 + b * c2, *s))
                .collect(),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.constant + self.slope * y + self.terms.iter().map(|(c, s)| c * (s * y).exp()).sum::<Complex64>().re
    }

    pub fn deriv(&self, y: f64) -> f64 {
        self.slope + self.terms.iter().map(|(c, s)| c * s * (s * y).exp()).sum::<Complex64>().re
    }

    pub fn deriv2(&self, y: f64) -> f64 {
        self.terms.iter().map(|(c, s)| c * s * s * (s * y).exp()).sum::<Complex64>().re
    }
}

/// Behavior of a value function on the negative half-line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeftExtension {
    Zero,
    Linear { slope: f64 },
}

/// Piecewise function with knot `barrier`: `below(barrier - x)` on `[0, barrier]`, the line
/// `below(0) + (x - barrier)` above, and `left` below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpFunction {
    pub barrier: f64,
    pub below: ExpPoly,
    pub left: LeftExtension,
}

/// Side from which to take limits at the knot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl PiecewiseExpFunction {
    /// `v_a` of the dividend-until-ruin problem.
    pub fn dividend(sol: &DividendSolution, a: f64) -> Self {
        let sf = &sol.sf;
        let z = ExpPoly::z(sf);
        let zbar = ExpPoly::zbar(sf);
        // k = Zbar - Z / Phi - mu / q
        let k = zbar.combine(1.0, &z, -1.0 / sf.phi(), -sol.mu / sol.q);
        let below = k.combine(-1.0, &z, sol.k_fn(a) / sf.z(a), 0.0);
        Self { barrier: a, below, left: LeftExtension::Zero }
    }

    /// `v_{a*}`.
    pub fn dividend_opt(sol: &DividendSolution) -> Self {
        Self::dividend(sol, sol.a_star)
    }

    /// `vbar_b` of the injection problem.
    pub fn injection(sol: &InjectionSolution, b: f64) -> Self {
        let sf = &sol.sf;
        let weight = (sf.z(b) - sol.phi_cost) / (sol.q * sf.w(b));
        let below = ExpPoly::zbar(sf).combine(-1.0, &ExpPoly::z(sf), weight, sol.mu / sol.q);
        Self { barrier: b, below, left: LeftExtension::Linear { slope: sol.phi_cost } }
    }

    pub fn injection_opt(sol: &InjectionSolution) -> Self {
        Self::injection(sol, sol.b_star)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return match self.left {
                LeftExtension::Zero => 0.0,
                LeftExtension::Linear { slope } => self.eval(0.0) + slope * x,
            };
        }
        if x <= self.barrier {
            self.below.eval(self.barrier - x)
        } else {
            self.below.eval(0.0) + (x - self.barrier)
        }
    }

    fn side_of(&self, x: f64, side: Option<Side>) -> Result<Side> {
        if x == self.barrier {
            side.ok_or(Error::KnotEvaluation(x))
        } else if x < self.barrier {
            Ok(Side::Left)
        } else {
            Ok(Side::Right)
        }
    }

    /// `f'(x)`; one-sided at the knot.
    pub fn deriv(&self, x: f64, side: Option<Side>) -> Result<f64> {
        if x < 0.0 {
            return Ok(match self.left {
                LeftExtension::Zero => 0.0,
                LeftExtension::Linear { slope } => slope,
            });
        }
        Ok(match self.side_of(x, side)? {
            Side::Left => -self.below.deriv(self.barrier - x),
            Side::Right => 1.0,
        })
    }

    pub fn deriv2(&self, x: f64, side: Option<Side>) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        Ok(match self.side_of(x, side)? {
            Side::Left => self.below.deriv2(self.barrier - x),
            Side::Right => 0.0,
        })
    }
}

/// Which drift convention the local part of the generator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorForm {
    /// `-d f' + int (f(x+z) - f(x)) nu(dz)`.
    Drift,
    /// `-c f' + int (f(x+z) - f(x) - f'(x) z 1{z<1}) nu(dz)`.
    Compensated,
}

impl GeneratorForm {
    fn natural(model: &LevyModel) -> Self {
        match model.path_variation() {
            PathVariation::BoundedVariation => Self::Drift,
            PathVariation::UnboundedVariation => Self::Compensated,
        }
    }
}

struct JumpAlgebra<'a> {
    model: &'a LevyModel,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> JumpAlgebra<'a> {
    fn new(model: &'a LevyModel) -> Self {
        Self { model, lu: model.jumps().generator().clone().lu() }
    }

    fn alpha(&self) -> &DVector<f64> {
        self.model.jumps().alpha()
    }

    fn exit(&self) -> &DVector<f64> {
        self.model.jumps().exit_vector()
    }

    fn t_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(v).expect("T is nonsingular")
    }

    /// `alpha (T - sI)^-1 v`.
    fn shifted_resolvent(&self, s: Complex64, v: &DVector<Complex64>) -> Complex64 {
        let t_mat = self.model.jumps().generator();
        let m = t_mat.nrows();
        let a = DMatrix::from_fn(m, m, |i, j| {
            Complex64::new(t_mat[(i, j)], 0.0) - if i == j { s } else { Complex64::new(0.0, 0.0) }
        });
        let y = a.lu().solve(v).expect("roots of psi = q are not eigenvalues of T");
        complex_dot(self.alpha(), &y)
    }

    /// `int_0^inf (f(x + z) - f(x)) nu(dz)`, exact.
    fn jump_integral(&self, f: &PiecewiseExpFunction, x: f64) -> f64 {
        let lambda = self.model.lambda();
        let mean = self.model.jumps().mean();
        let u = f.barrier - x;
        if u <= 0.0 {
            return lambda * mean;
        }
        let t = self.exit();
        let e = (self.model.jumps().generator() * u).exp();
        let w = &e * t;
        let w_minus_t = &w - t;
        // int_0^u nu(dz) and int_0^u (u - z) nu(dz)
        let ti_wt = self.t_inv(&w_minus_t);
        let mass = self.alpha().dot(&ti_wt);
        let lin = self.alpha().dot(&(-u * self.t_inv(t) + self.t_inv(&ti_wt)));
        let mut below = f.below.constant * mass + f.below.slope * lin;
        for (c, s) in &f.below.terms {
            let rhs = w.map(|v| Complex64::new(v, 0.0)) - t.map(|v| Complex64::new(v, 0.0)) * (s * u).exp();
            below += (c * self.shifted_resolvent(*s, &rhs)).re;
        }
        // beyond the barrier f(x + z) = g(0) + z - u
        let ti_w = self.t_inv(&w);
        let tail = -f.below.eval(0.0) * self.alpha().dot(&ti_w) + self.alpha().dot(&self.t_inv(&ti_w));
        lambda * (below + tail) - lambda * f.eval(x)
    }
}

fn local_drift(model: &LevyModel, form: GeneratorForm) -> (f64, f64) {
    match form {
        GeneratorForm::Drift => (model.drift_d(), 0.0),
        GeneratorForm::Compensated => {
            let small = model.small_jump_mean();
            (model.drift_d() - small, small)
        }
    }
}

/// `L f(x)` with the jump integral in closed form.
pub fn apply_generator(model: &LevyModel, f: &PiecewiseExpFunction, x: f64) -> Result<f64> {
    apply_generator_with(model, f, x, None, GeneratorForm::natural(model))
}

/// `L f(x)` with explicit knot side and drift convention.
pub fn apply_generator_with(
    model: &LevyModel,
    f: &PiecewiseExpFunction,
    x: f64,
    side: Option<Side>,
    form: GeneratorForm,
) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("generator evaluated at x = {x} <= 0")));
    }
    let d1 = f.deriv(x, side)?;
    let (drift, compensator) = local_drift(model, form);
    let mut value = -drift * d1 + JumpAlgebra::new(model).jump_integral(f, x) - compensator * d1;
    if model.sigma() > 0.0 {
        value += 0.5 * model.sigma() * model.sigma() * f.deriv2(x, side)?;
    }
    Ok(value)
}

/// `L f(x)` with the jump integral by adaptive quadrature against `jump_density`.
pub fn apply_generator_quadrature(model: &LevyModel, f: &PiecewiseExpFunction, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("generator evaluated at x = {x} <= 0")));
    }
    let d1 = f.deriv(x, None)?;
    let fx = f.eval(x);
    let integrand = |z: f64| (f.eval(x + z) - fx) * model.jump_density(z);
    let u = (f.barrier - x).max(0.0);
    let cut = u + 40.0;
    let tol = 1e-11;
    let mut jumps = quad::integrate(integrand, 0.0, u, tol) + quad::integrate(integrand, u, cut, tol);
    // beyond `cut` the increment is the line g(0) + x + z - barrier - f(x)
    let jt = model.jumps();
    let e = (jt.generator() * cut).exp();
    let w = &e * jt.exit_vector();
    let lu = jt.generator().clone().lu();
    let ti_w = lu.solve(&w).expect("T is nonsingular");
    let offset = f.below.eval(0.0) + x - f.barrier - fx;
    jumps += model.lambda()
        * (-offset * jt.alpha().dot(&ti_w)
            + jt.alpha().dot(&(-cut * &ti_w + lu.solve(&ti_w).expect("T is nonsingular"))));
    let mut value = -model.drift_d() * d1 + jumps;
    if model.sigma() > 0.0 {
        value += 0.5 * model.sigma() * model.sigma() * f.deriv2(x, None)?;
    }
    Ok(value)
}

/// Grid for the inequality checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Right end of the grid; defaults to three times the barrier (10 if the barrier is 0).
    pub x_max: Option<f64>,
    pub points: usize,
    /// Half-width of the excluded neighborhood of the knot.
    pub knot_gap: f64,
    /// Evenly spaced points on `[-1, 0)` for the slope condition below zero (injection only).
    pub negative_points: usize,
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_max: None, points: 200, knot_gap: 1e-6, negative_points: 10, tolerance: VI_TOLERANCE }
    }
}

impl GridSpec {
    fn points_for(&self, barrier: f64) -> Vec<f64> {
        let x_max = self.x_max.unwrap_or(if barrier > 0.0 { 3.0 * barrier } else { 10.0 });
        (1..=self.points)
            .map(|i| x_max * i as f64 / self.points as f64)
            .filter(|x| (x - barrier).abs() >= self.knot_gap)
            .collect()
    }
}

/// Pointwise result of an inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct VIReport {
    pub grid: Vec<f64>,
    /// `(L - q) f(x)`; NaN below zero where only the slope condition applies.
    pub gen_values: Vec<f64>,
    pub deriv_values: Vec<f64>,
    /// Violation at each point; `0` means the inequalities hold exactly.
    pub margins: Vec<f64>,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl VIReport {
    fn assemble(rows: Vec<(f64, f64, f64, f64)>, tolerance: f64) -> Self {
        let max_violation = rows.iter().map(|r| r.3).fold(0.0, f64::max);
        let mut report = Self {
            grid: Vec::with_capacity(rows.len()),
            gen_values: Vec::with_capacity(rows.len()),
            deriv_values: Vec::with_capacity(rows.len()),
            margins: Vec::with_capacity(rows.len()),
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
        };
        for (x, g, d, m) in rows {
            report.grid.push(x);
            report.gen_values.push(g);
            report.deriv_values.push(d);
            report.margins.push(m);
        }
        report
    }

    /// One row per grid point: `x,gen_value,deriv_value,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,gen_value,deriv_value,margin\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid[i], self.gen_values[i], self.deriv_values[i], self.margins[i]
            );
        }
        out
    }
}

/// Violation of `max{(L - q) f, 1 - f'} = 0` at positive `x`.
fn vi_row(model: &LevyModel, q: f64, f: &PiecewiseExpFunction, x: f64) -> Result<(f64, f64)> {
    let gen = apply_generator(model, f, x)? - q * f.eval(x);
    let d1 = f.deriv(x, None)?;
    Ok((gen, d1))
}

/// Checks the dividend inequality for `v_{a*}`.
pub fn check_vi_dividend(sol: &DividendSolution, grid: &GridSpec) -> Result<VIReport> {
    check_vi_dividend_at(sol, sol.a_star, grid)
}

/// Checks the dividend inequality for `v_a` at an arbitrary barrier (negative controls).
pub fn check_vi_dividend_at(sol: &DividendSolution, a: f64, grid: &GridSpec) -> Result<VIReport> {
    let model = sol.sf.model();
    let f = PiecewiseExpFunction::dividend(sol, a);
    let xs = grid.points_for(a);
    let rows = map_slice(&xs, Execution::default(), |&x| {
        vi_row(model, sol.q, &f, x).map(|(g, d)| (x, g, d, g.max(1.0 - d).abs()))
    });
    Ok(VIReport::assemble(rows.into_iter().collect::<Result<_>>()?, grid.tolerance))
}

/// Checks the injection inequalities for `vbar_{b*}`.
pub fn check_vi_injection(sol: &InjectionSolution, grid: &GridSpec) -> Result<VIReport> {
    check_vi_injection_at(sol, sol.b_star, grid)
}

/// Checks the injection inequalities for `vbar_b` at an arbitrary barrier: the max-condition
/// and `f' <= phi` on `x > 0`, and `f' = phi` on `x < 0`.
pub fn check_vi_injection_at(sol: &InjectionSolution, b: f64, grid: &GridSpec) -> Result<VIReport> {
    let model = sol.sf.model();
    let f = PiecewiseExpFunction::injection(sol, b);
    let phi_cost = sol.phi_cost;
    let mut rows = Vec::new();
    for i in 0..grid.negative_points {
        let x = -1.0 + i as f64 / grid.negative_points as f64;
        let d = f.deriv(x, None)?;
        rows.push((x, f64::NAN, d, (d - phi_cost).abs()));
    }
    let xs = grid.points_for(b);
    let positive = map_slice(&xs, Execution::default(), |&x| {
        vi_row(model, sol.q, &f, x).map(|(g, d)| (x, g, d, g.max(1.0 - d).abs().max(d - phi_cost)))
    });
    for row in positive {
        rows.push(row?);
    }
    Ok(VIReport::assemble(rows, grid.tolerance))
}
