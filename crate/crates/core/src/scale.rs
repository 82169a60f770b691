//! `q`-scale functions in closed form.
//!
//! For a phase-type model `1/(psi(s) - q)` is a proper rational function, so its inverse
//! Laplace transform is a finite exponential sum `W(x) = sum_k r_k exp(s_k x)` over the roots
//! `s_k` of `psi(s) = q` with residues `r_k = 1 / psi'(s_k)`. `Z` and `Zbar` follow by
//! integrating term by term.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::LevyModel;

/// Largest `s` tried when bracketing `Phi(q)`.
const PHI_BRACKET_LIMIT: f64 = 1e6;
/// Residual below which a refined eigenvalue counts as a root of `psi(s) = q`.
const ROOT_RESIDUAL: f64 = 1e-8;
const DISTINCT_TOL: f64 = 1e-7;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `Phi(q)`, the unique positive root of `psi(s) = q`.
pub fn phi(model: &LevyModel, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0 (got {q})")));
    }
    let f = |s: f64| model.psi(s).map(|v| v - q);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > PHI_BRACKET_LIMIT {
            return Err(Error::BracketFailure { limit: PHI_BRACKET_LIMIT });
        }
    }
    // psi - q < 0 on [0, Phi) and > 0 beyond by convexity.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..3 {
        let step = f(s)? / model.psi_prime(s)?;
        let next = s - step;
        if !(next > 0.0) || f(next)?.abs() >= f(s)?.abs() {
            break;
        }
        s = next;
    }
    Ok(s)
}

/// Matrix whose eigenvalues are exactly the roots of `(psi(s) - q) det(sI - T) = 0`.
///
/// With `y = (sI - T)^-1 t c` the root condition is linear in `(y, c[, s c])`:
///
/// ```text
/// s y     = T y + t c
/// s c     = ((lambda + q) c - lambda alpha y) / d                       (sigma = 0)
/// s (s c) = 2 ((lambda + q) c - lambda alpha y - d (s c)) / sigma^2     (sigma > 0)
/// ```
fn linearization(model: &LevyModel, q: f64) -> DMatrix<f64> {
    let jumps = model.jumps();
    let m = jumps.phases();
    let lambda = model.lambda();
    let d = model.drift_d();
    let t_mat = jumps.generator();
    let exit = jumps.exit_vector();
    let alpha = jumps.alpha();
    if model.sigma() == 0.0 {
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m)).copy_from(t_mat);
        for i in 0..m {
            a[(i, m)] = exit[i];
            a[(m, i)] = -lambda * alpha[i] / d;
        }
        a[(m, m)] = (lambda + q) / d;
        a
    } else {
        let k = 2.0 / (model.sigma() * model.sigma());
        let mut a = DMatrix::zeros(m + 2, m + 2);
        a.view_mut((0, 0), (m, m)).copy_from(t_mat);
        for i in 0..m {
            a[(i, m)] = exit[i];
            a[(m + 1, i)] = -k * lambda * alpha[i];
        }
        a[(m, m + 1)] = 1.0;
        a[(m + 1, m)] = k * (lambda + q);
        a[(m + 1, m + 1)] = -k * d;
        a
    }
}

fn newton_polish(model: &LevyModel, q: f64, mut s: Complex64) -> Option<(Complex64, f64)> {
    let residual = |s: Complex64| model.laplace_exponent(s).ok().map(|v| (v - q).norm());
    let mut best = residual(s)?;
    for _ in 0..4 {
        let (Ok(val), Ok(der)) = (model.laplace_exponent(s), model.laplace_exponent_deriv(s)) else {
            break;
        };
        let next = s - (val - q) / der;
        match residual(next) {
            Some(r) if r < best => {
                s = next;
                best = r;
            }
            _ => break,
        }
    }
    Some((s, best))
}

/// All roots of `psi(s) = q`: `Phi(q)` first, then the roots with negative real part in
/// conjugate-closed order.
pub fn find_roots(model: &LevyModel, q: f64) -> Result<Vec<Complex64>> {
    let phi_q = phi(model, q)?;
    let eig = linearization(model, q).complex_eigenvalues();

    let mut negatives: Vec<Complex64> = Vec::new();
    for ev in eig.iter() {
        let scale = 1.0 + ev.norm();
        if ev.im < -1e-9 * scale {
            // recovered as the conjugate of its upper-half-plane partner
            continue;
        }
        let real = ev.im.abs() <= 1e-9 * scale;
        let start = if real { c(ev.re) } else { *ev };
        let Some((mut root, res)) = newton_polish(model, q, start) else {
            continue;
        };
        if res > ROOT_RESIDUAL * (1.0 + q) {
            // cancelled pole of psi, not a root
            continue;
        }
        if real {
            root.im = 0.0;
        }
        if root.re > 0.0 {
            // the positive root is Phi(q), found separately by bracketing
            continue;
        }
        negatives.push(root);
        if !real {
            negatives.push(root.conj());
        }
    }

    let mut roots = Vec::with_capacity(negatives.len() + 1);
    roots.push(c(phi_q));
    roots.extend(negatives);

    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            if (a - b).norm() < DISTINCT_TOL * (1.0 + a.norm()) {
                return Err(Error::MultipleRootDetected { first: format!("{a}"), second: format!("{b}") });
            }
        }
    }
    Ok(roots)
}

/// `(e^z - 1) / z`.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `(e^z - 1 - z) / z^2`.
fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// Compiled `q`-scale function of a phase-type model.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    q: f64,
    model: LevyModel,
    roots: Vec<Complex64>,
    coeffs: Vec<Complex64>,
}

impl ScaleFunction {
    /// Finds the roots of `psi(s) = q` and the residues `1 / psi'(s_k)`.
    pub fn build(model: &LevyModel, q: f64) -> Result<Self> {
        let roots = find_roots(model, q)?;
        let mut coeffs: Vec<Complex64> = Vec::with_capacity(roots.len());
        for (i, s) in roots.iter().enumerate() {
            // conjugate roots get exactly conjugate coefficients
            let r = match roots[..i].iter().position(|p| p.im != 0.0 && *p == s.conj()) {
                Some(j) => coeffs[j].conj(),
                None => {
                    let r = 1.0 / model.laplace_exponent_deriv(*s)?;
                    if s.im == 0.0 {
                        c(r.re)
                    } else {
                        r
                    }
                }
            };
            coeffs.push(r);
        }
        Ok(Self { q, model: model.clone(), roots, coeffs })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// `Phi(q)`.
    pub fn phi(&self) -> f64 {
        self.roots[0].re
    }

    pub fn mu(&self) -> f64 {
        self.model.drift_mu()
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn sum<F: Fn(Complex64, Complex64) -> Complex64>(&self, term: F) -> Complex64 {
        self.roots.iter().zip(&self.coeffs).map(|(s, r)| term(*s, *r)).sum()
    }

    /// `W(x)` before dropping the imaginary part; nonzero imaginary part is roundoff.
    pub fn w_complex(&self, x: f64) -> Complex64 {
        if x < 0.0 {
            return c(0.0);
        }
        self.sum(|s, r| r * (s * x).exp())
    }

    pub fn w(&self, x: f64) -> f64 {
        self.w_complex(x).re
    }

    /// `W'(x)`; at `x = 0` this is the right limit `W'(0+)`.
    pub fn w_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.sum(|s, r| r * s * (s * x).exp()).re
    }

    /// `Z(x) = 1 + q int_0^x W`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        1.0 + self.q * x * self.sum(|s, r| r * phi1(s * x)).re
    }

    /// `Zbar(x) = int_0^x Z`.
    pub fn zbar(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return x;
        }
        x + self.q * x * x * self.sum(|s, r| r * phi2(s * x)).re
    }

    /// `int_0^inf e^{-sx} W(x) dx` from the partial-fraction form, for `Re s > Phi(q)`.
    pub fn laplace_transform(&self, s: Complex64) -> Complex64 {
        self.sum(|root, r| r / (s - root))
    }

    /// `int_X^inf e^{-sx} W(x) dx`, the tail beyond `X` of the transform.
    pub fn laplace_tail(&self, s: f64, from: f64) -> f64 {
        self.sum(|root, r| r * ((root - s) * from).exp() / (s - root)).re
    }
}

impl ScaleFunction {
    /// `mu/q - Zbar(barrier - x)`: the common form of both optimal value functions.
    pub fn barrier_value(&self, barrier: f64, x: f64) -> f64 {
        self.mu() / self.q - self.zbar(barrier - x)
    }
}

/// Solves `f(x) = target` for `f` strictly increasing on `(0, inf)` with `f(0+) < target`,
/// growing the bracket from `[lo, 1]` by doubling, then bisection with Newton steps.
pub(crate) fn invert_increasing<F, D>(f: F, deriv: D, target: f64, lo: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut lo = lo;
    let mut hi = 1.0f64.max(2.0 * lo);
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > PHI_BRACKET_LIMIT {
            return Err(Error::BracketFailure { limit: PHI_BRACKET_LIMIT });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / deriv(x);
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if (f(x) - target).abs() <= 1e-14 * target.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Independent route to `W(x)`: Abate–Whitt Euler inversion of `1/(psi(s) - q)`.
///
/// The transform is shifted by `Phi(q)` so the inverted function `exp(-Phi x) W(x)` stays
/// bounded; the Bromwich abscissa is `Phi(q) + A / (2x)`.
pub fn laplace_inversion_oracle(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    const A: f64 = 25.0;
    const N: usize = 40;
    const M: usize = 20;
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("inversion needs x > 0 (got {x})")));
    }
    let phi_q = phi(model, q)?;
    let shift = A / (2.0 * x);
    if shift < 0.5 {
        return Err(Error::ContourTooClose { shift: phi_q + shift, required: phi_q + 0.5 });
    }
    let transform = |s: Complex64| -> Result<f64> {
        let v = model.laplace_exponent(s + phi_q)? - q;
        Ok((1.0 / v).re)
    };
    let scale = (A / 2.0).exp() / x;
    let mut partial = 0.5 * transform(c(shift))?;
    let mut sums = Vec::with_capacity(M + 1);
    for k in 1..=N + M {
        let s = Complex64::new(shift, k as f64 * std::f64::consts::PI / x);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        partial += sign * transform(s)?;
        if k >= N {
            sums.push(partial);
        }
    }
    // binomial averaging of the last M + 1 partial sums
    let mut binom = 1.0;
    let mut acc = 0.0;
    for (j, s) in sums.iter().enumerate() {
        acc += binom * s;
        binom *= (M - j) as f64 / (j + 1) as f64;
    }
    let damped = scale * acc / 2f64.powi(M as i32);
    Ok((phi_q * x).exp() * damped)
}
