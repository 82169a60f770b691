//! Monte Carlo estimates of barrier-strategy values.
//!
//! Without a Gaussian part the controlled surplus is piecewise deterministic between jumps,
//! so hitting times, lump dividends and injected capital are computed exactly. With
//! `sigma > 0` the diffusion is advanced by Euler steps of length at most `dt`, reflected by
//! projection and checked for ruin at grid points; jump epochs are kept exact.
//!
//! Each path owns a ChaCha stream selected by its index, so estimates are bitwise identical
//! for any execution schedule.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::levy::{LevyModel, PhaseType};
use crate::scale::{phi, ScaleFunction};

/// Smallest admissible `q * t_max`.
pub const MIN_DISCOUNTED_HORIZON: f64 = 18.0;
/// Largest Euler step allowed when `sigma > 0`.
pub const MAX_EULER_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Pair path `2j` with a mirrored copy (`u -> 1 - u`, `N -> -N`) of the same stream.
    pub antithetic: bool,
    pub execution: Execution,
}

impl SimConfig {
    /// `n_paths` paths, `dt = 1e-3`, and the shortest horizon with `q t_max >= 18`.
    pub fn new(n_paths: usize, q: f64, seed: u64) -> Self {
        Self {
            n_paths,
            dt: MAX_EULER_STEP,
            t_max: (MIN_DISCOUNTED_HORIZON / q).ceil(),
            seed,
            antithetic: false,
            execution: Execution::default(),
        }
    }

    fn validate(&self, model: &LevyModel, q: f64) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::ConfigError("n_paths must be positive".into()));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::ConfigError("antithetic sampling needs an even n_paths".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::ConfigError(format!("dt must be > 0 (got {})", self.dt)));
        }
        if model.sigma() > 0.0 && self.dt > MAX_EULER_STEP {
            return Err(Error::ConfigError(format!("dt = {} exceeds {MAX_EULER_STEP} with sigma > 0", self.dt)));
        }
        if !(q * self.t_max >= MIN_DISCOUNTED_HORIZON * (1.0 - 1e-12)) {
            return Err(Error::ConfigError(format!(
                "q * t_max = {} is below {MIN_DISCOUNTED_HORIZON}",
                q * self.t_max
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimate with its sampling error. Horizon bias is reported, not corrected.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub n_paths: usize,
    pub dt: f64,
    /// Bound on the discounted payoff beyond `t_max`.
    pub truncation_bound: f64,
}

impl SimEstimate {
    /// `(mean - target) / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error > 0.0 {
            (self.mean - target) / self.std_error
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY * (self.mean - target).signum()
        }
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci95.0 <= target && target <= self.ci95.1
    }
}

/// Per-path discounted totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub path_id: usize,
    /// Ruin time, or infinity if the path survived the horizon.
    pub ruin_time: f64,
    pub dividends: f64,
    pub injections: f64,
}

/// Writes the per-path trace as CSV.
pub fn write_trace_csv<W: Write>(records: &[PathRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "path_id,ruin_time,discounted_dividends,discounted_injections")?;
    for r in records {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.path_id, r.ruin_time, r.dividends, r.injections)?;
    }
    Ok(())
}

struct PathRng {
    rng: ChaCha8Rng,
    mirror: bool,
}

impl PathRng {
    fn new(seed: u64, stream: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, mirror }
    }

    /// Uniform on the open interval `(0, 1)`.
    fn uniform(&mut self) -> f64 {
        let u = ((self.rng.random::<u64>() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.mirror {
            -z
        } else {
            z
        }
    }
}

/// Samples phase-type variables from the uniformized absorbing chain.
///
/// With `L = max_i (-T_ii)` the chain jumps at the epochs of a rate-`L` Poisson clock with
/// transition matrix `I + T/L`, so the absorption time is `Gamma(N, L)` where `N`, the
/// number of ticks to absorption, is discrete phase-type. `N` is drawn by inverting its
/// tabulated distribution; past the table the chain is run tick by tick from its
/// conditional state, which keeps the sampler exact.
struct PhaseSampler {
    rate: f64,
    /// `P(N <= n)` at index `n - 1`.
    steps_cdf: Vec<f64>,
    /// Cumulative state distribution at the end of the table, given no absorption yet.
    tail_state: Vec<f64>,
    /// Cumulative one-tick moves per phase; index `m` is absorption.
    moves: Vec<Vec<f64>>,
}

const STEP_TABLE_LIMIT: usize = 4096;

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    // the last entry absorbs rounding in the cumulative sums
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

impl PhaseSampler {
    fn new(pt: &PhaseType) -> Self {
        let m = pt.phases();
        let t = pt.generator();
        let rate = (0..m).map(|i| -t[(i, i)]).fold(0.0, f64::max);
        let p = DMatrix::<f64>::identity(m, m) + t / rate;
        let exit = pt.exit_vector() / rate;
        let moves = (0..m)
            .map(|i| cumulative((0..m).map(|j| p[(i, j)]).chain(std::iter::once(exit[i]))))
            .collect();
        let mut state = pt.alpha().transpose();
        let mut steps_cdf = Vec::new();
        let mut absorbed = 0.0;
        loop {
            absorbed += (&state * &exit)[0];
            steps_cdf.push(absorbed);
            state = &state * &p;
            // below the resolution of a uniform draw
            if state.sum() < 1e-18 || steps_cdf.len() == STEP_TABLE_LIMIT {
                break;
            }
        }
        let total = state.sum();
        let tail_state = if total > 0.0 { cumulative(state.iter().map(|s| s / total)) } else { vec![1.0; m] };
        Self { rate, steps_cdf, tail_state, moves }
    }

    fn steps(&self, rng: &mut PathRng) -> usize {
        let u = rng.uniform();
        // most of the mass sits in the first few entries, so a forward scan beats bisection
        if let Some(n) = self.steps_cdf.iter().position(|&c| u < c) {
            return n + 1;
        }
        let m = self.tail_state.len();
        let mut phase = pick(&self.tail_state, rng.uniform());
        let mut n = self.steps_cdf.len();
        loop {
            n += 1;
            let next = pick(&self.moves[phase], rng.uniform() * self.moves[phase][m]);
            if next == m {
                return n;
            }
            phase = next;
        }
    }

    fn sample(&self, rng: &mut PathRng) -> f64 {
        let n = self.steps(rng);
        // Gamma(n, rate) as -ln of a product of uniforms, flushed before underflow
        let mut log_sum = 0.0;
        let mut prod = 1.0;
        for _ in 0..n {
            prod *= rng.uniform();
            if prod < 1e-280 {
                log_sum += prod.ln();
                prod = 1.0;
            }
        }
        -(log_sum + prod.ln()) / self.rate
    }
}

#[derive(Debug, Clone, Copy)]
enum Strategy {
    /// Barrier `a`, killed at ruin.
    Dividend { barrier: f64 },
    /// Reflection at `0` and `b`.
    Injection { barrier: f64 },
}

struct PathSim<'a> {
    model: &'a LevyModel,
    q: f64,
    cfg: &'a SimConfig,
    sampler: PhaseSampler,
    strategy: Strategy,
}

impl PathSim<'_> {
    fn run(&self, path_id: usize, x0: f64) -> PathRecord {
        let (stream, mirror) =
            if self.cfg.antithetic { ((path_id / 2) as u64, path_id % 2 == 1) } else { (path_id as u64, false) };
        let mut rng = PathRng::new(self.cfg.seed, stream, mirror);
        let barrier = match self.strategy {
            Strategy::Dividend { barrier } | Strategy::Injection { barrier } => barrier,
        };
        // start above the barrier: pay the excess at once
        let lump = (x0 - barrier).max(0.0);
        let start = x0.min(barrier);
        let mut rec = PathRecord { path_id, ruin_time: f64::INFINITY, dividends: lump, injections: 0.0 };
        match self.strategy {
            Strategy::Dividend { .. } if start <= 0.0 => {
                // zero is irregular upward only for sigma = 0 with d > 0; either way ruin is immediate
                rec.ruin_time = 0.0;
            }
            Strategy::Dividend { barrier } => {
                if self.model.sigma() == 0.0 {
                    self.dividend_exact(&mut rng, barrier, start, &mut rec)
                } else {
                    self.euler(&mut rng, barrier, start, false, &mut rec)
                }
            }
            Strategy::Injection { barrier } => {
                if self.model.sigma() == 0.0 {
                    self.injection_exact(&mut rng, barrier, start, &mut rec)
                } else {
                    self.euler(&mut rng, barrier, start, true, &mut rec)
                }
            }
        }
        rec
    }

    fn dividend_exact(&self, rng: &mut PathRng, a: f64, mut u: f64, rec: &mut PathRecord) {
        let d = self.model.drift_d();
        let lambda = self.model.lambda();
        let mut t = 0.0;
        loop {
            let wait = rng.exponential(lambda);
            if u <= d * wait {
                let ruin = t + u / d;
                if ruin <= self.cfg.t_max {
                    rec.ruin_time = ruin;
                }
                return;
            }
            t += wait;
            if t > self.cfg.t_max {
                return;
            }
            u += self.sampler.sample(rng) - d * wait;
            if u > a {
                rec.dividends += (-self.q * t).exp() * (u - a);
                u = a;
            }
        }
    }

    fn injection_exact(&self, rng: &mut PathRng, b: f64, mut v: f64, rec: &mut PathRecord) {
        let d = self.model.drift_d();
        let lambda = self.model.lambda();
        let q = self.q;
        let mut t = 0.0;
        loop {
            let next = t + rng.exponential(lambda);
            let end = next.min(self.cfg.t_max);
            let hit = t + v / d;
            if hit < end {
                // held at zero by injections at rate d
                rec.injections += d * ((-q * hit).exp() - (-q * end).exp()) / q;
                v = 0.0;
            } else {
                v -= d * (end - t);
            }
            if next > self.cfg.t_max {
                return;
            }
            t = next;
            v += self.sampler.sample(rng);
            if v > b {
                rec.dividends += (-q * t).exp() * (v - b);
                v = b;
            }
        }
    }

    /// Euler scheme with projection at the barrier, and at zero either projection
    /// (`reflect_at_zero`) or killing.
    fn euler(&self, rng: &mut PathRng, b: f64, mut v: f64, reflect_at_zero: bool, rec: &mut PathRecord) {
        let d = self.model.drift_d();
        let sigma = self.model.sigma();
        let lambda = self.model.lambda();
        let q = self.q;
        let dt = self.cfg.dt;
        let t_max = self.cfg.t_max;
        let full_sqrt = dt.sqrt();
        let full_decay = (-q * dt).exp();
        let mut t = 0.0;
        let mut disc = 1.0;
        let mut next_jump = rng.exponential(lambda);
        while t < t_max {
            let to_jump = next_jump - t;
            let jump_now = to_jump <= dt && next_jump <= t_max;
            let h = if jump_now { to_jump } else { dt.min(t_max - t) };
            let (sqrt_h, decay) = if h == dt { (full_sqrt, full_decay) } else { (h.sqrt(), (-q * h).exp()) };
            v += -d * h + sigma * sqrt_h * rng.normal();
            // increments are discounted at the left end of the step
            if v > b {
                rec.dividends += disc * (v - b);
                v = b;
            } else if v < 0.0 {
                if reflect_at_zero {
                    rec.injections += disc * (-v);
                    v = 0.0;
                } else {
                    rec.ruin_time = t + h;
                    return;
                }
            }
            disc *= decay;
            if jump_now {
                t = next_jump;
                disc = (-q * t).exp();
                v += self.sampler.sample(rng);
                if v > b {
                    rec.dividends += disc * (v - b);
                    v = b;
                }
                next_jump = t + rng.exponential(lambda);
            } else {
                t += h;
            }
        }
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn summarize(payoffs: &[f64], cfg: &SimConfig, truncation_bound: f64) -> SimEstimate {
    // antithetic pairs are the independent sampling units
    let units: Vec<f64> =
        if cfg.antithetic { payoffs.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect() } else { payoffs.to_vec() };
    let n = units.len() as f64;
    let mean = compensated_sum(units.iter().copied()) / n;
    let var = if units.len() > 1 {
        compensated_sum(units.iter().map(|u| (u - mean) * (u - mean))) / (n - 1.0)
    } else {
        0.0
    };
    let std_error = (var / n).sqrt();
    SimEstimate {
        mean,
        std_error,
        ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
        n_paths: payoffs.len(),
        dt: cfg.dt,
        truncation_bound,
    }
}

/// Estimates `v_a(x0)`, the expected discounted dividends until ruin under barrier `a`.
pub fn simulate_dividend(model: &LevyModel, q: f64, a: f64, x0: f64, cfg: &SimConfig) -> Result<SimEstimate> {
    simulate_dividend_traced(model, q, a, x0, cfg).map(|(est, _)| est)
}

/// [`simulate_dividend`] that also returns the per-path records.
pub fn simulate_dividend_traced(
    model: &LevyModel,
    q: f64,
    a: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<(SimEstimate, Vec<PathRecord>)> {
    cfg.validate(model, q)?;
    if !(a >= 0.0) || !(x0 >= 0.0) {
        return Err(Error::ConfigError(format!("need a >= 0 and x0 >= 0 (got a = {a}, x0 = {x0})")));
    }
    let sim = PathSim { model, q, cfg, sampler: PhaseSampler::new(model.jumps()), strategy: Strategy::Dividend { barrier: a } };
    let records = map_indexed(cfg.n_paths, cfg.execution, |i| sim.run(i, x0));
    let payoffs: Vec<f64> = records.iter().map(|r| r.dividends).collect();
    let bound = (-q * cfg.t_max).exp() * (1.0 / phi(model, q)? + model.drift_mu().abs() / q);
    Ok((summarize(&payoffs, cfg, bound), records))
}

/// Estimates `vbar_b(x0)`: discounted dividends minus `phi_cost` times discounted injections
/// for the process reflected at `0` and `b`.
pub fn simulate_injection(
    model: &LevyModel,
    q: f64,
    b: f64,
    phi_cost: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    let (records, bound) = injection_paths(model, q, b, phi_cost, x0, cfg)?;
    let payoffs: Vec<f64> = records.iter().map(|r| r.dividends - phi_cost * r.injections).collect();
    Ok(summarize(&payoffs, cfg, bound))
}

/// Runs the injection paths once and prices them at several unit costs (common random numbers).
pub fn simulate_injection_costs(
    model: &LevyModel,
    q: f64,
    b: f64,
    phi_costs: &[f64],
    x0: f64,
    cfg: &SimConfig,
) -> Result<Vec<SimEstimate>> {
    let max_cost = phi_costs.iter().copied().fold(1.0 + f64::EPSILON, f64::max);
    let (records, _) = injection_paths(model, q, b, max_cost, x0, cfg)?;
    let sf = ScaleFunction::build(model, q)?;
    phi_costs
        .iter()
        .map(|&cost| {
            if !(cost > 1.0) {
                return Err(Error::InvalidCost(cost));
            }
            let payoffs: Vec<f64> = records.iter().map(|r| r.dividends - cost * r.injections).collect();
            Ok(summarize(&payoffs, cfg, injection_truncation_bound(&sf, b, cost, cfg.t_max)))
        })
        .collect()
}

/// [`simulate_injection`] that also returns the per-path records.
pub fn simulate_injection_traced(
    model: &LevyModel,
    q: f64,
    b: f64,
    phi_cost: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<(SimEstimate, Vec<PathRecord>)> {
    let (records, bound) = injection_paths(model, q, b, phi_cost, x0, cfg)?;
    let payoffs: Vec<f64> = records.iter().map(|r| r.dividends - phi_cost * r.injections).collect();
    Ok((summarize(&payoffs, cfg, bound), records))
}

/// `e^{-q t_max}` times the largest expected future dividends plus `phi` times injections of
/// the doubly reflected process, `mu/q + (1 + phi) Z(b) / (q W(b))`.
fn injection_truncation_bound(sf: &ScaleFunction, b: f64, phi_cost: f64, t_max: f64) -> f64 {
    let q = sf.q();
    let per_unit = sf.z(b) / (q * sf.w(b));
    (-q * t_max).exp() * (sf.mu().abs() / q + (1.0 + phi_cost) * per_unit)
}

fn injection_paths(
    model: &LevyModel,
    q: f64,
    b: f64,
    phi_cost: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<(Vec<PathRecord>, f64)> {
    cfg.validate(model, q)?;
    if !(phi_cost > 1.0) {
        return Err(Error::InvalidCost(phi_cost));
    }
    if !(b > 0.0) || !(x0 >= 0.0) {
        return Err(Error::ConfigError(format!("need b > 0 and x0 >= 0 (got b = {b}, x0 = {x0})")));
    }
    let sim =
        PathSim { model, q, cfg, sampler: PhaseSampler::new(model.jumps()), strategy: Strategy::Injection { barrier: b } };
    let records = map_indexed(cfg.n_paths, cfg.execution, |i| sim.run(i, x0));
    let bound = injection_truncation_bound(&ScaleFunction::build(model, q)?, b, phi_cost, cfg.t_max);
    Ok((records, bound))
}
