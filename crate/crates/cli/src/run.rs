//! Solve, verify and simulate pipelines behind the subcommands.

use std::path::PathBuf;

use dualdiv::dividend::{optimal_barrier_a, DividendSolution};
use dualdiv::injection::{optimal_barrier_b, InjectionSolution};
use dualdiv::sim::{simulate_dividend_traced, simulate_injection_traced, write_trace_csv, SimConfig, SimEstimate};
use dualdiv::verify::{check_vi_dividend, check_vi_injection, GridSpec, VIReport};
use dualdiv::LevyModel;

use crate::config::{Mode, ResolvedConfig};
use crate::report::Table;
use crate::CliError;

/// Largest |z-score| a simulation may show before the run counts as failed.
pub const Z_LIMIT: f64 = 4.0;

/// Files written by a run and the checks that failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            crate::EXIT_OK
        } else {
            crate::EXIT_VERIFICATION
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ResolvedConfig,
    toml: String,
    out: Outcome,
}

impl Ctx<'_> {
    fn emit(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = table.write(&self.cfg.config.output.dir, name, self.cfg.mode.name(), &self.toml)?;
        self.out.files.push(path);
        Ok(())
    }

    fn q(&self) -> f64 {
        self.cfg.config.q
    }

    fn model_at(&self, drift: f64) -> Result<LevyModel, CliError> {
        Ok(self.cfg.model.with_drift(drift)?)
    }

    fn dividend(&self, drift: f64) -> Result<DividendSolution, CliError> {
        Ok(optimal_barrier_a(&self.model_at(drift)?, self.q())?)
    }

    /// Injection solutions for every (drift, cost) pair, drift-major.
    fn injections(&self) -> Result<Vec<(f64, InjectionSolution)>, CliError> {
        let mut sols = Vec::new();
        for d in self.cfg.drifts() {
            let div = self.dividend(d)?;
            for phi in self.cfg.costs() {
                sols.push((d, optimal_barrier_b(&div.sf, phi)?));
            }
        }
        Ok(sols)
    }
}

/// Runs the configured mode and writes its artifacts.
pub fn run(cfg: &ResolvedConfig) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(&cfg.config.output.dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.config.output.dir.display())))?;
    let mut ctx = Ctx { cfg, toml: cfg.to_toml(), out: Outcome::default() };
    match cfg.mode {
        Mode::SolveDividend | Mode::Figure1 => solve_dividend(&mut ctx)?,
        Mode::SolveInjection | Mode::Figure2 => solve_injection(&mut ctx)?,
        Mode::Verify => verify(&mut ctx)?,
        Mode::Simulate => simulate(&mut ctx)?,
    }
    Ok(ctx.out)
}

fn solve_dividend(ctx: &mut Ctx) -> Result<(), CliError> {
    let xs = ctx.cfg.config.grid.xs();
    if xs[0] < 0.0 {
        return Err(CliError::Validation("the dividend value is only defined for x >= 0".into()));
    }
    let mut values = Table::new(&["drift_d", "x", "value", "derivative", "barrier", "mu", "phi_q"]);
    let mut summary = Table::new(&["drift_d", "a_star", "value_at_barrier", "mu", "phi_q"]);
    for d in ctx.cfg.drifts() {
        let sol = ctx.dividend(d)?;
        let phi_q = sol.sf.phi();
        for &x in &xs {
            let der = sol.derivatives_opt(x).first;
            values.push(vec![d.into(), x.into(), sol.value_opt(x).into(), der.into(), sol.a_star.into(), sol.mu.into(), phi_q.into()]);
        }
        summary.push(vec![d.into(), sol.a_star.into(), sol.value_at_barrier.into(), sol.mu.into(), phi_q.into()]);
    }
    ctx.emit("values.csv", &values)?;
    ctx.emit("summary.csv", &summary)
}

fn solve_injection(ctx: &mut Ctx) -> Result<(), CliError> {
    let xs = ctx.cfg.config.grid.xs();
    let mut values = Table::new(&["drift_d", "phi", "x", "value", "derivative", "barrier", "mu", "phi_q"]);
    let mut summary = Table::new(&["drift_d", "phi", "b_star", "value_at_barrier", "mu", "phi_q"]);
    for (d, sol) in ctx.injections()? {
        let phi_q = sol.sf.phi();
        for &x in &xs {
            let der = sol.derivatives_opt(x).first;
            values.push(vec![
                d.into(),
                sol.phi_cost.into(),
                x.into(),
                sol.value_opt(x).into(),
                der.into(),
                sol.b_star.into(),
                sol.mu.into(),
                phi_q.into(),
            ]);
        }
        let at = sol.value_opt(sol.b_star);
        summary.push(vec![d.into(), sol.phi_cost.into(), sol.b_star.into(), at.into(), sol.mu.into(), phi_q.into()]);
    }
    ctx.emit("values.csv", &values)?;
    ctx.emit("summary.csv", &summary)
}

fn verify(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = &ctx.cfg.config.verify;
    let grid = GridSpec { x_max: v.x_max, points: v.points, tolerance: v.tolerance, ..GridSpec::default() };
    let mut rows = Table::new(&["problem", "drift_d", "phi", "x", "gen_value", "deriv_value", "margin"]);
    let mut summary =
        Table::new(&["problem", "drift_d", "phi", "barrier", "max_violation", "tolerance", "verdict"]);
    let mut record = |ctx: &mut Ctx, problem: &str, d: f64, phi: Option<f64>, barrier: f64, r: VIReport| {
        for i in 0..r.grid.len() {
            rows.push(vec![
                problem.into(),
                d.into(),
                phi.into(),
                r.grid[i].into(),
                r.gen_values[i].into(),
                r.deriv_values[i].into(),
                r.margins[i].into(),
            ]);
        }
        let verdict = if r.passed { "pass" } else { "fail" };
        if !r.passed {
            let tag = phi.map_or(String::new(), |p| format!(", phi = {p}"));
            ctx.out.failures.push(format!("{problem} (drift {d}{tag}): violation {:e}", r.max_violation));
        }
        summary.push(vec![
            problem.into(),
            d.into(),
            phi.into(),
            barrier.into(),
            r.max_violation.into(),
            r.tolerance.into(),
            verdict.into(),
        ]);
    };
    for d in ctx.cfg.drifts() {
        let sol = ctx.dividend(d)?;
        let report = check_vi_dividend(&sol, &grid)?;
        record(ctx, "dividend", d, None, sol.a_star, report);
    }
    for (d, sol) in ctx.injections()? {
        let report = check_vi_injection(&sol, &grid)?;
        record(ctx, "injection", d, Some(sol.phi_cost), sol.b_star, report);
    }
    ctx.emit("vi_report.csv", &rows)?;
    ctx.emit("summary.csv", &summary)
}

fn simulate(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = &ctx.cfg.config.sim;
    let sim_cfg = SimConfig {
        n_paths: s.paths,
        dt: s.dt,
        t_max: s.t_max.expect("resolved configuration has a horizon"),
        seed: s.seed,
        antithetic: s.antithetic,
        execution: Default::default(),
    };
    let (x0, trace) = (s.x0, s.trace);
    let mut table = Table::new(&[
        "problem",
        "drift_d",
        "phi",
        "barrier",
        "x0",
        "closed_form",
        "mean",
        "std_error",
        "ci_low",
        "ci_high",
        "z_score",
        "n_paths",
        "dt",
        "t_max",
        "truncation_bound",
    ]);
    let mut runs: Vec<(&str, f64, Option<f64>, f64, f64, f64, SimEstimate)> = Vec::new();
    let mut traces = Vec::new();
    for d in ctx.cfg.drifts() {
        let sol = ctx.dividend(d)?;
        let start = x0.unwrap_or(sol.a_star);
        let (est, recs) = simulate_dividend_traced(sol.sf.model(), ctx.q(), sol.a_star, start, &sim_cfg)?;
        runs.push(("dividend", d, None, sol.a_star, start, sol.value_opt(start), est));
        traces.push(recs);
    }
    for (d, sol) in ctx.injections()? {
        let start = x0.unwrap_or(sol.b_star);
        let (est, recs) =
            simulate_injection_traced(sol.sf.model(), ctx.q(), sol.b_star, sol.phi_cost, start, &sim_cfg)?;
        runs.push(("injection", d, Some(sol.phi_cost), sol.b_star, start, sol.value_opt(start), est));
        traces.push(recs);
    }
    for (i, (problem, d, phi, barrier, start, exact, est)) in runs.iter().enumerate() {
        let z = est.z_score(*exact);
        if !(z.abs() <= Z_LIMIT) {
            ctx.out.failures.push(format!("{problem} (drift {d}): z-score {z:.3}"));
        }
        table.push(vec![
            (*problem).into(),
            (*d).into(),
            (*phi).into(),
            (*barrier).into(),
            (*start).into(),
            (*exact).into(),
            est.mean.into(),
            est.std_error.into(),
            est.ci95.0.into(),
            est.ci95.1.into(),
            z.into(),
            est.n_paths.into(),
            est.dt.into(),
            sim_cfg.t_max.into(),
            est.truncation_bound.into(),
        ]);
        if trace {
            let path = ctx.cfg.config.output.dir.join(format!("trace_{i:02}_{problem}.csv"));
            let mut buf = Vec::new();
            write_trace_csv(&traces[i], &mut buf).expect("writing to memory");
            std::fs::write(&path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            ctx.out.files.push(path);
        }
    }
    ctx.emit("simulate.csv", &table)
}
