//! Run configuration: a TOML document, optionally overridden by command-line flags.

use std::path::{Path, PathBuf};

use dualdiv::presets::{self, DISCOUNT_Q, FIGURE1_DRIFTS, FIGURE2_COSTS, FIGURE2_DRIFT, JUMP_RATE};
use dualdiv::sim::{MAX_EULER_STEP, MIN_DISCOUNTED_HORIZON};
use dualdiv::{validate_model, LevyModel, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveDividend,
    SolveInjection,
    Verify,
    Simulate,
    Figure1,
    Figure2,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveDividend => "solve-dividend",
            Mode::SolveInjection => "solve-injection",
            Mode::Verify => "verify",
            Mode::Simulate => "simulate",
            Mode::Figure1 => "figure1",
            Mode::Figure2 => "figure2",
        }
    }
}

/// Model parameters; `alpha` and `T` default to the bundled six-phase law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_drift")]
    pub drift_d: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_matrix: Option<Vec<Vec<f64>>>,
}

fn default_drift() -> f64 {
    FIGURE2_DRIFT
}

fn default_lambda() -> f64 {
    JUMP_RATE
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { drift_d: FIGURE2_DRIFT, sigma: 0.0, lambda: JUMP_RATE, alpha: None, t_matrix: None }
    }
}

/// Values swept over; at most one of the two lists may be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_x_max() -> f64 {
    15.0
}

fn default_points() -> usize {
    301
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_min: 0.0, x_max: default_x_max(), points: default_points() }
    }
}

impl GridConfig {
    pub fn xs(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..=n).map(|i| self.x_min + (self.x_max - self.x_min) * i as f64 / n as f64).collect()
    }
}

/// Settings of the inequality checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_vi_points")]
    pub points: usize,
    #[serde(default = "default_vi_tolerance")]
    pub tolerance: f64,
    /// Right end of the check grid; three times the barrier when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

fn default_vi_points() -> usize {
    200
}

fn default_vi_tolerance() -> f64 {
    dualdiv::verify::VI_TOLERANCE
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { points: default_vi_points(), tolerance: default_vi_tolerance(), x_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Horizon; the shortest one with `q t_max >= 18` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    /// Starting point; the barrier when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Also write per-path records.
    #[serde(default)]
    pub trace: bool,
}

fn default_paths() -> usize {
    20_000
}

fn default_dt() -> f64 {
    MAX_EULER_STEP
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { paths: default_paths(), dt: default_dt(), t_max: None, seed: 0, antithetic: false, x0: None, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Unit cost of injected capital for the injection problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub sim: SimSettings,
    /// Left out of the embedded copy so that identical runs into different directories
    /// produce identical files.
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
}

fn default_q() -> f64 {
    DISCOUNT_Q
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            q: DISCOUNT_Q,
            phi: None,
            model: ModelConfig::default(),
            sweep: Sweep::default(),
            grid: GridConfig::default(),
            verify: VerifyConfig::default(),
            sim: SimSettings::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub drift: Option<f64>,
    pub q: Option<f64>,
    pub phi: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
}

/// Parses a configuration document; unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// A validated configuration with the mode fixed and presets expanded.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub mode: Mode,
    pub config: RunConfig,
    pub model: LevyModel,
}

impl ResolvedConfig {
    /// The configuration as it was actually run, in TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("configuration serializes")
    }

    /// Drifts to solve at, ascending.
    pub fn drifts(&self) -> Vec<f64> {
        self.config.sweep.drift.clone().unwrap_or_else(|| vec![self.config.model.drift_d])
    }

    /// Unit costs to solve at, ascending; empty when the run has no injection part.
    pub fn costs(&self) -> Vec<f64> {
        self.config.sweep.phi.clone().or_else(|| self.config.phi.map(|p| vec![p])).unwrap_or_default()
    }
}

/// Applies overrides and presets, then validates.
pub fn resolve(mode: Mode, mut cfg: RunConfig, ov: &Overrides) -> Result<ResolvedConfig, CliError> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(CliError::Input(format!("configuration is for `{}`, not `{}`", m.name(), mode.name())));
        }
    }
    cfg.mode = Some(mode);
    match mode {
        Mode::Figure1 => {
            if cfg.sweep.drift.is_none() {
                cfg.sweep.drift = Some(FIGURE1_DRIFTS.to_vec());
            }
        }
        Mode::Figure2 => {
            if cfg.sweep.phi.is_none() {
                cfg.sweep.phi = Some(FIGURE2_COSTS.to_vec());
            }
        }
        _ => {}
    }
    if let Some(v) = ov.sigma {
        cfg.model.sigma = v;
    }
    if let Some(v) = ov.drift {
        cfg.model.drift_d = v;
        cfg.sweep.drift = None;
    }
    if let Some(v) = ov.q {
        cfg.q = v;
    }
    if let Some(v) = ov.phi {
        cfg.phi = Some(v);
        cfg.sweep.phi = None;
    }
    if let Some(v) = &ov.out {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = ov.seed {
        cfg.sim.seed = v;
    }
    if let Some(v) = ov.paths {
        cfg.sim.paths = v;
    }
    if let Some(v) = ov.dt {
        cfg.sim.dt = v;
    }
    if mode == Mode::SolveInjection && cfg.phi.is_none() && cfg.sweep.phi.is_none() {
        return Err(CliError::Validation("solve-injection needs `phi` or `sweep.phi`".into()));
    }
    if cfg.sweep.drift.is_some() && cfg.sweep.phi.is_some() {
        return Err(CliError::Validation("sweep over either `drift` or `phi`, not both".into()));
    }
    if mode == Mode::Figure2 && cfg.sweep.drift.is_some() {
        return Err(CliError::Validation("figure2 sweeps the unit cost only".into()));
    }
    for list in [&mut cfg.sweep.drift, &mut cfg.sweep.phi].into_iter().flatten() {
        if list.is_empty() || list.iter().any(|v| !(*v > 0.0)) {
            return Err(CliError::Validation("sweep values must be positive and non-empty".into()));
        }
        list.sort_by(f64::total_cmp);
        list.dedup();
    }
    if !(cfg.q > 0.0) || !cfg.q.is_finite() {
        return Err(CliError::Validation(format!("q must be positive (got {})", cfg.q)));
    }
    if cfg.grid.points < 2 || !(cfg.grid.x_max > cfg.grid.x_min) {
        return Err(CliError::Validation("grid needs at least 2 points and x_max > x_min".into()));
    }
    if cfg.verify.points < 2 || !(cfg.verify.tolerance > 0.0) {
        return Err(CliError::Validation("verify needs at least 2 points and a positive tolerance".into()));
    }
    if cfg.sim.t_max.is_none() {
        cfg.sim.t_max = Some((MIN_DISCOUNTED_HORIZON / cfg.q).ceil());
    }
    let model = build_model(&mut cfg.model)?;
    // every swept drift must give a valid model too
    for d in cfg.sweep.drift.iter().flatten() {
        model.with_drift(*d).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(ResolvedConfig { mode, config: cfg, model })
}

/// Builds the model, filling in the bundled jump law when none is given.
fn build_model(m: &mut ModelConfig) -> Result<LevyModel, CliError> {
    let (alpha, t_matrix) = match (m.alpha.take(), m.t_matrix.take()) {
        (Some(a), Some(t)) => (a, t),
        (None, None) => {
            let pt = presets::bundled_phase_type();
            let t = pt.generator();
            let rows = (0..pt.phases()).map(|i| t.row(i).iter().copied().collect()).collect();
            (pt.alpha().iter().copied().collect(), rows)
        }
        _ => return Err(CliError::Validation("give both `alpha` and `T`, or neither".into())),
    };
    let spec = ModelSpec { drift_d: m.drift_d, sigma: m.sigma, lambda: m.lambda, alpha, t_matrix };
    let model = validate_model(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
    m.alpha = Some(spec.alpha);
    m.t_matrix = Some(spec.t_matrix);
    Ok(model)
}
