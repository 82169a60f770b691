use dualdiv_cli::config::{parse_config, resolve, Mode, Overrides, RunConfig};
use dualdiv_cli::CliError;

fn resolve_text(mode: Mode, text: &str) -> Result<dualdiv_cli::config::ResolvedConfig, CliError> {
    resolve(mode, parse_config(text)?, &Overrides::default())
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    for text in ["q = 0.05\nqq = 1\n", "[model]\ndrift = 2.0\n", "[sim]\npath = 10\n", "[grid]\nn = 3\n"] {
        assert!(matches!(parse_config(text), Err(CliError::Parse(_))), "{text}");
    }
}

#[test]
fn parse_errors_name_the_field() {
    let Err(CliError::Parse(msg)) = parse_config("[sweep]\ndrifts = [1.0]\n") else { panic!() };
    assert!(msg.contains("drifts"));
}

#[test]
fn figure_presets_expand() {
    let r = resolve_text(Mode::Figure1, "").unwrap();
    assert_eq!(r.drifts(), vec![2.0, 2.33, 2.67, 3.0]);
    assert!(r.costs().is_empty());
    let r = resolve_text(Mode::Figure2, "").unwrap();
    assert_eq!(r.costs(), vec![1.001, 1.5, 2.0, 5.0]);
    assert_eq!(r.drifts(), vec![2.33]);
}

#[test]
fn invalid_models_are_validation_errors() {
    for text in [
        "[model]\nsigma = -1.0\n",
        "[model]\ndrift_d = 0.0\n",
        "[model]\nalpha = [0.5, 0.5]\nT = [[-1.0]]\n",
        "[model]\nalpha = [1.0]\n",
        "[model]\nalpha = [1.0]\nT = [[1.0]]\n",
    ] {
        assert!(matches!(resolve_text(Mode::SolveDividend, text), Err(CliError::Validation(_))), "{text}");
    }
}

#[test]
fn other_validation_rules() {
    assert!(resolve_text(Mode::SolveInjection, "").is_err());
    assert!(resolve_text(Mode::SolveInjection, "phi = 2.0").is_ok());
    assert!(resolve_text(Mode::SolveDividend, "q = 0.0").is_err());
    assert!(resolve_text(Mode::SolveDividend, "[grid]\npoints = 1\n").is_err());
    assert!(resolve_text(Mode::SolveDividend, "[sweep]\ndrift = [2.0, -1.0]\n").is_err());
    assert!(resolve_text(Mode::SolveDividend, "[sweep]\ndrift = [2.0]\nphi = [2.0]\n").is_err());
    assert!(resolve_text(Mode::Verify, "mode = \"simulate\"\n").is_err());
    assert!(resolve_text(Mode::Simulate, "mode = \"simulate\"\n").is_ok());
}

#[test]
fn sweeps_are_sorted() {
    let r = resolve_text(Mode::SolveDividend, "[sweep]\ndrift = [2.67, 2.0, 2.33]\n").unwrap();
    assert_eq!(r.drifts(), vec![2.0, 2.33, 2.67]);
}

#[test]
fn flags_override_the_file() {
    let base = parse_config("q = 0.1\n[model]\ndrift_d = 2.0\n[sweep]\ndrift = [2.0, 3.0]\n").unwrap();
    let ov = Overrides { drift: Some(2.5), q: Some(0.05), sigma: Some(1.0), paths: Some(10), ..Default::default() };
    let r = resolve(Mode::Simulate, base, &ov).unwrap();
    assert_eq!(r.drifts(), vec![2.5]);
    assert_eq!(r.config.q, 0.05);
    assert_eq!(r.model.sigma(), 1.0);
    assert_eq!(r.config.sim.paths, 10);
    assert_eq!(r.config.sim.t_max, Some(360.0));
}

#[test]
fn resolved_config_round_trips() {
    let r = resolve_text(Mode::Figure2, "[model]\nsigma = 1.0\n").unwrap();
    let back: RunConfig = parse_config(&r.to_toml()).unwrap();
    let again = resolve(Mode::Figure2, back, &Overrides::default()).unwrap();
    assert_eq!(again.to_toml(), r.to_toml());
    assert_eq!(again.model.jumps().alpha(), r.model.jumps().alpha());
}
