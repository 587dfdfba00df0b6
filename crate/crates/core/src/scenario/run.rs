use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, ScenarioConfig, ScenarioType};
use super::report::{Record, RunReport};
use super::selftest::{run_self_test, SelfTestOptions};
use super::RunError;
use crate::bell::{
    brute_force_trichotomic_bound, efficiency_scan, ghz_local_model_search, ghz_quantum_correlations, BoundExpression,
    GhzScenario, GhzSearchOutcome, InequalityAngles, TwoPartyScenario, GHZ_TRIPLE_NAMES,
};
use crate::hv::macro_from_micro;
use crate::linalg::{ComplexMatrix, DensityOperator};
use crate::measurement::{luders_update, outcome_distribution, probability_triple, unitary_evolve, OutcomeSampler};
use crate::mixtures::{esr_qm_divergence, proper_probability_triple, qm_mixture_probability};
use crate::{DetectionModel, GeneralizedObservable, Outcome, Property};

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
}

struct Out {
    records: Vec<Record>,
    summary: Vec<Record>,
    diagnostics: Vec<String>,
}

impl Out {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            summary: Vec::new(),
            diagnostics: Vec::new(),
        }
    }
}

/// Validates `config`, applies `overrides` and runs the scenario.
pub fn run_scenario(config: &ScenarioConfig, overrides: RunOverrides) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut config = config.clone();
    if overrides.seed.is_some() {
        config.seed = overrides.seed;
    }
    if overrides.samples.is_some() {
        config.samples = overrides.samples;
    }
    config.validate()?;

    let mut out = Out::new();
    match config.scenario_type {
        ScenarioType::ProbabilityTriple => run_triple(&config, &mut out)?,
        ScenarioType::Luders => run_luders(&config, &mut out)?,
        ScenarioType::Evolve => run_evolve(&config, &mut out)?,
        ScenarioType::MonteCarlo => run_monte_carlo(&config, &mut out)?,
        ScenarioType::MixtureDivergence => run_mixture(&config, &mut out)?,
        ScenarioType::BellScan | ScenarioType::ChshScan => run_scan(&config, &mut out)?,
        ScenarioType::GhzQuantum => run_ghz_quantum(&config, &mut out)?,
        ScenarioType::GhzLocalModel => run_ghz_local(&config, &mut out)?,
        ScenarioType::HvVerify => run_hv_verify(&config, &mut out)?,
        ScenarioType::SelfTest => run_self_tests(&config, &mut out)?,
    }
    Ok(RunReport {
        scenario: config.scenario_type,
        config,
        records: out.records,
        summary: out.summary,
        diagnostics: out.diagnostics,
        wall_time: start.elapsed(),
    })
}

fn property<'a>(config: &ScenarioConfig, obs: &'a GeneralizedObservable) -> Result<Property<'a>, ConfigError> {
    match &config.sigma {
        Some(sigma) => Property::new(obs, sigma).map_err(|e| ConfigError::new("sigma", e.to_string())),
        None => Ok(Property::full(obs)),
    }
}

fn undefined(out: &mut Out, what: &str) {
    out.diagnostics.push(format!("{what} is undefined (vanishing denominator); record omitted"));
}

fn run_triple(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let rho = config.density()?;
    let obs = GeneralizedObservable::new(config.observable_checked()?);
    let prop = property(config, &obs)?;
    let dm = config.detection()?;
    let label = config.label();

    let t = probability_triple(&rho, label, &prop, &dm)?;
    out.records.push(Record::new("overall", t.overall, t.fundamental_residual().unwrap_or(0.0)));
    match t.detection {
        Some(d) => out.records.push(Record::plain("detection", d)),
        None => undefined(out, "detection"),
    }
    match t.conditional {
        Some(p) => out.records.push(Record::plain("conditional", p)),
        None => undefined(out, "conditional"),
    }
    let dist = outcome_distribution(&rho, label, &obs, &dm)?;
    let total: f64 = dist.iter().map(|(_, p)| p).sum();
    let a0 = dist.last().map_or(0.0, |&(_, p)| p);
    out.records.push(Record::new("no_detection", a0, (total - 1.0).abs()));
    Ok(())
}

fn push_matrix(out: &mut Out, prefix: &str, m: &ComplexMatrix) {
    for (i, row) in m.to_rows().iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            out.records.push(Record::plain(format!("{prefix}[{i}][{j}].re"), z.re));
            out.records.push(Record::plain(format!("{prefix}[{i}][{j}].im"), z.im));
        }
    }
}

fn push_state(out: &mut Out, state: &DensityOperator) {
    push_matrix(out, "post_state", state.matrix());
    let tr = state.matrix().trace().re;
    out.records.push(Record::new("trace", tr, (tr - 1.0).abs()));
}

fn run_luders(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let rho = config.density()?;
    let obs = GeneralizedObservable::new(config.observable_checked()?);
    let prop = property(config, &obs)?;
    let dm = config.detection()?;
    let t = probability_triple(&rho, config.label(), &prop, &dm)?;
    let post = luders_update(&rho, config.label(), &prop, &dm)?;
    out.records.push(Record::plain("yes_probability", t.overall));
    push_state(out, &post);
    Ok(())
}

fn run_evolve(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let rho = config.density()?;
    let h = super::config::parse_observable(config.hamiltonian.as_ref().expect("validated"), "hamiltonian")?;
    let post = unitary_evolve(&rho, &h, config.time.expect("validated"))?;
    push_state(out, &post);
    out.records.push(Record::new("purity", post.purity(), (post.purity() - rho.purity()).abs()));
    Ok(())
}

fn outcome_name(o: Outcome, obs: &GeneralizedObservable) -> String {
    match o {
        Outcome::Value(v) => format!("frequency[{v}]"),
        Outcome::NoDetection => format!("frequency[{}]", obs.a0_label()),
    }
}

fn run_monte_carlo(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let rho = config.density()?;
    let obs = GeneralizedObservable::new(config.observable_checked()?);
    let dm = config.detection()?;
    let n = config.samples_or_default();
    let dist = outcome_distribution(&rho, config.label(), &obs, &dm)?;
    let sampler = OutcomeSampler::from_distribution(&dist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_or_default());
    let mut counts = vec![0u64; dist.len()];
    for _ in 0..n {
        let o = sampler.sample(&mut rng);
        let k = dist.iter().position(|(x, _)| *x == o).expect("sampler draws from dist");
        counts[k] += 1;
    }
    let mut worst: f64 = 0.0;
    for ((o, p), c) in dist.iter().zip(&counts) {
        let f = *c as f64 / n as f64;
        worst = worst.max((f - p).abs());
        out.records.push(Record::new(outcome_name(*o, &obs), f, f - p));
    }
    out.summary.push(Record::plain("samples", n as f64));
    out.summary.push(Record::plain("max_abs_deviation", worst));
    // Three standard errors of the worst-case frequency.
    let band = 3.0 * (0.25 / n as f64).sqrt();
    if worst > band {
        out.diagnostics.push(format!("largest deviation {worst:.3e} exceeds 3 sigma band {band:.3e}"));
    }
    Ok(())
}

fn run_mixture(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let m = config.mixture_checked()?;
    let obs = GeneralizedObservable::new(config.observable_checked()?);
    let prop = property(config, &obs)?;
    let dm = config.detection()?;

    let t = proper_probability_triple(&m, &prop, &dm)?;
    out.records.push(Record::new("proper_overall", t.overall, t.fundamental_residual().unwrap_or(0.0)));
    if let Some(d) = t.detection {
        out.records.push(Record::plain("proper_detection", d));
    }
    match t.conditional {
        Some(p) => out.records.push(Record::plain("proper_conditional", p)),
        None => undefined(out, "proper_conditional"),
    }
    out.records.push(Record::plain("qm_probability", qm_mixture_probability(&m, &prop)?));
    match esr_qm_divergence(&m, &prop, &dm)? {
        Some(div) => out.records.push(Record::plain("divergence", div)),
        None => undefined(out, "divergence"),
    }
    Ok(())
}

fn run_scan(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let angles = match &config.angles_deg {
        Some(deg) => InequalityAngles::from_degrees(deg).map_err(|e| ConfigError::new("angles_deg", e.to_string()))?,
        None => InequalityAngles::tsirelson(),
    };
    let template = TwoPartyScenario::new(
        config.two_party_state()?,
        config.label(),
        angles.settings(),
        DetectionModel::perfect(),
        DetectionModel::perfect(),
    )?;
    let grid = config.grid()?;
    let scan = efficiency_scan(&template, &angles, &grid)?;
    for row in &scan.rows {
        out.records.push(Record::new(format!("lhs[d={}]", row.efficiency), row.lhs, row.rhs - row.lhs));
    }
    if let Some(first) = scan.rows.first() {
        out.summary.push(Record::plain("rhs", first.rhs));
    }
    match scan.threshold {
        Some(t) => out.summary.push(Record::plain("threshold", t)),
        None => out.diagnostics.push("inequality holds at perfect detection; no threshold".into()),
    }
    Ok(())
}

fn ghz_scenario(config: &ScenarioConfig) -> Result<GhzScenario, RunError> {
    GhzScenario::new(config.ghz_state()?, config.ghz_efficiencies()?)
        .map_err(|e| ConfigError::new("efficiencies", e.to_string()).into())
}

fn run_ghz_quantum(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let g = ghz_scenario(config)?;
    for (name, v) in GHZ_TRIPLE_NAMES.iter().zip(ghz_quantum_correlations(&g)?) {
        out.records.push(Record::plain(format!("correlation[{name}]"), v));
    }
    Ok(())
}

fn run_ghz_local(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let g = ghz_scenario(config)?;
    match ghz_local_model_search(&g, &config.ghz_options())? {
        GhzSearchOutcome::Feasible(m) => {
            out.records.push(Record::new("feasible", 1.0, m.max_residual));
            for ((name, c), t) in GHZ_TRIPLE_NAMES.iter().zip(m.correlations).zip(m.targets) {
                out.records.push(Record::new(format!("correlation[{name}]"), c, c - t));
            }
            for (party, effs) in m.efficiencies.iter().enumerate() {
                for (setting, e) in effs.iter().enumerate() {
                    let s = if setting == 0 { "X" } else { "Y" };
                    out.records.push(Record::plain(format!("efficiency[{party}][{s}]"), *e));
                }
            }
            out.records.push(Record::plain("support_size", m.support.len() as f64));
            out.summary.push(Record::plain("lp_max_residual", m.lp_max_residual));
        }
        GhzSearchOutcome::Infeasible { phase_one_infeasibility } => {
            out.records.push(Record::new("feasible", 0.0, phase_one_infeasibility));
            out.diagnostics.push("no local trichotomic model satisfies the constraints".into());
        }
    }
    Ok(())
}

fn run_hv_verify(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    for (name, expr, classical) in [
        ("bound[chsh]", BoundExpression::Chsh, 2.0),
        ("bound[chsh-dichotomic]", BoundExpression::ChshDichotomic, 2.0),
        ("bound[bell-anticorrelated]", BoundExpression::BellAnticorrelated, 0.0),
    ] {
        let r = brute_force_trichotomic_bound(expr);
        out.records.push(Record::new(name, r.max, r.max - classical));
        out.summary.push(Record::plain(format!("{name}.evaluated"), r.evaluated as f64));
    }
    if let Some(model) = &config.microstate_model {
        for label in model.properties().labels() {
            let t = macro_from_micro(model, label)?;
            out.records.push(Record::new(format!("overall[{label}]"), t.overall, t.fundamental_residual().unwrap_or(0.0)));
            match t.detection {
                Some(d) => out.records.push(Record::plain(format!("detection[{label}]"), d)),
                None => undefined(out, &format!("detection[{label}]")),
            }
            match t.conditional {
                Some(p) => out.records.push(Record::plain(format!("conditional[{label}]"), p)),
                None => undefined(out, &format!("conditional[{label}]")),
            }
        }
    }
    Ok(())
}

fn run_self_tests(config: &ScenarioConfig, out: &mut Out) -> Result<(), RunError> {
    let mut opts = SelfTestOptions::default();
    if let Some(seed) = config.seed {
        opts.seed = seed;
    }
    let report = run_self_test(&opts)?;
    for s in &report.suites {
        out.records.push(Record::new(format!("suite[{}]", s.name), if s.passed { 1.0 } else { 0.0 }, s.max_deviation));
        if !s.passed {
            out.diagnostics.push(format!("{}: {} of {} checks failed; first: {}", s.name, s.failures, s.checks, s.detail));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{matrix_spec, DetectionSpec, ObservableSpec};

    fn pure(psi: &[f64]) -> Vec<Vec<[f64; 2]>> {
        let c: Vec<crate::Complex64> = psi.iter().map(|&x| crate::Complex64::new(x, 0.0)).collect();
        matrix_spec(DensityOperator::from_pure(&c).unwrap().matrix())
    }

    #[test]
    fn triple_scenario_matches_hand_values() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::ProbabilityTriple);
        cfg.state = Some(pure(&[0.6f64.sqrt(), 0.4f64.sqrt()]));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        cfg.sigma = Some(vec![1.0]);
        cfg.detection_model = Some(DetectionSpec::Uniform(0.5));
        let r = run_scenario(&cfg, RunOverrides::default()).unwrap();
        assert!((r.record("overall").unwrap().value - 0.3).abs() < 1e-12);
        assert!((r.record("detection").unwrap().value - 0.5).abs() < 1e-12);
        assert!((r.record("conditional").unwrap().value - 0.6).abs() < 1e-12);
        assert!((r.record("no_detection").unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn impossible_yes_outcome_is_a_computation_error() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::Luders);
        cfg.state = Some(pure(&[1.0, 0.0]));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        cfg.sigma = Some(vec![-1.0]);
        let err = run_scenario(&cfg, RunOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), super::super::EXIT_COMPUTATION);
    }

    #[test]
    fn unknown_sigma_is_a_config_error() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::ProbabilityTriple);
        cfg.state = Some(pure(&[1.0, 0.0]));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        cfg.sigma = Some(vec![7.0]);
        let err = run_scenario(&cfg, RunOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), super::super::EXIT_CONFIG);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::MonteCarlo);
        cfg.state = Some(pure(&[0.6f64.sqrt(), 0.4f64.sqrt()]));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        cfg.detection_model = Some(DetectionSpec::Uniform(0.9));
        let ov = RunOverrides {
            seed: Some(42),
            samples: Some(5000),
        };
        let a = run_scenario(&cfg, ov).unwrap();
        let b = run_scenario(&cfg, ov).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a.records.len(), 3);
        let c = run_scenario(&cfg, RunOverrides { seed: Some(43), ..ov }).unwrap();
        assert_ne!(a.to_csv().unwrap(), c.to_csv().unwrap());
    }

    #[test]
    fn chsh_scan_default_threshold() {
        let cfg = ScenarioConfig::minimal(ScenarioType::ChshScan);
        let r = run_scenario(&cfg, RunOverrides::default()).unwrap();
        assert_eq!(r.records.len(), 11);
        let t = r.summary_value("threshold").unwrap();
        assert!((t - 2f64.powf(-0.25)).abs() < 1e-6, "{t}");
    }
}
