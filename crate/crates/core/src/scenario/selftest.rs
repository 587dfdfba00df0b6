//! Built-in verification suites run by `esr-sim self-test`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::random::{random_density, random_detection, random_observable, random_sigma};
use crate::bell::{brute_force_trichotomic_bound, ghz_local_model_search, BoundExpression, GhzScenario, GhzSearchOptions, GhzSearchOutcome};
use crate::hv::simplex::FEASIBILITY_TOL;
use crate::linalg::DensityOperator;
use crate::measurement::{luders_numerator, luders_update, probability_triple, PROBABILITY_FLOOR};
use crate::{DetectionModel, GeneralizedObservable, Property, Result};

/// Tolerance on `|p^t - p^d p|`.
pub const FUNDAMENTAL_TOL: f64 = 1e-12;
/// Tolerance on the perfect-detection reduction to Born/Lüders.
pub const REDUCTION_TOL: f64 = 1e-10;
/// Slack for probabilities slightly outside `[0, 1]`.
const RANGE_TOL: f64 = 1e-12;

/// Deliberate defects used to check that the suites can fail.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the normalized post-measurement state.
    FlipLudersSign,
}

#[derive(Debug, Clone)]
pub struct SelfTestOptions {
    pub seed: u64,
    /// Random instances for the fundamental-equation suite.
    pub instances: usize,
    pub max_dim: usize,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            instances: 1000,
            max_dim: 8,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub max_deviation: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: usize,
    max_deviation: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn check(&mut self, deviation: f64, tol: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        let deviation = if deviation.is_nan() { f64::INFINITY } else { deviation };
        self.max_deviation = self.max_deviation.max(deviation);
        if deviation > tol {
            self.failures += 1;
            self.first_failure.get_or_insert_with(what);
        }
    }

    fn fail(&mut self, what: String) {
        self.checks += 1;
        self.failures += 1;
        self.first_failure.get_or_insert(what);
    }

    fn finish(self, name: &str) -> SuiteResult {
        SuiteResult {
            name: name.to_owned(),
            passed: self.failures == 0 && self.checks > 0,
            checks: self.checks,
            failures: self.failures,
            max_deviation: self.max_deviation,
            detail: self.first_failure.unwrap_or_else(|| "ok".into()),
        }
    }
}

/// Distance of `p` outside `[0, 1]`.
fn range_excess(p: f64) -> f64 {
    if p.is_nan() {
        f64::INFINITY
    } else {
        (-p).max(p - 1.0).max(0.0)
    }
}

fn post_state(
    rho: &DensityOperator,
    label: &str,
    property: &Property<'_>,
    dm: &DetectionModel,
    fault: Option<Fault>,
) -> Result<DensityOperator> {
    match fault {
        None => luders_update(rho, label, property, dm),
        Some(Fault::FlipLudersSign) => {
            let num = luders_numerator(rho, label, property, dm)?;
            let tr = num.trace().re;
            Ok(DensityOperator::new_unchecked(num.hermitian_part().scale_real(-1.0 / tr)))
        }
    }
}

/// `p^t = p^d p` and range checks on random instances, before and after a yes-update.
fn fundamental_suite(opts: &SelfTestOptions) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut t = Tally::default();
    let label = "S";
    for i in 0..opts.instances {
        let dim = rng.gen_range(1..=opts.max_dim.max(1));
        let rho = random_density(&mut rng, dim)?;
        let obs = GeneralizedObservable::new(random_observable(&mut rng, dim)?);
        let sigma = random_sigma(&mut rng, obs.base());
        let dm = random_detection(&mut rng, obs.base(), label)?;
        let property = Property::new(&obs, &sigma)?;

        let mut states = vec![rho.clone()];
        let triple = probability_triple(&rho, label, &property, &dm)?;
        if triple.overall > 1e-9 {
            states.push(post_state(&rho, label, &property, &dm, opts.fault)?);
        }
        for (stage, state) in states.iter().enumerate() {
            let tr = probability_triple(state, label, &property, &dm)?;
            let ctx = |what: &str| format!("instance {i} (dim {dim}, stage {stage}): {what}");
            t.check(range_excess(tr.overall), RANGE_TOL, || ctx("p^t outside [0, 1]"));
            if let Some(p) = tr.conditional {
                t.check(range_excess(p), RANGE_TOL, || ctx("p outside [0, 1]"));
            }
            if let Some(d) = tr.detection {
                t.check(range_excess(d), RANGE_TOL, || ctx("p^d outside [0, 1]"));
            }
            if let Some(r) = tr.fundamental_residual() {
                t.check(r, FUNDAMENTAL_TOL, || ctx("p^t != p^d p"));
            } else if tr.overall > PROBABILITY_FLOOR {
                t.fail(ctx("p^t > 0 with undefined p^d"));
            }
            t.check((state.matrix().trace().re - 1.0).abs(), 1e-10, || ctx("trace != 1"));
        }
    }
    Ok(t.finish("fundamental-equation"))
}

/// With `p^d = 1` the triple must collapse to the Born rule and the update to Lüders' rule.
fn reduction_suite(opts: &SelfTestOptions) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
    let mut t = Tally::default();
    let dm = DetectionModel::perfect();
    for i in 0..opts.instances.div_ceil(5) {
        let dim = rng.gen_range(1..=opts.max_dim.max(1));
        let rho = random_density(&mut rng, dim)?;
        let obs = GeneralizedObservable::new(random_observable(&mut rng, dim)?);
        let sigma = random_sigma(&mut rng, obs.base());
        let property = Property::new(&obs, &sigma)?;
        let p = property.projector();

        let born = rho.matrix().trace_product(&p).re;
        let tr = probability_triple(&rho, "S", &property, &dm)?;
        t.check((tr.overall - born).abs(), REDUCTION_TOL, || format!("instance {i}: p^t != Born"));
        t.check((tr.conditional.unwrap_or(f64::NAN) - born).abs(), REDUCTION_TOL, || {
            format!("instance {i}: p != Born")
        });
        if born > 1e-9 {
            t.check((tr.detection.unwrap_or(f64::NAN) - 1.0).abs(), REDUCTION_TOL, || {
                format!("instance {i}: p^d != 1")
            });
            let expected = p.matmul(rho.matrix()).matmul(&p).scale_real(1.0 / born);
            let got = post_state(&rho, "S", &property, &dm, opts.fault)?;
            t.check(got.matrix().max_abs_diff(&expected), REDUCTION_TOL, || {
                format!("instance {i}: update differs from P rho P / Tr")
            });
        }
    }
    Ok(t.finish("qm-reduction"))
}

fn bound_suite() -> SuiteResult {
    let mut t = Tally::default();
    for (expr, expected) in [
        (BoundExpression::Chsh, 2.0),
        (BoundExpression::ChshDichotomic, 2.0),
        (BoundExpression::BellAnticorrelated, 0.0),
    ] {
        let r = brute_force_trichotomic_bound(expr);
        t.check((r.max - expected).abs(), 1e-12, || format!("{expr:?}: max {} != {expected}", r.max));
    }
    t.finish("brute-force-bound")
}

/// GHZ local model must be found and certified; forcing unit efficiency must be infeasible.
fn lp_suite() -> Result<SuiteResult> {
    let mut t = Tally::default();
    let g = GhzScenario::standard();
    match ghz_local_model_search(&g, &GhzSearchOptions::default())? {
        GhzSearchOutcome::Feasible(m) => {
            t.check(m.max_residual, FEASIBILITY_TOL, || "GHZ model residual too large".into());
            let dev = m
                .correlations
                .iter()
                .zip(&m.targets)
                .map(|(c, e)| (c - e).abs())
                .fold(0.0, f64::max);
            t.check(dev, FEASIBILITY_TOL, || "GHZ correlations not reproduced".into());
            let wsum: f64 = m.weights.iter().sum();
            let wmin = m.weights.iter().copied().fold(f64::INFINITY, f64::min);
            t.check((wsum - 1.0).abs(), FEASIBILITY_TOL, || "weights do not sum to 1".into());
            t.check((-wmin).max(0.0), FEASIBILITY_TOL, || "negative weight".into());
        }
        GhzSearchOutcome::Infeasible { .. } => t.fail("no GHZ local model found".into()),
    }
    let forced = GhzSearchOptions {
        exact_efficiency: Some(1.0),
        ..GhzSearchOptions::default()
    };
    match ghz_local_model_search(&g, &forced)? {
        GhzSearchOutcome::Infeasible { .. } => t.check(0.0, 0.0, String::new),
        GhzSearchOutcome::Feasible(_) => t.fail("GHZ model with unit efficiency reported feasible".into()),
    }
    Ok(t.finish("lp-certificate"))
}

pub fn run_self_test(opts: &SelfTestOptions) -> Result<SelfTestReport> {
    Ok(SelfTestReport {
        suites: vec![fundamental_suite(opts)?, reduction_suite(opts)?, bound_suite(), lp_suite()?],
    })
}
