//! Measurement calculus with a no-registration outcome.
//!
//! A quantum observable `A` is extended with an extra outcome `a0` meaning
//! "the object was not detected". Detection is governed by a per-state,
//! per-eigenvalue probability `p^d(S, lambda)`, and the "yes" probability of
//! a property `F = (A0, Sigma)` splits into
//!
//! ```text
//! overall      p^t = Tr[rho T(Sigma)],    T(Sigma) = sum_{lambda in Sigma} p^d(S, lambda) P_lambda
//! conditional  p   = Tr[rho P(Sigma)]     (the Born value)
//! detection    p^d = p^t / p
//! ```
//!
//! so that `p^t = p^d * p` holds for every defined triple.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, NumericPolicy, SpectralObservable};

/// Conditional probabilities at or below this are treated as zero.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Clamps round-off excursions just outside `[0, 1]`; larger excursions are
/// left alone so that callers can see them.
pub(crate) fn clamp_probability(p: f64) -> f64 {
    let tol = NumericPolicy::DEFAULT.arithmetic;
    if (-tol..0.0).contains(&p) {
        0.0
    } else if p > 1.0 && p <= 1.0 + tol {
        1.0
    } else {
        p
    }
}

/// A quantum observable plus the no-registration outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedObservable {
    base: SpectralObservable,
    a0_label: String,
}

impl GeneralizedObservable {
    pub const DEFAULT_A0_LABEL: &'static str = "a0";

    pub fn new(base: SpectralObservable) -> Self {
        Self {
            base,
            a0_label: Self::DEFAULT_A0_LABEL.to_owned(),
        }
    }

    /// The label must not name one of the eigenvalues.
    pub fn with_a0_label(base: SpectralObservable, a0_label: impl Into<String>) -> Result<Self> {
        let a0_label = a0_label.into();
        if a0_label.is_empty() {
            return Err(EsrError::InvalidObservable("empty a0 label".into()));
        }
        if let Ok(v) = a0_label.trim().parse::<f64>() {
            if base.index_of(v).is_some() {
                return Err(EsrError::InvalidObservable(format!(
                    "a0 label '{a0_label}' collides with an eigenvalue"
                )));
            }
        }
        Ok(Self { base, a0_label })
    }

    pub fn base(&self) -> &SpectralObservable {
        &self.base
    }

    pub fn a0_label(&self) -> &str {
        &self.a0_label
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}

/// `F = (A0, Sigma)` with `Sigma` a subset of the eigenvalues (never `a0`).
#[derive(Debug, Clone)]
pub struct Property<'a> {
    observable: &'a GeneralizedObservable,
    /// Indices into the base eigenvalue list, ascending, no duplicates.
    sigma: Vec<usize>,
}

impl<'a> Property<'a> {
    pub fn new(observable: &'a GeneralizedObservable, sigma: &[f64]) -> Result<Self> {
        let mut idx = Vec::with_capacity(sigma.len());
        for &v in sigma {
            let k = observable.base.index_of(v).ok_or_else(|| {
                EsrError::InvalidProperty(format!("{v} is not an eigenvalue of the observable"))
            })?;
            if idx.contains(&k) {
                return Err(EsrError::InvalidProperty(format!("{v} listed twice")));
            }
            idx.push(k);
        }
        idx.sort_unstable();
        Ok(Self {
            observable,
            sigma: idx,
        })
    }

    /// `Sigma` = every eigenvalue.
    pub fn full(observable: &'a GeneralizedObservable) -> Self {
        Self {
            observable,
            sigma: (0..observable.base.len()).collect(),
        }
    }

    pub fn observable(&self) -> &'a GeneralizedObservable {
        self.observable
    }

    pub fn sigma_indices(&self) -> &[usize] {
        &self.sigma
    }

    pub fn sigma_values(&self) -> Vec<f64> {
        let ev = self.observable.base.eigenvalues();
        self.sigma.iter().map(|&k| ev[k]).collect()
    }

    pub fn contains_value(&self, value: f64) -> bool {
        self.observable
            .base
            .index_of(value)
            .is_some_and(|k| self.sigma.contains(&k))
    }

    /// `P(Sigma)`.
    pub fn projector(&self) -> ComplexMatrix {
        let base = &self.observable.base;
        base.weighted_sum(|k| if self.sigma.contains(&k) { 1.0 } else { 0.0 })
    }
}

/// Detection probabilities `p^d(S, lambda)` keyed by state label and eigenvalue.
///
/// Pairs that were never assigned fall back to `default_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DetectionModelRepr", into = "DetectionModelRepr")]
pub struct DetectionModel {
    default_value: f64,
    assignment: BTreeMap<String, Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct DetectionModelRepr {
    default: f64,
    #[serde(default)]
    entries: Vec<DetectionEntry>,
}

/// One `(state, eigenvalue) -> probability` assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub state: String,
    pub eigenvalue: f64,
    pub value: f64,
}

impl TryFrom<DetectionModelRepr> for DetectionModel {
    type Error = EsrError;

    fn try_from(r: DetectionModelRepr) -> Result<Self> {
        let mut dm = DetectionModel::uniform(r.default)?;
        for e in r.entries {
            dm.set(&e.state, e.eigenvalue, e.value)?;
        }
        Ok(dm)
    }
}

impl From<DetectionModel> for DetectionModelRepr {
    fn from(dm: DetectionModel) -> Self {
        DetectionModelRepr {
            default: dm.default_value,
            entries: dm.entries().collect(),
        }
    }
}

fn check_unit(state: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(EsrError::DetectionOutOfRange {
            state: state.to_owned(),
            value,
        });
    }
    Ok(())
}

impl DetectionModel {
    /// Every pair detected with probability `d`.
    pub fn uniform(d: f64) -> Result<Self> {
        check_unit("<default>", d)?;
        Ok(Self {
            default_value: d,
            assignment: BTreeMap::new(),
        })
    }

    /// Ideal detection, `p^d = 1` everywhere.
    pub fn perfect() -> Self {
        Self::uniform(1.0).expect("1 is in range")
    }

    pub fn set(&mut self, state: &str, eigenvalue: f64, value: f64) -> Result<()> {
        check_unit(state, value)?;
        let slot = self.assignment.entry(state.to_owned()).or_default();
        match slot.iter_mut().find(|(l, _)| same_eigenvalue(*l, eigenvalue)) {
            Some(entry) => entry.1 = value,
            None => slot.push((eigenvalue, value)),
        }
        Ok(())
    }

    pub fn with(mut self, state: &str, eigenvalue: f64, value: f64) -> Result<Self> {
        self.set(state, eigenvalue, value)?;
        Ok(self)
    }

    pub fn default_value(&self) -> f64 {
        self.default_value
    }

    pub fn get(&self, state: &str, eigenvalue: f64) -> f64 {
        self.assignment
            .get(state)
            .and_then(|v| v.iter().find(|(l, _)| same_eigenvalue(*l, eigenvalue)))
            .map_or(self.default_value, |&(_, p)| p)
    }

    pub fn entries(&self) -> impl Iterator<Item = DetectionEntry> + '_ {
        self.assignment.iter().flat_map(|(state, v)| {
            v.iter().map(move |&(eigenvalue, value)| DetectionEntry {
                state: state.clone(),
                eigenvalue,
                value,
            })
        })
    }

    /// Re-checks every stored value; models built through the public API always pass.
    pub fn validate(&self) -> Result<()> {
        check_unit("<default>", self.default_value)?;
        for e in self.entries() {
            check_unit(&e.state, e.value)?;
        }
        Ok(())
    }
}

fn same_eigenvalue(a: f64, b: f64) -> bool {
    (a - b).abs() <= NumericPolicy::DEFAULT.structural
}

/// Positive operator with spectrum in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effect {
    matrix: ComplexMatrix,
}

impl Effect {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// `T_S(Sigma) = sum_{lambda in Sigma} p^d(S, lambda) P_lambda`.
pub fn build_effect(state_label: &str, property: &Property<'_>, dm: &DetectionModel) -> Result<Effect> {
    dm.validate()?;
    let base = property.observable.base();
    let ev = base.eigenvalues();
    let matrix = base.weighted_sum(|k| {
        if property.sigma.contains(&k) {
            dm.get(state_label, ev[k])
        } else {
            0.0
        }
    });
    Ok(Effect { matrix })
}

/// `(p^t, p^d, p)` for one state/property pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTriple {
    pub overall: f64,
    /// `None` when the conditional probability vanishes.
    pub detection: Option<f64>,
    /// `None` when nothing is ever detected.
    pub conditional: Option<f64>,
}

impl ProbabilityTriple {
    /// `|p^t - p^d p|`, when both factors are defined.
    pub fn fundamental_residual(&self) -> Option<f64> {
        Some((self.overall - self.detection? * self.conditional?).abs())
    }
}

impl fmt::Display for ProbabilityTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |x: Option<f64>| x.map_or_else(|| "undefined".to_owned(), |v| format!("{v:.12}"));
        write!(
            f,
            "p^t = {:.12}, p^d = {}, p = {}",
            self.overall,
            show(self.detection),
            show(self.conditional)
        )
    }
}

fn check_dim(rho: &DensityOperator, obs: &GeneralizedObservable) -> Result<()> {
    if rho.dim() != obs.dim() {
        return Err(EsrError::DimensionMismatch {
            expected: obs.dim(),
            actual: rho.dim(),
        });
    }
    Ok(())
}

pub fn probability_triple(
    rho: &DensityOperator,
    state_label: &str,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<ProbabilityTriple> {
    check_dim(rho, property.observable)?;
    let effect = build_effect(state_label, property, dm)?;
    let conditional = clamp_probability(rho.expectation(&property.projector()));
    let overall = clamp_probability(rho.expectation(effect.matrix()));
    let detection = (conditional > PROBABILITY_FLOOR).then(|| overall / conditional);
    Ok(ProbabilityTriple {
        overall,
        detection,
        conditional: Some(conditional),
    })
}

/// A possible measurement result: an eigenvalue or the no-registration outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Value(f64),
    NoDetection,
}

impl Outcome {
    /// Numeric value in product expectations: the eigenvalue, or 0 for `a0`.
    pub fn numeric(self) -> f64 {
        match self {
            Outcome::Value(v) => v,
            Outcome::NoDetection => 0.0,
        }
    }

    /// Dichotomic reading of a measurement of `property`: yes iff the value lies in `Sigma`.
    pub fn is_yes(self, property: &Property<'_>) -> bool {
        match self {
            Outcome::Value(v) => property.contains_value(v),
            Outcome::NoDetection => false,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::NoDetection => f.write_str(GeneralizedObservable::DEFAULT_A0_LABEL),
        }
    }
}

/// `P(lambda) = p^d(S, lambda) Tr[rho P_lambda]` for every eigenvalue, then `a0` last.
pub fn outcome_distribution(
    rho: &DensityOperator,
    state_label: &str,
    obs: &GeneralizedObservable,
    dm: &DetectionModel,
) -> Result<Vec<(Outcome, f64)>> {
    check_dim(rho, obs)?;
    dm.validate()?;
    let base = obs.base();
    let mut dist: Vec<(Outcome, f64)> = base
        .eigenvalues()
        .iter()
        .zip(base.projectors())
        .map(|(&lam, p)| {
            let born = clamp_probability(rho.expectation(p));
            (Outcome::Value(lam), dm.get(state_label, lam) * born)
        })
        .collect();
    let detected: f64 = dist.iter().map(|(_, p)| p).sum();
    dist.push((Outcome::NoDetection, clamp_probability(1.0 - detected)));
    Ok(dist)
}

/// Probability of the outcome `a0`.
pub fn no_detection_probability(
    rho: &DensityOperator,
    state_label: &str,
    obs: &GeneralizedObservable,
    dm: &DetectionModel,
) -> Result<f64> {
    let dist = outcome_distribution(rho, state_label, obs, dm)?;
    Ok(dist.last().map_or(0.0, |&(_, p)| p))
}

/// Unnormalized `T rho T^dagger` for the yes branch.
pub(crate) fn luders_numerator(
    rho: &DensityOperator,
    state_label: &str,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<ComplexMatrix> {
    check_dim(rho, property.observable)?;
    let t = build_effect(state_label, property, dm)?;
    Ok(t.matrix.matmul(rho.matrix()).matmul(&t.matrix.adjoint()))
}

/// Post-measurement state after a "yes" outcome: `T rho T^dagger / Tr[T rho T^dagger]`.
pub fn luders_update(
    rho: &DensityOperator,
    state_label: &str,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<DensityOperator> {
    let num = luders_numerator(rho, state_label, property, dm)?;
    let denominator = num.trace().re;
    if denominator <= PROBABILITY_FLOOR {
        return Err(EsrError::YesOutcomeImpossible { denominator });
    }
    DensityOperator::new(num.hermitian_part().scale_real(1.0 / denominator))
}

/// `U(t) = sum_k exp(-i E_k t) P_k`, with hbar = 1.
pub fn evolution_operator(hamiltonian: &SpectralObservable, t: f64) -> ComplexMatrix {
    let n = hamiltonian.dim();
    let mut u = ComplexMatrix::zeros(n, n);
    for (&e, p) in hamiltonian.eigenvalues().iter().zip(hamiltonian.projectors()) {
        u = &u + &p.scale(Complex64::from_polar(1.0, -e * t));
    }
    u
}

/// `rho(t) = U rho U^dagger`.
pub fn unitary_evolve(rho: &DensityOperator, hamiltonian: &SpectralObservable, t: f64) -> Result<DensityOperator> {
    if rho.dim() != hamiltonian.dim() {
        return Err(EsrError::DimensionMismatch {
            expected: hamiltonian.dim(),
            actual: rho.dim(),
        });
    }
    if !t.is_finite() {
        return Err(EsrError::OutOfRange {
            name: "t".into(),
            value: t,
            lo: f64::MIN,
            hi: f64::MAX,
        });
    }
    let u = evolution_operator(hamiltonian, t);
    Ok(DensityOperator::new_unchecked(
        rho.matrix().conjugate_by(&u).hermitian_part(),
    ))
}

/// Precomputed outcome distribution for repeated sampling.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    outcomes: Vec<Outcome>,
    cumulative: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(
        rho: &DensityOperator,
        state_label: &str,
        obs: &GeneralizedObservable,
        dm: &DetectionModel,
    ) -> Result<Self> {
        let dist = outcome_distribution(rho, state_label, obs, dm)?;
        Self::from_distribution(&dist)
    }

    pub fn from_distribution(dist: &[(Outcome, f64)]) -> Result<Self> {
        let tol = NumericPolicy::DEFAULT.arithmetic;
        if let Some((o, p)) = dist.iter().find(|(_, p)| !p.is_finite() || *p < -tol) {
            return Err(EsrError::InvalidDistribution(format!("P({o}) = {p}")));
        }
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > tol {
            return Err(EsrError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = dist
            .iter()
            .map(|(_, p)| {
                acc += p.max(0.0);
                acc
            })
            .collect();
        Ok(Self {
            outcomes: dist.iter().map(|(o, _)| *o).collect(),
            cumulative,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let u: f64 = rng.gen();
        let k = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.outcomes.len() - 1);
        self.outcomes[k]
    }
}

/// Draws one outcome from `Xi0` with the model's probabilities.
pub fn sample_outcome<R: Rng + ?Sized>(
    rho: &DensityOperator,
    state_label: &str,
    obs: &GeneralizedObservable,
    dm: &DetectionModel,
    rng: &mut R,
) -> Result<Outcome> {
    Ok(OutcomeSampler::new(rho, state_label, obs, dm)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli, validate_density_operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const S: &str = "plus";

    fn z_obs() -> GeneralizedObservable {
        GeneralizedObservable::new(pauli::observable_z())
    }

    fn plus() -> DensityOperator {
        DensityOperator::from_real_pure(&[1.0, 1.0]).unwrap()
    }

    fn asym_model() -> DetectionModel {
        DetectionModel::uniform(1.0)
            .unwrap()
            .with(S, 1.0, 0.9)
            .unwrap()
            .with(S, -1.0, 0.5)
            .unwrap()
    }

    #[test]
    fn effect_examples() {
        let z = z_obs();
        let up = Property::new(&z, &[1.0]).unwrap();
        let dm = DetectionModel::uniform(1.0).unwrap().with(S, 1.0, 0.8).unwrap();
        let t = build_effect(S, &up, &dm).unwrap();
        assert!(t.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.8, 0.0])) < 1e-15);

        let t = build_effect(S, &up, &DetectionModel::perfect()).unwrap();
        assert_eq!(t.matrix(), &up.projector());

        let all = Property::full(&z);
        let t = build_effect(S, &all, &asym_model()).unwrap();
        assert!(t.matrix().max_abs_diff(&ComplexMatrix::diagonal(&[0.9, 0.5])) < 1e-15);
    }

    #[test]
    fn detection_values_outside_unit_interval_rejected() {
        assert!(matches!(
            DetectionModel::uniform(1.2),
            Err(EsrError::DetectionOutOfRange { .. })
        ));
        let mut dm = DetectionModel::perfect();
        assert!(dm.set(S, 1.0, -0.1).is_err());
        let bad: std::result::Result<DetectionModel, _> =
            serde_json::from_str(r#"{"default": 0.5, "entries": [{"state": "s", "eigenvalue": 1, "value": 2}]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn triple_examples() {
        let z = z_obs();
        let up = Property::new(&z, &[1.0]).unwrap();
        let t = probability_triple(&plus(), S, &up, &DetectionModel::perfect()).unwrap();
        assert!((t.overall - 0.5).abs() < 1e-15);
        assert!((t.detection.unwrap() - 1.0).abs() < 1e-15);
        assert!((t.conditional.unwrap() - 0.5).abs() < 1e-15);

        let t = probability_triple(&plus(), S, &up, &asym_model()).unwrap();
        assert!((t.overall - 0.45).abs() < 1e-15);
        assert!((t.detection.unwrap() - 0.9).abs() < 1e-15);
        assert!((t.conditional.unwrap() - 0.5).abs() < 1e-15);

        let all = Property::full(&z);
        let t = probability_triple(&plus(), S, &all, &asym_model()).unwrap();
        assert!((t.overall - 0.7).abs() < 1e-15);
        assert!((t.detection.unwrap() - 0.7).abs() < 1e-15);
        assert!((t.conditional.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triple_detection_undefined_when_born_value_vanishes() {
        let z = z_obs();
        let down = Property::new(&z, &[-1.0]).unwrap();
        let t = probability_triple(&DensityOperator::basis(2, 0), S, &down, &asym_model()).unwrap();
        assert_eq!(t.overall, 0.0);
        assert_eq!(t.detection, None);
        assert_eq!(t.fundamental_residual(), None);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let z = z_obs();
        let up = Property::new(&z, &[1.0]).unwrap();
        let rho = DensityOperator::maximally_mixed(4);
        assert!(matches!(
            probability_triple(&rho, S, &up, &asym_model()),
            Err(EsrError::DimensionMismatch { expected: 2, actual: 4 })
        ));
        assert!(no_detection_probability(&rho, S, &z, &asym_model()).is_err());
    }

    #[test]
    fn property_rejects_foreign_values() {
        let z = z_obs();
        assert!(Property::new(&z, &[0.5]).is_err());
        assert!(Property::new(&z, &[1.0, 1.0]).is_err());
        assert!(GeneralizedObservable::with_a0_label(pauli::observable_z(), "-1").is_err());
        assert!(GeneralizedObservable::with_a0_label(pauli::observable_z(), "none").is_ok());
    }

    #[test]
    fn no_detection_examples() {
        let z = z_obs();
        let p = no_detection_probability(&plus(), S, &z, &DetectionModel::perfect()).unwrap();
        assert!(p.abs() < 1e-15);
        let p = no_detection_probability(&plus(), S, &z, &DetectionModel::uniform(0.0).unwrap()).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let p = no_detection_probability(&plus(), S, &z, &asym_model()).unwrap();
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn luders_examples() {
        let z = z_obs();
        let up = Property::new(&z, &[1.0]).unwrap();
        let zero = DensityOperator::basis(2, 0);

        let out = luders_update(&plus(), S, &up, &DetectionModel::perfect()).unwrap();
        assert!(out.matrix().max_abs_diff(zero.matrix()) < 1e-15);

        let dm = DetectionModel::perfect().with(S, 1.0, 0.8).unwrap();
        let out = luders_update(&plus(), S, &up, &dm).unwrap();
        assert!(out.matrix().max_abs_diff(zero.matrix()) < 1e-15);

        let all = Property::full(&z);
        let out = luders_update(&plus(), S, &all, &asym_model()).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[vec![0.81, 0.45], vec![0.45, 0.25]])
            .unwrap()
            .scale_real(1.0 / 1.06);
        assert!(out.matrix().max_abs_diff(&expected) < 1e-15);
        assert!(validate_density_operator(out.matrix()).is_valid());
    }

    #[test]
    fn luders_impossible_yes() {
        let z = z_obs();
        let down = Property::new(&z, &[-1.0]).unwrap();
        let r = luders_update(&DensityOperator::basis(2, 0), S, &down, &DetectionModel::perfect());
        assert!(matches!(r, Err(EsrError::YesOutcomeImpossible { .. })));
        let up = Property::new(&z, &[1.0]).unwrap();
        let r = luders_update(&plus(), S, &up, &DetectionModel::uniform(0.0).unwrap());
        assert!(matches!(r, Err(EsrError::YesOutcomeImpossible { .. })));
    }

    #[test]
    fn evolution_examples() {
        let h = pauli::observable_z();
        let rho = plus();
        let same = unitary_evolve(&rho, &h, 0.0).unwrap();
        assert!(same.matrix().max_abs_diff(rho.matrix()) < 1e-15);

        let diag = DensityOperator::new(ComplexMatrix::diagonal(&[0.3, 0.7])).unwrap();
        for t in [0.1, 1.0, 17.3] {
            let out = unitary_evolve(&diag, &h, t).unwrap();
            assert!(out.matrix().max_abs_diff(diag.matrix()) < 1e-15);
        }

        let out = unitary_evolve(&rho, &h, std::f64::consts::FRAC_PI_2).unwrap();
        let minus = DensityOperator::from_real_pure(&[1.0, -1.0]).unwrap();
        assert!(out.matrix().max_abs_diff(minus.matrix()) < 1e-15);

        assert!(unitary_evolve(&DensityOperator::maximally_mixed(3), &h, 1.0).is_err());
    }

    #[test]
    fn sampling_degenerate_cases() {
        let z = z_obs();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zero = DensityOperator::basis(2, 0);
        for _ in 0..200 {
            let o = sample_outcome(&zero, S, &z, &DetectionModel::perfect(), &mut rng).unwrap();
            assert_eq!(o, Outcome::Value(1.0));
            let o = sample_outcome(&plus(), S, &z, &DetectionModel::uniform(0.0).unwrap(), &mut rng).unwrap();
            assert_eq!(o, Outcome::NoDetection);
        }
    }

    #[test]
    fn sampler_rejects_bad_distributions() {
        let bad = [(Outcome::Value(1.0), 0.7), (Outcome::NoDetection, 0.7)];
        assert!(OutcomeSampler::from_distribution(&bad).is_err());
        let neg = [(Outcome::Value(1.0), 1.5), (Outcome::NoDetection, -0.5)];
        assert!(OutcomeSampler::from_distribution(&neg).is_err());
    }

    #[test]
    fn yes_reading_of_outcomes() {
        let z = z_obs();
        let up = Property::new(&z, &[1.0]).unwrap();
        assert!(Outcome::Value(1.0).is_yes(&up));
        assert!(!Outcome::Value(-1.0).is_yes(&up));
        assert!(!Outcome::NoDetection.is_yes(&up));
        assert_eq!(Outcome::NoDetection.numeric(), 0.0);
    }

    #[test]
    fn detection_model_serde_round_trip() {
        let dm = asym_model();
        let s = serde_json::to_string(&dm).unwrap();
        let back: DetectionModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, dm);
        let scalar: DetectionModel = serde_json::from_str(r#"{"default": 0.25}"#).unwrap();
        assert_eq!(scalar.get("anything", 3.0), 0.25);
    }
}
