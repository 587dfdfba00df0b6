//! Improper and proper mixtures.
//!
//! An improper mixture is handled exactly like a pure state: its density
//! operator goes straight through the measurement calculus. A proper mixture
//! is a weighted family of labelled pure states `{(w_i, S_i)}`, and its
//! probabilities aggregate the per-component ones:
//!
//! ```text
//! p^t(M, F) = sum_i w_i p^t(S_i, F)
//! p(M, F)   = sum_i w_i p^d(S_i, F) p(S_i, F) / sum_i w_i p^d(S_i, F)
//! ```
//!
//! Unless `p^d(S_i, F)` is the same for every component, `p(M, F)` differs
//! from the Born value of the averaged density operator.

use serde::Serialize;

use crate::error::{EsrError, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, NumericPolicy};
use crate::measurement::{
    build_effect, probability_triple, DetectionModel, ProbabilityTriple, Property, PROBABILITY_FLOOR,
};

/// Component weights below this are rejected.
pub const MIN_WEIGHT: f64 = 1e-9;

/// A density operator treated as a generalized pure state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImproperMixture {
    pub rho: DensityOperator,
    pub state_label: String,
}

impl ImproperMixture {
    pub fn new(rho: DensityOperator, state_label: impl Into<String>) -> Self {
        Self {
            rho,
            state_label: state_label.into(),
        }
    }
}

pub fn improper_probability_triple(
    m: &ImproperMixture,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<ProbabilityTriple> {
    probability_triple(&m.rho, &m.state_label, property, dm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub state: DensityOperator,
    pub state_label: String,
}

/// Epistemic mixture of pure states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProperMixture {
    components: Vec<MixtureComponent>,
}

impl ProperMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let policy = NumericPolicy::DEFAULT;
        let first = components
            .first()
            .ok_or_else(|| EsrError::InvalidMixture("no components".into()))?;
        let dim = first.state.dim();
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if !c.weight.is_finite() || c.weight < MIN_WEIGHT || c.weight > 1.0 {
                return Err(EsrError::InvalidMixture(format!(
                    "component #{i} has weight {} outside [{MIN_WEIGHT}, 1]",
                    c.weight
                )));
            }
            if c.state.dim() != dim {
                return Err(EsrError::DimensionMismatch {
                    expected: dim,
                    actual: c.state.dim(),
                });
            }
            let purity = c.state.purity();
            if (purity - 1.0).abs() > policy.structural {
                return Err(EsrError::InvalidMixture(format!(
                    "component #{i} is not pure (Tr[rho^2] = {purity})"
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > policy.arithmetic {
            return Err(EsrError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].state.dim()
    }

    /// `mu * a + (1 - mu) * b` as a family; components are concatenated, not merged.
    pub fn mix(a: &ProperMixture, b: &ProperMixture, mu: f64) -> Result<Self> {
        fn scaled(m: &ProperMixture, s: f64) -> impl Iterator<Item = MixtureComponent> + '_ {
            m.components.iter().map(move |c| MixtureComponent {
                weight: c.weight * s,
                ..c.clone()
            })
        }
        Self::new(scaled(a, mu).chain(scaled(b, 1.0 - mu)).collect())
    }

    /// `sum_i w_i rho_i`, the density operator QM would assign.
    pub fn averaged_density(&self) -> DensityOperator {
        let n = self.dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        for c in &self.components {
            acc = &acc + &c.state.matrix().scale_real(c.weight);
        }
        DensityOperator::new_unchecked(acc)
    }
}

/// `p^d(S, F)` for aggregation: `p^t / p` when `p > 0`, otherwise the
/// rank-weighted mean `Tr[T(Sigma)] / Tr[P(Sigma)]` of the detection map over `Sigma`.
pub fn component_detection(
    rho: &DensityOperator,
    state_label: &str,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<f64> {
    let triple = probability_triple(rho, state_label, property, dm)?;
    if let Some(d) = triple.detection {
        return Ok(d);
    }
    let rank = property.projector().trace().re;
    if rank < 0.5 {
        return Err(EsrError::InvalidProperty("empty Sigma has no detection probability".into()));
    }
    let effect = build_effect(state_label, property, dm)?;
    Ok(effect.matrix().trace().re / rank)
}

fn check_dim(m: &ProperMixture, property: &Property<'_>) -> Result<()> {
    if m.dim() != property.observable().dim() {
        return Err(EsrError::DimensionMismatch {
            expected: property.observable().dim(),
            actual: m.dim(),
        });
    }
    Ok(())
}

pub fn proper_overall_probability(m: &ProperMixture, property: &Property<'_>, dm: &DetectionModel) -> Result<f64> {
    check_dim(m, property)?;
    m.components.iter().try_fold(0.0, |acc, c| {
        let t = probability_triple(&c.state, &c.state_label, property, dm)?;
        Ok(acc + c.weight * t.overall)
    })
}

/// Conditional-on-detection probability; `None` when the aggregate detection vanishes.
pub fn proper_conditional_probability(
    m: &ProperMixture,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<Option<f64>> {
    check_dim(m, property)?;
    let mut numerator = 0.0;
    let mut detection = 0.0;
    for c in &m.components {
        let d = component_detection(&c.state, &c.state_label, property, dm)?;
        let p = c.state.expectation(&property.projector());
        numerator += c.weight * d * p;
        detection += c.weight * d;
    }
    Ok((detection > PROBABILITY_FLOOR).then(|| numerator / detection))
}

/// `|p(M, F) - Tr[rho_avg P(Sigma)]|`; `None` when `p(M, F)` is undefined.
pub fn esr_qm_divergence(m: &ProperMixture, property: &Property<'_>, dm: &DetectionModel) -> Result<Option<f64>> {
    let esr = proper_conditional_probability(m, property, dm)?;
    let qm = m.averaged_density().expectation(&property.projector());
    Ok(esr.map(|p| (p - qm).abs()))
}

/// QM Born value of the averaged density operator.
pub fn qm_mixture_probability(m: &ProperMixture, property: &Property<'_>) -> Result<f64> {
    check_dim(m, property)?;
    Ok(m.averaged_density().expectation(&property.projector()))
}

/// Probability triple of a proper mixture; `detection` is the aggregate
/// `sum_i w_i p^d(S_i, F)`.
pub fn proper_probability_triple(
    m: &ProperMixture,
    property: &Property<'_>,
    dm: &DetectionModel,
) -> Result<ProbabilityTriple> {
    let overall = proper_overall_probability(m, property, dm)?;
    let mut detection = 0.0;
    for c in &m.components {
        detection += c.weight * component_detection(&c.state, &c.state_label, property, dm)?;
    }
    let conditional = proper_conditional_probability(m, property, dm)?;
    Ok(ProbabilityTriple {
        overall,
        detection: Some(detection),
        conditional,
    })
}
