//! Microscopic states and the macroscopic probabilities they induce.
//!
//! Each macroscopic property `F` has a microscopic counterpart `f`; a
//! microstate `s` is the set of microscopic properties an individual object
//! possesses. A detected object in microstate `s` answers "yes" to `F`
//! exactly when `f` is in `s`, so all randomness sits in the distribution
//! `p(S|s)` over microstates and in the detection rule `d(s, F)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};
use crate::linalg::NumericPolicy;
use crate::measurement::{ProbabilityTriple, PROBABILITY_FLOOR};

/// Microscopic property labels, one per macroscopic property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroPropertySet {
    labels: Vec<String>,
}

impl MicroPropertySet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(EsrError::InvalidModel("duplicate property labels".into()));
        }
        if labels.iter().any(String::is_empty) {
            return Err(EsrError::InvalidModel("empty property label".into()));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One microstate: which properties it possesses, its weight, and the
/// probability of being detected when each property is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstate {
    pub possessed: BTreeSet<String>,
    pub weight: f64,
    /// Detection probability per property, in the order of the property set.
    pub detection: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrostateModel {
    properties: MicroPropertySet,
    microstates: Vec<Microstate>,
}

impl MicrostateModel {
    pub fn new(properties: MicroPropertySet, microstates: Vec<Microstate>) -> Result<Self> {
        let tol = NumericPolicy::DEFAULT.arithmetic;
        if microstates.is_empty() {
            return Err(EsrError::InvalidModel("no microstates".into()));
        }
        let mut total = 0.0;
        for (i, s) in microstates.iter().enumerate() {
            if !s.weight.is_finite() || s.weight < 0.0 {
                return Err(EsrError::InvalidModel(format!("microstate #{i} has weight {}", s.weight)));
            }
            if s.detection.len() != properties.len() {
                return Err(EsrError::InvalidModel(format!(
                    "microstate #{i} lists {} detection values for {} properties",
                    s.detection.len(),
                    properties.len()
                )));
            }
            if let Some(d) = s.detection.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                return Err(EsrError::InvalidModel(format!(
                    "microstate #{i} has detection probability {d} outside [0, 1]"
                )));
            }
            if let Some(f) = s.possessed.iter().find(|f| properties.index_of(f).is_none()) {
                return Err(EsrError::InvalidModel(format!("microstate #{i} possesses unknown property '{f}'")));
            }
            total += s.weight;
        }
        if (total - 1.0).abs() > tol {
            return Err(EsrError::InvalidModel(format!("weights sum to {total}")));
        }
        Ok(Self {
            properties,
            microstates,
        })
    }

    pub fn properties(&self) -> &MicroPropertySet {
        &self.properties
    }

    pub fn microstates(&self) -> &[Microstate] {
        &self.microstates
    }
}

/// Macroscopic `(p^t, p^d, p)` for property `label`.
pub fn macro_from_micro(model: &MicrostateModel, label: &str) -> Result<ProbabilityTriple> {
    let k = model
        .properties
        .index_of(label)
        .ok_or_else(|| EsrError::UnknownProperty(label.to_owned()))?;
    let mut overall = 0.0;
    let mut detection = 0.0;
    for s in &model.microstates {
        let d = s.weight * s.detection[k];
        detection += d;
        if s.possessed.contains(label) {
            overall += d;
        }
    }
    let conditional = (detection > PROBABILITY_FLOOR).then(|| overall / detection);
    Ok(ProbabilityTriple {
        overall,
        detection: Some(detection),
        conditional,
    })
}
