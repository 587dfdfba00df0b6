//! JSON scenario files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. Angles are given in degrees.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::bell::{ghz_state, singlet, GhzSearchOptions};
use crate::hv::MicrostateModel;
use crate::linalg::{pauli, ComplexMatrix, DensityOperator, SpectralObservable};
use crate::measurement::{DetectionModel, GeneralizedObservable, Property};
use crate::mixtures::{MixtureComponent, ProperMixture};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioType {
    ProbabilityTriple,
    Luders,
    Evolve,
    MonteCarlo,
    MixtureDivergence,
    BellScan,
    ChshScan,
    GhzQuantum,
    GhzLocalModel,
    HvVerify,
    SelfTest,
}

impl ScenarioType {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioType::ProbabilityTriple => "probability-triple",
            ScenarioType::Luders => "luders",
            ScenarioType::Evolve => "evolve",
            ScenarioType::MonteCarlo => "monte-carlo",
            ScenarioType::MixtureDivergence => "mixture-divergence",
            ScenarioType::BellScan => "bell-scan",
            ScenarioType::ChshScan => "chsh-scan",
            ScenarioType::GhzQuantum => "ghz-quantum",
            ScenarioType::GhzLocalModel => "ghz-local-model",
            ScenarioType::HvVerify => "hv-verify",
            ScenarioType::SelfTest => "self-test",
        }
    }
}

impl fmt::Display for ScenarioType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

/// An observable, given by name, spin direction, spectral data or a Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    /// `"X"`, `"Y"` or `"Z"`.
    Pauli { pauli: String },
    /// `cos(t) Z + sin(t) X`.
    Spin { spin_angle_deg: f64 },
    Spectral {
        eigenvalues: Vec<f64>,
        projectors: Vec<MatrixSpec>,
    },
    Matrix { matrix: MatrixSpec },
}

/// Either a scalar uniform efficiency or a full per-state model.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DetectionSpec {
    Uniform(f64),
    Model(DetectionModel),
}

// Untagged derives buffer numbers in a way that breaks with arbitrary-precision
// JSON, so both specs dispatch by hand.

impl<'de> Deserialize<'de> for DetectionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        if v.is_number() {
            serde_json::from_value(v).map(DetectionSpec::Uniform)
        } else {
            serde_json::from_value(v).map(DetectionSpec::Model)
        }
        .map_err(de::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservable {
    pauli: Option<String>,
    spin_angle_deg: Option<f64>,
    eigenvalues: Option<Vec<f64>>,
    projectors: Option<Vec<MatrixSpec>>,
    matrix: Option<MatrixSpec>,
}

impl<'de> Deserialize<'de> for ObservableSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawObservable::deserialize(d)?;
        match raw {
            RawObservable {
                pauli: Some(pauli),
                spin_angle_deg: None,
                eigenvalues: None,
                projectors: None,
                matrix: None,
            } => Ok(ObservableSpec::Pauli { pauli }),
            RawObservable {
                pauli: None,
                spin_angle_deg: Some(spin_angle_deg),
                eigenvalues: None,
                projectors: None,
                matrix: None,
            } => Ok(ObservableSpec::Spin { spin_angle_deg }),
            RawObservable {
                pauli: None,
                spin_angle_deg: None,
                eigenvalues: Some(eigenvalues),
                projectors: Some(projectors),
                matrix: None,
            } => Ok(ObservableSpec::Spectral {
                eigenvalues,
                projectors,
            }),
            RawObservable {
                pauli: None,
                spin_angle_deg: None,
                eigenvalues: None,
                projectors: None,
                matrix: Some(matrix),
            } => Ok(ObservableSpec::Matrix { matrix }),
            _ => Err(de::Error::custom(
                "observable needs exactly one of: pauli, spin_angle_deg, eigenvalues+projectors, matrix",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub state: MatrixSpec,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhzSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_efficiency: Option<f64>,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_type: ScenarioType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_model: Option<DetectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiencies: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ghz: Option<GhzSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microstate_model: Option<MicrostateModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Configuration problem, tied to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error in '{}': {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const MAX_SAMPLES: u64 = 100_000_000;

impl ScenarioConfig {
    /// Parses UTF-8 JSON; syntax errors report line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(
                format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn minimal(scenario_type: ScenarioType) -> Self {
        Self {
            scenario_type,
            dimension: None,
            state: None,
            state_label: None,
            observable: None,
            sigma: None,
            hamiltonian: None,
            time: None,
            detection_model: None,
            mixture: None,
            angles_deg: None,
            efficiency_grid: None,
            efficiencies: None,
            ghz: None,
            microstate_model: None,
            samples: None,
            seed: None,
        }
    }

    /// Checks that every section the scenario type needs is present and well formed.
    pub fn validate(&self) -> Result<(), ConfigError> {
        use ScenarioType::*;
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("required for {}", self.scenario_type)))
            }
        };
        match self.scenario_type {
            ProbabilityTriple | Luders | MonteCarlo => {
                need(self.state.is_some(), "state")?;
                need(self.observable.is_some(), "observable")?;
                let rho = self.density()?;
                let obs = self.sigma_checked()?;
                same_dim(rho.dim(), obs.dim(), "observable")?;
                self.detection()?;
            }
            Evolve => {
                need(self.state.is_some(), "state")?;
                need(self.hamiltonian.is_some(), "hamiltonian")?;
                need(self.time.is_some(), "time")?;
                let rho = self.density()?;
                let h = parse_observable(self.hamiltonian.as_ref().expect("checked"), "hamiltonian")?;
                same_dim(rho.dim(), h.dim(), "hamiltonian")?;
                if !self.time.is_some_and(f64::is_finite) {
                    return Err(ConfigError::new("time", "must be finite"));
                }
            }
            MixtureDivergence => {
                need(self.mixture.is_some(), "mixture")?;
                need(self.observable.is_some(), "observable")?;
                let m = self.mixture_checked()?;
                let obs = self.sigma_checked()?;
                same_dim(m.dim(), obs.dim(), "observable")?;
                self.detection()?;
            }
            BellScan | ChshScan => {
                let want = if self.scenario_type == BellScan { 3 } else { 4 };
                if self.scenario_type == BellScan {
                    need(self.angles_deg.is_some(), "angles_deg")?;
                }
                if let Some(a) = &self.angles_deg {
                    if a.len() != want {
                        return Err(ConfigError::new("angles_deg", format!("expected {want} angles, got {}", a.len())));
                    }
                    if a.iter().any(|x| !x.is_finite()) {
                        return Err(ConfigError::new("angles_deg", "angles must be finite"));
                    }
                }
                self.grid()?;
                if self.state.is_some() {
                    self.density_dim(4)?;
                }
            }
            GhzQuantum | GhzLocalModel => {
                if self.state.is_some() {
                    self.density_dim(8)?;
                }
                self.ghz_efficiencies()?;
                if let Some(g) = &self.ghz {
                    if !(g.tolerance >= 0.0) {
                        return Err(ConfigError::new("ghz.tolerance", "must be nonnegative"));
                    }
                    for (name, v) in [("ghz.min_efficiency", g.min_efficiency), ("ghz.exact_efficiency", g.exact_efficiency)] {
                        if let Some(v) = v {
                            if !(0.0..=1.0).contains(&v) {
                                return Err(ConfigError::new(name, "must lie in [0, 1]"));
                            }
                        }
                    }
                    if let Some(t) = g.targets {
                        if t.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                            return Err(ConfigError::new("ghz.targets", "correlations must lie in [-1, 1]"));
                        }
                    }
                }
            }
            HvVerify => {
                if let Some(m) = &self.microstate_model {
                    MicrostateModel::new(m.properties().clone(), m.microstates().to_vec())
                        .map_err(|e| ConfigError::new("microstate_model", e.to_string()))?;
                }
            }
            SelfTest => {}
        }
        if let Some(s) = self.samples {
            if s == 0 || s > MAX_SAMPLES {
                return Err(ConfigError::new("samples", format!("must lie in 1..={MAX_SAMPLES}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.state_label.as_deref().unwrap_or("state")
    }

    pub fn samples_or_default(&self) -> u64 {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub(crate) fn density(&self) -> Result<DensityOperator, ConfigError> {
        let spec = self.state.as_ref().ok_or_else(|| ConfigError::new("state", "missing"))?;
        let rho = parse_density(spec, "state")?;
        if let Some(d) = self.dimension {
            if d != rho.dim() {
                return Err(ConfigError::new(
                    "dimension",
                    format!("declared {d} but state is {}x{}", rho.dim(), rho.dim()),
                ));
            }
        }
        Ok(rho)
    }

    fn density_dim(&self, dim: usize) -> Result<DensityOperator, ConfigError> {
        let rho = self.density()?;
        if rho.dim() != dim {
            return Err(ConfigError::new("state", format!("expected dimension {dim}, got {}", rho.dim())));
        }
        Ok(rho)
    }

    /// Two-party state, singlet by default.
    pub(crate) fn two_party_state(&self) -> Result<DensityOperator, ConfigError> {
        match self.state {
            Some(_) => self.density_dim(4),
            None => Ok(singlet()),
        }
    }

    pub(crate) fn ghz_state(&self) -> Result<DensityOperator, ConfigError> {
        match self.state {
            Some(_) => self.density_dim(8),
            None => Ok(ghz_state()),
        }
    }

    pub(crate) fn ghz_efficiencies(&self) -> Result<[f64; 3], ConfigError> {
        let e = self.efficiencies.unwrap_or([1.0; 3]);
        if e.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(ConfigError::new("efficiencies", "must lie in [0, 1]"));
        }
        Ok(e)
    }

    pub(crate) fn ghz_options(&self) -> GhzSearchOptions {
        let g = self.ghz.clone().unwrap_or(GhzSpec {
            targets: None,
            min_efficiency: None,
            exact_efficiency: None,
            tolerance: 0.0,
        });
        GhzSearchOptions {
            targets: g.targets,
            min_efficiency: g.min_efficiency,
            exact_efficiency: g.exact_efficiency,
            tolerance: g.tolerance,
        }
    }

    pub(crate) fn observable_checked(&self) -> Result<SpectralObservable, ConfigError> {
        let spec = self
            .observable
            .as_ref()
            .ok_or_else(|| ConfigError::new("observable", "missing"))?;
        parse_observable(spec, "observable")
    }

    pub(crate) fn mixture_checked(&self) -> Result<ProperMixture, ConfigError> {
        let components = self
            .components()?
            .into_iter()
            .map(|(weight, state, state_label)| MixtureComponent {
                weight,
                state,
                state_label,
            })
            .collect();
        ProperMixture::new(components).map_err(|e| ConfigError::new("mixture", e.to_string()))
    }

    fn sigma_checked(&self) -> Result<GeneralizedObservable, ConfigError> {
        let obs = GeneralizedObservable::new(self.observable_checked()?);
        if let Some(sigma) = &self.sigma {
            Property::new(&obs, sigma).map_err(|e| ConfigError::new("sigma", e.to_string()))?;
        }
        Ok(obs)
    }

    pub(crate) fn detection(&self) -> Result<DetectionModel, ConfigError> {
        parse_detection(self.detection_model.as_ref(), "detection_model")
    }

    pub(crate) fn components(&self) -> Result<Vec<(f64, DensityOperator, String)>, ConfigError> {
        let specs = self.mixture.as_ref().ok_or_else(|| ConfigError::new("mixture", "missing"))?;
        if specs.is_empty() {
            return Err(ConfigError::new("mixture", "needs at least one component"));
        }
        specs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let rho = parse_density(&c.state, &format!("mixture[{i}].state"))?;
                Ok((c.weight, rho, c.label.clone()))
            })
            .collect()
    }

    pub(crate) fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = self
            .efficiency_grid
            .clone()
            .unwrap_or_else(|| (0..=10).map(|k| k as f64 / 10.0).collect());
        if grid.is_empty() {
            return Err(ConfigError::new("efficiency_grid", "empty grid"));
        }
        if grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(ConfigError::new("efficiency_grid", "values must lie in [0, 1]"));
        }
        Ok(grid)
    }
}

fn same_dim(state: usize, other: usize, field: &str) -> Result<(), ConfigError> {
    if state == other {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("dimension {other} does not match state dimension {state}")))
    }
}

pub fn parse_matrix(spec: &MatrixSpec, field: &str) -> Result<ComplexMatrix, ConfigError> {
    let rows: Vec<Vec<Complex64>> = spec
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| ConfigError::new(field, e.to_string()))
}

pub fn matrix_spec(m: &ComplexMatrix) -> MatrixSpec {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn parse_density(spec: &MatrixSpec, field: &str) -> Result<DensityOperator, ConfigError> {
    DensityOperator::new(parse_matrix(spec, field)?).map_err(|e| ConfigError::new(field, e.to_string()))
}

pub fn parse_observable(spec: &ObservableSpec, field: &str) -> Result<SpectralObservable, ConfigError> {
    match spec {
        ObservableSpec::Pauli { pauli: name } => match name.as_str() {
            "X" | "x" => Ok(pauli::observable_x()),
            "Y" | "y" => Ok(pauli::observable_y()),
            "Z" | "z" => Ok(pauli::observable_z()),
            other => Err(ConfigError::new(field, format!("unknown Pauli observable '{other}'"))),
        },
        ObservableSpec::Spin { spin_angle_deg } => {
            if !spin_angle_deg.is_finite() {
                return Err(ConfigError::new(field, "angle must be finite"));
            }
            Ok(pauli::spin_xz(spin_angle_deg.to_radians()))
        }
        ObservableSpec::Spectral {
            eigenvalues,
            projectors,
        } => {
            let projectors = projectors
                .iter()
                .enumerate()
                .map(|(i, p)| parse_matrix(p, &format!("{field}.projectors[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            SpectralObservable::new(eigenvalues.clone(), projectors).map_err(|e| ConfigError::new(field, e.to_string()))
        }
        ObservableSpec::Matrix { matrix } => {
            let m = parse_matrix(matrix, field)?;
            SpectralObservable::from_hermitian(&m).map_err(|e| ConfigError::new(field, e.to_string()))
        }
    }
}

fn parse_detection(spec: Option<&DetectionSpec>, field: &str) -> Result<DetectionModel, ConfigError> {
    match spec {
        None => Ok(DetectionModel::perfect()),
        Some(DetectionSpec::Uniform(d)) => DetectionModel::uniform(*d).map_err(|e| ConfigError::new(field, e.to_string())),
        Some(DetectionSpec::Model(m)) => {
            m.validate().map_err(|e| ConfigError::new(field, e.to_string()))?;
            Ok(m.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_state_names_the_field() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario_type": "probability-triple", "observable": {"pauli": "Z"}}"#)
            .unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "state");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ScenarioConfig::from_json("{\n  \"scenario_type\": \"luders\",\n  oops\n}").unwrap_err();
        assert!(err.field.starts_with("line 3"), "{err}");
        let err = ScenarioConfig::from_json(r#"{"scenario_type": "nonsense"}"#).unwrap_err();
        assert!(err.message.contains("unknown variant"), "{err}");
        let err = ScenarioConfig::from_json(r#"{"scenario_type": "luders", "stat": []}"#).unwrap_err();
        assert!(err.message.contains("unknown field"), "{err}");
    }

    #[test]
    fn observable_forms() {
        let z = parse_observable(&ObservableSpec::Pauli { pauli: "Z".into() }, "o").unwrap();
        let spin0 = parse_observable(&ObservableSpec::Spin { spin_angle_deg: 0.0 }, "o").unwrap();
        assert!(z.matrix().max_abs_diff(&spin0.matrix()) < 1e-15);
        let m = parse_observable(
            &ObservableSpec::Matrix {
                matrix: matrix_spec(&pauli::x()),
            },
            "o",
        )
        .unwrap();
        assert!(m.matrix().max_abs_diff(&pauli::x()) < 1e-14);
        assert!(parse_observable(&ObservableSpec::Pauli { pauli: "W".into() }, "o").is_err());
    }

    #[test]
    fn dimension_must_match_state() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::Luders);
        cfg.state = Some(matrix_spec(&ComplexMatrix::diagonal(&[0.5, 0.5])));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        cfg.dimension = Some(3);
        assert_eq!(cfg.validate().unwrap_err().field, "dimension");
        cfg.dimension = Some(2);
        cfg.validate().unwrap();
    }

    #[test]
    fn observable_dimension_must_match_state() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::ProbabilityTriple);
        cfg.state = Some(matrix_spec(&ComplexMatrix::diagonal(&[0.5, 0.25, 0.25])));
        cfg.observable = Some(ObservableSpec::Pauli { pauli: "Z".into() });
        assert_eq!(cfg.validate().unwrap_err().field, "observable");
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = ScenarioConfig::minimal(ScenarioType::ChshScan);
        cfg.angles_deg = Some(vec![0.0, 45.0, 135.0, 90.0]);
        cfg.detection_model = Some(DetectionSpec::Uniform(0.9));
        cfg.seed = Some(u64::MAX);
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
