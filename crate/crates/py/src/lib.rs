//! Python bindings: states, observables, detection models, the probability
//! triple, state updates, Bell/GHZ analyses and the scenario driver.

use std::collections::BTreeMap;

use esr_core::bell::{
    efficiency_scan, ghz_local_model_search, ghz_quantum_correlations, GhzScenario, GhzSearchOptions, GhzSearchOutcome,
    InequalityAngles, TwoPartyScenario, GHZ_TRIPLE_NAMES,
};
use esr_core::linalg::pauli;
use esr_core::measurement::{self, Outcome, OutcomeSampler};
use esr_core::scenario::{self, OutputFormat, RunError, RunOverrides, ScenarioConfig, SelfTestOptions};
use esr_core::{Complex64, ComplexMatrix, EsrError, GeneralizedObservable, Property};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: EsrError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    ComplexMatrix::from_rows(&rows).map_err(value_err)
}

/// Validated density operator.
#[pyclass(name = "DensityMatrix", module = "esr_sim", frozen)]
struct PyDensity(esr_core::DensityOperator);

#[pymethods]
impl PyDensity {
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        esr_core::DensityOperator::new(matrix(rows)?).map(Self).map_err(value_err)
    }

    /// `|psi><psi|` for a (not necessarily normalized) state vector.
    #[staticmethod]
    fn from_pure(psi: Vec<Complex64>) -> PyResult<Self> {
        esr_core::DensityOperator::from_pure(&psi).map(Self).map_err(value_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn to_list(&self) -> Vec<Vec<Complex64>> {
        self.0.matrix().to_rows()
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(dim={}, purity={:.6})", self.0.dim(), self.0.purity())
    }
}

/// Observable with a finite spectrum; the no-detection outcome is implicit.
#[pyclass(name = "Observable", module = "esr_sim", frozen)]
struct PyObservable(esr_core::SpectralObservable);

#[pymethods]
impl PyObservable {
    #[new]
    fn new(eigenvalues: Vec<f64>, projectors: Vec<Vec<Vec<Complex64>>>) -> PyResult<Self> {
        let projectors = projectors.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        esr_core::SpectralObservable::new(eigenvalues, projectors)
            .map(Self)
            .map_err(value_err)
    }

    /// `"X"`, `"Y"` or `"Z"`.
    #[staticmethod]
    fn pauli(name: &str) -> PyResult<Self> {
        match name {
            "X" | "x" => Ok(Self(pauli::observable_x())),
            "Y" | "y" => Ok(Self(pauli::observable_y())),
            "Z" | "z" => Ok(Self(pauli::observable_z())),
            other => Err(PyValueError::new_err(format!("unknown Pauli observable '{other}'"))),
        }
    }

    /// `cos(theta) Z + sin(theta) X`, angle in radians.
    #[staticmethod]
    fn spin(theta: f64) -> Self {
        Self(pauli::spin_xz(theta))
    }

    #[staticmethod]
    fn from_hermitian(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        esr_core::SpectralObservable::from_hermitian(&matrix(rows)?)
            .map(Self)
            .map_err(value_err)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!("Observable(eigenvalues={:?})", self.0.eigenvalues())
    }
}

/// Detection probabilities `p^d(state, eigenvalue)` with a default.
#[pyclass(name = "DetectionModel", module = "esr_sim", from_py_object)]
#[derive(Clone)]
struct PyDetection(esr_core::DetectionModel);

#[pymethods]
impl PyDetection {
    #[new]
    #[pyo3(signature = (default = 1.0))]
    fn new(default: f64) -> PyResult<Self> {
        esr_core::DetectionModel::uniform(default).map(Self).map_err(value_err)
    }

    fn set(&mut self, state: &str, eigenvalue: f64, value: f64) -> PyResult<()> {
        self.0.set(state, eigenvalue, value).map_err(value_err)
    }

    fn get(&self, state: &str, eigenvalue: f64) -> f64 {
        self.0.get(state, eigenvalue)
    }
}

fn with_property<T>(
    obs: &PyObservable,
    sigma: Option<Vec<f64>>,
    f: impl FnOnce(&Property<'_>) -> Result<T, EsrError>,
) -> PyResult<T> {
    let g = GeneralizedObservable::new(obs.0.clone());
    let prop = match sigma {
        Some(s) => Property::new(&g, &s).map_err(value_err)?,
        None => Property::full(&g),
    };
    f(&prop).map_err(value_err)
}

/// `(overall, detection, conditional)`; undefined entries are `None`.
#[pyfunction]
#[pyo3(signature = (rho, state_label, observable, sigma = None, detection = None))]
fn probability_triple(
    rho: &PyDensity,
    state_label: &str,
    observable: &PyObservable,
    sigma: Option<Vec<f64>>,
    detection: Option<PyDetection>,
) -> PyResult<(f64, Option<f64>, Option<f64>)> {
    let dm = detection.map_or_else(esr_core::DetectionModel::perfect, |d| d.0);
    let t = with_property(observable, sigma, |p| measurement::probability_triple(&rho.0, state_label, p, &dm))?;
    Ok((t.overall, t.detection, t.conditional))
}

/// Post-measurement state after "yes".
#[pyfunction]
#[pyo3(signature = (rho, state_label, observable, sigma = None, detection = None))]
fn luders_update(
    rho: &PyDensity,
    state_label: &str,
    observable: &PyObservable,
    sigma: Option<Vec<f64>>,
    detection: Option<PyDetection>,
) -> PyResult<PyDensity> {
    let dm = detection.map_or_else(esr_core::DetectionModel::perfect, |d| d.0);
    with_property(observable, sigma, |p| measurement::luders_update(&rho.0, state_label, p, &dm)).map(PyDensity)
}

#[pyfunction]
fn unitary_evolve(rho: &PyDensity, hamiltonian: &PyObservable, t: f64) -> PyResult<PyDensity> {
    measurement::unitary_evolve(&rho.0, &hamiltonian.0, t)
        .map(PyDensity)
        .map_err(value_err)
}

/// `[(eigenvalue, p), ..., (None, p_a0)]`.
#[pyfunction]
#[pyo3(signature = (rho, state_label, observable, detection = None))]
fn outcome_distribution(
    rho: &PyDensity,
    state_label: &str,
    observable: &PyObservable,
    detection: Option<PyDetection>,
) -> PyResult<Vec<(Option<f64>, f64)>> {
    let dm = detection.map_or_else(esr_core::DetectionModel::perfect, |d| d.0);
    let g = GeneralizedObservable::new(observable.0.clone());
    let dist = measurement::outcome_distribution(&rho.0, state_label, &g, &dm).map_err(value_err)?;
    Ok(dist.into_iter().map(|(o, p)| (as_option(o), p)).collect())
}

fn as_option(o: Outcome) -> Option<f64> {
    match o {
        Outcome::Value(v) => Some(v),
        Outcome::NoDetection => None,
    }
}

/// `n` seeded draws; `None` marks a non-detection.
#[pyfunction]
#[pyo3(signature = (rho, state_label, observable, detection, n, seed = 0))]
fn sample_outcomes(
    rho: &PyDensity,
    state_label: &str,
    observable: &PyObservable,
    detection: PyDetection,
    n: usize,
    seed: u64,
) -> PyResult<Vec<Option<f64>>> {
    let g = GeneralizedObservable::new(observable.0.clone());
    let sampler = OutcomeSampler::new(&rho.0, state_label, &g, &detection.0).map_err(value_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| as_option(sampler.sample(&mut rng))).collect())
}

/// `(d, lhs, rhs, satisfied)`.
type ScanTuple = (f64, f64, f64, bool);

/// Singlet efficiency scan; returns `([(d, lhs, rhs, satisfied)], threshold)`.
#[pyfunction]
#[pyo3(signature = (angles_deg, grid))]
fn efficiency_scan_singlet(angles_deg: Vec<f64>, grid: Vec<f64>) -> PyResult<(Vec<ScanTuple>, Option<f64>)> {
    let angles = InequalityAngles::from_degrees(&angles_deg).map_err(value_err)?;
    let template = TwoPartyScenario::singlet_uniform(angles.settings(), 1.0).map_err(value_err)?;
    let scan = efficiency_scan(&template, &angles, &grid).map_err(value_err)?;
    let rows = scan.rows.iter().map(|r| (r.efficiency, r.lhs, r.rhs, r.satisfied)).collect();
    Ok((rows, scan.threshold))
}

/// Conditional GHZ correlations keyed by triple name.
#[pyfunction]
#[pyo3(signature = (efficiencies = [1.0, 1.0, 1.0]))]
fn ghz_correlations(efficiencies: [f64; 3]) -> PyResult<BTreeMap<String, f64>> {
    let g = GhzScenario::new(esr_core::bell::ghz_state(), efficiencies).map_err(value_err)?;
    let c = ghz_quantum_correlations(&g).map_err(value_err)?;
    Ok(GHZ_TRIPLE_NAMES.iter().map(|s| s.to_string()).zip(c).collect())
}

/// Searches for a local trichotomic model of the GHZ correlations.
#[pyfunction]
#[pyo3(signature = (min_efficiency = None, exact_efficiency = None))]
fn ghz_local_model<'py>(
    py: Python<'py>,
    min_efficiency: Option<f64>,
    exact_efficiency: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = GhzSearchOptions {
        min_efficiency,
        exact_efficiency,
        ..GhzSearchOptions::default()
    };
    let out = PyDict::new(py);
    match ghz_local_model_search(&GhzScenario::standard(), &opts).map_err(value_err)? {
        GhzSearchOutcome::Feasible(m) => {
            out.set_item("feasible", true)?;
            out.set_item("correlations", m.correlations.to_vec())?;
            out.set_item("efficiencies", m.efficiencies.iter().map(|e| e.to_vec()).collect::<Vec<_>>())?;
            out.set_item("support_size", m.support.len())?;
            out.set_item("max_residual", m.max_residual)?;
            out.set_item("weights", m.weights)?;
        }
        GhzSearchOutcome::Infeasible { phase_one_infeasibility } => {
            out.set_item("feasible", false)?;
            out.set_item("phase_one_infeasibility", phase_one_infeasibility)?;
        }
    }
    Ok(out)
}

/// Runs a JSON scenario and returns the encoded report (`"csv"` or `"json"`).
#[pyfunction]
#[pyo3(signature = (config_json, format = "json", seed = None, samples = None))]
fn run_scenario(config_json: &str, format: &str, seed: Option<u64>, samples: Option<u64>) -> PyResult<String> {
    let format: OutputFormat = format.parse().map_err(PyValueError::new_err)?;
    let run = || -> Result<String, RunError> {
        let cfg = ScenarioConfig::from_json(config_json)?;
        let report = scenario::run_scenario(&cfg, RunOverrides { seed, samples })?;
        report.encode(format).map_err(RunError::Output)
    };
    run().map_err(|e| match e {
        RunError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })
}

/// Runs the built-in verification suites; returns `True` if all pass.
#[pyfunction]
#[pyo3(signature = (instances = 1000))]
fn self_test(instances: usize) -> PyResult<bool> {
    let opts = SelfTestOptions {
        instances,
        ..SelfTestOptions::default()
    };
    scenario::run_self_test(&opts).map(|r| r.passed()).map_err(value_err)
}

#[pymodule]
pub fn esr_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyDetection>()?;
    m.add_function(wrap_pyfunction!(probability_triple, m)?)?;
    m.add_function(wrap_pyfunction!(luders_update, m)?)?;
    m.add_function(wrap_pyfunction!(unitary_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(outcome_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(sample_outcomes, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_scan_singlet, m)?)?;
    m.add_function(wrap_pyfunction!(ghz_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(ghz_local_model, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(self_test, m)?)?;
    Ok(())
}
