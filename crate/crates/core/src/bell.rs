//! Correlation experiments with trichotomic observables.
//!
//! Each wing measures a spin observable extended with the no-registration
//! outcome, valued 0 in product expectations. Overall correlations count
//! undetected runs; conditional correlations keep only runs where every
//! party registered a result.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EsrError, Result};
use crate::hv::{
    build_feasibility_lp, conditional_correlation, detection_efficiency, enumerate_local_strategies, solve_lp_simplex,
    FeasibilitySpec, LocalStrategy, LpOutcome,
};
use crate::linalg::{pauli, tensor_product, ComplexMatrix, DensityOperator, SpectralObservable};
use crate::measurement::{DetectionModel, PROBABILITY_FLOOR};

/// Slack allowed on `margin >= 0` before an inequality counts as violated.
pub const INEQUALITY_TOL: f64 = 1e-12;

/// Bisection stops once the bracket is narrower than this.
pub const THRESHOLD_BRACKET: f64 = 1e-9;

/// `(|01> - |10>) / sqrt(2)`.
pub fn singlet() -> DensityOperator {
    DensityOperator::from_real_pure(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]).expect("normalized")
}

/// `(|000> + |111>) / sqrt(2)`.
pub fn ghz_state() -> DensityOperator {
    let mut v = [0.0; 8];
    v[0] = FRAC_1_SQRT_2;
    v[7] = FRAC_1_SQRT_2;
    DensityOperator::from_real_pure(&v).expect("normalized")
}

/// `(|000> - |111>) / sqrt(2)`.
pub fn ghz_minus_state() -> DensityOperator {
    let mut v = [0.0; 8];
    v[0] = FRAC_1_SQRT_2;
    v[7] = -FRAC_1_SQRT_2;
    DensityOperator::from_real_pure(&v).expect("normalized")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    Overall,
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub value: f64,
    pub kind: CorrelationKind,
}

/// Two spin-1/2 wings measured along directions in the X-Z plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPartyScenario {
    joint_state: DensityOperator,
    state_label: String,
    /// Polar angles in radians; the observable is `cos(t) Z + sin(t) X`.
    settings: BTreeMap<String, f64>,
    detection_a: DetectionModel,
    detection_b: DetectionModel,
}

impl TwoPartyScenario {
    pub fn new(
        joint_state: DensityOperator,
        state_label: impl Into<String>,
        settings: BTreeMap<String, f64>,
        detection_a: DetectionModel,
        detection_b: DetectionModel,
    ) -> Result<Self> {
        if joint_state.dim() != 4 {
            return Err(EsrError::DimensionMismatch {
                expected: 4,
                actual: joint_state.dim(),
            });
        }
        if let Some((name, v)) = settings.iter().find(|(_, v)| !v.is_finite()) {
            return Err(EsrError::OutOfRange {
                name: format!("angle '{name}'"),
                value: *v,
                lo: f64::MIN,
                hi: f64::MAX,
            });
        }
        Ok(Self {
            joint_state,
            state_label: state_label.into(),
            settings,
            detection_a,
            detection_b,
        })
    }

    /// Singlet with the same uniform efficiency `d` on both wings.
    pub fn singlet_uniform(settings: BTreeMap<String, f64>, d: f64) -> Result<Self> {
        let dm = DetectionModel::uniform(d)?;
        Self::new(singlet(), "singlet", settings, dm.clone(), dm)
    }

    pub fn joint_state(&self) -> &DensityOperator {
        &self.joint_state
    }

    pub fn state_label(&self) -> &str {
        &self.state_label
    }

    pub fn settings(&self) -> &BTreeMap<String, f64> {
        &self.settings
    }

    pub fn with_detection(&self, detection_a: DetectionModel, detection_b: DetectionModel) -> Self {
        Self {
            detection_a,
            detection_b,
            ..self.clone()
        }
    }

    fn angle(&self, name: &str) -> Result<f64> {
        self.settings
            .get(name)
            .copied()
            .ok_or_else(|| EsrError::UnknownSetting(name.to_owned()))
    }

    /// Overall and joint-detection operators for settings `(a, b)`.
    fn operators(&self, a: &str, b: &str) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let oa = pauli::spin_xz(self.angle(a)?);
        let ob = pauli::spin_xz(self.angle(b)?);
        let label = &self.state_label;
        let value_a = wing_operator(&oa, |lam| lam * self.detection_a.get(label, lam));
        let value_b = wing_operator(&ob, |lam| lam * self.detection_b.get(label, lam));
        let det_a = wing_operator(&oa, |lam| self.detection_a.get(label, lam));
        let det_b = wing_operator(&ob, |lam| self.detection_b.get(label, lam));
        Ok((tensor_product(&value_a, &value_b), tensor_product(&det_a, &det_b)))
    }
}

/// `sum_lambda f(lambda) P_lambda`.
fn wing_operator(obs: &SpectralObservable, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let ev = obs.eigenvalues();
    obs.weighted_sum(|k| f(ev[k]))
}

/// `E(A0(a), B0(b))`, counting undetected runs as 0.
pub fn trichotomic_expectation(sc: &TwoPartyScenario, a: &str, b: &str) -> Result<CorrelationResult> {
    let (value, _) = sc.operators(a, b)?;
    Ok(CorrelationResult {
        value: sc.joint_state.expectation(&value),
        kind: CorrelationKind::Overall,
    })
}

/// Correlation among runs where both wings registered a result.
pub fn conditional_expectation(sc: &TwoPartyScenario, a: &str, b: &str) -> Result<CorrelationResult> {
    let (value, det) = sc.operators(a, b)?;
    let mass = sc.joint_state.expectation(&det);
    if mass <= PROBABILITY_FLOOR {
        return Err(EsrError::ZeroDetectionMass(mass));
    }
    Ok(CorrelationResult {
        value: sc.joint_state.expectation(&value) / mass,
        kind: CorrelationKind::Conditional,
    })
}

/// Probability that both wings register a result at `(a, b)`.
pub fn joint_detection_probability(sc: &TwoPartyScenario, a: &str, b: &str) -> Result<f64> {
    let (_, det) = sc.operators(a, b)?;
    Ok(sc.joint_state.expectation(&det))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub margin: f64,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            lhs,
            rhs,
            satisfied: margin >= -INEQUALITY_TOL,
            margin,
        }
    }
}

fn check_correlation(name: &str, v: f64) -> Result<()> {
    if !(v.abs() <= 1.0 + INEQUALITY_TOL) {
        return Err(EsrError::OutOfRange {
            name: name.to_owned(),
            value: v,
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// `|E_ab - E_ac| <= 1 + E_bc`.
pub fn modified_bell_report(e_ab: f64, e_ac: f64, e_bc: f64) -> Result<InequalityReport> {
    check_correlation("E_ab", e_ab)?;
    check_correlation("E_ac", e_ac)?;
    check_correlation("E_bc", e_bc)?;
    Ok(InequalityReport::new((e_ab - e_ac).abs(), 1.0 + e_bc))
}

/// `|E_ab - E_ac| + |E_db + E_dc| <= 2`.
pub fn modified_chsh_report(e_ab: f64, e_ac: f64, e_db: f64, e_dc: f64) -> Result<InequalityReport> {
    check_correlation("E_ab", e_ab)?;
    check_correlation("E_ac", e_ac)?;
    check_correlation("E_db", e_db)?;
    check_correlation("E_dc", e_dc)?;
    Ok(InequalityReport::new(chsh_lhs(e_ab, e_ac, e_db, e_dc), 2.0))
}

fn chsh_lhs(e_ab: f64, e_ac: f64, e_db: f64, e_dc: f64) -> f64 {
    (e_ab - e_ac).abs() + (e_db + e_dc).abs()
}

/// Angle sets for the two inequalities, in radians. Alice measures `a`
/// (and `d` for CHSH); Bob measures `b`, `c`. The Bell form also needs Alice at `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InequalityAngles {
    Bell { a: f64, b: f64, c: f64 },
    Chsh { a: f64, b: f64, c: f64, d: f64 },
}

impl InequalityAngles {
    /// Angles maximizing the singlet CHSH value: a = 0, b = 45, c = 135, d = 90 degrees.
    pub fn tsirelson() -> Self {
        InequalityAngles::Chsh {
            a: 0.0,
            b: PI / 4.0,
            c: 3.0 * PI / 4.0,
            d: PI / 2.0,
        }
    }

    pub fn settings(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            InequalityAngles::Bell { a, b, c } => vec![("a", a), ("b", b), ("c", c)],
            InequalityAngles::Chsh { a, b, c, d } => vec![("a", a), ("b", b), ("c", c), ("d", d)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    /// Degrees in `a, b, c[, d]` order.
    pub fn from_degrees(deg: &[f64]) -> Result<Self> {
        let r: Vec<f64> = deg.iter().map(|d| d.to_radians()).collect();
        match *r.as_slice() {
            [a, b, c] => Ok(InequalityAngles::Bell { a, b, c }),
            [a, b, c, d] => Ok(InequalityAngles::Chsh { a, b, c, d }),
            _ => Err(EsrError::InvalidConstraint(format!(
                "expected 3 (Bell) or 4 (CHSH) angles, got {}",
                deg.len()
            ))),
        }
    }
}

/// Evaluates the modified inequality named by `angles` on `sc` (overall correlations).
pub fn inequality_report(sc: &TwoPartyScenario, angles: &InequalityAngles) -> Result<InequalityReport> {
    let sc = TwoPartyScenario {
        settings: angles.settings(),
        ..sc.clone()
    };
    let e = |x: &str, y: &str| trichotomic_expectation(&sc, x, y).map(|r| r.value);
    match angles {
        InequalityAngles::Bell { .. } => modified_bell_report(e("a", "b")?, e("a", "c")?, e("b", "c")?),
        InequalityAngles::Chsh { .. } => modified_chsh_report(e("a", "b")?, e("a", "c")?, e("d", "b")?, e("d", "c")?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub efficiency: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyScan {
    pub rows: Vec<ScanRow>,
    /// Largest uniform efficiency at which the inequality still holds;
    /// `None` if it holds even at perfect detection.
    pub threshold: Option<f64>,
}

/// Sweeps a uniform efficiency `d` (same on both wings, outcome independent)
/// over `grid`, then locates the violation threshold by bisection.
pub fn efficiency_scan(template: &TwoPartyScenario, angles: &InequalityAngles, grid: &[f64]) -> Result<EfficiencyScan> {
    if grid.is_empty() {
        return Err(EsrError::EmptyGrid);
    }
    if let Some(&d) = grid.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(EsrError::OutOfRange {
            name: "efficiency".into(),
            value: d,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let at = |d: f64| -> Result<InequalityReport> {
        let dm = DetectionModel::uniform(d)?;
        inequality_report(&template.with_detection(dm.clone(), dm), angles)
    };
    let rows = grid
        .iter()
        .map(|&d| {
            at(d).map(|r| ScanRow {
                efficiency: d,
                lhs: r.lhs,
                rhs: r.rhs,
                satisfied: r.satisfied,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let threshold = if at(1.0)?.satisfied {
        None
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > THRESHOLD_BRACKET {
            let mid = 0.5 * (lo + hi);
            if at(mid)?.satisfied {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    Ok(EfficiencyScan { rows, threshold })
}

/// Setting indices for the GHZ experiment.
pub const GHZ_X: usize = 0;
pub const GHZ_Y: usize = 1;

/// XXX, XYY, YXY, YYX.
pub const GHZ_TRIPLES: [[usize; 3]; 4] = [
    [GHZ_X, GHZ_X, GHZ_X],
    [GHZ_X, GHZ_Y, GHZ_Y],
    [GHZ_Y, GHZ_X, GHZ_Y],
    [GHZ_Y, GHZ_Y, GHZ_X],
];

pub const GHZ_TRIPLE_NAMES: [&str; 4] = ["XXX", "XYY", "YXY", "YYX"];

/// Three qubits measured in X or Y, each party with an outcome-independent efficiency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzScenario {
    joint_state: DensityOperator,
    efficiencies: [f64; 3],
}

impl GhzScenario {
    pub fn new(joint_state: DensityOperator, efficiencies: [f64; 3]) -> Result<Self> {
        if joint_state.dim() != 8 {
            return Err(EsrError::DimensionMismatch {
                expected: 8,
                actual: joint_state.dim(),
            });
        }
        if let Some(&e) = efficiencies.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(EsrError::OutOfRange {
                name: "efficiency".into(),
                value: e,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self {
            joint_state,
            efficiencies,
        })
    }

    pub fn standard() -> Self {
        Self::new(ghz_state(), [1.0; 3]).expect("valid")
    }

    pub fn joint_state(&self) -> &DensityOperator {
        &self.joint_state
    }

    pub fn efficiencies(&self) -> [f64; 3] {
        self.efficiencies
    }
}

/// Conditional correlations in `GHZ_TRIPLES` order.
pub fn ghz_quantum_correlations(g: &GhzScenario) -> Result<[f64; 4]> {
    let obs = [pauli::observable_x(), pauli::observable_y()];
    let mut out = [0.0; 4];
    for (slot, triple) in out.iter_mut().zip(GHZ_TRIPLES) {
        let mut value = ComplexMatrix::identity(1);
        let mut det = ComplexMatrix::identity(1);
        for (party, &s) in triple.iter().enumerate() {
            let eta = g.efficiencies[party];
            value = tensor_product(&value, &wing_operator(&obs[s], |lam| lam * eta));
            det = tensor_product(&det, &wing_operator(&obs[s], |_| eta));
        }
        let mass = g.joint_state.expectation(&det);
        if mass <= PROBABILITY_FLOOR {
            return Err(EsrError::ZeroDetectionMass(mass));
        }
        *slot = g.joint_state.expectation(&value) / mass;
    }
    Ok(out)
}

/// Constraints on a GHZ local-model search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzSearchOptions {
    /// Conditional correlations to reproduce; defaults to the scenario's quantum values.
    pub targets: Option<[f64; 4]>,
    pub min_efficiency: Option<f64>,
    pub exact_efficiency: Option<f64>,
    pub tolerance: f64,
}

impl Default for GhzSearchOptions {
    fn default() -> Self {
        Self {
            targets: None,
            min_efficiency: None,
            exact_efficiency: None,
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhzLocalModel {
    /// Strategies with nonzero weight, paired with their weights.
    pub support: Vec<(LocalStrategy, f64)>,
    /// Weights over all 729 strategies, in enumeration order.
    pub weights: Vec<f64>,
    /// `[party][setting]` marginal detection probabilities.
    pub efficiencies: [[f64; 2]; 3],
    /// Conditional correlations recomputed from the strategies.
    pub correlations: [f64; 4],
    pub targets: [f64; 4],
    /// Largest deviation found by the independent re-evaluation.
    pub max_residual: f64,
    pub lp_max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GhzSearchOutcome {
    Feasible(GhzLocalModel),
    Infeasible { phase_one_infeasibility: f64 },
}

/// Searches for a distribution over the 729 deterministic trichotomic
/// strategies reproducing the GHZ conditional correlations.
pub fn ghz_local_model_search(g: &GhzScenario, opts: &GhzSearchOptions) -> Result<GhzSearchOutcome> {
    let targets = match opts.targets {
        Some(t) => t,
        None => ghz_quantum_correlations(g)?,
    };
    let mut spec = FeasibilitySpec::new(3, 2);
    for (triple, &t) in GHZ_TRIPLES.iter().zip(&targets) {
        spec = spec.target(triple.to_vec(), t, opts.tolerance);
    }
    if let Some(e) = opts.min_efficiency {
        spec = spec.min_efficiency(e);
    }
    if let Some(e) = opts.exact_efficiency {
        spec = spec.exact_efficiency(e);
    }
    let lp = build_feasibility_lp(&spec)?;
    let point = match solve_lp_simplex(&lp.problem)? {
        LpOutcome::Infeasible {
            phase_one_infeasibility,
            ..
        } => return Ok(GhzSearchOutcome::Infeasible { phase_one_infeasibility }),
        LpOutcome::Feasible(p) => p,
    };

    let w = &point.weights;
    let mut correlations = [0.0; 4];
    let mut max_residual = 0.0f64;
    for (k, triple) in GHZ_TRIPLES.iter().enumerate() {
        let c = conditional_correlation(&lp.strategies, w, triple).unwrap_or(f64::NAN);
        correlations[k] = c;
        let excess = ((c - targets[k]).abs() - opts.tolerance).max(0.0);
        max_residual = max_residual.max(if excess.is_nan() { f64::INFINITY } else { excess });
    }
    let mut efficiencies = [[0.0; 2]; 3];
    for (party, row) in efficiencies.iter_mut().enumerate() {
        for (setting, slot) in row.iter_mut().enumerate() {
            *slot = detection_efficiency(&lp.strategies, w, party, setting);
            if let Some(e) = opts.min_efficiency {
                max_residual = max_residual.max(e - *slot);
            }
            if let Some(e) = opts.exact_efficiency {
                max_residual = max_residual.max((e - *slot).abs());
            }
        }
    }
    max_residual = max_residual.max((w.iter().sum::<f64>() - 1.0).abs());
    let support = lp
        .strategies
        .iter()
        .zip(w)
        .filter(|(_, &x)| x > 0.0)
        .map(|(s, &x)| (s.clone(), x))
        .collect();

    Ok(GhzSearchOutcome::Feasible(GhzLocalModel {
        support,
        weights: w.clone(),
        efficiencies,
        correlations,
        targets,
        max_residual,
        lp_max_residual: point.residuals.max_constraint_residual,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundExpression {
    /// Modified CHSH over all 81 trichotomic strategies.
    Chsh,
    /// CHSH over the 16 strategies without undetected outcomes.
    ChshDichotomic,
    /// `lhs - rhs` of the modified Bell inequality over the 27 assignments with `B(x) = -A(x)`.
    BellAnticorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub max: f64,
    pub evaluated: usize,
    /// Assignments attaining the maximum.
    pub maximizers: Vec<Vec<i8>>,
}

/// Two-party CHSH strategies: slots are `[A(a), A(d), B(b), B(c)]`.
pub fn chsh_strategies() -> Vec<LocalStrategy> {
    enumerate_local_strategies(2, 2).expect("4 slots")
}

/// `(E_ab, E_ac, E_db, E_dc)` of a distribution over [`chsh_strategies`]-shaped strategies.
pub fn chsh_correlations(strategies: &[LocalStrategy], weights: &[f64]) -> [f64; 4] {
    let mut e = [0.0; 4];
    for (s, &w) in strategies.iter().zip(weights) {
        let (aa, ad) = (f64::from(s.outcome(0, 0)), f64::from(s.outcome(0, 1)));
        let (bb, bc) = (f64::from(s.outcome(1, 0)), f64::from(s.outcome(1, 1)));
        e[0] += w * aa * bb;
        e[1] += w * aa * bc;
        e[2] += w * ad * bb;
        e[3] += w * ad * bc;
    }
    e
}

/// `[A(a), A(b), A(c)]` with Bob's outcomes fixed to `B(x) = -A(x)`.
pub fn anticorrelated_bell_assignments() -> Vec<[i8; 3]> {
    enumerate_local_strategies(1, 3)
        .expect("3 slots")
        .iter()
        .map(|s| [s.outcome(0, 0), s.outcome(0, 1), s.outcome(0, 2)])
        .collect()
}

/// `(E_ab, E_ac, E_bc)` of a distribution over anticorrelated assignments.
pub fn anticorrelated_bell_correlations(assignments: &[[i8; 3]], weights: &[f64]) -> [f64; 3] {
    let mut e = [0.0; 3];
    for (x, &w) in assignments.iter().zip(weights) {
        let [a, b, c] = x.map(f64::from);
        e[0] += w * a * (-b);
        e[1] += w * a * (-c);
        e[2] += w * b * (-c);
    }
    e
}

pub fn brute_force_trichotomic_bound(expr: BoundExpression) -> BoundResult {
    let mut values: Vec<(Vec<i8>, f64)> = Vec::new();
    match expr {
        BoundExpression::Chsh | BoundExpression::ChshDichotomic => {
            for s in chsh_strategies() {
                if expr == BoundExpression::ChshDichotomic && s.outcomes().contains(&0) {
                    continue;
                }
                let [ab, ac, db, dc] = chsh_correlations(std::slice::from_ref(&s), &[1.0]);
                values.push((s.outcomes().to_vec(), chsh_lhs(ab, ac, db, dc)));
            }
        }
        BoundExpression::BellAnticorrelated => {
            for x in anticorrelated_bell_assignments() {
                let [ab, ac, bc] = anticorrelated_bell_correlations(&[x], &[1.0]);
                values.push((x.to_vec(), (ab - ac).abs() - (1.0 + bc)));
            }
        }
    }
    let max = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let maximizers = values.iter().filter(|(_, v)| *v == max).map(|(x, _)| x.clone()).collect();
    BoundResult {
        max,
        evaluated: values.len(),
        maximizers,
    }
}

/// `cos(t) Z + sin(t) X` as a matrix, for callers that want the raw operator.
pub fn spin_matrix(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    &pauli::z().scale(Complex64::new(c, 0.0)) + &pauli::x().scale(Complex64::new(s, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angles(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_radians())).collect()
    }

    #[test]
    fn singlet_correlations() {
        let sc = TwoPartyScenario::singlet_uniform(angles(&[("a", 0.0), ("b", 90.0)]), 1.0).unwrap();
        assert!((trichotomic_expectation(&sc, "a", "a").unwrap().value + 1.0).abs() < 1e-15);
        assert!(trichotomic_expectation(&sc, "a", "b").unwrap().value.abs() < 1e-15);

        let sc = TwoPartyScenario::singlet_uniform(angles(&[("a", 0.0)]), 0.9).unwrap();
        assert!((trichotomic_expectation(&sc, "a", "a").unwrap().value + 0.81).abs() < 1e-15);
        let c = conditional_expectation(&sc, "a", "a").unwrap();
        assert_eq!(c.kind, CorrelationKind::Conditional);
        assert!((c.value + 1.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_setting() {
        let sc = TwoPartyScenario::singlet_uniform(angles(&[("a", 0.0)]), 1.0).unwrap();
        assert!(matches!(trichotomic_expectation(&sc, "a", "z"), Err(EsrError::UnknownSetting(_))));
    }

    #[test]
    fn zero_mass_conditional() {
        let sc = TwoPartyScenario::singlet_uniform(angles(&[("a", 0.0)]), 0.0).unwrap();
        assert!(matches!(conditional_expectation(&sc, "a", "a"), Err(EsrError::ZeroDetectionMass(_))));
    }

    #[test]
    fn outcome_dependent_efficiency_biases_post_selection() {
        // Orthogonal settings: all four outcome pairs have probability 1/4.
        // Detection 1 for +1, 0.5 for -1 on both wings gives
        // (0.25 - 0.125 - 0.125 + 0.0625) / (0.25 + 0.125 + 0.125 + 0.0625) = 1/9.
        let dm = DetectionModel::perfect().with("singlet", -1.0, 0.5).unwrap();
        let sc = TwoPartyScenario::new(singlet(), "singlet", angles(&[("a", 0.0), ("b", 90.0)]), dm.clone(), dm)
            .unwrap();
        let c = conditional_expectation(&sc, "a", "b").unwrap().value;
        assert!((c - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn bell_report_examples() {
        let r = modified_bell_report(0.0, 0.0, 0.0).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.margin, 1.0);
        let r = modified_bell_report(-0.5, 0.5, -0.5).unwrap();
        assert!(!r.satisfied);
        assert_eq!((r.lhs, r.rhs), (1.0, 0.5));
        let s = 0.49;
        let r = modified_bell_report(-0.5 * s, 0.5 * s, -0.5 * s).unwrap();
        assert!(r.satisfied);
        assert!(modified_bell_report(1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn bell_violated_by_singlet_at_perfect_detection() {
        let sc = TwoPartyScenario::singlet_uniform(BTreeMap::new(), 1.0).unwrap();
        let ang = InequalityAngles::from_degrees(&[0.0, 60.0, 120.0]).unwrap();
        let r = inequality_report(&sc, &ang).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-14 && (r.rhs - 0.5).abs() < 1e-14);
        assert!(!r.satisfied);
        let sc = TwoPartyScenario::singlet_uniform(BTreeMap::new(), 0.7).unwrap();
        assert!(inequality_report(&sc, &ang).unwrap().satisfied);
    }

    #[test]
    fn chsh_report_examples() {
        let r = modified_chsh_report(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(r.satisfied && r.margin == 2.0);
        let sc = TwoPartyScenario::singlet_uniform(BTreeMap::new(), 1.0).unwrap();
        let r = inequality_report(&sc, &InequalityAngles::tsirelson()).unwrap();
        assert!((r.lhs - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(!r.satisfied);
        let sc = TwoPartyScenario::singlet_uniform(BTreeMap::new(), 2f64.powf(-0.25)).unwrap();
        let r = inequality_report(&sc, &InequalityAngles::tsirelson()).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-9);
        assert!(r.satisfied);
    }

    #[test]
    fn scan_threshold_and_rows() {
        let sc = TwoPartyScenario::singlet_uniform(BTreeMap::new(), 1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let scan = efficiency_scan(&sc, &InequalityAngles::tsirelson(), &grid).unwrap();
        assert_eq!(scan.rows.len(), 11);
        assert!(scan.rows.windows(2).all(|w| w[0].lhs <= w[1].lhs));
        assert!(scan.rows[5].satisfied && !scan.rows[10].satisfied);
        assert!((scan.threshold.unwrap() - 2f64.powf(-0.25)).abs() < 1e-6);

        assert!(matches!(
            efficiency_scan(&sc, &InequalityAngles::tsirelson(), &[]),
            Err(EsrError::EmptyGrid)
        ));
        assert!(efficiency_scan(&sc, &InequalityAngles::tsirelson(), &[1.5]).is_err());

        // Aligned settings never violate; no threshold.
        let flat = InequalityAngles::Chsh {
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
        };
        assert_eq!(efficiency_scan(&sc, &flat, &[1.0]).unwrap().threshold, None);
    }

    #[test]
    fn ghz_correlations() {
        let c = ghz_quantum_correlations(&GhzScenario::standard()).unwrap();
        for (v, e) in c.iter().zip([1.0, -1.0, -1.0, -1.0]) {
            assert!((v - e).abs() < 1e-14, "{c:?}");
        }
        let c = ghz_quantum_correlations(&GhzScenario::new(ghz_minus_state(), [1.0; 3]).unwrap()).unwrap();
        for (v, e) in c.iter().zip([-1.0, 1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14, "{c:?}");
        }
        let c = ghz_quantum_correlations(&GhzScenario::new(DensityOperator::basis(8, 0), [0.8; 3]).unwrap()).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let c = ghz_quantum_correlations(&GhzScenario::new(ghz_state(), [0.5, 0.7, 0.9]).unwrap()).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!(GhzScenario::new(singlet(), [1.0; 3]).is_err());
    }

    #[test]
    fn brute_force_bounds() {
        let r = brute_force_trichotomic_bound(BoundExpression::Chsh);
        assert_eq!((r.max, r.evaluated), (2.0, 81));
        let r = brute_force_trichotomic_bound(BoundExpression::ChshDichotomic);
        assert_eq!((r.max, r.evaluated), (2.0, 16));
        let r = brute_force_trichotomic_bound(BoundExpression::BellAnticorrelated);
        assert_eq!((r.max, r.evaluated), (0.0, 27));
        assert!(!r.maximizers.is_empty());
    }

    #[test]
    fn unconstrained_bell_is_violable_classically() {
        // A(a)=1, A(b)=0, B(b)=1, B(c)=-1: E_ab=1, E_ac=-1, E_bc=0.
        let r = modified_bell_report(1.0, -1.0, 0.0).unwrap();
        assert!(!r.satisfied);
    }

    #[test]
    fn spin_matrix_matches_observable() {
        let t = 0.7;
        assert!(spin_matrix(t).max_abs_diff(&pauli::spin_xz(t).matrix()) < 1e-15);
    }
}
