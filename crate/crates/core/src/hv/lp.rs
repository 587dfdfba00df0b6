//! Linear feasibility problems over distributions of local strategies.

use serde::{Deserialize, Serialize};

use super::strategy::{enumerate_local_strategies, LocalStrategy};
use crate::error::{EsrError, Result};

/// Default lower bound on the joint-detection mass of every targeted setting tuple.
pub const DEFAULT_MIN_JOINT_DETECTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `coeffs . x  (relation)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Eq => (lhs - self.rhs).abs(),
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
        }
    }
}

/// Nonnegative variables `x`, `sum x = 1`, plus linear side constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    num_vars: usize,
    constraints: Vec<LinearConstraint>,
    /// Minimized when present; pure feasibility otherwise.
    objective: Option<Vec<f64>>,
}

impl FeasibilityProblem {
    /// The probability simplex over `num_vars` weights.
    pub fn simplex(num_vars: usize) -> Self {
        Self {
            num_vars,
            constraints: vec![LinearConstraint {
                name: "normalization".into(),
                coeffs: vec![1.0; num_vars],
                relation: Relation::Eq,
                rhs: 1.0,
            }],
            objective: None,
        }
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Result<()> {
        let name = name.into();
        if coeffs.len() != self.num_vars {
            return Err(EsrError::InvalidConstraint(format!(
                "'{name}' has {} coefficients for {} variables",
                coeffs.len(),
                self.num_vars
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(EsrError::InvalidConstraint(format!("'{name}' has non-finite data")));
        }
        self.constraints.push(LinearConstraint {
            name,
            coeffs,
            relation,
            rhs,
        });
        Ok(())
    }

    /// Pins variable `index` to `value`.
    pub fn fix_variable(&mut self, index: usize, value: f64) -> Result<()> {
        if index >= self.num_vars {
            return Err(EsrError::InvalidConstraint(format!("variable #{index} does not exist")));
        }
        let mut coeffs = vec![0.0; self.num_vars];
        coeffs[index] = 1.0;
        self.add_constraint(format!("x[{index}] = {value}"), coeffs, Relation::Eq, value)
    }

    pub fn set_objective(&mut self, costs: Vec<f64>) -> Result<()> {
        if costs.len() != self.num_vars || costs.iter().any(|c| !c.is_finite()) {
            return Err(EsrError::InvalidConstraint("objective has the wrong length or non-finite costs".into()));
        }
        self.objective = Some(costs);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&[f64]> {
        self.objective.as_deref()
    }

    /// Re-evaluates every constraint on `x` straight from the problem data.
    pub fn residual_report(&self, x: &[f64]) -> ResidualReport {
        let per_constraint: Vec<(String, f64)> = self
            .constraints
            .iter()
            .map(|c| (c.name.clone(), c.violation(x)))
            .collect();
        ResidualReport {
            max_constraint_residual: per_constraint.iter().map(|(_, r)| *r).fold(0.0, f64::max),
            min_weight: x.iter().copied().fold(f64::INFINITY, f64::min),
            weight_sum: x.iter().sum(),
            per_constraint,
        }
    }
}

/// Constraint violations of a candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_constraint_residual: f64,
    pub min_weight: f64,
    pub weight_sum: f64,
    pub per_constraint: Vec<(String, f64)>,
}

impl ResidualReport {
    pub fn certifies(&self, tol: f64) -> bool {
        self.max_constraint_residual <= tol && self.min_weight >= -1e-12 && (self.weight_sum - 1.0).abs() <= tol
    }
}

/// Conditional-on-detection correlation target for one setting per party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTarget {
    pub settings: Vec<usize>,
    pub value: f64,
    /// Accepted half-width around `value`; 0 gives an equality constraint.
    pub tolerance: f64,
}

/// Lower bound (or exact value) on how often `party` is detected at `setting`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConstraint {
    pub party: usize,
    pub setting: usize,
    pub value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySpec {
    pub parties: usize,
    pub settings: usize,
    pub targets: Vec<CorrelationTarget>,
    pub efficiencies: Vec<EfficiencyConstraint>,
    pub min_joint_detection: f64,
}

impl FeasibilitySpec {
    pub fn new(parties: usize, settings: usize) -> Self {
        Self {
            parties,
            settings,
            targets: Vec::new(),
            efficiencies: Vec::new(),
            min_joint_detection: DEFAULT_MIN_JOINT_DETECTION,
        }
    }

    pub fn target(mut self, settings: Vec<usize>, value: f64, tolerance: f64) -> Self {
        self.targets.push(CorrelationTarget {
            settings,
            value,
            tolerance,
        });
        self
    }

    /// Every (party, setting) detected with probability at least `min`.
    pub fn min_efficiency(mut self, min: f64) -> Self {
        self.push_all_efficiencies(min, false);
        self
    }

    /// Every (party, setting) detected with probability exactly `value`.
    pub fn exact_efficiency(mut self, value: f64) -> Self {
        self.push_all_efficiencies(value, true);
        self
    }

    fn push_all_efficiencies(&mut self, value: f64, exact: bool) {
        for party in 0..self.parties {
            for setting in 0..self.settings {
                self.efficiencies.push(EfficiencyConstraint {
                    party,
                    setting,
                    value,
                    exact,
                });
            }
        }
    }
}

/// A feasibility problem whose variable `k` is the weight of `strategies[k]`.
#[derive(Debug, Clone)]
pub struct StrategyLp {
    pub spec: FeasibilitySpec,
    pub strategies: Vec<LocalStrategy>,
    pub problem: FeasibilityProblem,
}

/// Builds the LP whose feasible points are strategy distributions meeting `spec`.
///
/// A ratio target `E[prod | all detected] = t` becomes the linear
/// `E[prod] - t * P(all detected) = 0` (or a pair of inequalities for a
/// tolerance band), and every targeted tuple gets `P(all detected) >= min_joint_detection`.
pub fn build_feasibility_lp(spec: &FeasibilitySpec) -> Result<StrategyLp> {
    for t in &spec.targets {
        if t.settings.len() != spec.parties {
            return Err(EsrError::InvalidConstraint(format!(
                "target names {} settings for {} parties",
                t.settings.len(),
                spec.parties
            )));
        }
        if t.settings.iter().any(|&s| s >= spec.settings) {
            return Err(EsrError::InvalidConstraint(format!("target settings {:?} out of range", t.settings)));
        }
        if !(-1.0..=1.0).contains(&t.value) {
            return Err(EsrError::OutOfRange {
                name: "correlation target".into(),
                value: t.value,
                lo: -1.0,
                hi: 1.0,
            });
        }
        if !(t.tolerance >= 0.0) {
            return Err(EsrError::InvalidConstraint(format!("negative tolerance {}", t.tolerance)));
        }
    }
    for e in &spec.efficiencies {
        if e.party >= spec.parties || e.setting >= spec.settings {
            return Err(EsrError::InvalidConstraint(format!(
                "efficiency constraint for party {} setting {} out of range",
                e.party, e.setting
            )));
        }
        if !(0.0..=1.0).contains(&e.value) {
            return Err(EsrError::OutOfRange {
                name: "efficiency".into(),
                value: e.value,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    if !(spec.min_joint_detection > 0.0 && spec.min_joint_detection <= 1.0) {
        return Err(EsrError::InvalidConstraint(format!(
            "joint-detection lower bound {} must lie in (0, 1]",
            spec.min_joint_detection
        )));
    }

    let strategies = enumerate_local_strategies(spec.parties, spec.settings)?;
    let mut problem = FeasibilityProblem::simplex(strategies.len());

    for t in &spec.targets {
        let tag = format!("{:?}", t.settings);
        let prod: Vec<f64> = strategies.iter().map(|s| f64::from(s.product(&t.settings))).collect();
        let det: Vec<f64> = strategies
            .iter()
            .map(|s| if s.all_detected(&t.settings) { 1.0 } else { 0.0 })
            .collect();
        let band = |c: f64| prod.iter().zip(&det).map(|(p, d)| p - c * d).collect::<Vec<_>>();
        if t.tolerance == 0.0 {
            problem.add_constraint(format!("E{tag} = {}", t.value), band(t.value), Relation::Eq, 0.0)?;
        } else {
            let hi = t.value + t.tolerance;
            let lo = t.value - t.tolerance;
            problem.add_constraint(format!("E{tag} <= {hi}"), band(hi), Relation::Le, 0.0)?;
            problem.add_constraint(format!("E{tag} >= {lo}"), band(lo), Relation::Ge, 0.0)?;
        }
        problem.add_constraint(
            format!("P(detect{tag}) >= {}", spec.min_joint_detection),
            det,
            Relation::Ge,
            spec.min_joint_detection,
        )?;
    }

    for e in &spec.efficiencies {
        let coeffs = strategies
            .iter()
            .map(|s| if s.detected(e.party, e.setting) { 1.0 } else { 0.0 })
            .collect();
        let (rel, sym) = if e.exact { (Relation::Eq, "=") } else { (Relation::Ge, ">=") };
        problem.add_constraint(
            format!("eta[{}][{}] {sym} {}", e.party, e.setting, e.value),
            coeffs,
            rel,
            e.value,
        )?;
    }

    Ok(StrategyLp {
        spec: spec.clone(),
        strategies,
        problem,
    })
}

/// Conditional-on-detection correlation of a strategy distribution, computed
/// directly from the strategies. `None` when the tuple is never jointly detected.
pub fn conditional_correlation(strategies: &[LocalStrategy], weights: &[f64], settings: &[usize]) -> Option<f64> {
    let mut num = 0.0;
    let mut det = 0.0;
    for (s, &w) in strategies.iter().zip(weights) {
        if s.all_detected(settings) {
            det += w;
            num += w * f64::from(s.product(settings));
        }
    }
    (det > 0.0).then(|| num / det)
}

/// Marginal detection probability of `party` at `setting`.
pub fn detection_efficiency(strategies: &[LocalStrategy], weights: &[f64], party: usize, setting: usize) -> f64 {
    strategies
        .iter()
        .zip(weights)
        .filter(|(s, _)| s.detected(party, setting))
        .map(|(_, &w)| w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_by_relation() {
        let c = |relation, rhs| LinearConstraint {
            name: "c".into(),
            coeffs: vec![1.0, 2.0],
            relation,
            rhs,
        };
        let x = [0.5, 0.25];
        assert_eq!(c(Relation::Eq, 1.0).violation(&x), 0.0);
        assert_eq!(c(Relation::Le, 0.75).violation(&x), 0.25);
        assert_eq!(c(Relation::Ge, 0.75).violation(&x), 0.0);
        assert_eq!(c(Relation::Ge, 1.5).violation(&x), 0.5);
    }

    #[test]
    fn add_constraint_checks_length() {
        let mut p = FeasibilityProblem::simplex(3);
        assert!(p.add_constraint("bad", vec![1.0], Relation::Eq, 0.0).is_err());
        assert!(p.fix_variable(5, 1.0).is_err());
        assert!(p.set_objective(vec![1.0; 2]).is_err());
    }

    #[test]
    fn builder_rejects_bad_specs() {
        let spec = FeasibilitySpec::new(2, 2).target(vec![0, 1], 1.5, 0.0);
        assert!(build_feasibility_lp(&spec).is_err());
        let spec = FeasibilitySpec::new(2, 2).target(vec![0, 1], 0.5, -0.1);
        assert!(matches!(build_feasibility_lp(&spec), Err(EsrError::InvalidConstraint(_))));
        let spec = FeasibilitySpec::new(2, 2).target(vec![0], 0.5, 0.0);
        assert!(build_feasibility_lp(&spec).is_err());
        let spec = FeasibilitySpec::new(2, 2).min_efficiency(1.1);
        assert!(build_feasibility_lp(&spec).is_err());
        let spec = FeasibilitySpec::new(4, 4);
        assert!(matches!(build_feasibility_lp(&spec), Err(EsrError::EnumerationBound { .. })));
    }

    #[test]
    fn builder_row_counts() {
        let spec = FeasibilitySpec::new(2, 2)
            .target(vec![0, 0], 0.5, 0.0)
            .target(vec![0, 1], 0.5, 0.1)
            .min_efficiency(0.5);
        let lp = build_feasibility_lp(&spec).unwrap();
        // normalization + (1 + 1) + (2 + 1) + 4 efficiencies
        assert_eq!(lp.problem.constraints().len(), 1 + 2 + 3 + 4);
        assert_eq!(lp.problem.num_vars(), 81);
    }

    #[test]
    fn direct_evaluators() {
        let strategies = enumerate_local_strategies(1, 1).unwrap();
        let w = [0.25, 0.5, 0.25];
        assert_eq!(detection_efficiency(&strategies, &w, 0, 0), 0.5);
        assert_eq!(conditional_correlation(&strategies, &w, &[0]), Some(0.0));
        assert_eq!(conditional_correlation(&strategies, &[0.0, 1.0, 0.0], &[0]), None);
    }
}
