//! Two-phase dense tableau simplex with Bland's rule.
//!
//! Phase one minimizes the sum of artificial variables; a positive optimum
//! means the problem is infeasible. Phase two (only when the problem carries
//! an objective) then minimizes the user objective over the feasible set.
//! The basic solution is finally re-solved from the original constraint
//! data, which removes most of the round-off accumulated by pivoting.

use serde::{Deserialize, Serialize};

use super::lp::{FeasibilityProblem, Relation, ResidualReport};
use crate::error::{EsrError, Result};

pub const MAX_VARIABLES: usize = 2000;
pub const MAX_CONSTRAINTS: usize = 200;
pub const MAX_PIVOTS: usize = 1_000_000;

/// Residual bound a returned point must meet.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasiblePoint {
    pub weights: Vec<f64>,
    pub objective: Option<f64>,
    pub pivots: usize,
    pub residuals: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpOutcome {
    Feasible(FeasiblePoint),
    /// Phase one ended with a positive sum of artificials.
    Infeasible { phase_one_infeasibility: f64, pivots: usize },
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible(_))
    }

    pub fn point(&self) -> Option<&FeasiblePoint> {
        match self {
            LpOutcome::Feasible(p) => Some(p),
            LpOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Original,
    Slack,
    Artificial,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    pivots: usize,
}

enum StepResult {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.kinds.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols() + 1;
        let p = self.t[r][c];
        for j in 0..width {
            self.t[r][j] /= p;
        }
        self.t[r][c] = 1.0;
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..width {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for j in 0..width {
                self.obj[j] -= f * pivot_row[j];
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs Bland's rule until optimal; `allow` filters entering columns.
    fn optimize(&mut self, allow: impl Fn(ColumnKind) -> bool) -> Result<StepResult> {
        let rhs = self.cols();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(EsrError::PivotLimit(MAX_PIVOTS));
            }
            let entering = (0..self.cols()).find(|&j| allow(self.kinds[j]) && self.obj[j] < -PIVOT_EPS);
            let Some(c) = entering else {
                return Ok(StepResult::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[c];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = row[rhs].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                        if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Ok(StepResult::Unbounded),
            }
        }
    }
}

/// Standard-form data: rows with nonnegative right-hand sides.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    relations: Vec<Relation>,
}

fn standardize(p: &FeasibilityProblem) -> StandardForm {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut relations = Vec::new();
    for c in p.constraints() {
        if c.rhs < 0.0 {
            a.push(c.coeffs.iter().map(|x| -x).collect());
            b.push(-c.rhs);
            relations.push(match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            });
        } else {
            a.push(c.coeffs.clone());
            b.push(c.rhs);
            relations.push(c.relation);
        }
    }
    StandardForm { a, b, relations }
}

/// Solves `A_B x_B = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            if f != 0.0 {
                for j in col..n {
                    m[i][j] -= f * m[col][j];
                }
                rhs[i] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

/// Finds a point of `problem`, minimizing its objective when it has one.
pub fn solve_lp_simplex(problem: &FeasibilityProblem) -> Result<LpOutcome> {
    let n = problem.num_vars();
    let m = problem.constraints().len();
    if n > MAX_VARIABLES || m > MAX_CONSTRAINTS || n == 0 {
        return Err(EsrError::LpTooLarge {
            variables: n,
            constraints: m,
            max_variables: MAX_VARIABLES,
            max_constraints: MAX_CONSTRAINTS,
        });
    }
    let sf = standardize(problem);

    // Column layout: originals, one slack/surplus per inequality, one artificial per Ge/Eq row.
    let mut kinds = vec![ColumnKind::Original; n];
    let mut slack_of = vec![None; m];
    for (i, rel) in sf.relations.iter().enumerate() {
        if *rel != Relation::Eq {
            slack_of[i] = Some(kinds.len());
            kinds.push(ColumnKind::Slack);
        }
    }
    let mut art_of = vec![None; m];
    for (i, rel) in sf.relations.iter().enumerate() {
        if *rel != Relation::Le {
            art_of[i] = Some(kinds.len());
            kinds.push(ColumnKind::Artificial);
        }
    }
    let cols = kinds.len();

    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&sf.a[i]);
        t[i][cols] = sf.b[i];
        if let Some(s) = slack_of[i] {
            t[i][s] = if sf.relations[i] == Relation::Le { 1.0 } else { -1.0 };
        }
        match art_of[i] {
            Some(a) => {
                t[i][a] = 1.0;
                basis[i] = a;
            }
            None => basis[i] = slack_of[i].expect("Le rows carry a slack"),
        }
    }

    // Phase one objective: sum of artificials, expressed in nonbasic terms.
    let mut obj = vec![0.0; cols + 1];
    for i in 0..m {
        if art_of[i].is_some() {
            for j in 0..=cols {
                obj[j] -= t[i][j];
            }
        }
    }
    for a in art_of.iter().flatten() {
        obj[*a] = 0.0;
    }

    let mut tab = Tableau {
        t,
        obj,
        basis,
        kinds,
        pivots: 0,
    };
    if let StepResult::Unbounded = tab.optimize(|_| true)? {
        return Err(EsrError::Unbounded);
    }
    let infeasibility = -tab.obj[cols];
    if infeasibility > FEASIBILITY_TOL {
        return Ok(LpOutcome::Infeasible {
            phase_one_infeasibility: infeasibility,
            pivots: tab.pivots,
        });
    }

    // Drive zero-level artificials out of the basis; rows where that is
    // impossible are redundant and dropped.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.kinds[tab.basis[r]] == ColumnKind::Artificial {
            let replacement = (0..cols)
                .filter(|&j| tab.kinds[j] != ColumnKind::Artificial)
                .max_by(|&i, &j| tab.t[r][i].abs().total_cmp(&tab.t[r][j].abs()))
                .filter(|&j| tab.t[r][j].abs() > 1e-9);
            match replacement {
                Some(j) => tab.pivot(r, j),
                None => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    let mut objective_value = None;
    if let Some(costs) = problem.objective() {
        let mut obj = vec![0.0; cols + 1];
        obj[..n].copy_from_slice(costs);
        for (i, &b) in tab.basis.iter().enumerate() {
            let cb = if b < n { costs[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..=cols {
                    obj[j] -= cb * tab.t[i][j];
                }
            }
        }
        tab.obj = obj;
        if let StepResult::Unbounded = tab.optimize(|k| k != ColumnKind::Artificial)? {
            return Err(EsrError::Unbounded);
        }
    }

    let mut weights = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            weights[b] = tab.t[i][cols];
        }
    }

    if let Some(polished) = polish(&sf, &tab, n, &slack_of) {
        let before = problem.residual_report(&clip(&weights)).max_constraint_residual;
        let after = problem.residual_report(&clip(&polished)).max_constraint_residual;
        if after <= before && polished.iter().all(|&x| x > -FEASIBILITY_TOL) {
            weights = polished;
        }
    }
    let weights = clip(&weights);

    if let Some(costs) = problem.objective() {
        objective_value = Some(costs.iter().zip(&weights).map(|(c, x)| c * x).sum());
    }
    let residuals = problem.residual_report(&weights);
    Ok(LpOutcome::Feasible(FeasiblePoint {
        weights,
        objective: objective_value,
        pivots: tab.pivots,
        residuals,
    }))
}

fn clip(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v < 0.0 && v > -1e-9 { 0.0 } else { v }).collect()
}

/// Re-solves the final basis against the original rows. Skipped when
/// redundant rows were dropped, since the basis matrix is then not square.
fn polish(sf: &StandardForm, tab: &Tableau, n: usize, slack_of: &[Option<usize>]) -> Option<Vec<f64>> {
    let m = sf.a.len();
    if tab.t.len() != m {
        return None;
    }
    let column = |i: usize, j: usize| -> f64 {
        if j < n {
            sf.a[i][j]
        } else if slack_of[i] == Some(j) {
            if sf.relations[i] == Relation::Le {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    };
    let mat: Vec<Vec<f64>> = (0..m).map(|i| tab.basis.iter().map(|&j| column(i, j)).collect()).collect();
    let xb = solve_dense(mat, sf.b.clone())?;
    let mut x = vec![0.0; n];
    for (k, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[k];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_simplex() {
        let p = FeasibilityProblem::simplex(1);
        let out = solve_lp_simplex(&p).unwrap();
        let pt = out.point().unwrap();
        assert_eq!(pt.weights, vec![1.0]);
        assert!(pt.residuals.certifies(1e-12));
    }

    #[test]
    fn two_equalities() {
        // x1 + x2 = 1 (normalization), x1 - x2 = 1
        let mut p = FeasibilityProblem::simplex(2);
        p.add_constraint("diff", vec![1.0, -1.0], Relation::Eq, 1.0).unwrap();
        let pt = solve_lp_simplex(&p).unwrap().point().cloned().unwrap();
        assert!((pt.weights[0] - 1.0).abs() < 1e-15);
        assert!(pt.weights[1].abs() < 1e-15);
    }

    #[test]
    fn weight_above_one_is_infeasible() {
        let mut p = FeasibilityProblem::simplex(3);
        p.fix_variable(1, 2.0).unwrap();
        match solve_lp_simplex(&p).unwrap() {
            LpOutcome::Infeasible {
                phase_one_infeasibility, ..
            } => assert!(phase_one_infeasibility > 0.5),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        // -x0 <= -0.7  <=>  x0 >= 0.7
        let mut p = FeasibilityProblem::simplex(2);
        p.add_constraint("flip", vec![-1.0, 0.0], Relation::Le, -0.7).unwrap();
        let pt = solve_lp_simplex(&p).unwrap().point().cloned().unwrap();
        assert!(pt.weights[0] >= 0.7 - 1e-12);
        assert!(pt.residuals.certifies(1e-9));
    }

    #[test]
    fn objective_is_minimized() {
        let mut p = FeasibilityProblem::simplex(3);
        p.set_objective(vec![3.0, 1.0, 2.0]).unwrap();
        let pt = solve_lp_simplex(&p).unwrap().point().cloned().unwrap();
        assert_eq!(pt.weights, vec![0.0, 1.0, 0.0]);
        assert_eq!(pt.objective, Some(1.0));

        // maximize x0 subject to x0 <= 0.4
        let mut p = FeasibilityProblem::simplex(2);
        p.add_constraint("cap", vec![1.0, 0.0], Relation::Le, 0.4).unwrap();
        p.set_objective(vec![-1.0, 0.0]).unwrap();
        let pt = solve_lp_simplex(&p).unwrap().point().cloned().unwrap();
        assert!((pt.weights[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn redundant_rows_tolerated() {
        let mut p = FeasibilityProblem::simplex(2);
        p.add_constraint("dup", vec![2.0, 2.0], Relation::Eq, 2.0).unwrap();
        let out = solve_lp_simplex(&p).unwrap();
        assert!(out.point().unwrap().residuals.certifies(1e-12));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, embedded in a box: cycles under the textbook rule.
        let mut p = FeasibilityProblem::simplex(5);
        p.add_constraint("r1", vec![0.25, -60.0, -0.04, 9.0, 0.0], Relation::Le, 0.0).unwrap();
        p.add_constraint("r2", vec![0.5, -90.0, -0.02, 3.0, 0.0], Relation::Le, 0.0).unwrap();
        p.add_constraint("r3", vec![0.0, 0.0, 1.0, 0.0, 0.0], Relation::Le, 1.0).unwrap();
        p.set_objective(vec![-0.75, 150.0, -0.02, 6.0, 0.0]).unwrap();
        let out = solve_lp_simplex(&p).unwrap();
        let pt = out.point().unwrap();
        assert!(pt.residuals.certifies(1e-9));
        assert!(pt.pivots < 100);
    }

    #[test]
    fn size_limits() {
        let p = FeasibilityProblem::simplex(MAX_VARIABLES + 1);
        assert!(matches!(solve_lp_simplex(&p), Err(EsrError::LpTooLarge { .. })));
        let mut p = FeasibilityProblem::simplex(2);
        for k in 0..MAX_CONSTRAINTS {
            p.add_constraint(format!("c{k}"), vec![1.0, 0.0], Relation::Le, 1.0).unwrap();
        }
        assert!(matches!(solve_lp_simplex(&p), Err(EsrError::LpTooLarge { .. })));
    }
}
