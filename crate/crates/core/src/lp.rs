//! Small linear programs over nonnegative variables, posed row by row and
//! handed to `microlp` (bounded revised simplex with LU factorization).

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("solver failure: {0}")]
    Solver(String),
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// `minimize cᵀx` (or maximize) subject to linear rows, with `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    maximize: bool,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            maximize: false,
            rows: Vec::new(),
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            maximize: true,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Adds `coeffs · x (relation) rhs`. `coeffs` may be shorter than the
    /// number of variables; missing entries are zero.
    pub fn add_constraint(&mut self, mut coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        coeffs.resize(self.num_vars(), 0.0);
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Sparse convenience form of [`add_constraint`](Self::add_constraint).
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for (j, c) in terms {
            coeffs[*j] += c;
        }
        self.add_constraint(coeffs, relation, rhs);
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
        let direction = if self.maximize {
            OptimizationDirection::Maximize
        } else {
            OptimizationDirection::Minimize
        };
        let mut problem = Problem::new(direction);
        let vars: Vec<_> = self
            .objective
            .iter()
            .map(|c| problem.add_var(*c, (0.0, f64::INFINITY)))
            .collect();
        for row in &self.rows {
            let mut expr = LinearExpr::empty();
            for (v, c) in vars.iter().zip(&row.coeffs) {
                if *c != 0.0 {
                    expr.add(*v, *c);
                }
            }
            let op = match row.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Ge => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr, op, row.rhs);
        }
        let outcome = problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => LpError::Infeasible,
            microlp::Error::Unbounded => LpError::Unbounded,
            other => LpError::Solver(format!("{other:?}")),
        })?;
        let Some(sol) = outcome.solution() else {
            return Err(LpError::Solver("interrupted".into()));
        };
        let x: Vec<f64> = vars.iter().map(|v| sol.var_value(*v).max(0.0)).collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y, x + y = 3, x ≥ 1, y ≥ 0.5 → (2.5, 0.5), 3.5
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 3.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Ge, 1.0);
        lp.add_constraint(vec![0.0, 1.0], Relation::Ge, 0.5);
        let s = lp.solve().unwrap();
        assert!((s.objective - 3.5).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // min x, -x ≤ -2 → x = 2
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![-1.0], Relation::Le, -2.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpError::Infeasible));

        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add_constraint(vec![0.0, 1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic Beale cycling example.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.05).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }
}
