//! Outer-approximation (Kelley) solver for coverage programs of the form
//!
//! ```text
//! minimize   cᵀw
//! subject to Σ_i μ_i ρ_i^{P_r}[z] + a_rᵀw ≤ b_r     for every risk row r
//!            z_k ≥ g(ξ_k - w_k),  0 ≤ w_k ≤ u_k
//! ```
//!
//! Each risk measure has an exact linear epigraph (auxiliary `s`, `t`
//! variables), so only the perception `g` is approximated by tangent cuts.
//! Monotonicity of the risk measures makes the epigraph relaxation tight.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, Relation};
use crate::model::LossShape;
use crate::risk::RiskMeasure;

const MAX_ROUNDS: usize = 400;
const CUT_TOL: f64 = 1e-12;

pub(crate) struct RiskRow {
    pub mu: Vec<f64>,
    pub probs: Vec<f64>,
    pub linear: Vec<f64>,
    pub rhs: f64,
}

pub(crate) struct CutProgram<'a> {
    pub grid: &'a [f64],
    pub shape: LossShape,
    pub types: &'a [RiskMeasure],
    pub cost: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<RiskRow>,
}

pub(crate) enum CutOutcome {
    Solved { w: Vec<f64>, objective: f64 },
    Infeasible,
}

impl CutProgram<'_> {
    pub fn solve(&self) -> Result<CutOutcome> {
        let m = self.grid.len();
        let mut cuts: Vec<Vec<f64>> = self
            .grid
            .iter()
            .map(|xi| match self.shape {
                LossShape::Identity => vec![0.0],
                _ => vec![0.0, 0.5 * xi, *xi],
            })
            .collect();
        let scale = 1.0 + self.shape.value(self.grid[m - 1]);
        for _ in 0..MAX_ROUNDS {
            let w = match self.solve_relaxation(&cuts)? {
                Some(w) => w,
                None => return Ok(CutOutcome::Infeasible),
            };
            let mut added = false;
            for k in 0..m {
                let r = (self.grid[k] - w[k]).max(0.0);
                let z = w[m + k];
                if self.shape.value(r) - z > CUT_TOL * scale
                    && !cuts[k].iter().any(|c| (c - r).abs() <= 1e-15 * (1.0 + r))
                {
                    cuts[k].push(r);
                    added = true;
                }
            }
            if !added {
                let w: Vec<f64> = w[..m]
                    .iter()
                    .zip(&self.upper)
                    .map(|(v, u)| v.clamp(0.0, *u))
                    .collect();
                let objective = w.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
                return Ok(CutOutcome::Solved { w, objective });
            }
        }
        Err(Error::Numerical(
            "coverage cutting-plane loop did not converge".into(),
        ))
    }

    fn solve_relaxation(&self, cuts: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
        let m = self.grid.len();
        // layout: w | z | per (row, type) auxiliaries
        let layout = RiskLayout::new(self.types, &self.rows, m, 2 * m);
        let mut objective = vec![0.0; layout.n_vars];
        objective[..m].copy_from_slice(&self.cost);
        let mut lp = LinearProgram::minimize(objective);
        for (k, points) in cuts.iter().enumerate().take(m) {
            lp.add_sparse(&[(k, 1.0)], Relation::Le, self.upper[k]);
            for &r in points {
                // z_k ≥ g(r) + g'(r)(ξ_k - w_k - r)
                let slope = self.shape.derivative(r);
                lp.add_sparse(
                    &[(m + k, 1.0), (k, slope)],
                    Relation::Ge,
                    self.shape.value(r) + slope * (self.grid[k] - r),
                );
            }
        }
        layout.add_rows(&mut lp, self.types, &self.rows, m, 0);
        solve_lp(&lp)
    }
}

fn solve_lp(lp: &LinearProgram) -> Result<Option<Vec<f64>>> {
    match lp.solve() {
        Ok(sol) => Ok(Some(sol.x)),
        Err(LpError::Infeasible) => Ok(None),
        Err(e) => Err(Error::Numerical(format!("coverage program: {e}"))),
    }
}

/// Auxiliary-variable blocks of the risk epigraphs, per (row, type).
struct RiskLayout {
    n_vars: usize,
    blocks: Vec<Vec<Option<usize>>>,
}

impl RiskLayout {
    fn new(types: &[RiskMeasure], rows: &[RiskRow], m: usize, first_free: usize) -> Self {
        let mut n_vars = first_free;
        let mut blocks = Vec::new();
        for row in rows {
            let mut per_type = Vec::new();
            for (t, mu) in types.iter().zip(&row.mu) {
                if *mu == 0.0 {
                    per_type.push(None);
                    continue;
                }
                per_type.push(Some(n_vars));
                n_vars += match t {
                    RiskMeasure::Expectation => 0,
                    RiskMeasure::SemiDeviation { .. } => m,
                    RiskMeasure::AverageValueAtRisk { .. } => m + 1,
                };
            }
            blocks.push(per_type);
        }
        Self { n_vars, blocks }
    }

    /// `Σ_i μ_i ρ_i[z] + aᵀv ≤ b` with `z` at `z0..z0+m` and the linear
    /// term on `v` at `lin0..lin0+m`.
    fn add_rows(&self, lp: &mut LinearProgram, types: &[RiskMeasure], rows: &[RiskRow], z0: usize, lin0: usize) {
        let m = rows.first().map_or(0, |r| r.probs.len());
        for (row, per_type) in rows.iter().zip(&self.blocks) {
            let mut total = vec![0.0; self.n_vars];
            for (k, a) in row.linear.iter().enumerate() {
                total[lin0 + k] += a;
            }
            for ((t, mu), start) in types.iter().zip(&row.mu).zip(per_type) {
                let Some(start) = *start else { continue };
                match *t {
                    RiskMeasure::Expectation => {
                        for k in 0..m {
                            total[z0 + k] += mu * row.probs[k];
                        }
                    }
                    RiskMeasure::SemiDeviation { kappa } => {
                        for k in 0..m {
                            total[z0 + k] += mu * row.probs[k];
                            total[start + k] += mu * kappa * row.probs[k];
                            // s_k ≥ z_k - Σ_j P_j z_j
                            let mut terms = vec![(start + k, 1.0), (z0 + k, -1.0)];
                            for j in 0..m {
                                if row.probs[j] != 0.0 {
                                    terms.push((z0 + j, row.probs[j]));
                                }
                            }
                            merge_terms(&mut terms);
                            lp.add_sparse(&terms, Relation::Ge, 0.0);
                        }
                    }
                    RiskMeasure::AverageValueAtRisk { alpha } => {
                        let t_var = start + m;
                        total[t_var] += mu;
                        for k in 0..m {
                            total[start + k] += mu * row.probs[k] / alpha;
                            // s_k ≥ z_k - t
                            lp.add_sparse(
                                &[(start + k, 1.0), (z0 + k, -1.0), (t_var, 1.0)],
                                Relation::Ge,
                                0.0,
                            );
                        }
                    }
                }
            }
            lp.add_constraint(total, Relation::Le, row.rhs);
        }
    }
}

/// The same kind of program posed in the perceived losses `z_k = g(ξ_k - w_k)`:
///
/// ```text
/// minimize   Σ_k c_k (ξ_k - g⁻¹(z_k))
/// subject to Σ_i μ_i ρ_i^{P_r}[z] + a_rᵀz ≤ b_r,   0 ≤ z_k ≤ g(ξ_k)
/// ```
///
/// Risk rows are exact; only the convex coverage cost `ξ - g⁻¹(z)` is
/// approximated by tangent cuts.
pub(crate) struct PerceptionProgram<'a> {
    pub grid: &'a [f64],
    pub shape: LossShape,
    pub types: &'a [RiskMeasure],
    pub cost: Vec<f64>,
    pub rows: Vec<RiskRow>,
}

impl PerceptionProgram<'_> {
    fn coverage(&self, k: usize, z: f64) -> f64 {
        let xi = self.grid[k];
        (xi - self.shape.value_inverse(z.max(0.0))).clamp(0.0, xi)
    }

    fn coverage_slope(&self, k: usize, z: f64) -> f64 {
        let r = self.shape.value_inverse(z).min(self.grid[k]);
        -1.0 / self.shape.derivative(r)
    }

    /// Returns the coverage plan and the attained `Σ c_k w_k`.
    pub fn solve(&self) -> Result<Option<(Vec<f64>, f64)>> {
        let m = self.grid.len();
        let top: Vec<f64> = self.grid.iter().map(|xi| self.shape.value(*xi)).collect();
        let mut cuts: Vec<Vec<f64>> = top
            .iter()
            .map(|t| match self.shape {
                LossShape::Identity => vec![*t],
                _ => vec![1e-6 * t, 0.05 * t, 0.25 * t, 0.5 * t, *t],
            })
            .collect();
        let scale = 1.0 + self.grid[m - 1];
        for _ in 0..MAX_ROUNDS {
            // layout: z | y | auxiliaries
            let layout = RiskLayout::new(self.types, &self.rows, m, 2 * m);
            let mut objective = vec![0.0; layout.n_vars];
            objective[m..2 * m].copy_from_slice(&self.cost);
            let mut lp = LinearProgram::minimize(objective);
            for k in 0..m {
                lp.add_sparse(&[(k, 1.0)], Relation::Le, top[k]);
                for &z in cuts[k].iter().filter(|z| **z > 0.0) {
                    // y_k ≥ w(z) + w'(z)(z_k - z)
                    let slope = self.coverage_slope(k, z);
                    lp.add_sparse(
                        &[(m + k, 1.0), (k, -slope)],
                        Relation::Ge,
                        self.coverage(k, z) - slope * z,
                    );
                }
            }
            layout.add_rows(&mut lp, self.types, &self.rows, 0, 0);
            let Some(sol) = solve_lp(&lp)? else {
                return Ok(None);
            };
            let mut added = false;
            for k in 0..m {
                if self.cost[k] <= 0.0 {
                    continue;
                }
                let z = sol[k].clamp(0.0, top[k]);
                let gap = self.coverage(k, z) - sol[m + k];
                let probe = z.max(1e-10 * top[k]);
                if gap > CUT_TOL * scale
                    && !cuts[k].iter().any(|c| (c - probe).abs() <= 1e-15 * (1.0 + probe))
                {
                    cuts[k].push(probe);
                    added = true;
                }
            }
            if !added {
                let w: Vec<f64> = (0..m).map(|k| self.coverage(k, sol[k].clamp(0.0, top[k]))).collect();
                let objective = w.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
                return Ok(Some((w, objective)));
            }
        }
        Err(Error::Numerical(
            "perception cutting-plane loop did not converge".into(),
        ))
    }
}

fn merge_terms(terms: &mut Vec<(usize, f64)>) {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for &(i, v) in terms.iter() {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => out.push((i, v)),
        }
    }
    *terms = out;
}
