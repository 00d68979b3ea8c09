//! Order-1 Wasserstein distance between type distributions under the ground
//! metric `|i - j|`, with its Kantorovich-Rubinstein dual potential.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::model::TypeDistribution;

/// Maximizing potential of `max_{b ∈ B} Σ b_i (μ_i - μ⁰_i)` where
/// `B = { b : |b_i - b_j| ≤ |i - j| }`, normalized so that `b_n = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotential {
    pub b: Vec<f64>,
    pub value: f64,
}

/// `W₁(μ, μ⁰)` by the cumulative-sum closed form.
pub fn w1(mu: &TypeDistribution, mu0: &TypeDistribution) -> Result<f64> {
    check_len("type distribution", mu0.len(), mu.len())?;
    Ok(w1_raw(mu.weights(), mu0.weights()))
}

pub(crate) fn w1_raw(mu: &[f64], mu0: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut total = 0.0;
    for k in 0..mu.len().saturating_sub(1) {
        cum += mu[k] - mu0[k];
        total += cum.abs();
    }
    total
}

/// Solves the Kantorovich-Rubinstein dual as a linear program.
///
/// On the line it suffices to constrain neighbours, `|b_i - b_{i+1}| ≤ 1`.
/// Optimal adjacent increments are vertices of `[-1, 1]`, so they are
/// rounded to `{-1, 0, 1}` and the potential is rebuilt from `b_n = 0`,
/// which makes the returned `b` feasible exactly.
pub fn w1_dual(mu: &TypeDistribution, mu0: &TypeDistribution) -> Result<DualPotential> {
    check_len("type distribution", mu0.len(), mu.len())?;
    let n = mu.len();
    let diff: Vec<f64> = mu
        .weights()
        .iter()
        .zip(mu0.weights())
        .map(|(a, b)| a - b)
        .collect();
    if n == 1 {
        return Ok(DualPotential {
            b: vec![0.0],
            value: 0.0,
        });
    }
    // y_i = b_i + n keeps the variables nonnegative; the shift does not
    // change the objective because Σ diff = 0.
    let shift = n as f64;
    let mut lp = LinearProgram::maximize(diff.clone());
    for i in 0..n - 1 {
        lp.add_sparse(&[(i, 1.0), (i + 1, -1.0)], Relation::Le, 1.0);
        lp.add_sparse(&[(i, -1.0), (i + 1, 1.0)], Relation::Le, 1.0);
    }
    lp.add_sparse(&[(n - 1, 1.0)], Relation::Eq, shift);
    let sol = lp
        .solve()
        .map_err(|e| Error::Internal(format!("transport dual program failed: {e}")))?;
    let mut b = vec![0.0; n];
    for i in (0..n - 1).rev() {
        let step = (sol.x[i] - sol.x[i + 1]).round().clamp(-1.0, 1.0);
        b[i] = b[i + 1] + step;
    }
    let value = b.iter().zip(&diff).map(|(p, d)| p * d).sum();
    Ok(DualPotential { b, value })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Result<TypeDistribution> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(
            "simplex projection needs a nonempty finite vector".into(),
        ));
    }
    TypeDistribution::normalized(project_simplex_raw(v))
}

pub(crate) fn project_simplex_raw(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
