#![allow(dead_code)]

use rand::Rng;
use riskdesign::model::*;
use riskdesign::risk::RiskMeasure;

pub const GRID: [f64; 3] = [1.0, 2.0, 3.0];
pub const P_LOW: [f64; 3] = [0.3, 0.4, 0.3];
pub const P_HIGH: [f64; 3] = [0.5, 0.3, 0.2];

pub fn linear_model() -> OutcomeModel {
    OutcomeModel::linear(OutcomeGrid::new(GRID.to_vec()).unwrap(), P_LOW.to_vec(), P_HIGH.to_vec()).unwrap()
}

pub fn dist(w: &[f64]) -> TypeDistribution {
    TypeDistribution::new(w.to_vec()).unwrap()
}

/// Interval actions, quadratic investment: interior optima.
pub fn smooth_with(m: f64, kappa: f64, mu0: &[f64]) -> Scenario {
    let types = TypeSpace::new(vec![
        RiskMeasure::Expectation,
        RiskMeasure::SemiDeviation { kappa },
    ])
    .unwrap();
    Scenario::new(
        linear_model(),
        types,
        dist(mu0),
        DisutilitySpec::new(LossShape::Quadratic, m, InvestmentCost::Quadratic).unwrap(),
        3.0,
        1.0,
        ActionSet::Interval { lo: 0.0, hi: 1.0 },
    )
    .unwrap()
}

/// Same scenario with the action rows swapped, so `(∂P/∂x)/P` increases
/// along the grid.
pub fn mlr_true_smooth() -> Scenario {
    let model =
        OutcomeModel::linear(OutcomeGrid::new(GRID.to_vec()).unwrap(), P_HIGH.to_vec(), P_LOW.to_vec()).unwrap();
    let base = smooth();
    Scenario::new(
        model,
        base.types().clone(),
        base.baseline().clone(),
        *base.disutility(),
        base.threshold(),
        base.design_cost(),
        base.actions().clone(),
    )
    .unwrap()
}

pub fn smooth() -> Scenario {
    smooth_with(2.0, 1.0, &[0.5, 0.5])
}

/// Two actions, linear investment.
pub fn moral_hazard() -> Scenario {
    let types = TypeSpace::new(vec![
        RiskMeasure::Expectation,
        RiskMeasure::SemiDeviation { kappa: 1.0 },
    ])
    .unwrap();
    Scenario::new(
        linear_model(),
        types,
        dist(&[0.5, 0.5]),
        DisutilitySpec::new(LossShape::Quadratic, 0.9, InvestmentCost::Linear).unwrap(),
        3.0,
        0.5,
        ActionSet::Discrete(vec![0.0, 1.0]),
    )
    .unwrap()
}

pub fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // some zero entries on purpose
    let raw: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..1.0) })
        .collect();
    let s: f64 = raw.iter().sum();
    if s == 0.0 {
        let mut v = vec![0.0; n];
        v[rng.gen_range(0..n)] = 1.0;
        return v;
    }
    raw.iter().map(|v| v / s).collect()
}

pub fn random_measure<R: Rng>(rng: &mut R, kind: usize) -> RiskMeasure {
    match kind {
        0 => RiskMeasure::Expectation,
        1 => RiskMeasure::SemiDeviation { kappa: rng.gen_range(0.01..=1.0) },
        _ => RiskMeasure::AverageValueAtRisk { alpha: rng.gen_range(0.01..=1.0) },
    }
}

/// Test-side closed forms, written independently of the library.
pub fn oracle_risk(m: &RiskMeasure, z: &[f64], p: &[f64]) -> f64 {
    let mean: f64 = z.iter().zip(p).map(|(a, b)| a * b).sum();
    match *m {
        RiskMeasure::Expectation => mean,
        RiskMeasure::SemiDeviation { kappa } => {
            mean + kappa * z.iter().zip(p).map(|(a, b)| (a - mean).max(0.0) * b).sum::<f64>()
        }
        // piecewise linear convex in t, minimum attained at a support point
        RiskMeasure::AverageValueAtRisk { alpha } => z
            .iter()
            .map(|t| t + z.iter().zip(p).map(|(a, b)| (a - t).max(0.0) * b).sum::<f64>() / alpha)
            .fold(f64::INFINITY, f64::min),
    }
}

/// `W₁` on the index line via the primal transport plan of the
/// north-west-corner rule, which is optimal for the `|i - j|` cost.
pub fn oracle_w1(a: &[f64], b: &[f64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let (mut i, mut j, mut cost) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let q = a[i].min(b[j]);
        cost += q * (i as f64 - j as f64).abs();
        a[i] -= q;
        b[j] -= q;
        if a[i] <= 1e-15 {
            i += 1;
        } else {
            j += 1;
        }
    }
    cost
}
