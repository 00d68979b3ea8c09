//! Shared data model: outcome grids, action-parameterized outcome
//! distributions, type populations, contracts and scenarios.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::risk::RiskMeasure;

/// Tolerance on the total mass of a probability row.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Slack allowed when checking that an action lies inside its declared range.
const ACTION_TOL: f64 = 1e-12;

/// Probability-weighted sum `Σ values_k · probs_k`.
pub fn expectation(values: &[f64], probs: &[f64]) -> Result<f64> {
    check_len("expectation", values.len(), probs.len())?;
    Ok(dot(values, probs))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks that `row` is finite, nonnegative and sums to one within [`SIMPLEX_TOL`].
pub fn validate_simplex(row: &[f64], what: &str) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Domain(format!("{what}: empty probability row")));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!(
            "{what}: entries must be finite and nonnegative (found {v})"
        )));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Domain(format!(
            "{what}: entries must sum to 1 (sum is {total})"
        )));
    }
    Ok(())
}

/// Strictly increasing, nonnegative loss levels.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGrid {
    points: Vec<f64>,
}

impl OutcomeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain(format!(
                "grid: at least 2 loss levels required (found {})",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain(
                "grid: loss levels must be finite and nonnegative".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "grid: loss levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How the outcome distribution depends on the agent's action.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionFamily {
    /// One probability row per listed action. With `fd_step` set, rows are
    /// linearly interpolated between listed actions and differentiated by
    /// central differences of that step.
    Table {
        actions: Vec<f64>,
        rows: Vec<Vec<f64>>,
        fd_step: Option<f64>,
    },
    /// `p(x) = (1 - x) low + x high` for `x ∈ [0, 1]`.
    Linear { low: Vec<f64>, high: Vec<f64> },
}

/// Outcome grid with a reference distribution and an action-parameterized family.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModel {
    grid: OutcomeGrid,
    reference: Vec<f64>,
    family: ActionFamily,
}

impl OutcomeModel {
    pub fn new(grid: OutcomeGrid, reference: Vec<f64>, family: ActionFamily) -> Result<Self> {
        let m = grid.len();
        check_len("reference_probs", m, reference.len())?;
        validate_simplex(&reference, "reference_probs")?;
        match &family {
            ActionFamily::Linear { low, high } => {
                check_len("family.p_L", m, low.len())?;
                check_len("family.p_H", m, high.len())?;
                validate_simplex(low, "family.p_L")?;
                validate_simplex(high, "family.p_H")?;
            }
            ActionFamily::Table {
                actions,
                rows,
                fd_step,
            } => {
                if actions.is_empty() {
                    return Err(Error::Domain("family.actions: empty action table".into()));
                }
                check_len("family.rows", actions.len(), rows.len())?;
                if actions.iter().any(|a| !a.is_finite())
                    || actions.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::Domain(
                        "family.actions: must be finite and strictly increasing".into(),
                    ));
                }
                for row in rows {
                    check_len("family.rows", m, row.len())?;
                    validate_simplex(row, "family.rows")?;
                }
                if let Some(h) = fd_step {
                    if !(h.is_finite() && *h > 0.0) {
                        return Err(Error::Domain("family.fd_step: must be positive".into()));
                    }
                    if actions.len() < 2 {
                        return Err(Error::Domain(
                            "family.fd_step: interpolation needs at least 2 actions".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            grid,
            reference,
            family,
        })
    }

    /// Linear family over a uniform reference distribution.
    pub fn linear(grid: OutcomeGrid, low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        let m = grid.len();
        Self::new(
            grid,
            vec![1.0 / m as f64; m],
            ActionFamily::Linear { low, high },
        )
    }

    pub fn grid(&self) -> &OutcomeGrid {
        &self.grid
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn family(&self) -> &ActionFamily {
        &self.family
    }

    /// Whether `density_dx` is available at every representable action.
    pub fn is_smooth(&self) -> bool {
        match &self.family {
            ActionFamily::Linear { .. } => true,
            ActionFamily::Table { fd_step, .. } => fd_step.is_some(),
        }
    }

    /// Smallest and largest representable actions.
    pub fn action_range(&self) -> (f64, f64) {
        match &self.family {
            ActionFamily::Linear { .. } => (0.0, 1.0),
            ActionFamily::Table { actions, .. } => (actions[0], actions[actions.len() - 1]),
        }
    }

    /// Whether `x` has a probability row (without clamping).
    pub fn supports(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match &self.family {
            ActionFamily::Linear { .. } => (-ACTION_TOL..=1.0 + ACTION_TOL).contains(&x),
            ActionFamily::Table {
                actions, fd_step, ..
            } => {
                if fd_step.is_some() {
                    let (lo, hi) = self.action_range();
                    x >= lo - ACTION_TOL && x <= hi + ACTION_TOL
                } else {
                    actions.iter().any(|a| (a - x).abs() <= ACTION_TOL)
                }
            }
        }
    }

    /// Probability row `P(·, x)` over the grid.
    pub fn density(&self, x: f64) -> Result<Vec<f64>> {
        if !self.supports(x) {
            return Err(Error::Domain(format!(
                "action {x} is outside the model's action range"
            )));
        }
        Ok(match &self.family {
            ActionFamily::Linear { low, high } => {
                let x = x.clamp(0.0, 1.0);
                low.iter()
                    .zip(high)
                    .map(|(l, h)| (1.0 - x) * l + x * h)
                    .collect()
            }
            ActionFamily::Table { actions, rows, .. } => {
                if let Some(i) = actions.iter().position(|a| (a - x).abs() <= ACTION_TOL) {
                    rows[i].clone()
                } else {
                    // interpolation between neighbouring table rows
                    let hi = actions.partition_point(|a| *a < x);
                    let lo = hi - 1;
                    let t = (x - actions[lo]) / (actions[hi] - actions[lo]);
                    rows[lo]
                        .iter()
                        .zip(&rows[hi])
                        .map(|(a, b)| (1.0 - t) * a + t * b)
                        .collect()
                }
            }
        })
    }

    /// Derivative `∂P(·, x)/∂x` over the grid.
    pub fn density_dx(&self, x: f64) -> Result<Vec<f64>> {
        if !self.supports(x) {
            return Err(Error::Domain(format!(
                "action {x} is outside the model's action range"
            )));
        }
        match &self.family {
            ActionFamily::Linear { low, high } => {
                Ok(high.iter().zip(low).map(|(h, l)| h - l).collect())
            }
            ActionFamily::Table { fd_step: None, .. } => Err(Error::Unsupported(
                "density derivative needs a smooth family or a tabular family with fd_step"
                    .into(),
            )),
            ActionFamily::Table {
                fd_step: Some(h), ..
            } => {
                let (lo, hi) = self.action_range();
                let a = (x - h).max(lo);
                let b = (x + h).min(hi);
                let pa = self.density(a)?;
                let pb = self.density(b)?;
                Ok(pa.iter().zip(&pb).map(|(u, v)| (v - u) / (b - a)).collect())
            }
        }
    }
}

/// Ordered list of risk preference types. The order defines the ground
/// metric `|i - j|` of the design cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpace {
    types: Vec<RiskMeasure>,
}

impl TypeSpace {
    pub fn new(types: Vec<RiskMeasure>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Domain("types: at least one type required".into()));
        }
        for t in &types {
            t.validate()?;
        }
        Ok(Self { types })
    }

    pub fn types(&self) -> &[RiskMeasure] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Probability weights over a [`TypeSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    weights: Vec<f64>,
}

impl TypeDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        validate_simplex(&weights, "type distribution")?;
        Ok(Self { weights })
    }

    /// Weights that sum to one only up to rounding are rescaled first.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Domain("type distribution: zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Coverage plan `w(ξ_k)` with `0 ≤ w(ξ_k) ≤ ξ_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularContract {
    coverage: Vec<f64>,
}

impl TabularContract {
    pub fn new(grid: &OutcomeGrid, coverage: Vec<f64>) -> Result<Self> {
        check_len("coverage", grid.len(), coverage.len())?;
        for (k, (w, xi)) in coverage.iter().zip(grid.points()).enumerate() {
            if !w.is_finite() || *w < 0.0 || *w > *xi {
                return Err(Error::Domain(format!(
                    "coverage[{k}] = {w} must lie in [0, {xi}]"
                )));
            }
        }
        Ok(Self { coverage })
    }

    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }
}

/// Proportional coverage `w(ξ) = c ξ` against a premium `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearContract {
    coverage_fraction: f64,
    premium: f64,
}

impl LinearContract {
    pub fn new(coverage_fraction: f64, premium: f64) -> Result<Self> {
        if !(coverage_fraction > 0.0 && coverage_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "coverage fraction {coverage_fraction} must lie strictly inside (0, 1)"
            )));
        }
        if !(premium.is_finite() && premium > 0.0) {
            return Err(Error::Domain(format!("premium {premium} must be positive")));
        }
        Ok(Self {
            coverage_fraction,
            premium,
        })
    }

    pub fn coverage_fraction(&self) -> f64 {
        self.coverage_fraction
    }

    pub fn premium(&self) -> f64 {
        self.premium
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Contract {
    Tabular(TabularContract),
    Linear(LinearContract),
}

impl Contract {
    pub fn tabular(grid: &OutcomeGrid, coverage: Vec<f64>) -> Result<Self> {
        TabularContract::new(grid, coverage).map(Contract::Tabular)
    }

    pub fn linear(coverage_fraction: f64, premium: f64) -> Result<Self> {
        LinearContract::new(coverage_fraction, premium).map(Contract::Linear)
    }

    /// No coverage and no premium.
    pub fn uninsured(grid: &OutcomeGrid) -> Self {
        Contract::Tabular(TabularContract {
            coverage: vec![0.0; grid.len()],
        })
    }

    /// Coverage paid at each grid point.
    pub fn coverage_on(&self, grid: &OutcomeGrid) -> Vec<f64> {
        match self {
            Contract::Tabular(t) => t.coverage.clone(),
            Contract::Linear(l) => grid
                .points()
                .iter()
                .map(|xi| l.coverage_fraction * xi)
                .collect(),
        }
    }

    pub fn premium(&self) -> f64 {
        match self {
            Contract::Tabular(_) => 0.0,
            Contract::Linear(l) => l.premium,
        }
    }

    pub(crate) fn check_grid(&self, grid: &OutcomeGrid) -> Result<()> {
        match self {
            Contract::Tabular(t) => check_len("coverage", grid.len(), t.coverage.len()),
            Contract::Linear(_) => Ok(()),
        }
    }
}

/// Convex, nondecreasing perception `g` of the residual loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossShape {
    Identity,
    Quadratic,
    /// `g(t) = t^p` with `p ≥ 1`.
    Power(f64),
}

impl LossShape {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            LossShape::Identity => t,
            LossShape::Quadratic => t * t,
            LossShape::Power(p) => t.max(0.0).powf(*p),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            LossShape::Identity => 1.0,
            LossShape::Quadratic => 2.0 * t,
            LossShape::Power(p) => p * t.max(0.0).powf(p - 1.0),
        }
    }

    /// Inverse of `g` on `[0, ∞)`.
    pub fn value_inverse(&self, v: f64) -> f64 {
        match self {
            LossShape::Identity => v,
            LossShape::Quadratic => v.max(0.0).sqrt(),
            LossShape::Power(p) => v.max(0.0).powf(1.0 / p),
        }
    }

    /// Inverse of the derivative, `t` such that `g'(t) = slope`, when `g` is
    /// strictly convex.
    pub fn derivative_inverse(&self, slope: f64) -> Option<f64> {
        match self {
            LossShape::Identity => None,
            LossShape::Quadratic => Some(slope / 2.0),
            LossShape::Power(p) if *p > 1.0 => Some((slope.max(0.0) / p).powf(1.0 / (p - 1.0))),
            LossShape::Power(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossShape::Power(p) if !(p.is_finite() && *p >= 1.0) => Err(Error::Domain(format!(
                "disutility.power: exponent {p} must be at least 1 for a convex perception"
            ))),
            _ => Ok(()),
        }
    }
}

/// Shape of the investment cost term in the agent's disutility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvestmentCost {
    /// `m · x`
    #[default]
    Linear,
    /// `m · x²`
    Quadratic,
}

/// Agent's random cost `U = g(ξ - w(ξ)) + c(x) (+ premium)`.
///
/// The cost is separable in the action, so `∂²U/∂x∂w = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisutilitySpec {
    shape: LossShape,
    rate: f64,
    investment: InvestmentCost,
}

impl DisutilitySpec {
    pub fn new(shape: LossShape, rate: f64, investment: InvestmentCost) -> Result<Self> {
        shape.validate()?;
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::Domain(format!(
                "disutility.m: investment rate {rate} must be finite and nonnegative"
            )));
        }
        Ok(Self {
            shape,
            rate,
            investment,
        })
    }

    pub fn shape(&self) -> LossShape {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn investment(&self) -> InvestmentCost {
        self.investment
    }

    pub fn investment_cost(&self, x: f64) -> f64 {
        match self.investment {
            InvestmentCost::Linear => self.rate * x,
            InvestmentCost::Quadratic => self.rate * x * x,
        }
    }

    pub fn investment_cost_dx(&self, x: f64) -> f64 {
        match self.investment {
            InvestmentCost::Linear => self.rate,
            InvestmentCost::Quadratic => 2.0 * self.rate * x,
        }
    }

    /// Loss perception row `g(ξ_k - w_k)`, without the action and premium terms.
    pub fn perceived_losses(&self, grid: &[f64], coverage: &[f64]) -> Vec<f64> {
        grid.iter()
            .zip(coverage)
            .map(|(xi, w)| self.shape.value((xi - w).max(0.0)))
            .collect()
    }
}

/// Actions available to the agent.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Discrete(Vec<f64>),
    Interval { lo: f64, hi: f64 },
}

impl ActionSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            ActionSet::Discrete(a) => {
                if a.is_empty() {
                    return Err(Error::Domain("action_set: empty".into()));
                }
                if a.iter().any(|x| !x.is_finite()) || a.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Domain(
                        "action_set.actions: must be finite and strictly increasing".into(),
                    ));
                }
            }
            ActionSet::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Domain(format!(
                        "action_set: interval [{lo}, {hi}] is empty or not finite"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            ActionSet::Discrete(a) => a.iter().any(|v| (v - x).abs() <= ACTION_TOL),
            ActionSet::Interval { lo, hi } => x >= lo - ACTION_TOL && x <= hi + ACTION_TOL,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ActionSet::Discrete(a) => (a[0], a[a.len() - 1]),
            ActionSet::Interval { lo, hi } => (*lo, *hi),
        }
    }
}

/// A complete design problem: outcome model, typed population, disutility,
/// participation threshold `Ū`, design cost rate `γ` and the action set.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    model: OutcomeModel,
    types: TypeSpace,
    baseline: TypeDistribution,
    disutility: DisutilitySpec,
    threshold: f64,
    design_cost: f64,
    actions: ActionSet,
}

impl Scenario {
    pub fn new(
        model: OutcomeModel,
        types: TypeSpace,
        baseline: TypeDistribution,
        disutility: DisutilitySpec,
        threshold: f64,
        design_cost: f64,
        actions: ActionSet,
    ) -> Result<Self> {
        check_len("mu0", types.len(), baseline.len())?;
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::Domain(format!(
                "U_bar: threshold {threshold} must be finite and positive"
            )));
        }
        if !(design_cost.is_finite() && design_cost > 0.0) {
            return Err(Error::Domain(format!(
                "gamma: design cost {design_cost} must be finite and positive"
            )));
        }
        actions.validate()?;
        let (lo, hi) = actions.bounds();
        if !model.supports(lo) || !model.supports(hi) {
            return Err(Error::Domain(format!(
                "action_set: [{lo}, {hi}] is not covered by the outcome family"
            )));
        }
        if let ActionSet::Discrete(a) = &actions {
            if let Some(x) = a.iter().find(|x| !model.supports(**x)) {
                return Err(Error::Domain(format!(
                    "action_set: action {x} has no probability row"
                )));
            }
        }
        if matches!(actions, ActionSet::Interval { .. }) && !model.is_smooth() {
            return Err(Error::Domain(
                "action_set: an interval needs a smooth outcome family".into(),
            ));
        }
        Ok(Self {
            model,
            types,
            baseline,
            disutility,
            threshold,
            design_cost,
            actions,
        })
    }

    pub fn model(&self) -> &OutcomeModel {
        &self.model
    }

    pub fn grid(&self) -> &[f64] {
        self.model.grid().points()
    }

    pub fn types(&self) -> &TypeSpace {
        &self.types
    }

    pub fn baseline(&self) -> &TypeDistribution {
        &self.baseline
    }

    pub fn disutility(&self) -> &DisutilitySpec {
        &self.disutility
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn design_cost(&self) -> f64 {
        self.design_cost
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::Domain(format!("U_bar: {threshold} must be positive")));
        }
        s.threshold = threshold;
        Ok(s)
    }

    pub fn with_design_cost(&self, design_cost: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(design_cost.is_finite() && design_cost > 0.0) {
            return Err(Error::Domain(format!("gamma: {design_cost} must be positive")));
        }
        s.design_cost = design_cost;
        Ok(s)
    }

    pub fn with_baseline(&self, baseline: TypeDistribution) -> Result<Self> {
        check_len("mu0", self.types.len(), baseline.len())?;
        let mut s = self.clone();
        s.baseline = baseline;
        Ok(s)
    }

    pub(crate) fn check_mu(&self, mu: &TypeDistribution) -> Result<()> {
        check_len("type distribution", self.types.len(), mu.len())
    }

    pub(crate) fn check_action(&self, x: f64) -> Result<()> {
        if self.actions.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "action {x} is not in the scenario's action set"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_model() -> OutcomeModel {
        OutcomeModel::linear(
            OutcomeGrid::new(vec![1.0, 2.0, 3.0]).unwrap(),
            vec![0.3, 0.4, 0.3],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn linear_family_endpoints_and_midpoint() {
        let m = case_model();
        assert_eq!(m.density(0.0).unwrap(), vec![0.3, 0.4, 0.3]);
        assert_eq!(m.density(1.0).unwrap(), vec![0.5, 0.3, 0.2]);
        assert!(close(&m.density(0.5).unwrap(), &[0.4, 0.35, 0.25], 1e-15));
    }

    #[test]
    fn density_outside_range_is_domain_error() {
        let m = case_model();
        assert!(matches!(m.density(1.5), Err(Error::Domain(_))));
        assert!(matches!(m.density(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn linear_derivative_is_constant_and_massless() {
        let m = case_model();
        for x in [0.0, 0.3, 1.0] {
            let d = m.density_dx(x).unwrap();
            assert!(close(&d, &[0.2, -0.1, -0.1], 1e-15));
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let m = case_model();
        let h = 1e-6;
        let a = m.density(0.5 - h).unwrap();
        let b = m.density(0.5 + h).unwrap();
        let fd: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (v - u) / (2.0 * h)).collect();
        assert!(close(&fd, &m.density_dx(0.5).unwrap(), 1e-6));
    }

    #[test]
    fn discrete_table_without_step_has_no_derivative() {
        let grid = OutcomeGrid::new(vec![1.0, 2.0]).unwrap();
        let m = OutcomeModel::new(
            grid,
            vec![0.5, 0.5],
            ActionFamily::Table {
                actions: vec![0.0, 1.0],
                rows: vec![vec![0.6, 0.4], vec![0.8, 0.2]],
                fd_step: None,
            },
        )
        .unwrap();
        assert_eq!(m.density(1.0).unwrap(), vec![0.8, 0.2]);
        assert!(matches!(m.density(0.5), Err(Error::Domain(_))));
        assert!(matches!(m.density_dx(0.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn table_with_step_interpolates() {
        let grid = OutcomeGrid::new(vec![1.0, 2.0]).unwrap();
        let m = OutcomeModel::new(
            grid,
            vec![0.5, 0.5],
            ActionFamily::Table {
                actions: vec![0.0, 1.0, 2.0],
                rows: vec![vec![0.6, 0.4], vec![0.8, 0.2], vec![0.9, 0.1]],
                fd_step: Some(1e-4),
            },
        )
        .unwrap();
        assert!(close(&m.density(0.5).unwrap(), &[0.7, 0.3], 1e-15));
        assert!(close(&m.density_dx(0.5).unwrap(), &[0.2, -0.2], 1e-9));
        assert!(close(&m.density_dx(1.5).unwrap(), &[0.1, -0.1], 1e-9));
    }

    #[test]
    fn expectation_examples() {
        assert!((expectation(&[1.0, 4.0, 9.0], &[0.3, 0.4, 0.3]).unwrap() - 4.6).abs() < 1e-12);
        assert!((expectation(&[1.0, 4.0, 9.0], &[0.5, 0.3, 0.2]).unwrap() - 3.5).abs() < 1e-12);
        assert!((expectation(&[2.5; 3], &[0.2, 0.5, 0.3]).unwrap() - 2.5).abs() < 1e-12);
        assert!(matches!(
            expectation(&[1.0], &[0.5, 0.5]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn grid_and_simplex_validation() {
        assert!(OutcomeGrid::new(vec![1.0]).is_err());
        assert!(OutcomeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TypeDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(TypeDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(TypeDistribution::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn contract_bounds_enforced() {
        let grid = OutcomeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(Contract::tabular(&grid, vec![0.0, 0.5, 1.0]).is_ok());
        assert!(Contract::tabular(&grid, vec![1.5, 0.5, 1.0]).is_err());
        assert!(Contract::tabular(&grid, vec![-0.1, 0.5, 1.0]).is_err());
        assert!(Contract::linear(0.5, 1.0).is_ok());
        assert!(Contract::linear(1.0, 1.0).is_err());
        assert!(Contract::linear(0.5, 0.0).is_err());
        let lin = Contract::linear(0.5, 1.0).unwrap();
        assert_eq!(lin.coverage_on(&grid), vec![0.5, 1.0, 1.5]);
    }
}
