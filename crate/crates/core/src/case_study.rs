//! Built-in ransomware scenario with a linear contract: losses `(1, 2, 3)`,
//! probabilities `(0.3, 0.4, 0.3)` under `x_L = 0` and `(0.5, 0.3, 0.2)`
//! under `x_H = 1`, quadratic perception, and an expectation type next to a
//! semideviation type.

use serde::Serialize;

use crate::contract::{agent_best_response, SolveOptions};
use crate::error::{Error, Result};
use crate::hazard::{imh_for_contract, Imh};
use crate::model::{
    ActionSet, Contract, DisutilitySpec, InvestmentCost, LossShape, OutcomeGrid, OutcomeModel,
    Scenario, TypeDistribution, TypeSpace,
};
use crate::risk::RiskMeasure;
use crate::transport::w1;

pub const LOSSES: [f64; 3] = [1.0, 2.0, 3.0];
pub const P_LOW: [f64; 3] = [0.3, 0.4, 0.3];
pub const P_HIGH: [f64; 3] = [0.5, 0.3, 0.2];
pub const X_LOW: f64 = 0.0;
pub const X_HIGH: f64 = 1.0;

/// Step of the μ₂ grid the designed distribution is rounded up to.
const MU_GRID: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseParams {
    /// Coverage fraction `𝔠 ∈ (0, 1)`.
    pub coverage: f64,
    /// Premium `𝔭 > 0`.
    pub premium: f64,
    /// Semideviation weight `κ ∈ (0, 1]`.
    pub kappa: f64,
    /// Investment cost rate `𝔪 ≥ 0` (with `x_H - x_L = 1`).
    pub m: f64,
    /// Baseline weight of the semideviation type, `μ₂⁰ ∈ [0, 1]`.
    pub mu2_0: f64,
    /// Design cost rate `γ > 0`.
    pub gamma: f64,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self {
            coverage: 0.5,
            premium: 1.0,
            kappa: 1.0,
            m: 0.28,
            mu2_0: 0.1,
            gamma: 1.0,
        }
    }
}

impl CaseParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64, range: &str| {
            Err(Error::Domain(format!("{name}: {v} is outside {range}")))
        };
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return bad("coverage", self.coverage, "(0, 1)");
        }
        if !(self.premium > 0.0 && self.premium.is_finite()) {
            return bad("premium", self.premium, "(0, inf)");
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return bad("kappa", self.kappa, "(0, 1]");
        }
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return bad("m", self.m, "[0, inf)");
        }
        if !(0.0..=1.0).contains(&self.mu2_0) {
            return bad("mu2_0", self.mu2_0, "[0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma, "(0, inf)");
        }
        Ok(())
    }

    pub fn contract(&self) -> Result<Contract> {
        Contract::linear(self.coverage, self.premium)
    }

    fn types(&self) -> Vec<RiskMeasure> {
        vec![
            RiskMeasure::Expectation,
            RiskMeasure::SemiDeviation { kappa: self.kappa },
        ]
    }

    fn mix(&self, mu2: f64) -> [f64; 2] {
        [1.0 - mu2, mu2]
    }

    fn probs(x: f64) -> &'static [f64; 3] {
        if x == X_LOW {
            &P_LOW
        } else {
            &P_HIGH
        }
    }

    /// `Σ_i μ_i ρ_i[Z]` for the case-study rows, evaluated directly.
    fn mixture(&self, mu2: f64, z: &[f64], x: f64) -> Result<f64> {
        let probs = Self::probs(x);
        let mut total = 0.0;
        for (t, w) in self.types().iter().zip(self.mix(mu2)) {
            total += w * t.evaluate(z, probs)?;
        }
        Ok(total)
    }

    /// Uninsured cost `Ū(x) = Σ_i μ⁰_i ρ_i[ξ² + 𝔪x]`.
    pub fn uninsured_cost(&self, x: f64) -> Result<f64> {
        let z: Vec<f64> = LOSSES.iter().map(|l| l * l + self.m * x).collect();
        self.mixture(self.mu2_0, &z, x)
    }

    /// Insured cost `Ũ(x) = Σ_i μ_i ρ_i[((1 - 𝔠)ξ)² + 𝔪x + 𝔭]` at weight `μ₂`.
    pub fn insured_cost(&self, mu2: f64, x: f64, premium: f64) -> Result<f64> {
        let z: Vec<f64> = LOSSES
            .iter()
            .map(|l| ((1.0 - self.coverage) * l).powi(2) + self.m * x + premium)
            .collect();
        self.mixture(mu2, &z, x)
    }

    /// The participation bound `(2𝔠 - 𝔠²)(3.5 + 1.25κμ₂⁰)`.
    pub fn premium_bound_formula(&self) -> f64 {
        let c = self.coverage;
        (2.0 * c - c * c) * (3.5 + 1.25 * self.kappa * self.mu2_0)
    }

    /// Printed incentive threshold `1.1𝔠² + 0.6κ𝔠²μ₂`.
    pub fn printed_threshold(&self, mu2: f64) -> f64 {
        let c2 = self.coverage * self.coverage;
        1.1 * c2 + 0.6 * self.kappa * c2 * mu2
    }

    /// Closed form of the oracle threshold, `(1 - 𝔠)²(1.1 + 0.07κμ₂)`.
    pub fn oracle_threshold_formula(&self, mu2: f64) -> f64 {
        (1.0 - self.coverage).powi(2) * (1.1 + 0.07 * self.kappa * mu2)
    }

    /// Investment cost at which the insured agent is indifferent between the
    /// two actions, by direct evaluation: `Ũ(x_L) - Ũ(x_H)` without the
    /// investment term. The agent takes `x_H` iff `𝔪(x_H - x_L)` is below it.
    pub fn oracle_threshold(&self, mu2: f64) -> Result<f64> {
        let free = Self { m: 0.0, ..*self };
        Ok(free.insured_cost(mu2, X_LOW, 0.0)? - free.insured_cost(mu2, X_HIGH, 0.0)?)
    }
}

/// The case-study scenario: `Ū` is the agent's best uninsured cost, actions
/// are `{x_L, x_H}`.
pub fn case_study_scenario(p: &CaseParams) -> Result<Scenario> {
    p.validate()?;
    let model = OutcomeModel::linear(
        OutcomeGrid::new(LOSSES.to_vec())?,
        P_LOW.to_vec(),
        P_HIGH.to_vec(),
    )?;
    let threshold = p.uninsured_cost(X_LOW)?.min(p.uninsured_cost(X_HIGH)?);
    Scenario::new(
        model,
        TypeSpace::new(p.types())?,
        TypeDistribution::new(p.mix(p.mu2_0).to_vec())?,
        DisutilitySpec::new(LossShape::Quadratic, p.m, InvestmentCost::Linear)?,
        threshold,
        p.gamma,
        ActionSet::Discrete(vec![X_LOW, X_HIGH]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumBound {
    /// `(2𝔠 - 𝔠²)(3.5 + 1.25κμ₂⁰)`.
    pub formula: f64,
    /// `Ū(x_H) - Ũ(x_H)` at zero premium, by direct evaluation.
    pub brute_force: f64,
    pub abs_diff: f64,
    /// `Ū(x_H) - Ũ(x_H)` at the given premium.
    pub margin_at_premium: f64,
    pub participation_profitable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcThreshold {
    pub mu2: f64,
    /// `𝔪(x_H - x_L)`.
    pub investment_gap: f64,
    /// `1.1𝔠² + 0.6κ𝔠²μ₂`.
    pub printed: f64,
    /// `Ũ(x_L) - Ũ(x_H)` without the investment term.
    pub oracle: f64,
    /// `(1 - 𝔠)²(1.1 + 0.07κμ₂)`.
    pub oracle_formula: f64,
    /// The printed expression disagrees with direct evaluation.
    pub discrepancy: bool,
    pub agent_prefers_high: bool,
    pub printed_predicts_high: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipPoint {
    /// Infimum of the μ₂ at which the agent strictly prefers `x_H`, by
    /// bisection on exact best responses. `None` when no μ₂ in `[0, 1]` flips.
    pub oracle_bisection: Option<f64>,
    /// Same point from the oracle closed form.
    pub oracle_formula: Option<f64>,
    /// Same point from the printed threshold.
    pub printed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseStudyReport {
    pub params: CaseParams,
    pub premium_bound: PremiumBound,
    pub ic_threshold: IcThreshold,
    pub flip: FlipPoint,
    pub mu_before: Vec<f64>,
    pub mu_after: Vec<f64>,
    pub imh_before: Imh,
    pub imh_after: Imh,
    pub w1: f64,
    /// `γ W₁(μ_after, μ⁰)`.
    pub design_cost: f64,
    pub notes: Vec<String>,
}

fn flip_from_closed_form(intercept: f64, slope: f64, gap: f64) -> Option<f64> {
    // prefers x_H iff gap < intercept + slope μ₂
    if gap < intercept {
        return Some(0.0);
    }
    if slope <= 0.0 {
        return None;
    }
    let mu2 = (gap - intercept) / slope;
    (mu2 <= 1.0).then_some(mu2)
}

pub fn run_case_study(p: &CaseParams) -> Result<CaseStudyReport> {
    let sc = case_study_scenario(p)?;
    let contract = p.contract()?;
    let opts = SolveOptions::default();
    let gap = p.m * (X_HIGH - X_LOW);

    let brute = p.uninsured_cost(X_HIGH)? - p.insured_cost(p.mu2_0, X_HIGH, 0.0)?;
    let formula = p.premium_bound_formula();
    let margin = p.uninsured_cost(X_HIGH)? - p.insured_cost(p.mu2_0, X_HIGH, p.premium)?;
    let premium_bound = PremiumBound {
        formula,
        brute_force: brute,
        abs_diff: (formula - brute).abs(),
        margin_at_premium: margin,
        participation_profitable: margin >= 0.0,
    };

    let prefers_high = |mu2: f64| -> Result<bool> {
        let mu = TypeDistribution::new(p.mix(mu2).to_vec())?;
        Ok(agent_best_response(&sc, &mu, &contract)? == X_HIGH)
    };
    let oracle = p.oracle_threshold(p.mu2_0)?;
    let printed = p.printed_threshold(p.mu2_0);
    let ic_threshold = IcThreshold {
        mu2: p.mu2_0,
        investment_gap: gap,
        printed,
        oracle,
        oracle_formula: p.oracle_threshold_formula(p.mu2_0),
        discrepancy: (printed - oracle).abs() > 1e-9,
        agent_prefers_high: prefers_high(p.mu2_0)?,
        printed_predicts_high: gap < printed,
    };

    let oracle_bisection = if prefers_high(0.0)? {
        Some(0.0)
    } else if !prefers_high(1.0)? {
        None
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if prefers_high(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };
    let c = p.coverage;
    let flip = FlipPoint {
        oracle_bisection,
        oracle_formula: flip_from_closed_form(
            (1.0 - c).powi(2) * 1.1,
            (1.0 - c).powi(2) * 0.07 * p.kappa,
            gap,
        ),
        printed: flip_from_closed_form(1.1 * c * c, 0.6 * p.kappa * c * c, gap),
    };

    let mu_before = TypeDistribution::new(p.mix(p.mu2_0).to_vec())?;
    let mut notes = Vec::new();
    let mu2_after = match oracle_bisection {
        Some(t) if p.mu2_0 > t || ic_threshold.agent_prefers_high => p.mu2_0,
        Some(t) => {
            // smallest μ₂ on the design grid that strictly flips the agent
            let mut v = ((t / MU_GRID).ceil() * MU_GRID).min(1.0);
            if !prefers_high(v)? {
                v = (v + MU_GRID).min(1.0);
            }
            v
        }
        None => {
            notes.push("no type distribution makes the agent prefer x_H".into());
            p.mu2_0
        }
    };
    let mu_after = TypeDistribution::new(p.mix(mu2_after).to_vec())?;
    let imh_before = imh_for_contract(&sc, &mu_before, &contract, &opts)?;
    let imh_after = imh_for_contract(&sc, &mu_after, &contract, &opts)?;
    let w1 = w1(&mu_after, sc.baseline())?;
    if ic_threshold.discrepancy {
        notes.push(
            "the printed incentive threshold differs from direct evaluation; the oracle decides best responses"
                .into(),
        );
    }
    Ok(CaseStudyReport {
        params: *p,
        premium_bound,
        ic_threshold,
        flip,
        mu_before: mu_before.weights().to_vec(),
        mu_after: mu_after.weights().to_vec(),
        imh_before,
        imh_after,
        w1,
        design_cost: p.gamma * w1,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_values() {
        let p = CaseParams {
            mu2_0: 0.5,
            ..Default::default()
        };
        assert!((p.premium_bound_formula() - 3.09375).abs() < 1e-12);
        let r = run_case_study(&CaseParams::default()).unwrap();
        assert!(r.premium_bound.abs_diff < 1e-9);
        let t = r.flip.oracle_bisection.unwrap();
        assert!((t - 0.02 / 0.07).abs() < 1e-9, "{t}");
        assert!((r.flip.oracle_formula.unwrap() - 0.02 / 0.07).abs() < 1e-12);
        assert_eq!(r.imh_before.imh, 1.0);
        assert_eq!(r.imh_after.imh, 0.0);
        assert!((r.mu_after[1] - 0.29).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        for p in [
            CaseParams { coverage: 1.0, ..Default::default() },
            CaseParams { kappa: 0.0, ..Default::default() },
            CaseParams { premium: 0.0, ..Default::default() },
            CaseParams { mu2_0: 1.5, ..Default::default() },
            CaseParams { m: -1.0, ..Default::default() },
        ] {
            assert!(run_case_study(&p).is_err());
        }
    }
}
