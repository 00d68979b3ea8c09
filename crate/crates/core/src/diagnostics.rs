//! First-order-approach residuals and the sufficient conditions for a
//! monotone optimal coverage plan, evaluated on a grid.
//!
//! All ξ-derivatives are forward differences over adjacent grid points and
//! all x-derivatives are central differences of step [`X_STEP`] (one-sided
//! at the ends of the action range). Probability rows `P(·, x)` stand in for
//! densities wherever a ratio or a zero set is all that matters.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Contract, OutcomeModel, Scenario, TabularContract, TypeDistribution};
use crate::risk::{mixture_envelope, Sensitivity};

/// Default step for x-derivatives.
pub const X_STEP: f64 = 1e-4;
const C2_SLACK: f64 = 1e-8;
const C3_SLACK: f64 = 1e-12;
const MLR_SLACK: f64 = 1e-12;
const MONOTONE_SLACK: f64 = 1e-12;
const KINK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// Outcome of one condition check, with the raw values it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub values: Vec<f64>,
    pub flags: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Per-grid-point residual of the pointwise stationarity condition in `w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseResidual {
    /// `-P_k + g'(ξ_k - w_k) E_μ{α ζ̄ P + β ∂(ζ̄ P)/∂x}_k`.
    pub raw: Vec<f64>,
    /// Same, with entries zeroed where `w_k` sits on a bound and the sign
    /// is the one the bound's multiplier absorbs.
    pub bound_aware: Vec<f64>,
    /// Some type's envelope density is not unique at `x` or `x ± h`.
    pub tie: bool,
}

impl PointwiseResidual {
    pub fn max_abs(&self) -> f64 {
        self.bound_aware.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Agent first-order condition `∂/∂x Σ_i μ_i ρ_i[U]`. Identical to `h2`.
pub fn foc_ic_residual(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
) -> Result<Sensitivity> {
    crate::hazard::h2(scenario, mu, contract, x)
}

/// Type-averaged envelope `E_μ[ζ̄_k]` at action `x` for the given perceived row.
fn envelope_at(sc: &Scenario, mu: &[f64], z: &[f64], x: f64) -> Result<(Vec<f64>, bool)> {
    let probs = sc.model().density(x)?;
    Ok(mixture_envelope(sc.types().types(), mu, z, &probs))
}

fn probe_points(sc: &Scenario, x: f64, h: f64) -> (f64, f64) {
    let (lo, hi) = sc.model().action_range();
    ((x - h).max(lo), (x + h).min(hi))
}

fn perceived(sc: &Scenario, contract: &Contract) -> Vec<f64> {
    let coverage = contract.coverage_on(sc.model().grid());
    let premium = contract.premium();
    sc.disutility()
        .perceived_losses(sc.grid(), &coverage)
        .into_iter()
        .map(|v| v + premium)
        .collect()
}

fn preflight(sc: &Scenario, mu: &TypeDistribution, contract: &Contract, x: f64) -> Result<()> {
    sc.check_mu(mu)?;
    contract.check_grid(sc.model().grid())?;
    sc.check_action(x)?;
    if !sc.model().is_smooth() {
        return Err(Error::Precondition(
            "derivatives in the action need a smooth action family".into(),
        ));
    }
    Ok(())
}

/// Residual of the pointwise condition obtained by minimizing the relaxed
/// Lagrangian in `w(ξ)` separately at every grid point.
pub fn foc_pointwise_residual(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
    alpha: f64,
    beta: f64,
) -> Result<PointwiseResidual> {
    preflight(scenario, mu, contract, x)?;
    let sc = scenario;
    let m = mu.weights();
    let z = perceived(sc, contract);
    let coverage = contract.coverage_on(sc.model().grid());
    let probs = sc.model().density(x)?;
    let (env, tie0) = envelope_at(sc, m, &z, x)?;
    let (a, b) = probe_points(sc, x, X_STEP);
    let (env_a, tie_a) = envelope_at(sc, m, &z, a)?;
    let (env_b, tie_b) = envelope_at(sc, m, &z, b)?;
    let pa = sc.model().density(a)?;
    let pb = sc.model().density(b)?;
    let shape = sc.disutility().shape();
    let mut raw = Vec::with_capacity(z.len());
    let mut bound_aware = Vec::with_capacity(z.len());
    for k in 0..z.len() {
        let pi = env[k] * probs[k];
        let dpi = (env_b[k] * pb[k] - env_a[k] * pa[k]) / (b - a);
        let xi = sc.grid()[k];
        let slope = shape.derivative((xi - coverage[k]).max(0.0));
        let r = -probs[k] + slope * (alpha * pi + beta * dpi);
        raw.push(r);
        // The Lagrangian's derivative in w_k is -r.
        let at_floor = coverage[k] <= 1e-12 * (1.0 + xi);
        let at_cap = coverage[k] >= xi - 1e-12 * (1.0 + xi);
        let absorbed = (at_floor && r <= 0.0) || (at_cap && r >= 0.0);
        bound_aware.push(if absorbed { 0.0 } else { r });
    }
    Ok(PointwiseResidual {
        raw,
        bound_aware,
        tie: tie0 || tie_a || tie_b,
    })
}

/// Grid-sum reading of the first condition: `∂/∂x Σ_k p_k` with
/// `p_k = P_k / ref_k`, followed by `∂/∂x Σ_k ζ̄_θ,k` for every type.
/// Passes when every value is strictly positive.
pub fn check_c1(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
) -> Result<CheckReport> {
    preflight(scenario, mu, contract, x)?;
    let sc = scenario;
    let reference = sc.model().reference();
    let dprobs = sc.model().density_dx(x)?;
    let mut flags = Vec::new();
    let mut density_sum = 0.0;
    for (k, (d, r)) in dprobs.iter().zip(reference).enumerate() {
        if *r > 0.0 {
            density_sum += d / r;
        } else {
            flags.push(format!("zero-reference: grid point {k} excluded"));
        }
    }
    let mut values = vec![density_sum];
    let z = perceived(sc, contract);
    let (a, b) = probe_points(sc, x, X_STEP);
    let pa = sc.model().density(a)?;
    let pb = sc.model().density(b)?;
    let p0 = sc.model().density(x)?;
    for (i, t) in sc.types().types().iter().enumerate() {
        let ea = t.envelope(&z, &pa);
        let eb = t.envelope(&z, &pb);
        if ea.tie || eb.tie || t.envelope(&z, &p0).tie {
            flags.push(format!("envelope-tie: type {i}"));
        }
        let sa: f64 = ea.weights.iter().sum();
        let sb: f64 = eb.weights.iter().sum();
        values.push((sb - sa) / (b - a));
    }
    let status = if values.iter().all(|v| *v > 0.0) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckReport {
        name: "C1".into(),
        status,
        values,
        flags,
    })
}

/// Forward ξ-differences of `∂/∂x E_μ[ζ̄]`; passes when none is below
/// `-1e-8`. An envelope tie or a change of envelope regime inside the probe
/// makes the check inconclusive.
pub fn check_c2(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
) -> Result<CheckReport> {
    check_c2_with_step(scenario, mu, contract, x, X_STEP)
}

pub fn check_c2_with_step(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
    step: f64,
) -> Result<CheckReport> {
    preflight(scenario, mu, contract, x)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Domain("step: must be positive".into()));
    }
    let sc = scenario;
    let m = mu.weights();
    let z = perceived(sc, contract);
    let (a, b) = probe_points(sc, x, step);
    let (ea, tie_a) = envelope_at(sc, m, &z, a)?;
    let (e0, tie_0) = envelope_at(sc, m, &z, x)?;
    let (eb, tie_b) = envelope_at(sc, m, &z, b)?;
    let d: Vec<f64> = ea.iter().zip(&eb).map(|(u, v)| (v - u) / (b - a)).collect();
    let grid = sc.grid();
    let values: Vec<f64> = (0..grid.len() - 1)
        .map(|k| (d[k + 1] - d[k]) / (grid[k + 1] - grid[k]))
        .collect();
    let mut flags = Vec::new();
    if tie_a || tie_0 || tie_b {
        flags.push("envelope-tie in the probe".into());
    }
    // curvature in x only appears when the envelope regime switches
    if a < x && x < b {
        let wa = x - a;
        let wb = b - x;
        let bent = (0..grid.len()).any(|k| {
            let second = (eb[k] - e0[k]) / wb - (e0[k] - ea[k]) / wa;
            second.abs() > KINK_TOL
        });
        if bent {
            flags.push("envelope-kink in the probe".into());
        }
    }
    let status = if !flags.is_empty() {
        CheckStatus::Inconclusive
    } else if values.iter().all(|v| *v >= -C2_SLACK) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckReport {
        name: "C2".into(),
        status,
        values,
        flags,
    })
}

/// ξ-differences of `E_μ[ζ̄]·(α + β ∂P/∂x / P)`.
///
/// Pairs across which the envelope changes value are kinks of a piecewise
/// constant density and are excluded (and flagged), as are points with
/// `P = 0`. The values of the remaining pairs are `c_k (f_{k+1} - f_k)`.
pub fn check_c3(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
    alpha: f64,
    beta: f64,
) -> Result<CheckReport> {
    preflight(scenario, mu, contract, x)?;
    let sc = scenario;
    let z = perceived(sc, contract);
    let probs = sc.model().density(x)?;
    let dprobs = sc.model().density_dx(x)?;
    let (env, tie) = envelope_at(sc, mu.weights(), &z, x)?;
    let mut flags = Vec::new();
    if tie {
        flags.push("envelope-tie at x".into());
    }
    let f: Vec<Option<f64>> = probs
        .iter()
        .zip(&dprobs)
        .map(|(p, d)| (*p > 0.0).then(|| alpha + beta * d / p))
        .collect();
    for (k, v) in f.iter().enumerate() {
        if v.is_none() {
            flags.push(format!("zero-probability: grid point {k} excluded"));
        }
    }
    let mut values = Vec::new();
    for k in 0..z.len() - 1 {
        let (Some(f0), Some(f1)) = (f[k], f[k + 1]) else {
            continue;
        };
        if (env[k + 1] - env[k]).abs() > KINK_TOL * (1.0 + env[k].abs()) {
            flags.push(format!("envelope-kink: pair ({k}, {}) excluded", k + 1));
            continue;
        }
        values.push(env[k] * (f1 - f0));
    }
    let status = if values.is_empty() {
        CheckStatus::Inconclusive
    } else if values.iter().all(|v| *v >= -C3_SLACK) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    Ok(CheckReport {
        name: "C3".into(),
        status,
        values,
        flags,
    })
}

/// Likelihood ratios `(∂P/∂x)/P` at `x`, `None` where `P = 0`.
pub fn likelihood_ratios(model: &OutcomeModel, x: f64) -> Result<Vec<Option<f64>>> {
    let probs = model.density(x)?;
    let dprobs = model.density_dx(x)?;
    Ok(probs
        .iter()
        .zip(&dprobs)
        .map(|(p, d)| (*p > 0.0).then(|| d / p))
        .collect())
}

fn monotone_ratios(ratios: &[Option<f64>], increasing: bool) -> bool {
    let kept: Vec<f64> = ratios.iter().flatten().copied().collect();
    kept.windows(2).all(|w| {
        if increasing {
            w[1] >= w[0] - MLR_SLACK
        } else {
            w[1] <= w[0] + MLR_SLACK
        }
    })
}

/// Whether `(∂P/∂x)/P` is nondecreasing along the grid at `x`. Grid points
/// with `P = 0` are skipped.
pub fn check_mlr(model: &OutcomeModel, x: f64) -> Result<bool> {
    Ok(monotone_ratios(&likelihood_ratios(model, x)?, true))
}

/// Both orientations of the likelihood-ratio ordering at `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlrReport {
    pub ratios: Vec<Option<f64>>,
    pub nondecreasing: bool,
    pub nonincreasing: bool,
    pub flags: Vec<String>,
}

pub fn mlr_report(model: &OutcomeModel, x: f64) -> Result<MlrReport> {
    let ratios = likelihood_ratios(model, x)?;
    let flags = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_none())
        .map(|(k, _)| format!("zero-probability: grid point {k} excluded"))
        .collect();
    Ok(MlrReport {
        nondecreasing: monotone_ratios(&ratios, true),
        nonincreasing: monotone_ratios(&ratios, false),
        ratios,
        flags,
    })
}

/// `w(ξ_{k+1}) ≥ w(ξ_k) - 1e-12` for every adjacent pair.
pub fn check_monotone_contract(plan: &TabularContract) -> bool {
    plan.coverage()
        .windows(2)
        .all(|w| w[1] >= w[0] - MONOTONE_SLACK)
}

/// Every check at once, as emitted by the `check-monotonicity` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub foc_ic: f64,
    pub foc_ic_smooth: bool,
    pub foc_pointwise: PointwiseResidual,
    pub c1: CheckReport,
    pub c2: CheckReport,
    pub c3: CheckReport,
    pub mlr: MlrReport,
    pub monotone_contract: Option<bool>,
}

pub fn monotonicity_report(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
    alpha: f64,
    beta: f64,
) -> Result<MonotonicityReport> {
    let foc = foc_ic_residual(scenario, mu, contract, x)?;
    Ok(MonotonicityReport {
        x,
        alpha,
        beta,
        foc_ic: foc.value,
        foc_ic_smooth: foc.smooth,
        foc_pointwise: foc_pointwise_residual(scenario, mu, contract, x, alpha, beta)?,
        c1: check_c1(scenario, mu, contract, x)?,
        c2: check_c2(scenario, mu, contract, x)?,
        c3: check_c3(scenario, mu, contract, x, alpha, beta)?,
        mlr: mlr_report(scenario.model(), x)?,
        monotone_contract: match contract {
            Contract::Tabular(plan) => Some(check_monotone_contract(plan)),
            Contract::Linear(_) => None,
        },
    })
}
