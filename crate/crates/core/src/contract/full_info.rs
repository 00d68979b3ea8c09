//! Full-information benchmark: the insurer observes the action and only the
//! participation constraint binds the coverage plan.

use crate::error::{check_len, Error, Result};
use crate::model::{dot, ActionSet, Contract, Scenario, TabularContract, TypeDistribution};
use crate::par::map_indexed;
use crate::risk::{mixture_directional, mixture_envelope, mixture_value, Sensitivity};
use crate::transport::w1_raw;

use super::agent::{argmin_first, bisect, central_difference, golden_section};
use super::cuts::{CutOutcome, CutProgram, RiskRow};
use super::{IrMultiplier, SolveOptions, SolveReport};

const INTERIOR_TOL: f64 = 1e-10;
const ENVELOPE_MATCH_TOL: f64 = 1e-9;

/// Optimal coverage at a fixed action.
#[derive(Debug, Clone)]
pub(crate) struct Inner {
    pub w: Vec<f64>,
    /// Multiplier from the stationarity polish, when it applied.
    pub alpha: Option<f64>,
    /// The optimum sits on an envelope kink, so the polish was skipped.
    pub kink: bool,
    /// Participation holds without any coverage.
    pub slack: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct FullInfo {
    pub x: f64,
    pub w: Vec<f64>,
    pub multiplier: IrMultiplier,
    /// `E[w + ξ]` under `P(·, x)`.
    pub transfer: f64,
    pub flags: Vec<String>,
}

fn mass(mu: &[f64]) -> f64 {
    mu.iter().sum()
}

/// Room left for perceived loss once the investment cost is paid.
pub(crate) fn budget(sc: &Scenario, mu: &[f64], x: f64) -> f64 {
    sc.threshold() - mass(mu) * sc.disutility().investment_cost(x)
}

/// Cheapest coverage meeting participation at action `x`; `None` when even
/// full coverage violates it.
pub(crate) fn inner_solve(sc: &Scenario, mu: &[f64], x: f64) -> Result<Option<Inner>> {
    let probs = sc.model().density(x)?;
    let grid = sc.grid();
    let m = grid.len();
    let types = sc.types().types();
    let shape = sc.disutility().shape();
    let b = budget(sc, mu, x);
    if b < 0.0 {
        return Ok(None);
    }
    let uncovered = sc.disutility().perceived_losses(grid, &vec![0.0; m]);
    if mixture_value(types, mu, &uncovered, &probs) <= b {
        return Ok(Some(Inner {
            w: vec![0.0; m],
            alpha: Some(0.0),
            kink: false,
            slack: true,
        }));
    }
    let program = CutProgram {
        grid,
        shape,
        types,
        cost: probs.clone(),
        upper: grid
            .iter()
            .zip(&probs)
            .map(|(xi, p)| if *p > 0.0 { *xi } else { 0.0 })
            .collect(),
        rows: vec![RiskRow {
            mu: mu.to_vec(),
            probs: probs.clone(),
            linear: vec![0.0; m],
            rhs: b,
        }],
    };
    let (w_lp, obj_lp) = match program.solve()? {
        CutOutcome::Solved { w, objective, .. } => (w, objective),
        CutOutcome::Infeasible => return Ok(None),
    };
    if shape.derivative_inverse(1.0).is_none() {
        return Ok(Some(Inner {
            w: w_lp,
            alpha: None,
            kink: false,
            slack: false,
        }));
    }
    match polish(sc, mu, &probs, b, &w_lp, obj_lp) {
        Some((w, alpha)) => Ok(Some(Inner {
            w,
            alpha: Some(alpha),
            kink: false,
            slack: false,
        })),
        None => Ok(Some(Inner {
            w: w_lp,
            alpha: None,
            kink: true,
            slack: false,
        })),
    }
}

/// With the envelope density `c = E_μ ζ̄` frozen, stationarity gives
/// `g'(ξ_k - w_k) = 1 / (α c_k)` at interior points; `α` is then fixed by
/// the active participation constraint. Accepted only if `c` is still the
/// envelope at the polished plan.
fn polish(
    sc: &Scenario,
    mu: &[f64],
    probs: &[f64],
    budget: f64,
    w_lp: &[f64],
    obj_lp: f64,
) -> Option<(Vec<f64>, f64)> {
    let grid = sc.grid();
    let types = sc.types().types();
    let shape = sc.disutility().shape();
    let dis = sc.disutility();
    let (c, tie) = mixture_envelope(types, mu, &dis.perceived_losses(grid, w_lp), probs);
    if tie {
        return None;
    }
    let residuals = |alpha: f64| -> Vec<f64> {
        grid.iter()
            .enumerate()
            .map(|(k, xi)| {
                if probs[k] == 0.0 || c[k] <= 0.0 {
                    *xi
                } else {
                    shape
                        .derivative_inverse(1.0 / (alpha * c[k]))
                        .unwrap_or(*xi)
                        .clamp(0.0, *xi)
                }
            })
            .collect()
    };
    let frozen_risk = |alpha: f64| -> f64 {
        residuals(alpha)
            .iter()
            .enumerate()
            .map(|(k, r)| probs[k] * c[k] * shape.value(*r))
            .sum()
    };
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    if frozen_risk(10f64.powf(lo)) < budget || frozen_risk(10f64.powf(hi)) > budget {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if frozen_risk(10f64.powf(mid)) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 10f64.powf(hi);
    let w: Vec<f64> = grid
        .iter()
        .zip(residuals(alpha))
        .map(|(xi, r)| (xi - r).max(0.0))
        .collect();
    let z = dis.perceived_losses(grid, &w);
    let (c_new, tie_new) = mixture_envelope(types, mu, &z, probs);
    let consistent = !tie_new
        && c.iter()
            .zip(&c_new)
            .all(|(a, b)| (a - b).abs() <= ENVELOPE_MATCH_TOL);
    let feasible = mixture_value(types, mu, &z, probs) <= budget + 1e-10 * (1.0 + budget.abs());
    let objective = dot(&w, probs);
    let no_worse = objective <= obj_lp + 1e-9 * (1.0 + obj_lp.abs());
    (consistent && feasible && no_worse).then_some((w, alpha))
}

/// Least-squares fit of `α ≥ 0` to `P_k = α P_k E_μ[ζ̄_k] g'(ξ_k - w_k)` over
/// interior coverage points, with the bound-aware stationarity residual.
pub(crate) fn recover_multiplier_raw(sc: &Scenario, mu: &[f64], w: &[f64], x: f64) -> Result<IrMultiplier> {
    let probs = sc.model().density(x)?;
    let grid = sc.grid();
    let dis = sc.disutility();
    let shape = dis.shape();
    let types = sc.types().types();
    let z = dis.perceived_losses(grid, w);
    let perceived = mixture_value(types, mu, &z, &probs) + mass(mu) * dis.investment_cost(x);
    let slack = sc.threshold() - perceived;
    let (c, tie) = mixture_envelope(types, mu, &z, &probs);
    let a: Vec<f64> = (0..grid.len())
        .map(|k| probs[k] * c[k] * shape.derivative(grid[k] - w[k]))
        .collect();
    let interior = |k: usize| w[k] > INTERIOR_TOL && w[k] < grid[k] - INTERIOR_TOL;
    let mut determined = true;
    let mut clamped = false;
    let alpha = if slack > 1e-9 * (1.0 + sc.threshold()) {
        0.0
    } else {
        let (num, den) = (0..grid.len())
            .filter(|&k| probs[k] > 0.0 && interior(k))
            .fold((0.0, 0.0), |(n, d), k| (n + a[k] * probs[k], d + a[k] * a[k]));
        if den > 0.0 {
            let fit = num / den;
            if fit < 0.0 {
                clamped = true;
                0.0
            } else {
                fit
            }
        } else {
            // only bound-active points: α is pinned to an interval
            determined = false;
            let mut lower: f64 = 0.0;
            let mut upper = f64::INFINITY;
            for k in (0..grid.len()).filter(|&k| probs[k] > 0.0 && a[k] > 0.0) {
                let ratio = probs[k] / a[k];
                if w[k] <= INTERIOR_TOL {
                    upper = upper.min(ratio);
                } else {
                    lower = lower.max(ratio);
                }
            }
            if upper.is_finite() {
                0.5 * (lower + upper.max(lower))
            } else {
                lower
            }
        }
    };
    let mut sq = 0.0;
    for k in (0..grid.len()).filter(|&k| probs[k] > 0.0) {
        let grad = probs[k] - alpha * a[k];
        let r = if interior(k) {
            grad
        } else if w[k] <= INTERIOR_TOL {
            grad.min(0.0)
        } else {
            grad.max(0.0)
        };
        sq += r * r;
    }
    Ok(IrMultiplier {
        alpha,
        residual: sq.sqrt(),
        clamped,
        determined,
        envelope_tie: tie,
        ir_slack: slack,
    })
}

/// `∂/∂x { E[w + ξ] + α Σ_i μ_i ρ_i[U] }` with the plan held fixed.
pub(crate) fn h1_raw(sc: &Scenario, mu: &[f64], w: &[f64], x: f64, alpha: f64) -> Result<Sensitivity> {
    let model = sc.model();
    let grid = sc.grid();
    let dis = sc.disutility();
    let types = sc.types().types();
    let probs = model.density(x)?;
    let dprobs = model.density_dx(x)?;
    let paid: Vec<f64> = w.iter().zip(grid).map(|(a, b)| a + b).collect();
    let z = dis.perceived_losses(grid, w);
    let d = mixture_directional(types, mu, &z, &probs, &dprobs);
    if d.smooth || alpha == 0.0 {
        return Ok(Sensitivity {
            value: dot(&paid, &dprobs) + alpha * (d.value + mass(mu) * dis.investment_cost_dx(x)),
            smooth: d.smooth,
        });
    }
    let value = central_difference(model.action_range(), x, |t| {
        let p = model.density(t)?;
        Ok(dot(&paid, &p)
            + alpha * (mixture_value(types, mu, &z, &p) + mass(mu) * dis.investment_cost(t)))
    })?;
    Ok(Sensitivity {
        value,
        smooth: false,
    })
}

/// `H₁` at `x` with the plan and multiplier re-solved at `(x, μ)`.
pub(crate) fn h1_resolved(sc: &Scenario, mu: &[f64], x: f64) -> Result<Option<f64>> {
    let Some(inner) = inner_solve(sc, mu, x)? else {
        return Ok(None);
    };
    let alpha = match inner.alpha {
        Some(a) => a,
        None => recover_multiplier_raw(sc, mu, &inner.w, x)?.alpha,
    };
    Ok(Some(h1_raw(sc, mu, &inner.w, x, alpha)?.value))
}

fn value_at(sc: &Scenario, mu: &[f64], x: f64) -> Result<Option<(f64, Inner)>> {
    let Some(inner) = inner_solve(sc, mu, x)? else {
        return Ok(None);
    };
    let probs = sc.model().density(x)?;
    let paid: Vec<f64> = inner.w.iter().zip(sc.grid()).map(|(a, b)| a + b).collect();
    Ok(Some((dot(&paid, &probs), inner)))
}

/// Perceived cost of full coverage at the cheapest action, `mass · min_x c(x)`.
pub(crate) fn min_perceived_cost(sc: &Scenario, mass: f64) -> f64 {
    let c = sc.disutility();
    let best = match sc.actions() {
        ActionSet::Discrete(a) => a
            .iter()
            .map(|x| c.investment_cost(*x))
            .fold(f64::INFINITY, f64::min),
        ActionSet::Interval { lo, hi } => c
            .investment_cost(*lo)
            .min(c.investment_cost(*hi))
            .min(c.investment_cost(0.0f64.clamp(*lo, *hi))),
    };
    mass * best
}

fn infeasible(sc: &Scenario, mu: &[f64]) -> Error {
    Error::Infeasible {
        reason: format!(
            "participation threshold {} is below the smallest perceived cost reachable with full coverage",
            sc.threshold()
        ),
        min_cost: min_perceived_cost(sc, mass(mu)),
    }
}

/// Benchmark solve at raw type weights.
pub(crate) fn full_info_raw(sc: &Scenario, mu: &[f64], opts: &SolveOptions) -> Result<FullInfo> {
    let candidates: Vec<f64> = match sc.actions() {
        ActionSet::Discrete(a) => a.clone(),
        ActionSet::Interval { lo, hi } => {
            let n = if hi > lo { opts.action_grid.max(2) } else { 1 };
            (0..n)
                .map(|j| {
                    if j + 1 == n {
                        *hi
                    } else {
                        lo + (hi - lo) * j as f64 / (n - 1) as f64
                    }
                })
                .collect()
        }
    };
    let solved = map_indexed(opts.execution, candidates.len(), |j| value_at(sc, mu, candidates[j]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = solved
        .iter()
        .map(|s| s.as_ref().map_or(f64::INFINITY, |v| v.0))
        .collect();
    let (j, tie) = argmin_first(&values);
    if !values[j].is_finite() {
        return Err(infeasible(sc, mu));
    }
    let mut flags = Vec::new();
    if tie {
        flags.push("action-tie".to_string());
    }
    let mut x = candidates[j];
    if let ActionSet::Interval { .. } = sc.actions() {
        if candidates.len() > 1 {
            x = refine_interval(sc, mu, &candidates, j, &values)?;
        }
    }
    let (transfer, inner) = match value_at(sc, mu, x)? {
        Some(v) => v,
        None => return Err(infeasible(sc, mu)),
    };
    let mut multiplier = recover_multiplier_raw(sc, mu, &inner.w, x)?;
    if let Some(a) = inner.alpha {
        if multiplier.determined || inner.slack {
            // the polish multiplier is exact for the frozen envelope
            multiplier.alpha = if inner.slack { 0.0 } else { a };
        }
    }
    if inner.slack {
        flags.push("ir-slack".to_string());
    }
    if inner.kink || multiplier.envelope_tie {
        flags.push("envelope-kink".to_string());
    }
    if multiplier.clamped {
        flags.push("alpha-clamped".to_string());
    }
    if !multiplier.determined {
        flags.push("alpha-interval".to_string());
    }
    Ok(FullInfo {
        x,
        w: inner.w,
        multiplier,
        transfer,
        flags,
    })
}

fn refine_interval(sc: &Scenario, mu: &[f64], xs: &[f64], j: usize, values: &[f64]) -> Result<f64> {
    let n = xs.len();
    let a = xs[j.saturating_sub(1)];
    let b = xs[(j + 1).min(n - 1)];
    let h = |t: f64| -> Result<f64> { Ok(h1_resolved(sc, mu, t)?.unwrap_or(f64::NAN)) };
    let (ha, hb) = (h(a)?, h(b)?);
    if ha < 0.0 && hb > 0.0 {
        return bisect(a, b, h);
    }
    let v = |t: f64| -> Result<f64> { Ok(value_at(sc, mu, t)?.map_or(f64::INFINITY, |v| v.0)) };
    let (xg, vg) = golden_section(a, b, 1e-10, v)?;
    Ok(if vg < values[j] { xg } else { xs[j] })
}

/// Minimizes the insurer's cost over tabular plans and actions subject only
/// to participation.
pub fn solve_full_info(scenario: &Scenario, mu: &TypeDistribution) -> Result<SolveReport> {
    solve_full_info_with(scenario, mu, &SolveOptions::default())
}

pub fn solve_full_info_with(
    scenario: &Scenario,
    mu: &TypeDistribution,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    scenario.check_mu(mu)?;
    let fi = full_info_raw(scenario, mu.weights(), opts)?;
    let design = scenario.design_cost() * w1_raw(mu.weights(), scenario.baseline().weights());
    Ok(SolveReport {
        contract: Contract::tabular(scenario.model().grid(), fi.w)?,
        action: fi.x,
        objective: fi.transfer + design,
        ir_slack: fi.multiplier.ir_slack,
        alpha: fi.multiplier.alpha,
        beta: None,
        alpha_residual: Some(fi.multiplier.residual),
        flags: fi.flags,
    })
}

/// IR multiplier at a stationary benchmark pair `(w, x)`.
pub fn recover_ir_multiplier(
    scenario: &Scenario,
    mu: &TypeDistribution,
    plan: &TabularContract,
    x: f64,
) -> Result<IrMultiplier> {
    scenario.check_mu(mu)?;
    check_len("coverage", scenario.grid().len(), plan.coverage().len())?;
    scenario.check_action(x)?;
    recover_multiplier_raw(scenario, mu.weights(), plan.coverage(), x)
}
