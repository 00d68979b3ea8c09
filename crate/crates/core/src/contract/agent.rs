//! Agent and principal objectives and the agent's best response.

use crate::error::Result;
use crate::model::{dot, ActionSet, Contract, Scenario, TypeDistribution};
use crate::par::map_indexed;
use crate::risk::{mixture_directional, mixture_value, Sensitivity};
use crate::transport::w1_raw;

use super::SolveOptions;

const TIE_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;

/// Agent's view of a fixed contract: the loss perception row
/// `g(ξ - w(ξ)) + premium` and the type weights (not necessarily normalized).
pub(crate) struct AgentView<'a> {
    sc: &'a Scenario,
    mu: &'a [f64],
    perceived: Vec<f64>,
    mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BestResponse {
    pub x: f64,
    pub value: f64,
    /// Another action attains the minimum within tolerance.
    pub tie: bool,
}

impl<'a> AgentView<'a> {
    pub fn new(sc: &'a Scenario, mu: &'a [f64], coverage: &[f64], premium: f64) -> Self {
        let mut perceived = sc.disutility().perceived_losses(sc.grid(), coverage);
        perceived.iter_mut().for_each(|v| *v += premium);
        Self {
            sc,
            mu,
            perceived,
            mass: mu.iter().sum(),
        }
    }

    pub fn for_contract(sc: &'a Scenario, mu: &'a [f64], contract: &Contract) -> Self {
        let coverage = contract.coverage_on(sc.model().grid());
        Self::new(sc, mu, &coverage, contract.premium())
    }

    /// `Σ_i μ_i ρ_i[U]` under `P(·, x)`.
    pub fn cost(&self, x: f64) -> Result<f64> {
        let probs = self.sc.model().density(x)?;
        Ok(self.cost_with(x, &probs))
    }

    pub fn cost_with(&self, x: f64, probs: &[f64]) -> f64 {
        mixture_value(self.sc.types().types(), self.mu, &self.perceived, probs)
            + self.mass * self.sc.disutility().investment_cost(x)
    }

    /// `∂/∂x Σ_i μ_i ρ_i[U]`, analytic unless an envelope tie forces a
    /// central difference.
    pub fn slope(&self, x: f64) -> Result<Sensitivity> {
        let model = self.sc.model();
        let probs = model.density(x)?;
        let dprobs = model.density_dx(x)?;
        let d = mixture_directional(
            self.sc.types().types(),
            self.mu,
            &self.perceived,
            &probs,
            &dprobs,
        );
        let inv = self.mass * self.sc.disutility().investment_cost_dx(x);
        if d.smooth {
            return Ok(Sensitivity {
                value: d.value + inv,
                smooth: true,
            });
        }
        let value = central_difference(model.action_range(), x, |t| self.cost(t))?;
        Ok(Sensitivity {
            value,
            smooth: false,
        })
    }

    pub fn best_response(&self, opts: &SolveOptions) -> Result<BestResponse> {
        match self.sc.actions() {
            ActionSet::Discrete(actions) => {
                let values = actions
                    .iter()
                    .map(|x| self.cost(*x))
                    .collect::<Result<Vec<_>>>()?;
                let (j, tie) = argmin_first(&values);
                Ok(BestResponse {
                    x: actions[j],
                    value: values[j],
                    tie,
                })
            }
            ActionSet::Interval { lo, hi } => self.best_on_interval(*lo, *hi, opts),
        }
    }

    fn best_on_interval(&self, lo: f64, hi: f64, opts: &SolveOptions) -> Result<BestResponse> {
        let n = if hi > lo { opts.grid_points.max(2) } else { 1 };
        let at = |j: usize| {
            if n == 1 || j + 1 == n {
                hi
            } else {
                lo + (hi - lo) * j as f64 / (n - 1) as f64
            }
        };
        let values = map_indexed(opts.execution, n, |j| self.cost(at(j)))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let (j, tie) = argmin_first(&values);
        if n == 1 {
            return Ok(BestResponse {
                x: lo,
                value: values[0],
                tie: false,
            });
        }
        let a = at(j.saturating_sub(1));
        let b = at((j + 1).min(n - 1));
        let mut best = (at(j), values[j]);
        let g = golden_section(a, b, GOLDEN_TOL, |t| self.cost(t))?;
        if g.1 < best.1 {
            best = g;
        }
        // stationarity polish on the analytic slope
        let (sa, sb) = (self.slope(a)?, self.slope(b)?);
        if sa.value < 0.0 && sb.value > 0.0 {
            let root = bisect(a, b, |t| Ok(self.slope(t)?.value))?;
            let v = self.cost(root)?;
            if v <= best.1 + TIE_TOL * (1.0 + best.1.abs()) {
                best = (root, v);
            }
        }
        Ok(BestResponse {
            x: best.0,
            value: best.1,
            tie,
        })
    }
}

/// Index of the smallest value, preferring the first among near-ties, and
/// whether a near-tie occurred.
pub(crate) fn argmin_first(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    for (j, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] - TIE_TOL * (1.0 + values[best].abs()) {
            best = j;
        }
    }
    let tie = values.iter().enumerate().any(|(j, v)| {
        j != best && (v - values[best]).abs() <= TIE_TOL * (1.0 + values[best].abs())
    });
    (best, tie)
}

pub(crate) fn golden_section<F>(mut a: f64, mut b: f64, tol: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Root of an increasing function with `f(a) < 0 < f(b)`, by the Illinois
/// variant of regula falsi (midpoint steps where a value is not finite).
pub(crate) fn bisect<F>(mut a: f64, mut b: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    let mut side = 0i8;
    let mut last = f64::NAN;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let mut c = if fa.is_finite() && fb.is_finite() && fb != fa {
            (a * fb - b * fa) / (fb - fa)
        } else {
            mid
        };
        if !(c > a && c < b) {
            c = mid;
        }
        if (c - last).abs() <= 1e-15 * (1.0 + c.abs()) {
            return Ok(c);
        }
        last = c;
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            if fc.is_finite() {
                fb = fc;
            }
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Central difference clamped to `range`, one-sided at its ends.
pub(crate) fn central_difference<F>(range: (f64, f64), x: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let a = (x - FD_STEP).max(range.0);
    let b = (x + FD_STEP).min(range.1);
    Ok((f(b)? - f(a)?) / (b - a))
}

/// `Σ_i μ_i ρ_{θ_i}[U(w(ξ), x)]` under `P(·, x)`.
pub fn agent_objective(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
) -> Result<f64> {
    scenario.check_mu(mu)?;
    contract.check_grid(scenario.model().grid())?;
    scenario.check_action(x)?;
    AgentView::for_contract(scenario, mu.weights(), contract).cost(x)
}

/// Minimizer of [`agent_objective`] over the action set, ties broken toward
/// the smallest action.
pub fn agent_best_response(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
) -> Result<f64> {
    agent_best_response_with(scenario, mu, contract, &SolveOptions::default())
}

pub fn agent_best_response_with(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    opts: &SolveOptions,
) -> Result<f64> {
    scenario.check_mu(mu)?;
    contract.check_grid(scenario.model().grid())?;
    Ok(AgentView::for_contract(scenario, mu.weights(), contract)
        .best_response(opts)?
        .x)
}

/// Insurer's cost `E[w(ξ) + ξ] + γ W₁(μ, μ⁰)` for tabular plans, or
/// `E[𝔠ξ] - 𝔭 + γ W₁(μ, μ⁰)` for linear contracts.
pub fn principal_objective(
    scenario: &Scenario,
    contract: &Contract,
    x: f64,
    mu: &TypeDistribution,
) -> Result<f64> {
    scenario.check_mu(mu)?;
    contract.check_grid(scenario.model().grid())?;
    scenario.check_action(x)?;
    let probs = scenario.model().density(x)?;
    let transfer = principal_transfer(scenario, contract, &probs);
    Ok(transfer + scenario.design_cost() * w1_raw(mu.weights(), scenario.baseline().weights()))
}

pub(crate) fn principal_transfer(sc: &Scenario, contract: &Contract, probs: &[f64]) -> f64 {
    let grid = sc.grid();
    match contract {
        Contract::Tabular(t) => {
            let paid: Vec<f64> = t.coverage().iter().zip(grid).map(|(w, xi)| w + xi).collect();
            dot(&paid, probs)
        }
        Contract::Linear(l) => l.coverage_fraction() * dot(grid, probs) - l.premium(),
    }
}
