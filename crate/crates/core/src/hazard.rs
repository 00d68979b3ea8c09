//! Intensity of moral hazard `T(μ) = x* - xᵃ`, its sensitivity to the type
//! distribution, and design directions that lower it.

use serde::Serialize;

use crate::contract::{
    argmin_first, full_info_raw, golden_section, h1_raw, h1_resolved,
    principal_transfer, AgentView, SolveOptions,
};
use crate::error::{check_len, Error, Result};
use crate::model::{ActionSet, Contract, Scenario, TabularContract, TypeDistribution};
use crate::par::map_indexed;
use crate::risk::Sensitivity;
use crate::transport::{project_simplex_raw, w1_dual, w1_raw};

const X_STEP: f64 = 1e-4;
const MU_STEP: f64 = 1e-5;
const INTERIOR_MARGIN: f64 = 1e-6;
const JACOBIAN_FLOOR: f64 = 1e-8;
const MAX_HALVINGS: usize = 20;
const MIN_STEP: f64 = 1e-12;
const ZERO_TOL: f64 = 1e-12;

/// Benchmark action, agent action and their gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Imh {
    pub x_star: f64,
    pub x_a: f64,
    pub imh: f64,
}

/// How the benchmark plan enters `∂H₂/∂μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageCoupling {
    /// `w*` held at its value for the unperturbed `μ`.
    Frozen,
    /// `w*` re-solved at every perturbed `μ`.
    #[default]
    Resolved,
}

/// `∇T(μ)` with the scalar Jacobians and partials it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradT {
    pub grad: Vec<f64>,
    pub x_star: f64,
    pub x_a: f64,
    /// `∂H₁/∂x` at `x*`.
    pub j1: f64,
    /// `∂H₂/∂x` at `xᵃ`.
    pub j2: f64,
    pub dh1_dmu: Vec<f64>,
    pub dh2_dmu: Vec<f64>,
    pub coupling: CoverageCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImhReport {
    pub x_star: f64,
    pub x_a: f64,
    pub imh: f64,
    #[serde(rename = "grad_T")]
    pub grad_t: Option<Vec<f64>>,
    pub b_star: Vec<f64>,
    pub direction: Option<Vec<f64>>,
    /// A direction meeting both inner-product conditions exists.
    pub feasible: bool,
    pub flags: Vec<String>,
}

fn check_weights(sc: &Scenario, weights: &[f64]) -> Result<()> {
    check_len("type weights", sc.types().len(), weights.len())?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Domain(
            "type weights must be finite, nonnegative and not all zero".into(),
        ));
    }
    Ok(())
}

fn imh_raw(sc: &Scenario, weights: &[f64], opts: &SolveOptions) -> Result<(Imh, Vec<f64>)> {
    let fi = full_info_raw(sc, weights, opts)?;
    let br = AgentView::new(sc, weights, &fi.w, 0.0).best_response(opts)?;
    Ok((
        Imh {
            x_star: fi.x,
            x_a: br.x,
            imh: fi.x - br.x,
        },
        fi.w,
    ))
}

/// `x*` from the benchmark, `xᵃ` as the agent's answer to the benchmark plan.
pub fn imh(scenario: &Scenario, mu: &TypeDistribution) -> Result<Imh> {
    imh_with(scenario, mu, &SolveOptions::default())
}

pub fn imh_with(scenario: &Scenario, mu: &TypeDistribution, opts: &SolveOptions) -> Result<Imh> {
    scenario.check_mu(mu)?;
    Ok(imh_raw(scenario, mu.weights(), opts)?.0)
}

/// [`imh`] at unnormalized type weights, treating each weight as a free
/// coordinate (the participation threshold is not rescaled).
pub fn imh_at_weights(scenario: &Scenario, weights: &[f64], opts: &SolveOptions) -> Result<Imh> {
    check_weights(scenario, weights)?;
    Ok(imh_raw(scenario, weights, opts)?.0)
}

/// Gap for a fixed contract: `x*` minimizes the insurer's transfer over the
/// action set, `xᵃ` is the agent's best response.
pub fn imh_for_contract(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    opts: &SolveOptions,
) -> Result<Imh> {
    scenario.check_mu(mu)?;
    contract.check_grid(scenario.model().grid())?;
    let model = scenario.model();
    let transfer = |x: f64| -> Result<f64> {
        Ok(principal_transfer(scenario, contract, &model.density(x)?))
    };
    let x_star = match scenario.actions() {
        ActionSet::Discrete(actions) => {
            let values = actions.iter().map(|x| transfer(*x)).collect::<Result<Vec<_>>>()?;
            actions[argmin_first(&values).0]
        }
        ActionSet::Interval { lo, hi } => {
            let n = if hi > lo { opts.action_grid.max(2) } else { 1 };
            let xs: Vec<f64> = (0..n)
                .map(|j| if n == 1 { *lo } else { lo + (hi - lo) * j as f64 / (n - 1) as f64 })
                .collect();
            let values = xs.iter().map(|x| transfer(*x)).collect::<Result<Vec<_>>>()?;
            let j = argmin_first(&values).0;
            if n == 1 {
                xs[0]
            } else {
                let (a, b) = (xs[j.saturating_sub(1)], xs[(j + 1).min(n - 1)]);
                let (xg, vg) = golden_section(a, b, 1e-10, transfer)?;
                if vg < values[j] { xg } else { xs[j] }
            }
        }
    };
    let x_a = AgentView::for_contract(scenario, mu.weights(), contract)
        .best_response(opts)?
        .x;
    Ok(Imh {
        x_star,
        x_a,
        imh: x_star - x_a,
    })
}

/// `H₁ = ∂/∂x { E[w + ξ] + α Σ_i μ_i ρ_i[U] }` with `w` and `α` given.
pub fn h1(
    scenario: &Scenario,
    mu: &TypeDistribution,
    plan: &TabularContract,
    x: f64,
    alpha: f64,
) -> Result<Sensitivity> {
    scenario.check_mu(mu)?;
    check_len("coverage", scenario.grid().len(), plan.coverage().len())?;
    scenario.check_action(x)?;
    smooth_family(scenario)?;
    h1_raw(scenario, mu.weights(), plan.coverage(), x, alpha)
}

/// `H₂ = ∂/∂x Σ_i μ_i ρ_i[U]`, the agent's marginal cost of effort.
pub fn h2(
    scenario: &Scenario,
    mu: &TypeDistribution,
    contract: &Contract,
    x: f64,
) -> Result<Sensitivity> {
    scenario.check_mu(mu)?;
    contract.check_grid(scenario.model().grid())?;
    scenario.check_action(x)?;
    smooth_family(scenario)?;
    AgentView::for_contract(scenario, mu.weights(), contract).slope(x)
}

fn smooth_family(sc: &Scenario) -> Result<()> {
    if sc.model().is_smooth() {
        Ok(())
    } else {
        Err(Error::Precondition(
            "derivatives in the action need a smooth action family".into(),
        ))
    }
}

/// Probe points `μ ± ε e_i` (forward only when `μ_i < ε`) and their spacing.
fn probes(mu: &[f64]) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    (0..mu.len())
        .map(|i| {
            let lo = (mu[i] - MU_STEP).max(0.0);
            let hi = mu[i] + MU_STEP;
            let mut a = mu.to_vec();
            a[i] = lo;
            let mut b = mu.to_vec();
            b[i] = hi;
            (a, b, hi - lo)
        })
        .collect()
}

/// `∇T(μ)` from the implicit-function formula
/// `∂T/∂μ_i = J₂⁻¹ ∂H₂/∂μ_i - J₁⁻¹ ∂H₁/∂μ_i`, with the benchmark coverage
/// re-solved inside `∂H₂/∂μ_i`.
pub fn grad_t(scenario: &Scenario, mu: &TypeDistribution) -> Result<Vec<f64>> {
    Ok(grad_t_with(scenario, mu, CoverageCoupling::default(), &SolveOptions::default())?.grad)
}

pub fn grad_t_with(
    scenario: &Scenario,
    mu: &TypeDistribution,
    coupling: CoverageCoupling,
    opts: &SolveOptions,
) -> Result<GradT> {
    scenario.check_mu(mu)?;
    grad_t_raw(scenario, mu.weights(), coupling, opts)
}

fn grad_t_raw(sc: &Scenario, mu: &[f64], coupling: CoverageCoupling, opts: &SolveOptions) -> Result<GradT> {
    smooth_family(sc)?;
    let ActionSet::Interval { lo, hi } = *sc.actions() else {
        return Err(Error::Precondition(
            "the sensitivity of T needs an interval action set".into(),
        ));
    };
    let (t, w) = imh_raw(sc, mu, opts)?;
    let interior = |x: f64| x > lo + INTERIOR_MARGIN && x < hi - INTERIOR_MARGIN;
    if !interior(t.x_star) {
        return Err(Error::Precondition(format!(
            "benchmark action x* = {} is on the boundary of [{lo}, {hi}]; the minimum must be interior and isolated",
            t.x_star
        )));
    }
    if !interior(t.x_a) {
        return Err(Error::Precondition(format!(
            "agent action x^a = {} is on the boundary of [{lo}, {hi}]; the minimum must be interior and isolated",
            t.x_a
        )));
    }
    let range = sc.model().action_range();
    let h1_at = |m: &[f64], x: f64| -> Result<f64> {
        h1_resolved(sc, m, x)?.ok_or_else(|| {
            Error::Precondition("participation is infeasible next to the benchmark optimum".into())
        })
    };
    let h2_at = |m: &[f64], plan: &[f64], x: f64| -> Result<f64> {
        Ok(AgentView::new(sc, m, plan, 0.0).slope(x)?.value)
    };

    let j1 = central_difference_step(range, t.x_star, |x| h1_at(mu, x))?;
    let j2 = central_difference_step(range, t.x_a, |x| h2_at(mu, &w, x))?;
    if j1.abs() <= JACOBIAN_FLOOR {
        return Err(Error::Precondition(format!(
            "benchmark Jacobian |∂H₁/∂x| = {:e} is degenerate; x* is not an isolated minimum",
            j1.abs()
        )));
    }
    if j2.abs() <= JACOBIAN_FLOOR {
        return Err(Error::Precondition(format!(
            "agent Jacobian |∂H₂/∂x| = {:e} is degenerate; x^a is not an isolated minimum",
            j2.abs()
        )));
    }

    let points = probes(mu);
    let partials = map_indexed(opts.execution, points.len(), |i| -> Result<(f64, f64)> {
        let (a, b, span) = &points[i];
        let dh1 = (h1_at(b, t.x_star)? - h1_at(a, t.x_star)?) / span;
        let (wa, wb) = match coupling {
            CoverageCoupling::Frozen => (w.clone(), w.clone()),
            CoverageCoupling::Resolved => (
                full_info_raw(sc, a, opts)?.w,
                full_info_raw(sc, b, opts)?.w,
            ),
        };
        let dh2 = (h2_at(b, &wb, t.x_a)? - h2_at(a, &wa, t.x_a)?) / span;
        Ok((dh1, dh2))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let dh1_dmu: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let dh2_dmu: Vec<f64> = partials.iter().map(|p| p.1).collect();
    // 1×1 linear solves
    let grad = dh1_dmu
        .iter()
        .zip(&dh2_dmu)
        .map(|(d1, d2)| d2 / j2 - d1 / j1)
        .collect();
    Ok(GradT {
        grad,
        x_star: t.x_star,
        x_a: t.x_a,
        j1,
        j2,
        dh1_dmu,
        dh2_dmu,
        coupling,
    })
}

fn central_difference_step<F>(range: (f64, f64), x: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let a = (x - X_STEP).max(range.0);
    let b = (x + X_STEP).min(range.1);
    Ok((f(b)? - f(a)?) / (b - a))
}

fn zero_sum(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A zero-sum unit `Δμ` with `Δμᵀ∇T ≤ 0` and `Δμᵀb* ≤ 0`, or `None` when the
/// zero-sum parts of `∇T` and `-b*` are positively parallel.
///
/// The direction bisects `-∇T` and `-b*` (after projection and scaling);
/// with `∇T = 0` it is `(-1, 1, 0, …)/√2` unless that conflicts with `b*`.
pub fn mitigating_direction(grad_t: &[f64], b_star: &[f64]) -> Result<Option<Vec<f64>>> {
    check_len("dual potential", grad_t.len(), b_star.len())?;
    let n = grad_t.len();
    if n < 2 {
        return Ok(None);
    }
    let g = zero_sum(grad_t);
    let b = zero_sum(b_star);
    let (ng, nb) = (norm(&g), norm(&b));
    let scale = 1.0 + grad_t.iter().chain(b_star).fold(0.0f64, |a, v| a.max(v.abs()));
    let g_zero = ng <= ZERO_TOL * scale;
    let b_zero = nb <= ZERO_TOL * scale;
    let unit = |v: Vec<f64>| -> Vec<f64> {
        let s = norm(&v);
        v.into_iter().map(|x| x / s).collect()
    };
    if g_zero {
        let mut conv = vec![0.0; n];
        conv[0] = -std::f64::consts::FRAC_1_SQRT_2;
        conv[1] = std::f64::consts::FRAC_1_SQRT_2;
        if b_zero || inner(&conv, &b) <= 0.0 {
            return Ok(Some(conv));
        }
        return Ok(Some(unit(b.iter().map(|x| -x).collect())));
    }
    if b_zero {
        return Ok(Some(unit(g.iter().map(|x| -x).collect())));
    }
    let cos = inner(&g, &b) / (ng * nb);
    if cos <= -1.0 + 1e-12 {
        return Ok(None);
    }
    Ok(Some(unit(
        g.iter().zip(&b).map(|(x, y)| -(x / ng + y / nb)).collect(),
    )))
}

/// Outcome of a design step `μ' = Π(μ + cΔμ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignStep {
    pub mu: Vec<f64>,
    pub mu_next: Vec<f64>,
    pub direction: Vec<f64>,
    pub c_requested: f64,
    pub c_used: f64,
    pub halvings: usize,
    pub t_before: f64,
    pub t_after: f64,
    pub w1_before: f64,
    pub w1_after: f64,
    pub t_decreased: bool,
    pub w1_decreased: bool,
    /// `false` when the step collapsed without finding `T(μ') ≤ T(μ)`.
    pub accepted: bool,
}

/// Moves `μ` along a zero-sum `Δμ`, halving `c` (at most 20 times) until
/// the re-solved `T` does not increase.
pub fn design_step(
    scenario: &Scenario,
    mu: &TypeDistribution,
    direction: &[f64],
    c_step: f64,
    opts: &SolveOptions,
) -> Result<DesignStep> {
    scenario.check_mu(mu)?;
    check_len("design direction", mu.len(), direction.len())?;
    if direction.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("design direction must be finite".into()));
    }
    let total: f64 = direction.iter().sum();
    if total.abs() > 1e-9 * (1.0 + norm(direction)) {
        return Err(Error::Domain(format!(
            "design direction must sum to zero (sum is {total})"
        )));
    }
    if !(c_step.is_finite() && c_step >= 0.0) {
        return Err(Error::Domain(format!(
            "step size {c_step} must be finite and nonnegative"
        )));
    }
    let mu0 = scenario.baseline().weights();
    let w = mu.weights();
    let t_before = imh_raw(scenario, w, opts)?.0.imh;
    let w1_before = w1_raw(w, mu0);
    let mut report = DesignStep {
        mu: w.to_vec(),
        mu_next: w.to_vec(),
        direction: direction.to_vec(),
        c_requested: c_step,
        c_used: 0.0,
        halvings: 0,
        t_before,
        t_after: t_before,
        w1_before,
        w1_after: w1_before,
        t_decreased: false,
        w1_decreased: false,
        accepted: true,
    };
    if c_step == 0.0 {
        return Ok(report);
    }
    let mut c = c_step;
    for halvings in 0..=MAX_HALVINGS {
        if c < MIN_STEP {
            break;
        }
        let next = project_simplex_raw(
            &w.iter().zip(direction).map(|(m, d)| m + c * d).collect::<Vec<_>>(),
        );
        let t_after = imh_raw(scenario, &next, opts)?.0.imh;
        if t_after <= t_before {
            let w1_after = w1_raw(&next, mu0);
            report.mu_next = next;
            report.c_used = c;
            report.halvings = halvings;
            report.t_after = t_after;
            report.w1_after = w1_after;
            report.t_decreased = t_after < t_before;
            report.w1_decreased = w1_after < w1_before;
            return Ok(report);
        }
        c *= 0.5;
    }
    report.accepted = false;
    report.halvings = MAX_HALVINGS;
    report.c_used = c;
    Ok(report)
}

/// IMH with, where the family allows it, `∇T`, `b*` and a mitigating
/// direction.
pub fn imh_report(
    scenario: &Scenario,
    mu: &TypeDistribution,
    coupling: CoverageCoupling,
    opts: &SolveOptions,
) -> Result<ImhReport> {
    scenario.check_mu(mu)?;
    let t = imh_raw(scenario, mu.weights(), opts)?.0;
    let b_star = w1_dual(mu, scenario.baseline())?.b;
    let mut flags = Vec::new();
    let grad = match grad_t_raw(scenario, mu.weights(), coupling, opts) {
        Ok(g) => Some(g.grad),
        Err(Error::Precondition(msg)) => {
            flags.push(format!("grad-unavailable: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let direction = match &grad {
        Some(g) => mitigating_direction(g, &b_star)?,
        None => None,
    };
    if t.imh < -1e-9 {
        flags.push("negative-imh".to_string());
    }
    Ok(ImhReport {
        x_star: t.x_star,
        x_a: t.x_a,
        imh: t.imh,
        feasible: direction.is_some(),
        grad_t: grad,
        b_star,
        direction,
        flags,
    })
}
