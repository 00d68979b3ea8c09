//! Hidden-action design: the insurer picks the plan and the type
//! distribution, the agent answers with his exact best response.
//!
//! Discrete action sets are handled per targeted action. Feasible starting
//! plans come from the benchmark plans and a coverage lattice; each is then
//! improved by a convex-concave procedure that linearizes the agent's cost of
//! every competing action (a conservative restriction, so iterates stay
//! feasible). Interval action sets use a pattern search over the plan with
//! the best response evaluated exactly.

use crate::error::{Error, Result};
use crate::model::{dot, ActionSet, Contract, Scenario, TypeDistribution};
use crate::par::map_indexed;
use crate::risk::mixture_envelope;
use crate::transport::{project_simplex_raw, w1_dual, w1_raw};

use super::agent::{argmin_first, AgentView};
use super::cuts::{PerceptionProgram, RiskRow};
use super::full_info::{budget, inner_solve, min_perceived_cost};
use super::{SolveOptions, SolveReport};

const CCP_ITERS: usize = 60;
const CCP_STARTS: usize = 12;
const PATTERN_MIN_STEP: f64 = 1e-7;
const MU_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct HiddenSolution {
    pub report: SolveReport,
    pub mu: TypeDistribution,
}

/// Incumbent plan at a fixed type distribution.
#[derive(Debug, Clone)]
struct Candidate {
    w: Vec<f64>,
    x: f64,
    /// `E[w + ξ]` under the induced action.
    transfer: f64,
    /// Index of the targeted action for discrete sets.
    target: Option<usize>,
}

struct Problem<'a> {
    sc: &'a Scenario,
    opts: &'a SolveOptions,
}

impl<'a> Problem<'a> {
    fn margin(&self) -> f64 {
        self.opts.ic_margin * (1.0 + self.sc.threshold())
    }

    fn transfer(&self, w: &[f64], x: f64) -> Result<f64> {
        let probs = self.sc.model().density(x)?;
        let paid: Vec<f64> = w.iter().zip(self.sc.grid()).map(|(a, b)| a + b).collect();
        Ok(dot(&paid, &probs))
    }

    /// Exact response to `w` and its transfer, if participation holds.
    fn evaluate(&self, mu: &[f64], w: &[f64]) -> Result<Option<Candidate>> {
        let view = AgentView::new(self.sc, mu, w, 0.0);
        let br = view.best_response(self.opts)?;
        if br.value > self.sc.threshold() {
            return Ok(None);
        }
        Ok(Some(Candidate {
            w: w.to_vec(),
            x: br.x,
            transfer: self.transfer(w, br.x)?,
            target: None,
        }))
    }

    fn best_at(&self, mu: &[f64], warm: Option<&Candidate>) -> Result<Option<Candidate>> {
        match self.sc.actions() {
            ActionSet::Discrete(actions) => self.best_discrete(mu, actions, warm),
            ActionSet::Interval { .. } => self.best_interval(mu, warm),
        }
    }

    // ---- discrete action sets ----

    fn best_discrete(
        &self,
        mu: &[f64],
        actions: &[f64],
        warm: Option<&Candidate>,
    ) -> Result<Option<Candidate>> {
        let m = self.sc.grid().len();
        let mut seeds: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); actions.len()];
        let mut direct: Vec<Option<Candidate>> = vec![None; actions.len()];
        if let Some(c) = warm {
            if let Some(t) = c.target {
                match inner_solve(self.sc, mu, actions[t])? {
                    Some(inner) if self.targets(mu, actions, &inner.w) == Some(t) => {
                        return Ok(Some(Candidate {
                            transfer: self.transfer(&inner.w, actions[t])?,
                            w: inner.w,
                            x: actions[t],
                            target: Some(t),
                        }));
                    }
                    _ => seeds[t].push((c.w.clone(), 0.0)),
                }
            }
        } else {
            for (t, x) in actions.iter().enumerate() {
                // relaxation optimum for this action; optimal outright when
                // the agent already prefers it
                let Some(inner) = inner_solve(self.sc, mu, *x)? else {
                    continue;
                };
                match self.targets(mu, actions, &inner.w) {
                    Some(s) if s == t => {
                        direct[t] = Some(Candidate {
                            transfer: self.transfer(&inner.w, *x)?,
                            w: inner.w,
                            x: *x,
                            target: Some(t),
                        });
                    }
                    Some(s) => {
                        let cost = self.transfer(&inner.w, actions[s])?;
                        seeds[s].push((inner.w, cost));
                    }
                    None => {}
                }
            }
            for (w, t) in self.lattice_seeds(mu, actions, m)? {
                let cost = self.transfer(&w, actions[t])?;
                seeds[t].push((w, cost));
            }
        }
        // the feasible set is not convex, so several starts per target
        let mut jobs: Vec<(usize, Vec<f64>)> = Vec::new();
        for (t, list) in seeds.iter_mut().enumerate() {
            if direct[t].is_some() {
                continue;
            }
            list.sort_by(|a, b| a.1.total_cmp(&b.1));
            jobs.extend(list.drain(..).take(CCP_STARTS).map(|(w, _)| (t, w)));
        }
        let runs = map_indexed(self.opts.execution, jobs.len(), |i| {
            self.ccp(mu, actions, jobs[i].0, jobs[i].1.clone())
        });
        let mut best: Option<Candidate> = None;
        let found = direct.into_iter().flatten().map(Ok).chain(runs.into_iter().filter_map(|r| r.transpose()));
        for c in found {
            let c = c?;
            if best.as_ref().is_none_or(|b| {
                c.transfer < b.transfer - 1e-12 * (1.0 + b.transfer.abs())
            }) {
                best = Some(c);
            }
        }
        Ok(best)
    }

    /// Action the agent picks under `w` if it is strictly preferred by the
    /// margin and participation holds.
    fn targets(&self, mu: &[f64], actions: &[f64], w: &[f64]) -> Option<usize> {
        let view = AgentView::new(self.sc, mu, w, 0.0);
        let costs: Vec<f64> = actions.iter().map(|x| view.cost(*x).unwrap_or(f64::INFINITY)).collect();
        let (t, _) = argmin_first(&costs);
        let margin = self.margin();
        let strict = costs
            .iter()
            .enumerate()
            .all(|(s, c)| s == t || costs[t] <= c - margin);
        (strict && costs[t] <= self.sc.threshold()).then_some(t)
    }

    fn lattice_seeds(&self, mu: &[f64], actions: &[f64], m: usize) -> Result<Vec<(Vec<f64>, usize)>> {
        let levels: usize = match m {
            0..=3 => 11,
            4..=5 => 6,
            6..=8 => 3,
            _ => return Ok(Vec::new()),
        };
        let count = levels.pow(m as u32);
        let grid = self.sc.grid();
        let decode = |mut idx: usize| -> Vec<f64> {
            let mut w = vec![0.0; m];
            for (k, v) in w.iter_mut().enumerate() {
                let d = idx % levels;
                idx /= levels;
                *v = grid[k] * d as f64 / (levels - 1) as f64;
            }
            w
        };
        let hits = map_indexed(self.opts.execution, count, |i| {
            let w = decode(i);
            self.targets(mu, actions, &w).map(|t| (w, t))
        });
        Ok(hits.into_iter().flatten().collect())
    }

    /// Coverage program at target `t` in perceived-loss space, with each
    /// competing action's cost replaced by its supporting hyperplane at `w0`
    /// (exact while that action's envelope is unchanged). `ir_shift` and
    /// `ic_shift` tighten the right-hand sides, for shadow prices.
    fn linearized(
        &self,
        mu: &[f64],
        actions: &[f64],
        t: usize,
        w0: &[f64],
        ir_shift: f64,
        ic_shift: f64,
    ) -> Result<PerceptionProgram<'a>> {
        let sc = self.sc;
        let grid = sc.grid();
        let dis = sc.disutility();
        let types = sc.types().types();
        let mass: f64 = mu.iter().sum();
        let xt = actions[t];
        let probs = sc.model().density(xt)?;
        let z0 = dis.perceived_losses(grid, w0);
        let mut rows = vec![RiskRow {
            mu: mu.to_vec(),
            probs: probs.clone(),
            linear: vec![0.0; grid.len()],
            // tightened by the margin so that rounding cannot undo the
            // exact check in `targets`
            rhs: budget(sc, mu, xt) - self.margin() - ir_shift,
        }];
        for (s, xs) in actions.iter().enumerate() {
            if s == t {
                continue;
            }
            let ps = sc.model().density(*xs)?;
            let (c, _) = mixture_envelope(types, mu, &z0, &ps);
            rows.push(RiskRow {
                mu: mu.to_vec(),
                probs: probs.clone(),
                linear: ps.iter().zip(&c).map(|(p, c)| -p * c).collect(),
                rhs: mass * (dis.investment_cost(*xs) - dis.investment_cost(xt))
                    - 2.0 * self.margin()
                    - ic_shift,
            });
        }
        Ok(PerceptionProgram {
            grid,
            shape: dis.shape(),
            types,
            cost: probs,
            rows,
        })
    }

    fn ccp(&self, mu: &[f64], actions: &[f64], t: usize, seed: Vec<f64>) -> Result<Option<Candidate>> {
        // the seed may violate the targeted preference (warm starts after a
        // change of μ); linearizing there is still conservative
        let mut best = match self.targets(mu, actions, &seed) {
            Some(s) if s == t => Some((seed.clone(), self.transfer(&seed, actions[t])?)),
            _ => None,
        };
        let mut w = seed;
        for _ in 0..CCP_ITERS {
            let program = self.linearized(mu, actions, t, &w, 0.0, 0.0)?;
            let Some((next, _)) = program.solve()? else {
                break;
            };
            if self.targets(mu, actions, &next) != Some(t) {
                break;
            }
            let next_cost = self.transfer(&next, actions[t])?;
            let improved = match &best {
                None => true,
                Some((_, cost)) => next_cost < cost - 1e-13 * (1.0 + cost.abs()),
            };
            if best.as_ref().is_none_or(|b| next_cost <= b.1) {
                best = Some((next.clone(), next_cost));
            }
            w = next;
            if !improved {
                break;
            }
        }
        let Some((w, cost)) = best else {
            return Ok(None);
        };
        // exact check with the same tie-breaking as the agent
        let view = AgentView::new(self.sc, mu, &w, 0.0);
        let br = view.best_response(self.opts)?;
        if br.x != actions[t] || br.value > self.sc.threshold() {
            return Ok(None);
        }
        Ok(Some(Candidate {
            w,
            x: actions[t],
            transfer: cost,
            target: Some(t),
        }))
    }

    /// Shadow prices of participation and incentive constraints for a
    /// discrete target, by re-solving the linearized program with shifted
    /// right-hand sides.
    fn discrete_multipliers(&self, mu: &[f64], actions: &[f64], c: &Candidate) -> Result<(f64, f64)> {
        let Some(t) = c.target else {
            return Ok((0.0, 0.0));
        };
        let delta = 1e-7 * (1.0 + self.sc.threshold());
        let solve = |ir: f64, ic: f64| -> Result<Option<f64>> {
            Ok(self
                .linearized(mu, actions, t, &c.w, ir, ic)?
                .solve()?
                .map(|(_, objective)| objective))
        };
        let Some(base) = solve(0.0, 0.0)? else {
            return Ok((f64::NAN, f64::NAN));
        };
        let price = |v: Option<f64>| v.map_or(f64::NAN, |v| ((v - base) / delta).max(0.0));
        Ok((price(solve(delta, 0.0)?), price(solve(0.0, delta)?)))
    }

    // ---- interval action sets ----

    fn score(&self, mu: &[f64], w: &[f64]) -> Result<(f64, Option<Candidate>)> {
        Ok(match self.evaluate(mu, w)? {
            Some(c) => (c.transfer, Some(c)),
            None => (f64::INFINITY, None),
        })
    }

    fn best_interval(&self, mu: &[f64], warm: Option<&Candidate>) -> Result<Option<Candidate>> {
        let grid = self.sc.grid();
        let m = grid.len();
        let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
        match warm {
            Some(c) => {
                // nudge coverage up until participation holds again
                let mut start = None;
                for e in 0..=8 {
                    let d = if e == 8 { 1.0 } else { 10f64.powi(e - 8) };
                    let w: Vec<f64> = c.w.iter().zip(grid).map(|(w, xi)| w + d * (xi - w)).collect();
                    if self.evaluate(mu, &w)?.is_some() {
                        start = Some(w);
                        break;
                    }
                }
                match start {
                    Some(w) => starts.push((w, 0.01)),
                    None => return Ok(None),
                }
            }
            None => {
                let (lo, hi) = self.sc.actions().bounds();
                for x in [lo, hi] {
                    if let Some(inner) = inner_solve(self.sc, mu, x)? {
                        starts.push((inner.w, 0.25));
                    }
                }
                if let Ok(fi) = super::full_info_raw(self.sc, mu, self.opts) {
                    starts.push((fi.w, 0.25));
                }
                for f in [0.0, 0.5, 1.0] {
                    starts.push((grid.iter().map(|xi| f * xi).collect(), 0.25));
                }
            }
        }
        let runs = map_indexed(self.opts.execution, starts.len(), |i| {
            self.pattern_search(mu, starts[i].0.clone(), starts[i].1)
        });
        let mut best: Option<Candidate> = None;
        for r in runs {
            if let Some(c) = r? {
                if best.as_ref().is_none_or(|b| {
                    c.transfer < b.transfer - 1e-12 * (1.0 + b.transfer.abs())
                }) {
                    best = Some(c);
                }
            }
        }
        debug_assert!(best.as_ref().is_none_or(|b| b.w.len() == m));
        Ok(best)
    }

    fn pattern_search(&self, mu: &[f64], start: Vec<f64>, step: f64) -> Result<Option<Candidate>> {
        let grid = self.sc.grid();
        let (mut value, mut cand) = self.score(mu, &start)?;
        if cand.is_none() {
            return Ok(None);
        }
        let mut w = start;
        let mut h = step;
        while h >= PATTERN_MIN_STEP {
            let mut moved = false;
            for k in 0..grid.len() {
                for sign in [-1.0, 1.0] {
                    let mut trial = w.clone();
                    trial[k] = (trial[k] + sign * h * grid[k]).clamp(0.0, grid[k]);
                    if trial[k] == w[k] {
                        continue;
                    }
                    let (v, c) = self.score(mu, &trial)?;
                    if v < value - 1e-14 * (1.0 + value.abs()) {
                        value = v;
                        cand = c;
                        w = trial;
                        moved = true;
                    }
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        Ok(cand)
    }

    fn interval_multipliers(&self, mu: &[f64], c: &Candidate) -> Result<(f64, f64)> {
        // least-squares fit of P_k = c_k (α P_k + β ∂P_k/∂x) g'(ξ_k - w_k)
        // over interior coverage points, with α, β ≥ 0
        let sc = self.sc;
        let grid = sc.grid();
        let dis = sc.disutility();
        let probs = sc.model().density(c.x)?;
        let dprobs = sc.model().density_dx(c.x)?;
        let z = dis.perceived_losses(grid, &c.w);
        let (env, _) = mixture_envelope(sc.types().types(), mu, &z, &probs);
        let rows: Vec<(f64, f64, f64)> = (0..grid.len())
            .filter(|&k| probs[k] > 0.0 && c.w[k] > 1e-9 && c.w[k] < grid[k] - 1e-9)
            .map(|k| {
                let gp = env[k] * dis.shape().derivative(grid[k] - c.w[k]);
                (probs[k] * gp, dprobs[k] * gp, probs[k])
            })
            .collect();
        Ok(nnls2(&rows))
    }
}

/// Nonnegative least squares in two unknowns over rows `(a, b, y)`.
fn nnls2(rows: &[(f64, f64, f64)]) -> (f64, f64) {
    let (mut aa, mut ab, mut bb, mut ay, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b, y) in rows {
        aa += a * a;
        ab += a * b;
        bb += b * b;
        ay += a * y;
        by += b * y;
    }
    let loss = |x: f64, z: f64| -> f64 {
        rows.iter()
            .map(|(a, b, y)| (a * x + b * z - y).powi(2))
            .sum()
    };
    let mut options = vec![(0.0, 0.0)];
    let det = aa * bb - ab * ab;
    if det.abs() > 1e-14 * (aa * bb).max(1e-300) {
        let x = (ay * bb - by * ab) / det;
        let z = (aa * by - ab * ay) / det;
        if x >= 0.0 && z >= 0.0 {
            options.push((x, z));
        }
    }
    if aa > 0.0 {
        options.push(((ay / aa).max(0.0), 0.0));
    }
    if bb > 0.0 {
        options.push((0.0, (by / bb).max(0.0)));
    }
    options
        .into_iter()
        .min_by(|p, q| loss(p.0, p.1).total_cmp(&loss(q.0, q.1)))
        .unwrap_or((0.0, 0.0))
}

fn simplex_lattice(n: usize, step: f64) -> Vec<Vec<f64>> {
    let k = (1.0 / step).round().max(1.0) as usize;
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    fn rec(i: usize, left: usize, current: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<f64>>) {
        let n = current.len();
        if i + 1 == n {
            current[i] = left;
            out.push(current.iter().map(|c| *c as f64 / k as f64).collect());
            return;
        }
        for c in 0..=left {
            current[i] = c;
            rec(i + 1, left - c, current, k, out);
        }
    }
    rec(0, k, &mut current, k, &mut out);
    out
}

fn build_report(p: &Problem, mu: &[f64], c: &Candidate) -> Result<SolveReport> {
    let sc = p.sc;
    let view = AgentView::new(sc, mu, &c.w, 0.0);
    let br = view.best_response(p.opts)?;
    if br.x != c.x {
        return Err(Error::Internal(
            "hidden-action incumbent is not the agent's best response".into(),
        ));
    }
    let (alpha, beta) = match sc.actions() {
        ActionSet::Discrete(actions) => p.discrete_multipliers(mu, actions, c)?,
        ActionSet::Interval { .. } => p.interval_multipliers(mu, c)?,
    };
    let mut flags = Vec::new();
    if br.tie {
        flags.push("action-tie".to_string());
    }
    if alpha.is_nan() || beta.is_nan() {
        flags.push("multiplier-unavailable".to_string());
    }
    Ok(SolveReport {
        contract: Contract::tabular(sc.model().grid(), c.w.clone())?,
        action: c.x,
        objective: c.transfer + sc.design_cost() * w1_raw(mu, sc.baseline().weights()),
        ir_slack: sc.threshold() - br.value,
        alpha: if alpha.is_nan() { 0.0 } else { alpha },
        beta: Some(if beta.is_nan() { 0.0 } else { beta }),
        alpha_residual: None,
        flags,
    })
}

fn infeasible(sc: &Scenario) -> Error {
    Error::Infeasible {
        reason: "no coverage plan meets participation under the agent's best response".into(),
        min_cost: min_perceived_cost(sc, 1.0),
    }
}

/// Hidden-action problem at a fixed type distribution (no design cost
/// optimization; the `γ W₁` term is still included in the objective).
pub fn solve_hidden_action_at(
    scenario: &Scenario,
    mu: &TypeDistribution,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    scenario.check_mu(mu)?;
    let p = Problem { sc: scenario, opts };
    match p.best_at(mu.weights(), None)? {
        Some(c) => build_report(&p, mu.weights(), &c),
        None => Err(infeasible(scenario)),
    }
}

pub fn solve_hidden_action(scenario: &Scenario) -> Result<HiddenSolution> {
    solve_hidden_action_with(scenario, &SolveOptions::default())
}

/// Minimizes `E[w + ξ] + γ W₁(μ, μ⁰)` over plans and type distributions
/// with the action given by the agent's exact best response.
pub fn solve_hidden_action_with(scenario: &Scenario, opts: &SolveOptions) -> Result<HiddenSolution> {
    if !(opts.mu_step > 0.0 && opts.mu_step <= 1.0) {
        return Err(Error::Domain(format!(
            "mu_step {} must lie in (0, 1]",
            opts.mu_step
        )));
    }
    let p = Problem { sc: scenario, opts };
    let mu0 = scenario.baseline().weights().to_vec();
    let gamma = scenario.design_cost();
    let mut lattice = vec![mu0.clone()];
    lattice.extend(
        simplex_lattice(mu0.len(), opts.mu_step)
            .into_iter()
            .filter(|m| m.iter().zip(&mu0).any(|(a, b)| (a - b).abs() > 1e-12)),
    );
    let solved = map_indexed(opts.execution, lattice.len(), |i| p.best_at(&lattice[i], None));
    let mut best: Option<(Vec<f64>, Candidate, f64)> = None;
    for (mu, r) in lattice.iter().zip(solved) {
        if let Some(c) = r? {
            let total = c.transfer + gamma * w1_raw(mu, &mu0);
            if best.as_ref().is_none_or(|b| total < b.2 - 1e-12 * (1.0 + b.2.abs())) {
                best = Some((mu.clone(), c, total));
            }
        }
    }
    let Some((mut mu, mut cand, mut total)) = best else {
        return Err(infeasible(scenario));
    };
    // projected-gradient refinement on the type distribution, with the
    // incumbent plan as warm start
    let objective = |m: &[f64], warm: &Candidate| -> Result<Option<(Candidate, f64)>> {
        Ok(p.best_at(m, Some(warm))?.map(|c| {
            let t = c.transfer + gamma * w1_raw(m, &mu0);
            (c, t)
        }))
    };
    let n = mu.len();
    for _ in 0..opts.refine_iters {
        if n < 2 {
            break;
        }
        let mut grad = vec![0.0; n];
        let mut ok = true;
        for i in 0..n {
            let (lo, hi) = ((mu[i] - MU_FD_STEP).max(0.0), mu[i] + MU_FD_STEP);
            let mut a = mu.clone();
            a[i] = lo;
            let mut b = mu.clone();
            b[i] = hi;
            match (p.best_at(&a, Some(&cand))?, p.best_at(&b, Some(&cand))?) {
                (Some(ca), Some(cb)) => grad[i] = (cb.transfer - ca.transfer) / (hi - lo),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let dual = w1_dual(
            &TypeDistribution::normalized(mu.clone())?,
            scenario.baseline(),
        )?;
        for (g, b) in grad.iter_mut().zip(&dual.b) {
            *g += gamma * b;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let mut s = opts.mu_step / norm;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = project_simplex_raw(
                &mu.iter().zip(&grad).map(|(m, g)| m - s * g).collect::<Vec<_>>(),
            );
            let decrease: f64 = grad.iter().zip(&trial).zip(&mu).map(|((g, t), m)| g * (t - m)).sum();
            if decrease < 0.0 {
                if let Some((c, t)) = objective(&trial, &cand)? {
                    if t <= total + 1e-4 * decrease && t < total - 1e-9 * (1.0 + total.abs()) {
                        mu = trial;
                        cand = c;
                        total = t;
                        accepted = true;
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let dist = TypeDistribution::normalized(mu.clone())?;
    let report = build_report(&p, dist.weights(), &cand)?;
    Ok(HiddenSolution { report, mu: dist })
}
