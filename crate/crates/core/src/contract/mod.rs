//! Contract problems: the agent's best response, the full-information
//! benchmark and the hidden-action (bilevel) design problem.

mod agent;
mod cuts;
mod full_info;
mod hidden;

pub use agent::{agent_best_response, agent_best_response_with, agent_objective, principal_objective};
pub use full_info::{recover_ir_multiplier, solve_full_info, solve_full_info_with};
pub use hidden::{solve_hidden_action, solve_hidden_action_at, solve_hidden_action_with, HiddenSolution};

pub(crate) use agent::{argmin_first, golden_section, principal_transfer, AgentView};
pub(crate) use full_info::{full_info_raw, h1_raw, h1_resolved};

use serde::Serialize;

use crate::model::Contract;
use crate::par::Execution;

/// Tuning knobs shared by the solvers. The defaults are the documented ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub execution: Execution,
    /// Grid size for the agent's search over an action interval.
    pub grid_points: usize,
    /// Grid size for the benchmark's search over an action interval.
    pub action_grid: usize,
    /// Spacing of the type-distribution lattice scanned by the hidden-action solver.
    pub mu_step: f64,
    /// Projected-gradient iterations after the lattice scan.
    pub refine_iters: usize,
    /// Strict preference margin (relative to `1 + Ū`) imposed on the
    /// targeted action in the hidden-action solver.
    pub ic_margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            execution: Execution::default(),
            grid_points: 1001,
            action_grid: 101,
            mu_step: 0.05,
            refine_iters: 20,
            ic_margin: 1e-9,
        }
    }
}

impl SolveOptions {
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Participation multiplier recovered from stationarity in the plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IrMultiplier {
    pub alpha: f64,
    /// Euclidean norm of the bound-aware stationarity residual.
    pub residual: f64,
    /// The unconstrained fit was negative.
    pub clamped: bool,
    /// No interior coverage point pinned `α`; the midpoint of the admissible
    /// interval is reported.
    pub determined: bool,
    pub envelope_tie: bool,
    /// `Ū` minus the agent's perceived cost.
    pub ir_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub contract: Contract,
    pub action: f64,
    /// Insurer's cost including the design term `γ W₁(μ, μ⁰)`.
    pub objective: f64,
    pub ir_slack: f64,
    pub alpha: f64,
    /// IC multiplier, reported by the hidden-action solver only.
    pub beta: Option<f64>,
    pub alpha_residual: Option<f64>,
    pub flags: Vec<String>,
}
