//! Risk preference design for insurance contracts over a discrete loss grid.
//!
//! Coherent risk measures and their envelope densities ([`risk`]),
//! Wasserstein-1 design costs ([`transport`]), full-information and
//! hidden-action contract solvers ([`contract`]), the intensity of moral
//! hazard and its sensitivity to the type distribution ([`hazard`]), and
//! first-order diagnostics for monotone coverage ([`diagnostics`]).
//!
//! Work over grid points, multi-starts and finite-difference probes is
//! spread with rayon when the `parallel` feature is on (the default); see
//! [`par::Execution`].

pub mod case_study;
pub mod contract;
pub mod diagnostics;
pub mod error;
pub mod hazard;
pub mod lp;
pub mod model;
pub mod par;
pub mod risk;
pub mod schema;
pub mod transport;

pub use contract::{
    agent_best_response, agent_objective, principal_objective, recover_ir_multiplier,
    solve_full_info, solve_hidden_action, SolveOptions, SolveReport,
};
pub use error::{Error, Result};
pub use model::{
    ActionFamily, ActionSet, Contract, DisutilitySpec, InvestmentCost, LossShape, OutcomeGrid,
    OutcomeModel, Scenario, TabularContract, TypeDistribution, TypeSpace,
};
pub use risk::RiskMeasure;
