use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use riskdesign::case_study::{case_study_scenario, run_case_study, CaseParams};
use riskdesign::contract::{
    agent_objective, principal_objective, solve_full_info_with, solve_hidden_action_at,
    solve_hidden_action_with, SolveOptions,
};
use riskdesign::diagnostics::monotonicity_report;
use riskdesign::hazard::{
    design_step, grad_t_with, imh_for_contract, imh_report, CoverageCoupling,
};
use riskdesign::model::{Contract, Scenario, TypeDistribution};
use riskdesign::par::Execution;
use riskdesign::schema::parse_scenario;
use riskdesign::transport::w1;
use riskdesign::Error;

mod output;

use output::{emit, Format, Report};

#[derive(Parser)]
#[command(name = "riskdesign", version, about = "Risk preference design for insurance contracts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario JSON file.
    #[arg(long, global = true, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Directory for report files; reports go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Type distribution as a comma-separated list (defaults to the scenario's μ⁰).
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    mu: Option<Vec<f64>>,
    /// Design step size.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Emit JSON (the default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit flattened `field,value` CSV.
    #[arg(long, global = true)]
    csv: bool,
    /// Evaluate independent work items one at a time.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    CaseStudy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FullInfo,
    Hidden,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coupling {
    Resolved,
    Frozen,
}

impl From<Coupling> for CoverageCoupling {
    fn from(c: Coupling) -> Self {
        match c {
            Coupling::Resolved => CoverageCoupling::Resolved,
            Coupling::Frozen => CoverageCoupling::Frozen,
        }
    }
}

#[derive(Args, Clone)]
struct ContractArgs {
    /// Tabular coverage per grid point.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "linear")]
    coverage: Option<Vec<f64>>,
    /// Linear contract as `coverage_fraction,premium`.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    linear: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Agent and principal objectives with a per-type risk decomposition.
    Evaluate {
        #[command(flatten)]
        contract: ContractArgs,
        /// Evaluate at this action only (all discrete actions by default).
        #[arg(long)]
        x: Option<f64>,
    },
    /// Solve the full-information or hidden-action problem.
    Solve {
        #[arg(long, value_enum, default_value = "full-info")]
        mode: Mode,
        /// μ₂ spacing of the objective sweep (two-type scenarios).
        #[arg(long, default_value_t = 0.1)]
        sweep_step: f64,
    },
    /// Intensity of moral hazard, with its gradient where available.
    Imh {
        #[command(flatten)]
        contract: ContractArgs,
        #[arg(long, value_enum, default_value = "resolved")]
        coupling: Coupling,
    },
    /// Sensitivity of the intensity of moral hazard to μ.
    GradT {
        #[arg(long, value_enum, default_value = "resolved")]
        coupling: Coupling,
    },
    /// One step of risk preference design along a mitigating direction.
    DesignStep {
        #[arg(long, value_enum, default_value = "resolved")]
        coupling: Coupling,
        /// Use this direction instead of the mitigating one.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        direction: Option<Vec<f64>>,
    },
    /// First-order residuals and monotone-coverage conditions.
    CheckMonotonicity {
        #[command(flatten)]
        contract: ContractArgs,
        /// Action (the full-information optimum by default).
        #[arg(long)]
        x: Option<f64>,
        /// IR multiplier (recovered from the full-information optimum by default).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Linear-contract ransomware case study.
    CaseStudy {
        #[arg(long, default_value_t = 0.5)]
        coverage: f64,
        #[arg(long, default_value_t = 1.0)]
        premium: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Investment cost rate (`x_H - x_L = 1`).
        #[arg(long, default_value_t = 0.28)]
        m: f64,
        #[arg(long, default_value_t = 0.1)]
        mu2: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Schema(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Unsupported(_) => 2,
            Error::Infeasible { .. } => 3,
            Error::Precondition(_) | Error::Numerical(_) | Error::Internal(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Context<'a> {
    global: &'a Global,
    format: Format,
    opts: SolveOptions,
}

impl Context<'_> {
    fn scenario(&self) -> CliResult<Scenario> {
        match (&self.global.scenario, self.global.preset) {
            (Some(path), _) => load_scenario(path),
            (None, Some(Preset::CaseStudy)) => Ok(case_study_scenario(&CaseParams::default())?),
            (None, None) => Err(input_error("--scenario <path> or --preset is required")),
        }
    }

    fn mu(&self, sc: &Scenario) -> CliResult<TypeDistribution> {
        match &self.global.mu {
            None => Ok(sc.baseline().clone()),
            Some(w) => {
                if w.len() != sc.types().len() {
                    return Err(input_error(format!(
                        "--mu: expected {} weights, found {}",
                        sc.types().len(),
                        w.len()
                    )));
                }
                TypeDistribution::new(w.clone()).map_err(|e| input_error(format!("--mu: {e}")))
            }
        }
    }

    /// Contract from the flags; the preset's linear contract otherwise.
    fn contract(&self, sc: &Scenario, args: &ContractArgs) -> CliResult<Option<Contract>> {
        if let Some(c) = explicit_contract(sc, args)? {
            return Ok(Some(c));
        }
        if self.global.scenario.is_none() && matches!(self.global.preset, Some(Preset::CaseStudy)) {
            return Ok(Some(CaseParams::default().contract()?));
        }
        Ok(None)
    }

    fn emit(&self, name: &str, report: &impl Serialize) -> CliResult<()> {
        let value = serde_json::to_value(report)
            .map_err(|e| Failure { code: 4, message: e.to_string() })?;
        emit(
            &Report {
                name,
                value,
                extra: Vec::new(),
            },
            self.format,
            self.global.out.as_deref(),
        )
        .map_err(|e| Failure { code: 4, message: e })
    }
}

fn explicit_contract(sc: &Scenario, args: &ContractArgs) -> CliResult<Option<Contract>> {
    if let Some(w) = &args.coverage {
        return Ok(Some(
            Contract::tabular(sc.model().grid(), w.clone())
                .map_err(|e| input_error(format!("--coverage: {e}")))?,
        ));
    }
    if let Some(l) = &args.linear {
        if l.len() != 2 {
            return Err(input_error(format!(
                "--linear: expected coverage_fraction,premium, found {} value(s)",
                l.len()
            )));
        }
        return Ok(Some(
            Contract::linear(l[0], l[1]).map_err(|e| input_error(format!("--linear: {e}")))?,
        ));
    }
    Ok(None)
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_scenario(&text)?)
}

fn run(cli: &Cli) -> CliResult<u8> {
    let g = &cli.global;
    let opts = SolveOptions::default().with_execution(if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    });
    let ctx = Context {
        global: g,
        format: if g.csv { Format::Csv } else { Format::Json },
        opts,
    };
    match &cli.command {
        Command::Evaluate { contract, x } => evaluate(&ctx, contract, *x),
        Command::Solve { mode, sweep_step } => solve(&ctx, *mode, *sweep_step),
        Command::Imh { contract, coupling } => imh(&ctx, contract, *coupling),
        Command::GradT { coupling } => {
            let sc = ctx.scenario()?;
            let mu = ctx.mu(&sc)?;
            let g = grad_t_with(&sc, &mu, (*coupling).into(), &ctx.opts)?;
            ctx.emit("grad_t", &g)?;
            Ok(0)
        }
        Command::DesignStep {
            coupling,
            direction,
        } => design(&ctx, *coupling, direction.as_deref()),
        Command::CheckMonotonicity {
            contract,
            x,
            alpha,
            beta,
        } => check_monotonicity(&ctx, contract, *x, *alpha, *beta),
        Command::CaseStudy {
            coverage,
            premium,
            kappa,
            m,
            mu2,
            gamma,
        } => {
            let p = CaseParams {
                coverage: *coverage,
                premium: *premium,
                kappa: *kappa,
                m: *m,
                mu2_0: *mu2,
                gamma: *gamma,
            };
            let report = run_case_study(&p)?;
            ctx.emit("case_study", &report)?;
            Ok(0)
        }
    }
}

fn evaluate(ctx: &Context, args: &ContractArgs, x: Option<f64>) -> CliResult<u8> {
    let sc = ctx.scenario()?;
    let mu = ctx.mu(&sc)?;
    // no preset default here: the uninsured row is the reference point
    let contract =
        explicit_contract(&sc, args)?.unwrap_or_else(|| Contract::uninsured(sc.model().grid()));
    let actions: Vec<f64> = match (x, sc.actions()) {
        (Some(x), _) => vec![x],
        (None, riskdesign::ActionSet::Discrete(a)) => a.clone(),
        (None, riskdesign::ActionSet::Interval { lo, hi }) => vec![*lo, 0.5 * (lo + hi), *hi],
    };
    let coverage = contract.coverage_on(sc.model().grid());
    let losses = sc.disutility().perceived_losses(sc.grid(), &coverage);
    let premium = contract.premium();
    let mut rows = Vec::new();
    for x in actions {
        let agent = agent_objective(&sc, &mu, &contract, x)?;
        let principal = principal_objective(&sc, &contract, x, &mu)?;
        let probs = sc.model().density(x)?;
        let z: Vec<f64> = losses.iter().map(|v| v + premium).collect();
        let expectation = riskdesign::model::expectation(&losses, &probs)?;
        let mut types = Vec::new();
        let mut mixed_deviation = 0.0;
        for (t, w) in sc.types().types().iter().zip(mu.weights()) {
            let value = t.evaluate(&z, &probs)?;
            // ρ[Z] = E[Z] + deviation; the premium and investment shift E only
            let deviation = value - expectation - premium;
            mixed_deviation += w * deviation;
            types.push(json!({
                "type": t,
                "weight": w,
                "risk": value + sc.disutility().investment_cost(x),
                "loss_expectation": expectation,
                "deviation": deviation,
            }));
        }
        rows.push(json!({
            "x": x,
            "probs": probs,
            "agent_objective": agent,
            "principal_objective": principal,
            "loss_expectation": expectation,
            "weighted_deviation": mixed_deviation,
            "premium": premium,
            "investment_cost": sc.disutility().investment_cost(x),
            "types": types,
        }));
    }
    let report = json!({
        "mu": mu.weights(),
        "U_bar": sc.threshold(),
        "contract": contract,
        "w1": w1(&mu, sc.baseline())?,
        "actions": rows,
    });
    ctx.emit("evaluate", &report)?;
    Ok(0)
}

fn solve(ctx: &Context, mode: Mode, sweep_step: f64) -> CliResult<u8> {
    if !(sweep_step > 0.0 && sweep_step <= 1.0) {
        return Err(input_error("--sweep-step: must lie in (0, 1]"));
    }
    let sc = ctx.scenario()?;
    let (report, mu) = match mode {
        Mode::FullInfo => {
            let mu = ctx.mu(&sc)?;
            (solve_full_info_with(&sc, &mu, &ctx.opts)?, mu)
        }
        Mode::Hidden => {
            if ctx.global.mu.is_some() {
                let mu = ctx.mu(&sc)?;
                (solve_hidden_action_at(&sc, &mu, &ctx.opts)?, mu)
            } else {
                let h = solve_hidden_action_with(&sc, &ctx.opts)?;
                (h.report, h.mu)
            }
        }
    };
    let value = json!({
        "mode": match mode { Mode::FullInfo => "full-info", Mode::Hidden => "hidden" },
        "mu": mu.weights(),
        "report": report,
    });
    let mut extra = Vec::new();
    if sc.types().len() == 2 {
        let n = (1.0 / sweep_step).round() as usize;
        let mut csv = String::from("mu2,objective,action,status\n");
        for j in 0..=n {
            let mu2 = (j as f64 * sweep_step).min(1.0);
            let m = TypeDistribution::new(vec![1.0 - mu2, mu2])?;
            let r = match mode {
                Mode::FullInfo => solve_full_info_with(&sc, &m, &ctx.opts),
                Mode::Hidden => solve_hidden_action_at(&sc, &m, &ctx.opts),
            };
            match r {
                Ok(r) => csv.push_str(&format!(
                    "{},{},{},ok\n",
                    output::fmt_num(mu2),
                    output::fmt_num(r.objective),
                    output::fmt_num(r.action)
                )),
                Err(Error::Infeasible { .. }) => {
                    csv.push_str(&format!("{},,,infeasible\n", output::fmt_num(mu2)))
                }
                Err(e) => return Err(e.into()),
            }
        }
        extra.push(("sweep.csv".to_string(), csv));
    }
    emit(
        &Report {
            name: "report",
            value,
            extra,
        },
        ctx.format,
        ctx.global.out.as_deref(),
    )
    .map_err(|e| Failure { code: 4, message: e })?;
    Ok(0)
}

fn imh(ctx: &Context, args: &ContractArgs, coupling: Coupling) -> CliResult<u8> {
    let sc = ctx.scenario()?;
    let mu = ctx.mu(&sc)?;
    match ctx.contract(&sc, args)? {
        Some(contract) => {
            let t = imh_for_contract(&sc, &mu, &contract, &ctx.opts)?;
            let report = json!({
                "mu": mu.weights(),
                "contract": contract,
                "x_star": t.x_star,
                "x_a": t.x_a,
                "imh": t.imh,
            });
            ctx.emit("imh", &report)?;
        }
        None => {
            let r = imh_report(&sc, &mu, coupling.into(), &ctx.opts)?;
            ctx.emit("imh", &r)?;
        }
    }
    Ok(0)
}

fn design(ctx: &Context, coupling: Coupling, direction: Option<&[f64]>) -> CliResult<u8> {
    let sc = ctx.scenario()?;
    let mu = ctx.mu(&sc)?;
    let step = ctx.global.step.unwrap_or(0.05);
    if !(step.is_finite() && step >= 0.0) {
        return Err(input_error("--step: must be finite and nonnegative"));
    }
    let (direction, imh) = match direction {
        Some(d) => (Some(d.to_vec()), None),
        None => {
            let r = imh_report(&sc, &mu, coupling.into(), &ctx.opts)?;
            (r.direction.clone(), Some(r))
        }
    };
    let Some(direction) = direction else {
        let mut flags = imh.as_ref().map(|r| r.flags.clone()).unwrap_or_default();
        flags.push("no beneficial direction".to_string());
        eprintln!("no beneficial direction");
        ctx.emit(
            "design_step",
            &json!({ "mu": mu.weights(), "imh": imh, "step": Value::Null, "flags": flags }),
        )?;
        return Ok(0);
    };
    let s = design_step(&sc, &mu, &direction, step, &ctx.opts)?;
    let accepted = s.accepted;
    let mut flags = Vec::new();
    if !accepted {
        flags.push("step-collapse".to_string());
    }
    ctx.emit(
        "design_step",
        &json!({ "mu": mu.weights(), "imh": imh, "step": s, "flags": flags }),
    )?;
    Ok(if accepted { 0 } else { 4 })
}

fn check_monotonicity(
    ctx: &Context,
    args: &ContractArgs,
    x: Option<f64>,
    alpha: Option<f64>,
    beta: f64,
) -> CliResult<u8> {
    let sc = ctx.scenario()?;
    let mu = ctx.mu(&sc)?;
    let (contract, x, alpha) = match ctx.contract(&sc, args)? {
        Some(c) => {
            let x = x.ok_or_else(|| input_error("--x: required with an explicit contract"))?;
            (c, x, alpha.unwrap_or(0.0))
        }
        None => {
            let r = solve_full_info_with(&sc, &mu, &ctx.opts)?;
            (r.contract, x.unwrap_or(r.action), alpha.unwrap_or(r.alpha))
        }
    };
    let report = monotonicity_report(&sc, &mu, &contract, x, alpha, beta)?;
    ctx.emit(
        "monotonicity",
        &json!({ "mu": mu.weights(), "contract": contract, "checks": report }),
    )?;
    Ok(0)
}
