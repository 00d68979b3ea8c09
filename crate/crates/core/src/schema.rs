//! JSON scenario files. See `docs/schema.md` for the field reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActionFamily, ActionSet, DisutilitySpec, InvestmentCost, LossShape, OutcomeGrid, OutcomeModel,
    Scenario, TypeDistribution, TypeSpace,
};
use crate::risk::RiskMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: Vec<f64>,
    /// Uniform when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_probs: Option<Vec<f64>>,
    pub family: FamilyFile,
    pub types: Vec<RiskMeasure>,
    pub mu0: Vec<f64>,
    pub disutility: DisutilityFile,
    #[serde(rename = "U_bar")]
    pub u_bar: f64,
    pub gamma: f64,
    pub action_set: ActionSetFile,
}

/// Action family. `kind = "linear"` takes `p_L`/`p_H`; `kind = "table"`
/// takes `actions`, `rows` and optionally `fd_step`.
///
/// Kept flat (not an internally tagged enum) so that type errors inside
/// the rows still report their path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyFile {
    pub kind: FamilyKind,
    #[serde(rename = "p_L", default, skip_serializing_if = "Option::is_none")]
    pub p_low: Option<Vec<f64>>,
    #[serde(rename = "p_H", default, skip_serializing_if = "Option::is_none")]
    pub p_high: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Linear,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Identity,
    Quadratic,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvestmentName {
    #[default]
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisutilityFile {
    pub g: ShapeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    pub m: f64,
    #[serde(default)]
    pub investment: InvestmentName,
}

/// `kind = "discrete"` takes `actions`; `kind = "interval"` takes `lo`, `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSetFile {
    pub kind: ActionSetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSetKind {
    Discrete,
    Interval,
}

fn required<T: Clone>(v: &Option<T>, name: &str, kind: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::Schema(format!("{name}: required when kind is \"{kind}\"")))
}

fn forbidden<T>(v: &Option<T>, name: &str, kind: &str) -> Result<()> {
    match v {
        Some(_) => Err(Error::Schema(format!("{name}: not allowed when kind is \"{kind}\""))),
        None => Ok(()),
    }
}

/// Parses and validates a scenario. Errors name the offending field.
pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let mut de = serde_json::Deserializer::from_str(json);
    let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Schema(inner.to_string())
        } else {
            Error::Schema(format!("{path}: {inner}"))
        }
    })?;
    de.end().map_err(|e| Error::Schema(e.to_string()))?;
    file.build()
}

fn field(name: &str, e: Error) -> Error {
    match e {
        Error::Domain(msg) if !msg.starts_with(name) => Error::Domain(format!("{name}: {msg}")),
        Error::Dimension {
            expected, found, ..
        } => Error::Domain(format!("{name}: expected {expected} entries, found {found}")),
        e => e,
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario> {
        let grid = OutcomeGrid::new(self.grid.clone())?;
        let m = grid.len();
        let reference = self
            .reference_probs
            .clone()
            .unwrap_or_else(|| vec![1.0 / m as f64; m]);
        let f = &self.family;
        let family = match f.kind {
            FamilyKind::Linear => {
                forbidden(&f.actions, "family.actions", "linear")?;
                forbidden(&f.rows, "family.rows", "linear")?;
                forbidden(&f.fd_step, "family.fd_step", "linear")?;
                ActionFamily::Linear {
                    low: required(&f.p_low, "family.p_L", "linear")?,
                    high: required(&f.p_high, "family.p_H", "linear")?,
                }
            }
            FamilyKind::Table => {
                forbidden(&f.p_low, "family.p_L", "table")?;
                forbidden(&f.p_high, "family.p_H", "table")?;
                ActionFamily::Table {
                    actions: required(&f.actions, "family.actions", "table")?,
                    rows: required(&f.rows, "family.rows", "table")?,
                    fd_step: f.fd_step,
                }
            }
        };
        let model = OutcomeModel::new(grid, reference, family)?;
        let types = TypeSpace::new(self.types.clone()).map_err(|e| field("types", e))?;
        if self.mu0.len() != types.len() {
            return Err(Error::Domain(format!(
                "mu0: expected {} weights (one per type), found {}",
                types.len(),
                self.mu0.len()
            )));
        }
        let mu0 = TypeDistribution::new(self.mu0.clone()).map_err(|e| field("mu0", e))?;
        let shape = match (self.disutility.g, self.disutility.power) {
            (ShapeName::Power, Some(p)) => LossShape::Power(p),
            (ShapeName::Power, None) => {
                return Err(Error::Domain(
                    "disutility.power: required when g is \"power\"".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Domain(
                    "disutility.power: only allowed when g is \"power\"".into(),
                ))
            }
            (ShapeName::Identity, None) => LossShape::Identity,
            (ShapeName::Quadratic, None) => LossShape::Quadratic,
        };
        let investment = match self.disutility.investment {
            InvestmentName::Linear => InvestmentCost::Linear,
            InvestmentName::Quadratic => InvestmentCost::Quadratic,
        };
        let disutility = DisutilitySpec::new(shape, self.disutility.m, investment)?;
        let a = &self.action_set;
        let actions = match a.kind {
            ActionSetKind::Discrete => {
                forbidden(&a.lo, "action_set.lo", "discrete")?;
                forbidden(&a.hi, "action_set.hi", "discrete")?;
                ActionSet::Discrete(required(&a.actions, "action_set.actions", "discrete")?)
            }
            ActionSetKind::Interval => {
                forbidden(&a.actions, "action_set.actions", "interval")?;
                ActionSet::Interval {
                    lo: required(&a.lo, "action_set.lo", "interval")?,
                    hi: required(&a.hi, "action_set.hi", "interval")?,
                }
            }
        };
        Scenario::new(model, types, mu0, disutility, self.u_bar, self.gamma, actions)
    }

    /// The file form of an existing scenario.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let model = sc.model();
        let m = model.grid().len();
        let uniform = model
            .reference()
            .iter()
            .all(|r| *r == 1.0 / m as f64);
        let dis = sc.disutility();
        let (g, power) = match dis.shape() {
            LossShape::Identity => (ShapeName::Identity, None),
            LossShape::Quadratic => (ShapeName::Quadratic, None),
            LossShape::Power(p) => (ShapeName::Power, Some(p)),
        };
        Self {
            grid: model.grid().points().to_vec(),
            reference_probs: (!uniform).then(|| model.reference().to_vec()),
            family: match model.family() {
                ActionFamily::Linear { low, high } => FamilyFile {
                    kind: FamilyKind::Linear,
                    p_low: Some(low.clone()),
                    p_high: Some(high.clone()),
                    actions: None,
                    rows: None,
                    fd_step: None,
                },
                ActionFamily::Table {
                    actions,
                    rows,
                    fd_step,
                } => FamilyFile {
                    kind: FamilyKind::Table,
                    p_low: None,
                    p_high: None,
                    actions: Some(actions.clone()),
                    rows: Some(rows.clone()),
                    fd_step: *fd_step,
                },
            },
            types: sc.types().types().to_vec(),
            mu0: sc.baseline().weights().to_vec(),
            disutility: DisutilityFile {
                g,
                power,
                m: dis.rate(),
                investment: match dis.investment() {
                    InvestmentCost::Linear => InvestmentName::Linear,
                    InvestmentCost::Quadratic => InvestmentName::Quadratic,
                },
            },
            u_bar: sc.threshold(),
            gamma: sc.design_cost(),
            action_set: match sc.actions() {
                ActionSet::Discrete(a) => ActionSetFile {
                    kind: ActionSetKind::Discrete,
                    actions: Some(a.clone()),
                    lo: None,
                    hi: None,
                },
                ActionSet::Interval { lo, hi } => ActionSetFile {
                    kind: ActionSetKind::Interval,
                    actions: None,
                    lo: Some(*lo),
                    hi: Some(*hi),
                },
            },
        }
    }
}
