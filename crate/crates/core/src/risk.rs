//! Coherent risk measures on discrete random costs.
//!
//! Each measure is evaluated in closed form and also exposes the maximizing
//! density `ζ̄` of its dual (risk envelope) representation
//! `ρ[Z] = max_{ζ ∈ 𝔄} E[ζ Z]`. The envelope maximization can be solved
//! independently as a small linear program for cross-validation.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lp::{LinearProgram, Relation};
use crate::model::{dot, validate_simplex, TypeDistribution, TypeSpace};

const TIE_TOL: f64 = 1e-12;

/// A coherent risk measure.
///
/// JSON form: `{"kind": "expectation"}`, `{"kind": "semideviation", "kappa": 0.5}`
/// or `{"kind": "avar", "alpha": 0.1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum RiskMeasure {
    #[serde(rename = "expectation")]
    Expectation,
    /// `E[Z] + κ E[(Z - E[Z])₊]`, `κ ∈ (0, 1]`.
    #[serde(rename = "semideviation")]
    SemiDeviation { kappa: f64 },
    /// `min_t { t + E[(Z - t)₊] / α }`, `α ∈ (0, 1]`.
    #[serde(rename = "avar")]
    AverageValueAtRisk { alpha: f64 },
}

/// Maximizing density of the dual representation, relative to the
/// probability row it was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeDensity {
    pub weights: Vec<f64>,
    /// The maximizer may not be unique (an outcome sits exactly on the
    /// mean or on the quantile boundary).
    pub tie: bool,
}

/// Envelope density together with the attained dual objective `E[ζ Z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSolution {
    pub density: EnvelopeDensity,
    pub objective: f64,
}

/// A scalar derivative that may have been taken at a non-smooth point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub value: f64,
    pub smooth: bool,
}

fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * (1.0 + a.abs().max(b.abs()))
}

impl RiskMeasure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RiskMeasure::Expectation => Ok(()),
            RiskMeasure::SemiDeviation { kappa } => {
                if kappa > 0.0 && kappa <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "semideviation kappa {kappa} must lie in (0, 1]"
                    )))
                }
            }
            RiskMeasure::AverageValueAtRisk { alpha } => {
                if alpha > 0.0 && alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("avar alpha {alpha} must lie in (0, 1]")))
                }
            }
        }
    }

    fn check(&self, z: &[f64], probs: &[f64]) -> Result<()> {
        self.validate()?;
        check_len("risk measure", z.len(), probs.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("random cost must be finite".into()));
        }
        validate_simplex(probs, "probability row")
    }

    /// `ρ[Z]` under the probability row `probs`.
    pub fn evaluate(&self, z: &[f64], probs: &[f64]) -> Result<f64> {
        self.check(z, probs)?;
        Ok(self.value(z, probs))
    }

    pub(crate) fn value(&self, z: &[f64], probs: &[f64]) -> f64 {
        match *self {
            RiskMeasure::Expectation => dot(z, probs),
            RiskMeasure::SemiDeviation { kappa } => {
                let mean = dot(z, probs);
                let upper: f64 = z
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - mean).max(0.0))
                    .sum();
                mean + kappa * upper
            }
            RiskMeasure::AverageValueAtRisk { alpha } => {
                let q = Quantile::new(z, probs, alpha);
                q.value + tail_excess(z, probs, q.value) / alpha
            }
        }
    }

    /// Closed-form maximizer `ζ̄` of the dual representation.
    pub fn envelope_density(&self, z: &[f64], probs: &[f64]) -> Result<EnvelopeDensity> {
        self.check(z, probs)?;
        Ok(self.envelope(z, probs))
    }

    pub(crate) fn envelope(&self, z: &[f64], probs: &[f64]) -> EnvelopeDensity {
        match *self {
            RiskMeasure::Expectation => EnvelopeDensity {
                weights: vec![1.0; z.len()],
                tie: false,
            },
            RiskMeasure::SemiDeviation { kappa } => {
                let mean = dot(z, probs);
                let upper_mass: f64 = z
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| **v > mean)
                    .map(|(_, p)| p)
                    .sum();
                let tie = z
                    .iter()
                    .zip(probs)
                    .any(|(v, p)| *p > 0.0 && is_tie(*v, mean));
                let weights = z
                    .iter()
                    .map(|v| {
                        let h = if *v > mean { 1.0 } else { 0.0 };
                        1.0 + kappa * (h - upper_mass)
                    })
                    .collect();
                EnvelopeDensity { weights, tie }
            }
            RiskMeasure::AverageValueAtRisk { alpha } => {
                let q = Quantile::new(z, probs, alpha);
                let above: f64 = z
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| **v > q.value)
                    .map(|(_, p)| p)
                    .sum();
                let on: f64 = z
                    .iter()
                    .zip(probs)
                    .filter(|(v, _)| **v == q.value)
                    .map(|(_, p)| p)
                    .sum();
                let boundary = ((1.0 - above / alpha) / on).clamp(0.0, 1.0 / alpha);
                let weights = z
                    .iter()
                    .map(|v| {
                        if *v > q.value {
                            1.0 / alpha
                        } else if *v == q.value {
                            boundary
                        } else {
                            0.0
                        }
                    })
                    .collect();
                EnvelopeDensity {
                    weights,
                    tie: q.degenerate,
                }
            }
        }
    }

    /// Solves `max E[ζ Z]` over the risk envelope as a dense linear program.
    pub fn envelope_lp_oracle(&self, z: &[f64], probs: &[f64]) -> Result<EnvelopeSolution> {
        self.check(z, probs)?;
        let m = z.len();
        let lp_err = |e| Error::Internal(format!("risk envelope program failed: {e}"));
        let weights = match *self {
            RiskMeasure::Expectation => {
                let mut lp = LinearProgram::maximize(
                    z.iter().zip(probs).map(|(v, p)| v * p).collect(),
                );
                for k in 0..m {
                    lp.add_sparse(&[(k, 1.0)], Relation::Eq, 1.0);
                }
                lp.solve().map_err(lp_err)?.x
            }
            RiskMeasure::SemiDeviation { kappa } => {
                // ζ = 1 + h - E[h], 0 ≤ h ≤ κ
                let mean = dot(z, probs);
                let mut lp = LinearProgram::maximize(
                    z.iter().zip(probs).map(|(v, p)| p * (v - mean)).collect(),
                );
                for k in 0..m {
                    lp.add_sparse(&[(k, 1.0)], Relation::Le, kappa);
                }
                let h = lp.solve().map_err(lp_err)?.x;
                let mean_h = dot(&h, probs);
                h.iter().map(|v| 1.0 + v - mean_h).collect()
            }
            RiskMeasure::AverageValueAtRisk { alpha } => {
                // 0 ≤ ζ ≤ 1/α, E[ζ] = 1
                let mut lp = LinearProgram::maximize(
                    z.iter().zip(probs).map(|(v, p)| v * p).collect(),
                );
                for k in 0..m {
                    lp.add_sparse(&[(k, 1.0)], Relation::Le, 1.0 / alpha);
                }
                lp.add_constraint(probs.to_vec(), Relation::Eq, 1.0);
                lp.solve().map_err(lp_err)?.x
            }
        };
        let objective = z
            .iter()
            .zip(probs)
            .zip(&weights)
            .map(|((v, p), w)| v * p * w)
            .sum();
        Ok(EnvelopeSolution {
            density: EnvelopeDensity {
                weights,
                tie: false,
            },
            objective,
        })
    }

    /// Directional derivative of `ρ[Z]` when the probability row moves along
    /// `dprobs` (a zero-sum row), holding `Z` fixed.
    pub fn derivative_along(&self, z: &[f64], probs: &[f64], dprobs: &[f64]) -> Result<Sensitivity> {
        self.check(z, probs)?;
        check_len("probability direction", z.len(), dprobs.len())?;
        Ok(self.directional(z, probs, dprobs))
    }

    pub(crate) fn directional(&self, z: &[f64], probs: &[f64], dprobs: &[f64]) -> Sensitivity {
        match *self {
            RiskMeasure::Expectation => Sensitivity {
                value: dot(z, dprobs),
                smooth: true,
            },
            RiskMeasure::SemiDeviation { kappa } => {
                let mean = dot(z, probs);
                let dmean = dot(z, dprobs);
                let mut upper_mass = 0.0;
                let mut dupper = 0.0;
                let mut smooth = true;
                for k in 0..z.len() {
                    if z[k] > mean {
                        upper_mass += probs[k];
                        dupper += dprobs[k] * (z[k] - mean);
                    }
                    if (probs[k] > 0.0 || dprobs[k] != 0.0) && is_tie(z[k], mean) {
                        smooth = false;
                    }
                }
                Sensitivity {
                    value: dmean + kappa * (dupper - upper_mass * dmean),
                    smooth,
                }
            }
            RiskMeasure::AverageValueAtRisk { alpha } => {
                // Danskin: derivative of min_t of functions linear in the row.
                let q = Quantile::new(z, probs, alpha);
                let at = |t: f64| tail_excess(z, dprobs, t) / alpha;
                match q.next {
                    Some(t_next) if q.degenerate => Sensitivity {
                        value: at(q.value).min(at(t_next)),
                        smooth: false,
                    },
                    _ => Sensitivity {
                        value: at(q.value),
                        smooth: !q.degenerate,
                    },
                }
            }
        }
    }
}

/// `E[(Z - t)₊]` under `probs` (any weight row).
fn tail_excess(z: &[f64], probs: &[f64], t: f64) -> f64 {
    z.iter()
        .zip(probs)
        .map(|(v, p)| p * (v - t).max(0.0))
        .sum()
}

/// Upper `α`-quantile used by the average value-at-risk.
struct Quantile {
    value: f64,
    /// Next larger support value, when it exists.
    next: Option<f64>,
    /// The cumulative mass hits `1 - α` exactly, so the minimizing `t` is an
    /// interval, or several outcomes share the boundary atom.
    degenerate: bool,
}

impl Quantile {
    fn new(z: &[f64], probs: &[f64], alpha: f64) -> Self {
        let mut order: Vec<usize> = (0..z.len()).filter(|&k| probs[k] > 0.0).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        let target = 1.0 - alpha;
        let mut cum = 0.0;
        let mut pos = order.len() - 1;
        for (i, &k) in order.iter().enumerate() {
            cum += probs[k];
            // include every outcome sharing this value before testing
            if i + 1 < order.len() && z[order[i + 1]] == z[k] {
                continue;
            }
            if cum >= target - TIE_TOL {
                pos = i;
                break;
            }
        }
        let value = z[order[pos]];
        let next = order[pos + 1..].iter().map(|&k| z[k]).find(|v| *v > value);
        let shared = order.iter().filter(|&&k| z[k] == value).count() > 1;
        let degenerate = (alpha < 1.0 && is_tie(cum, target)) || shared;
        Self {
            value,
            next,
            degenerate,
        }
    }
}

/// `Σ_i μ_i ρ_{θ_i}[Z]`.
pub fn mixture_risk(
    space: &TypeSpace,
    mu: &TypeDistribution,
    z: &[f64],
    probs: &[f64],
) -> Result<f64> {
    check_len("type distribution", space.len(), mu.len())?;
    let mut total = 0.0;
    for (t, w) in space.types().iter().zip(mu.weights()) {
        total += w * t.evaluate(z, probs)?;
    }
    Ok(total)
}

pub(crate) fn mixture_value(types: &[RiskMeasure], weights: &[f64], z: &[f64], probs: &[f64]) -> f64 {
    types
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(t, w)| w * t.value(z, probs))
        .sum()
}

/// `E_μ[ζ̄_k]`, the type-averaged envelope density, and whether any type tied.
pub(crate) fn mixture_envelope(
    types: &[RiskMeasure],
    weights: &[f64],
    z: &[f64],
    probs: &[f64],
) -> (Vec<f64>, bool) {
    let mut avg = vec![0.0; z.len()];
    let mut tie = false;
    for (t, w) in types.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let e = t.envelope(z, probs);
        tie |= e.tie;
        for (a, v) in avg.iter_mut().zip(&e.weights) {
            *a += w * v;
        }
    }
    (avg, tie)
}

pub(crate) fn mixture_directional(
    types: &[RiskMeasure],
    weights: &[f64],
    z: &[f64],
    probs: &[f64],
    dprobs: &[f64],
) -> Sensitivity {
    let mut value = 0.0;
    let mut smooth = true;
    for (t, w) in types.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let d = t.directional(z, probs, dprobs);
        value += w * d.value;
        smooth &= d.smooth;
    }
    Sensitivity { value, smooth }
}
