//! Combining p-values by adding weighted normal deviates, and its use for
//! data that accrue after a sequential trial has stopped.
//!
//! Everything is done on the `z` scale and converted back once, so chained
//! combinations lose no precision to repeated quantile round trips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{gs_stagewise_p, GroupDesign};
use crate::numerics::{phi_bar, z_of};

const WEIGHT_TOL: f64 = 1e-12;

/// Positive weights with `w1^2 + w2^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    w1: f64,
    w2: f64,
}

impl WeightPair {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1 > 0.0 && w2 > 0.0) {
            return Err(Error::Input(format!(
                "weights must be positive, got ({w1}, {w2})"
            )));
        }
        if (w1 * w1 + w2 * w2 - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Input(format!(
                "squared weights must sum to 1, got {}",
                w1 * w1 + w2 * w2
            )));
        }
        Ok(Self { w1, w2 })
    }

    /// Weights whose squares are proportional to the given informations.
    pub fn from_information(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && (a + b).is_finite()) {
            return Err(Error::Input(format!(
                "informations must be positive, got ({a}, {b})"
            )));
        }
        let total = a + b;
        Ok(Self {
            w1: (a / total).sqrt(),
            w2: (b / total).sqrt(),
        })
    }

    /// `w1^2 = share`.
    pub fn from_share(share: f64) -> Result<Self> {
        if !(share > 0.0 && share < 1.0) {
            return Err(Error::Input(format!(
                "weight share must lie in (0, 1), got {share}"
            )));
        }
        Ok(Self {
            w1: share.sqrt(),
            w2: (1.0 - share).sqrt(),
        })
    }

    pub fn w1(&self) -> f64 {
        self.w1
    }

    pub fn w2(&self) -> f64 {
        self.w2
    }
}

/// `phi_bar(w1 z(p1) + w2 z(p2))`.
pub fn combine_two(p1: f64, p2: f64, w: WeightPair) -> Result<f64> {
    Ok(phi_bar(w.w1 * z_of(p1)? + w.w2 * z_of(p2)?))
}

/// Weights for combining `K` ordered p-values one stage at a time.
///
/// Row `k` holds `w_{k:1}, ..., w_{k:k}`; stage `k` combines the running
/// result (weight `sqrt(1 - w_{k:k}^2)`) with `p_k` (weight `w_{k:k}`), so
/// `w_{k:i}^2 = w_{k-1:i}^2 (1 - w_{k:k}^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageWeights {
    rows: Vec<Vec<f64>>,
}

impl StageWeights {
    /// Builds the rows from the weight given to each new p-value,
    /// `w_{2:2}, ..., w_{K:K}`.
    pub fn from_increments(increments: &[f64]) -> Result<Self> {
        let mut rows = vec![vec![1.0]];
        for &w in increments {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Input(format!("stage weight {w} outside (0, 1)")));
            }
            let keep = (1.0 - w * w).sqrt();
            let mut row: Vec<f64> = rows.last().unwrap().iter().map(|v| v * keep).collect();
            row.push(w);
            rows.push(row);
        }
        Ok(Self { rows })
    }

    /// Weights with equal squares at every stage.
    pub fn equal(k: usize) -> Result<Self> {
        let inc: Vec<f64> = (2..=k).map(|j| (1.0 / j as f64).sqrt()).collect();
        Self::from_increments(&inc)
    }

    /// Validates explicitly supplied rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("no stage weights given".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return Err(Error::Input(format!(
                    "stage {} needs {} weights, got {}",
                    k + 1,
                    k + 1,
                    row.len()
                )));
            }
            if row.iter().any(|w| !(*w > 0.0)) {
                return Err(Error::Input(format!(
                    "stage {} has a nonpositive weight",
                    k + 1
                )));
            }
            let ss: f64 = row.iter().map(|w| w * w).sum();
            if (ss - 1.0).abs() > 1e-9 {
                return Err(Error::Input(format!(
                    "stage {} squared weights sum to {ss}",
                    k + 1
                )));
            }
            if k > 0 {
                let keep = 1.0 - row[k] * row[k];
                for (i, prev) in rows[k - 1].iter().enumerate() {
                    if (row[i] * row[i] - prev * prev * keep).abs() > 1e-9 {
                        return Err(Error::Input(format!(
                            "stage {} weight {} breaks the recursion",
                            k + 1,
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn stages(&self) -> usize {
        self.rows.len()
    }

    /// Final-stage weights `w_{K:1}, ..., w_{K:K}`.
    pub fn direct(&self) -> &[f64] {
        self.rows.last().unwrap()
    }

    /// Weight of the new p-value at stage `k` (1-based).
    pub fn increment(&self, k: usize) -> f64 {
        self.rows[k - 1][k - 1]
    }
}

/// Combines `ps` one stage at a time.
pub fn combine_recursive(ps: &[f64], weights: &StageWeights) -> Result<f64> {
    if ps.len() != weights.stages() {
        return Err(Error::Input(format!(
            "{} p-values but {} weight stages",
            ps.len(),
            weights.stages()
        )));
    }
    let mut z = 0.0;
    for (k, &p) in ps.iter().enumerate() {
        let w = weights.increment(k + 1);
        z = (1.0 - w * w).sqrt() * z + w * z_of(p)?;
    }
    Ok(phi_bar(z))
}

/// The same combination from the final-stage weights in one sum.
pub fn combine_direct(ps: &[f64], weights: &StageWeights) -> Result<f64> {
    if ps.len() != weights.stages() {
        return Err(Error::Input(format!(
            "{} p-values but {} weight stages",
            ps.len(),
            weights.stages()
        )));
    }
    let mut z = 0.0;
    for (p, w) in ps.iter().zip(weights.direct()) {
        z += w * z_of(*p)?;
    }
    Ok(phi_bar(z))
}

/// How the amount of overrun information depends on the stopping time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverrunModel {
    /// `t_o = c`.
    Constant,
    /// `t_o = c sqrt(t)`.
    SqrtProportional,
    /// `t_o = c t`.
    Proportional,
    /// Only the realised `t_o` is known.
    #[default]
    ObservedOnly,
}

/// Data accrued after stopping, with the model used to describe it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverrunData {
    /// Information accrued after stopping.
    pub t_o: f64,
    /// Increment of the monitored statistic over that information.
    pub y: f64,
    pub model: OverrunModel,
    pub c: Option<f64>,
    /// Down-weighting factor for the overrun part.
    pub rho: f64,
}

impl OverrunData {
    /// Observed overrun without a model, full weight.
    pub fn observed(t_o: f64, y: f64) -> Self {
        Self {
            t_o,
            y,
            model: OverrunModel::ObservedOnly,
            c: None,
            rho: 1.0,
        }
    }

    /// A model for use in operating-characteristic calculations, where the
    /// observed values are irrelevant.
    pub fn model(model: OverrunModel, c: f64) -> Self {
        Self {
            t_o: 0.0,
            y: 0.0,
            model,
            c: Some(c),
            rho: 1.0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_model(mut self, model: OverrunModel, c: f64) -> Self {
        self.model = model;
        self.c = Some(c);
        self
    }

    /// Checks the fields, and for a proportional model with both values
    /// present that `t_o = c t` at the stopping time `t`.
    pub fn validate(&self, t: Option<f64>) -> Result<()> {
        if !(self.t_o >= 0.0 && self.t_o.is_finite()) {
            return Err(Error::Input(format!(
                "overrun information must be nonnegative, got {}",
                self.t_o
            )));
        }
        if !self.y.is_finite() {
            return Err(Error::Input(format!(
                "overrun increment {} is not finite",
                self.y
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Input(format!(
                "weighting factor must be positive, got {}",
                self.rho
            )));
        }
        match (self.model, self.c) {
            (OverrunModel::ObservedOnly, _) => {}
            (_, None) => {
                return Err(Error::Input(format!(
                    "overrun model {:?} needs a coefficient",
                    self.model
                )))
            }
            (_, Some(c)) if !(c >= 0.0 && c.is_finite()) => {
                return Err(Error::Input(format!(
                    "overrun coefficient must be nonnegative, got {c}"
                )))
            }
            (OverrunModel::Proportional, Some(c)) => {
                if let Some(t) = t {
                    if self.t_o > 0.0 && (self.t_o - c * t).abs() > 1e-9 * (1.0 + c * t) {
                        return Err(Error::Input(format!(
                            "proportional overrun needs t_o = c t = {}, got {}",
                            c * t,
                            self.t_o
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Overrun information implied by the model when stopping at `t`.
    pub fn information_at(&self, t: f64) -> Result<f64> {
        let c = self.c.unwrap_or(0.0);
        Ok(match self.model {
            OverrunModel::Constant => c,
            OverrunModel::SqrtProportional => c * t.sqrt(),
            OverrunModel::Proportional => c * t,
            OverrunModel::ObservedOnly => {
                return Err(Error::Config(
                    "an overrun model with a coefficient is required here".into(),
                ))
            }
        })
    }
}

/// Deviate of the combined p-value from the deviate `z1` of the sequential
/// p-value: `[sqrt(t) z1 + sqrt(rho) (y - delta0 t_o)] / sqrt(t + rho t_o)`.
#[inline]
pub fn combined_z(z1: f64, t: f64, t_o: f64, y: f64, rho: f64, delta0: f64) -> f64 {
    if t_o == 0.0 {
        return z1;
    }
    (t.sqrt() * z1 + rho.sqrt() * (y - delta0 * t_o)) / (t + rho * t_o).sqrt()
}

/// Combination of the sequential p-value `p1` at stopping time `t` with the
/// overrun data.
pub fn combine_overrun_linear(p1: f64, t: f64, overrun: &OverrunData, delta0: f64) -> Result<f64> {
    overrun.validate(Some(t))?;
    if overrun.t_o == 0.0 {
        return Ok(p1);
    }
    if !(t > 0.0) {
        return Err(Error::Input(format!(
            "stopping time must be positive, got {t}"
        )));
    }
    let z1 = z_of(p1)?;
    Ok(phi_bar(combined_z(
        z1,
        t,
        overrun.t_o,
        overrun.y,
        overrun.rho,
        delta0,
    )))
}

/// Overrun combination for a group design stopped at stage `k` with value
/// `x`. At the final stage the overrun simply extends the last analysis.
pub fn combine_overrun_gs(
    design: &GroupDesign,
    k: usize,
    x: f64,
    overrun: &OverrunData,
    delta0: f64,
) -> Result<f64> {
    let x = design.validate_stop(k, x)?;
    let t = design.time(k);
    overrun.validate(Some(t))?;
    if k == design.stages() {
        let extended = design.rescheduled(k, overrun.t_o)?;
        return gs_stagewise_p(&extended, k, x + overrun.y, delta0);
    }
    let p1 = gs_stagewise_p(design, k, x, delta0)?;
    combine_overrun_linear(p1, t, overrun, delta0)
}
