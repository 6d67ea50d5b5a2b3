//! TOML configuration. Parsing is strict: unknown keys are errors, since a
//! misspelt key silently falling back to a default is the usual way a
//! numerical run goes wrong without anyone noticing.

use std::fs;
use std::path::Path;

use overrun_core::eval::{default_delta_grid, FinalStage};
use overrun_core::{
    Design, GridOptions, GroupDesign, Hit, Line, LinearDesign, Monitoring, OverrunData,
    OverrunModel, PathOptions, TrialOutcome,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub design: DesignConfig,
    pub outcome: Option<OutcomeConfig>,
    pub overrun: Option<OverrunConfig>,
    #[serde(default)]
    pub options: OptionsConfig,
    pub sweep: Option<SweepConfig>,
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DesignConfig {
    Linear {
        upper: LineConfig,
        lower: LineConfig,
        /// Defaults to the point where the boundaries meet.
        t_max: Option<f64>,
    },
    Group {
        /// Analysis times; alternatively `stages` equally spaced up to `t_max`.
        times: Option<Vec<f64>>,
        stages: Option<usize>,
        t_max: Option<f64>,
        /// Symmetric limits `|X| >= constant` at every analysis.
        constant: Option<f64>,
        /// O'Brien-Fleming limits for this two-sided level.
        obf_alpha: Option<f64>,
        /// Explicit continuation intervals for the first `K - 1` analyses.
        lower: Option<Vec<f64>>,
        upper: Option<Vec<f64>>,
        final_lower: Option<f64>,
        final_upper: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeConfig {
    /// May be omitted for group designs, where it follows from `stage`.
    pub t: Option<f64>,
    pub x: f64,
    pub hit: Hit,
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrunConfig {
    pub t_o: Option<f64>,
    pub y: Option<f64>,
    #[serde(default)]
    pub model: OverrunModel,
    pub c: Option<f64>,
    #[serde(default = "one")]
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    #[default]
    Combination,
    Deletion,
    NoOverrun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub delta0: f64,
    #[serde(default = "yes")]
    pub two_sided: bool,
    #[serde(default)]
    pub method: MethodChoice,
    pub steps: Option<usize>,
    #[serde(default)]
    pub monitoring: Monitoring,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        Self {
            level: default_level(),
            delta0: 0.0,
            two_sided: true,
            method: MethodChoice::default(),
            steps: None,
            monitoring: Monitoring::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit drifts; otherwise `delta_count` points from `delta_min` to
    /// `delta_max`, or the default 101-point grid on `[-2.5, 2.5]`.
    pub deltas: Option<Vec<f64>>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub delta_count: Option<usize>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub final_stage: FinalStage,
    /// Reversal mode: overrun information is `c t`.
    pub c: Option<f64>,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            n: default_n(),
            dt: default_dt(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_level() -> f64 {
    0.95
}
fn default_gammas() -> Vec<f64> {
    vec![0.025, 0.5, 0.975]
}
fn default_levels() -> Vec<f64> {
    vec![0.9, 0.95]
}
fn default_rhos() -> Vec<f64> {
    vec![1.0]
}
fn default_alpha() -> f64 {
    0.025
}
fn default_n() -> usize {
    10_000
}
fn default_dt() -> f64 {
    0.02
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn design(&self) -> Result<Design, CliError> {
        Ok(match &self.design {
            DesignConfig::Linear {
                upper,
                lower,
                t_max,
            } => {
                let (u, l) = (
                    Line::new(upper.intercept, upper.slope),
                    Line::new(lower.intercept, lower.slope),
                );
                Design::Linear(match t_max {
                    Some(t) => LinearDesign::with_horizon(u, l, *t)?,
                    None => LinearDesign::closed(u, l)?,
                })
            }
            DesignConfig::Group {
                times,
                stages,
                t_max,
                constant,
                obf_alpha,
                lower,
                upper,
                final_lower,
                final_upper,
            } => {
                let times = match (times, stages, t_max) {
                    (Some(t), None, None) => t.clone(),
                    (None, Some(k), Some(t)) if *k > 0 => GroupDesign::equally_spaced(*k, *t),
                    _ => {
                        return Err(invalid(
                            "design: give either `times` or both `stages` and `t_max`",
                        ))
                    }
                };
                let explicit = lower.is_some()
                    || upper.is_some()
                    || final_lower.is_some()
                    || final_upper.is_some();
                let g = match (constant, obf_alpha, explicit) {
                    (Some(c), None, false) => GroupDesign::with_constant(times, *c)?,
                    (None, Some(a), false) => GroupDesign::obf(times, *a)?,
                    (None, None, true) => match (lower, upper, final_lower, final_upper) {
                        (Some(lo), Some(hi), Some(fl), Some(fu)) => {
                            GroupDesign::new(times, lo.clone(), hi.clone(), *fl, *fu)?
                        }
                        _ => {
                            return Err(invalid(
                                "design: explicit limits need `lower`, `upper`, `final_lower` and `final_upper`",
                            ))
                        }
                    },
                    _ => {
                        return Err(invalid(
                            "design: give exactly one of `constant`, `obf_alpha` or explicit limits",
                        ))
                    }
                };
                Design::Group(g)
            }
        })
    }

    /// Grid settings; a command-line step count wins over the file.
    pub fn grid(&self, steps_override: Option<usize>) -> Result<GridOptions, CliError> {
        let mut grid = Self::default_grid(steps_override.or(self.options.steps))?;
        grid.monitoring = self.options.monitoring;
        Ok(grid)
    }

    pub fn default_grid(steps: Option<usize>) -> Result<GridOptions, CliError> {
        let mut grid = GridOptions::default();
        if let Some(s) = steps {
            if s < 100 {
                return Err(invalid(format!("steps must be at least 100, got {s}")));
            }
            grid.steps = s;
        }
        Ok(grid)
    }

    pub fn outcome(&self, design: &Design) -> Result<TrialOutcome, CliError> {
        let o = self
            .outcome
            .ok_or_else(|| invalid("an [outcome] block is required"))?;
        match design {
            Design::Linear(_) => {
                if o.stage.is_some() {
                    return Err(invalid("outcome: `stage` applies to group designs only"));
                }
                let t = o.t.ok_or_else(|| invalid("outcome: `t` is required"))?;
                Ok(TrialOutcome::linear(t, o.x, o.hit))
            }
            Design::Group(g) => {
                let k = o
                    .stage
                    .ok_or_else(|| invalid("outcome: group designs need `stage`"))?;
                if k == 0 || k > g.stages() {
                    return Err(invalid(format!(
                        "outcome: stage {k} is outside 1..={}",
                        g.stages()
                    )));
                }
                let t = g.time(k);
                if let Some(given) = o.t {
                    if (given - t).abs() > 1e-6 * t.max(1.0) {
                        return Err(invalid(format!(
                            "outcome: t = {given} does not match analysis {k} at {t}"
                        )));
                    }
                }
                Ok(TrialOutcome {
                    t,
                    x: o.x,
                    hit: o.hit,
                    stage: Some(k),
                })
            }
        }
    }

    /// Observed overrun data, if any.
    pub fn observed_overrun(&self) -> Result<Option<OverrunData>, CliError> {
        let Some(o) = self.overrun else {
            return Ok(None);
        };
        let (t_o, y) = match (o.t_o, o.y) {
            (Some(t_o), Some(y)) => (t_o, y),
            _ => return Err(invalid("overrun: analysis needs both `t_o` and `y`")),
        };
        let mut d = OverrunData::observed(t_o, y).with_rho(o.rho);
        if let Some(c) = o.c {
            d = d.with_model(o.model, c);
        }
        d.validate(None)?;
        Ok(Some(d))
    }

    /// The overrun model used by coverage sweeps.
    pub fn overrun_model(&self) -> Result<OverrunData, CliError> {
        let o = self
            .overrun
            .ok_or_else(|| invalid("coverage needs an [overrun] block with `model` and `c`"))?;
        if o.t_o.is_some() || o.y.is_some() {
            return Err(invalid(
                "overrun: coverage sweeps take `model` and `c`, not `t_o` or `y`",
            ));
        }
        let c = o.c.ok_or_else(|| invalid("overrun: `c` is required"))?;
        if o.model == OverrunModel::ObservedOnly {
            return Err(invalid(
                "overrun: coverage needs a model other than observed-only",
            ));
        }
        let d = OverrunData::model(o.model, c).with_rho(o.rho);
        d.validate(None)?;
        Ok(d)
    }

    pub fn sweep(&self) -> Result<&SweepConfig, CliError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| invalid("a [sweep] block is required"))
    }

    pub fn path_options(&self) -> Result<PathOptions, CliError> {
        let s = self.simulate.unwrap_or_default();
        if !(s.dt > 0.0) {
            return Err(invalid(format!(
                "simulate: dt must be positive, got {}",
                s.dt
            )));
        }
        Ok(PathOptions {
            dt: s.dt,
            monitoring: self.options.monitoring,
        })
    }
}

impl SweepConfig {
    pub fn delta_grid(&self) -> Result<Vec<f64>, CliError> {
        match (
            &self.deltas,
            self.delta_min,
            self.delta_max,
            self.delta_count,
        ) {
            (Some(d), None, None, None) => {
                if d.is_empty() || d.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("sweep: `deltas` must be non-empty and finite"));
                }
                Ok(d.clone())
            }
            (None, None, None, None) => Ok(default_delta_grid()),
            (None, Some(a), Some(b), Some(n)) => {
                if n < 2 || !(a < b) {
                    return Err(invalid(
                        "sweep: need delta_min < delta_max and delta_count >= 2",
                    ));
                }
                Ok((0..n)
                    .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                    .collect())
            }
            _ => Err(invalid(
                "sweep: give `deltas`, or all of `delta_min`, `delta_max` and `delta_count`",
            )),
        }
    }
}
