//! P-values, median-unbiased estimates and confidence intervals by inverting
//! a family of p-values `p(delta)` that increases in `delta`.

use serde::{Deserialize, Serialize};

use crate::combine::{combine_overrun_gs, combined_z, OverrunData};
use crate::error::{Error, Result};
use crate::group::{gs_stagewise_p, GroupDesign};
use crate::linear::{CrossingTable, GridOptions, Hit, LinearDesign, TrialOutcome};
use crate::numerics::{phi_bar, two_sided, z_of, z_of_unchecked};
use crate::roots::bisect;

/// Finite-difference step for the Newton iteration.
const EPSILON: f64 = 1e-4;
const MAX_NEWTON: usize = 20;
/// Widest drift range searched for a bracket.
const DRIFT_LIMIT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    Linear(LinearDesign),
    Group(GroupDesign),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoOverrun,
    Combination,
    CombinationGs,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub method: Method,
    pub level: f64,
    pub delta0: f64,
    pub one_sided_p: f64,
    pub two_sided_p: f64,
    pub delta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hr_hat: f64,
    pub hr_lo: f64,
    pub hr_hi: f64,
}

/// Numerical settings for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub grid: GridOptions,
    /// Null drift for the reported p-values.
    pub delta0: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            grid: GridOptions::default(),
            delta0: 0.0,
        }
    }
}

/// Upper-tail deviate of `p`, finite even when `p` rounds to 0 or 1.
#[inline]
pub(crate) fn z_saturating(p: f64) -> f64 {
    z_of_unchecked(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

/// Solves `p(delta) = gamma` for an increasing family of p-values.
///
/// Works on `g(delta) = z(p(delta)) - z(gamma)` with Newton steps whose
/// slope is a forward difference of width `1e-4`, starting from `center`.
/// If that does not converge within 20 steps the root is bracketed, starting
/// from `center +- halfwidth` and widening up to `[-10, 10]`, and bisected.
pub fn solve_bound<F>(mut p_of_delta: F, gamma: f64, center: f64, halfwidth: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let zg = z_of(gamma)?;
    let mut g = |d: f64| -> Result<f64> { Ok(z_saturating(p_of_delta(d)?) - zg) };

    let accept = |p: f64| (p - gamma).abs() <= 1e-7;
    let mut d = center.clamp(-DRIFT_LIMIT, DRIFT_LIMIT);
    for _ in 0..MAX_NEWTON {
        let g0 = g(d)?;
        if accept(phi_bar(g0 + zg)) && g0.abs() < 1e-9 {
            return Ok(d);
        }
        let slope = (g(d + EPSILON)? - g0) / EPSILON;
        if !(slope < 0.0) || !slope.is_finite() {
            break;
        }
        let step = g0 / slope;
        d -= step;
        if !d.is_finite() || d.abs() > DRIFT_LIMIT {
            break;
        }
        if step.abs() < 1e-10 {
            if accept(phi_bar(g(d)? + zg)) {
                return Ok(d);
            }
            break;
        }
    }

    // Bracket: g is decreasing in delta.
    let mut half = halfwidth.max(1e-3);
    let (lo, hi) = loop {
        let lo = (center - half).max(-DRIFT_LIMIT);
        let hi = (center + half).min(DRIFT_LIMIT);
        if g(lo)? >= 0.0 && g(hi)? <= 0.0 {
            break (lo, hi);
        }
        if lo == -DRIFT_LIMIT && hi == DRIFT_LIMIT {
            return Err(Error::Numerical(format!(
                "no drift in [-{DRIFT_LIMIT}, {DRIFT_LIMIT}] gives p = {gamma}"
            )));
        }
        half *= 2.0;
    };
    bisect(g, lo, hi, 1e-10)
}

enum Family {
    Linear {
        table: CrossingTable,
        outcome: TrialOutcome,
        overrun: Option<OverrunData>,
    },
    Group {
        design: GroupDesign,
        k: usize,
        x: f64,
        overrun: Option<OverrunData>,
    },
}

/// A prepared family of p-values `p(delta)` for one observed trial.
pub struct Evaluator {
    family: Family,
    method: Method,
    /// Naive estimate `x / t` and its scale `1 / sqrt(t)`.
    center: f64,
    scale: f64,
}

impl Evaluator {
    /// Continuous monitoring, optionally combined with overrun data.
    pub fn linear(
        design: &LinearDesign,
        outcome: &TrialOutcome,
        overrun: Option<&OverrunData>,
        grid: &GridOptions,
    ) -> Result<Self> {
        Self::from_table(CrossingTable::build(design, 0.0, grid)?, outcome, overrun)
    }

    /// As [`Evaluator::linear`], reusing a crossing table of the design at
    /// any drift. Tables are the expensive part, so many trials on one
    /// design should share one.
    pub fn from_table(
        table: CrossingTable,
        outcome: &TrialOutcome,
        overrun: Option<&OverrunData>,
    ) -> Result<Self> {
        let outcome = table.design().validate_outcome(outcome)?;
        let overrun = active(overrun, outcome.t)?;
        let (center, scale) = naive(outcome.x, outcome.t, overrun.as_ref());
        Ok(Self {
            method: if overrun.is_some() {
                Method::Combination
            } else {
                Method::NoOverrun
            },
            family: Family::Linear {
                table,
                outcome,
                overrun,
            },
            center,
            scale,
        })
    }

    /// Group design stopped at stage `k` with value `x`.
    pub fn group(
        design: &GroupDesign,
        k: usize,
        x: f64,
        overrun: Option<&OverrunData>,
    ) -> Result<Self> {
        let x = design.validate_stop(k, x)?;
        let t = design.time(k);
        let overrun = active(overrun, t)?;
        let (center, scale) = naive(x, t, overrun.as_ref());
        Ok(Self {
            method: if overrun.is_some() {
                Method::CombinationGs
            } else {
                Method::NoOverrun
            },
            family: Family::Group {
                design: design.clone(),
                k,
                x,
                overrun,
            },
            center,
            scale,
        })
    }

    /// The stopping analysis is replaced by one that includes the overrun
    /// data, with earlier analyses unchanged.
    pub fn deletion(design: &GroupDesign, k: usize, x: f64, overrun: &OverrunData) -> Result<Self> {
        let x = design.validate_stop(k, x)?;
        overrun.validate(Some(design.time(k)))?;
        let rescheduled = design.rescheduled(k, overrun.t_o)?;
        let x_new = x + overrun.y;
        let t_new = rescheduled.time(k);
        Ok(Self {
            method: Method::Deletion,
            family: Family::Group {
                design: rescheduled,
                k,
                x: x_new,
                overrun: None,
            },
            center: x_new / t_new,
            scale: 1.0 / t_new.sqrt(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// One-sided p-value for testing `delta0` against larger drifts.
    pub fn p(&self, delta0: f64) -> Result<f64> {
        match &self.family {
            Family::Linear {
                table,
                outcome,
                overrun,
            } => {
                let p1 = table.stagewise_p(outcome, delta0)?;
                Ok(match overrun {
                    None => p1,
                    Some(o) => phi_bar(combined_z(
                        z_saturating(p1),
                        outcome.t,
                        o.t_o,
                        o.y,
                        o.rho,
                        delta0,
                    )),
                })
            }
            Family::Group {
                design,
                k,
                x,
                overrun,
            } => match overrun {
                None => gs_stagewise_p(design, *k, *x, delta0),
                Some(o) if *k == design.stages() => combine_overrun_gs(design, *k, *x, o, delta0),
                Some(o) => {
                    let p1 = gs_stagewise_p(design, *k, *x, delta0)?;
                    let t = design.time(*k);
                    Ok(phi_bar(combined_z(
                        z_saturating(p1),
                        t,
                        o.t_o,
                        o.y,
                        o.rho,
                        delta0,
                    )))
                }
            },
        }
    }

    /// The drift at which the p-value equals `gamma`.
    pub fn bound(&self, gamma: f64) -> Result<f64> {
        solve_bound(|d| self.p(d), gamma, self.center, 5.0 * self.scale)
    }

    /// Full report at confidence `level` for an equal-tail interval.
    pub fn report(&self, level: f64, delta0: f64) -> Result<InferenceReport> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!(
                "level must lie in (0, 1), got {level}"
            )));
        }
        let p = self.p(delta0)?;
        let delta_hat = self.bound(0.5)?;
        let ci_lo = self.bound((1.0 - level) / 2.0)?;
        let ci_hi = self.bound((1.0 + level) / 2.0)?;
        Ok(InferenceReport {
            method: self.method,
            level,
            delta0,
            one_sided_p: p,
            two_sided_p: two_sided(p),
            delta_hat,
            ci_lo,
            ci_hi,
            hr_hat: (-delta_hat).exp(),
            hr_lo: (-ci_hi).exp(),
            hr_hi: (-ci_lo).exp(),
        })
    }
}

/// Overrun data that actually adds information.
fn active(overrun: Option<&OverrunData>, t: f64) -> Result<Option<OverrunData>> {
    match overrun {
        None => Ok(None),
        Some(o) => {
            o.validate(Some(t))?;
            Ok((o.t_o > 0.0).then_some(*o))
        }
    }
}

fn naive(x: f64, t: f64, overrun: Option<&OverrunData>) -> (f64, f64) {
    let (x, t) = match overrun {
        Some(o) => (x + o.y, t + o.t_o),
        None => (x, t),
    };
    (x / t, 1.0 / t.sqrt())
}

/// Analysis of a stopped trial, combining overrun data when given.
pub fn analyze(
    design: &Design,
    outcome: &TrialOutcome,
    overrun: Option<&OverrunData>,
    level: f64,
    opts: &AnalysisOptions,
) -> Result<InferenceReport> {
    let eval = match design {
        Design::Linear(d) => Evaluator::linear(d, outcome, overrun, &opts.grid)?,
        Design::Group(d) => {
            let k = outcome
                .stage
                .ok_or_else(|| Error::Input("group designs need the stopping stage".into()))?;
            if outcome.hit == Hit::Final && k != d.stages() {
                return Err(Error::Input(format!(
                    "a final-analysis outcome must be at stage {}",
                    d.stages()
                )));
            }
            Evaluator::group(d, k, outcome.x, overrun)?
        }
    };
    eval.report(level, opts.delta0)
}

/// Deletion-method analysis of a group design stopped at stage `k`.
pub fn deletion_analyze(
    design: &GroupDesign,
    k: usize,
    x: f64,
    overrun: &OverrunData,
    level: f64,
    delta0: f64,
) -> Result<InferenceReport> {
    Evaluator::deletion(design, k, x, overrun)?.report(level, delta0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::phi_bar;

    #[test]
    fn solves_a_normal_family() {
        // p(d) = P(N(d t, t) >= x) at x = 3, t = 4.
        let p = |d: f64| Ok(phi_bar((3.0 - 4.0 * d) / 2.0));
        for gamma in [0.1, 0.5, 0.9] {
            let d = solve_bound(p, gamma, 0.75, 2.5).unwrap();
            let want = (3.0 - 2.0 * z_of(gamma).unwrap()) / 4.0;
            assert!((d - want).abs() < 1e-8, "gamma={gamma}");
            assert!((p(d).unwrap() - gamma).abs() < 1e-6);
        }
    }

    #[test]
    fn bisection_rescues_a_flat_start() {
        // A piecewise family that is flat near the start.
        let p = |d: f64| {
            Ok(if d < 2.0 {
                1e-6 * phi_bar(-d)
            } else {
                phi_bar(6.0 - 3.0 * d)
            })
        };
        let d = solve_bound(p, 0.5, -3.0, 1.0).unwrap();
        assert!((d - 2.0).abs() < 1e-8, "{d}");
    }

    #[test]
    fn unreachable_gamma_is_reported() {
        let p = |_: f64| Ok(0.3);
        assert!(matches!(
            solve_bound(p, 0.5, 0.0, 1.0),
            Err(Error::Numerical(_))
        ));
        assert!(solve_bound(p, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn single_analysis_report_is_the_normal_interval() {
        let d = GroupDesign::new(vec![9.0], vec![], vec![], -6.0, 6.0).unwrap();
        let r = Evaluator::group(&d, 1, 4.5, None)
            .unwrap()
            .report(0.95, 0.0)
            .unwrap();
        assert!((r.delta_hat - 0.5).abs() < 1e-8);
        let half = 1.959_963_984_540_054 / 3.0;
        assert!((r.ci_lo - (0.5 - half)).abs() < 1e-7);
        assert!((r.ci_hi - (0.5 + half)).abs() < 1e-7);
        assert_eq!(r.hr_hat, (-r.delta_hat).exp());
        assert!(r.hr_lo < r.hr_hat && r.hr_hat < r.hr_hi);
    }

    #[test]
    fn group_final_stage_methods_agree() {
        let d = GroupDesign::with_constant(vec![2.0, 4.0, 6.0], 5.5).unwrap();
        let o = OverrunData::observed(0.6, 0.9);
        let a = Evaluator::group(&d, 3, 2.0, Some(&o))
            .unwrap()
            .p(0.0)
            .unwrap();
        let b = Evaluator::deletion(&d, 3, 2.0, &o).unwrap().p(0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_overrun_is_no_overrun() {
        let d = GroupDesign::with_constant(vec![2.0, 4.0, 6.0], 5.5).unwrap();
        let none = OverrunData::observed(0.0, 0.0);
        let e = Evaluator::group(&d, 2, 5.7, Some(&none)).unwrap();
        assert_eq!(e.method(), Method::NoOverrun);
    }
}
