//! Group-sequential designs: analyses at `t_1 < ... < t_K`, stopping at
//! stage `k < K` when `X(t_k)` leaves the continuation interval.
//!
//! The sub-density of `X(t_k)` over paths that continued through every
//! earlier analysis is carried on a Simpson grid over the continuation
//! interval (clipped to `delta t_k +- 8 sqrt(t_k)`). Tail probabilities at the
//! next analysis are then exact Gaussian integrals against that grid, so they
//! are smooth in `x` and need no grid of their own.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{phi_bar, phi_density, z_of};
use crate::quad::SimpsonGrid;
use crate::roots::brent;

/// Simpson nodes per continuation interval.
pub const STAGE_NODES: usize = 601;
/// Half-width of the integration window in standard deviations.
const STAGE_WINDOW: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDesign {
    times: Vec<f64>,
    /// Continuation intervals `(lower[k], upper[k])` for the first `K - 1`
    /// analyses.
    lower: Vec<f64>,
    upper: Vec<f64>,
    final_lower: f64,
    final_upper: f64,
}

impl GroupDesign {
    pub fn new(
        times: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        final_lower: f64,
        final_upper: f64,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Config("a design needs at least one analysis".into()));
        }
        if times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::Config("analysis times must be positive".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "analysis times must be strictly increasing".into(),
            ));
        }
        let k = times.len();
        if lower.len() != k - 1 || upper.len() != k - 1 {
            return Err(Error::Config(format!(
                "{k} analyses need {} continuation intervals",
                k - 1
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Config(format!(
                    "empty continuation interval at stage {}",
                    j + 1
                )));
            }
        }
        if final_lower.is_nan() || final_upper.is_nan() || final_lower > final_upper {
            return Err(Error::Config("final rejection limits are inverted".into()));
        }
        Ok(Self {
            times,
            lower,
            upper,
            final_lower,
            final_upper,
        })
    }

    /// Symmetric design stopping whenever `|X(t_k)| >= c`.
    pub fn with_constant(times: Vec<f64>, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Config(format!(
                "boundary constant must be positive, got {c}"
            )));
        }
        let k = times.len().saturating_sub(1);
        Self::new(times, vec![-c; k], vec![c; k], -c, c)
    }

    /// O'Brien-Fleming design with two-sided level `alpha`.
    pub fn obf(times: Vec<f64>, alpha: f64) -> Result<Self> {
        let c = obf_constant(&times, alpha)?;
        Self::with_constant(times, c)
    }

    /// `k` equally spaced analyses ending at `t_max`.
    pub fn equally_spaced(k: usize, t_max: f64) -> Vec<f64> {
        (1..=k).map(|j| t_max * j as f64 / k as f64).collect()
    }

    pub fn stages(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Analysis time of stage `k` (1-based).
    pub fn time(&self, k: usize) -> f64 {
        self.times[k - 1]
    }

    /// Continuation interval of stage `k < K`.
    pub fn continuation(&self, k: usize) -> (f64, f64) {
        (self.lower[k - 1], self.upper[k - 1])
    }

    /// Rejection limits `(lower, upper)` at stage `k`; for `k < K` these are
    /// the ends of the continuation interval.
    pub fn limits(&self, k: usize) -> (f64, f64) {
        if k == self.stages() {
            (self.final_lower, self.final_upper)
        } else {
            self.continuation(k)
        }
    }

    /// The schedule actually followed after stopping at stage `k` and
    /// accruing `extra` further information: analyses `1..k-1` unchanged,
    /// then a final analysis at `t_k + extra`.
    pub fn rescheduled(&self, k: usize, extra: f64) -> Result<Self> {
        self.check_stage(k)?;
        let mut times = self.times[..k].to_vec();
        times[k - 1] += extra;
        let (lo, hi) = self.limits(k);
        Self::new(
            times,
            self.lower[..k - 1].to_vec(),
            self.upper[..k - 1].to_vec(),
            lo,
            hi,
        )
    }

    fn check_stage(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.stages() {
            return Err(Error::Input(format!(
                "stage {k} outside 1..={}",
                self.stages()
            )));
        }
        Ok(())
    }

    /// Checks that `x` is a possible stopping value at stage `k`, snapping
    /// values within rounding distance of a limit onto it.
    pub fn validate_stop(&self, k: usize, x: f64) -> Result<f64> {
        self.check_stage(k)?;
        if !x.is_finite() {
            return Err(Error::Input(format!("stopping value {x} is not finite")));
        }
        if k == self.stages() {
            return Ok(x);
        }
        let (lo, hi) = self.continuation(k);
        let tol = crate::linear::snap_tolerance(x);
        if x >= hi || x <= lo {
            Ok(x)
        } else if hi - x <= tol {
            Ok(hi)
        } else if x - lo <= tol {
            Ok(lo)
        } else {
            Err(Error::Input(format!(
                "x = {x} lies inside the stage-{k} continuation interval ({lo}, {hi})"
            )))
        }
    }
}

/// Distribution of the stopping stage and value under drift `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageDensity {
    delta: f64,
    times: Vec<f64>,
    /// Simpson-weighted sub-density of `X(t_k)` over paths continuing past
    /// stage `k`, for `k < K`.
    continuing: Vec<Option<(SimpsonGrid, Vec<f64>)>>,
    upper_stop: Vec<f64>,
    lower_stop: Vec<f64>,
    /// Mass between the final rejection limits.
    final_accept: f64,
}

/// Stage-by-stage densities of a group design under drift `delta`.
pub fn gs_stage_densities(design: &GroupDesign, delta: f64) -> StageDensity {
    let kk = design.stages();
    let mut dens = StageDensity {
        delta,
        times: design.times.clone(),
        continuing: Vec::with_capacity(kk.saturating_sub(1)),
        upper_stop: Vec::with_capacity(kk),
        lower_stop: Vec::with_capacity(kk),
        final_accept: 0.0,
    };
    for k in 1..=kk {
        let (lo, hi) = design.limits(k);
        let up = dens.reach_above(k, hi);
        let below = dens.reach(k) - dens.reach_above(k, lo);
        dens.upper_stop.push(up);
        dens.lower_stop.push(below.max(0.0));
        if k == kk {
            dens.final_accept = (dens.reach(k) - up - below).max(0.0);
            break;
        }
        let t = design.time(k);
        let (w_lo, w_hi) = (
            lo.max(delta * t - STAGE_WINDOW * t.sqrt()),
            hi.min(delta * t + STAGE_WINDOW * t.sqrt()),
        );
        let cont = (w_hi > w_lo).then(|| {
            let grid = SimpsonGrid::new(w_lo, w_hi, STAGE_NODES);
            let density: Vec<f64> = grid.nodes().map(|x| dens.reach_density(k, x)).collect();
            let mass = grid.weighted(&density);
            (grid, mass)
        });
        dens.continuing.push(cont);
    }
    dens
}

impl StageDensity {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn stages(&self) -> usize {
        self.times.len()
    }

    /// Probability of stopping at stage `k` above the continuation interval
    /// (at `k = K`: at or above the final upper limit).
    pub fn upper_stop(&self, k: usize) -> f64 {
        self.upper_stop[k - 1]
    }

    pub fn lower_stop(&self, k: usize) -> f64 {
        self.lower_stop[k - 1]
    }

    pub fn final_accept(&self) -> f64 {
        self.final_accept
    }

    /// `sum_{j < k}` of upper stopping probabilities.
    pub fn upper_before(&self, k: usize) -> f64 {
        self.upper_stop[..k - 1].iter().sum()
    }

    pub fn lower_before(&self, k: usize) -> f64 {
        self.lower_stop[..k - 1].iter().sum()
    }

    /// Probability of reaching any rejection limit, either side.
    pub fn rejection(&self) -> f64 {
        self.upper_stop.iter().sum::<f64>() + self.lower_stop.iter().sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.rejection() + self.final_accept
    }

    /// Expected analysis time at stopping.
    pub fn expected_stop_time(&self) -> f64 {
        let k_max = self.stages();
        (1..=k_max)
            .map(|k| {
                let stop = if k == k_max {
                    self.reach(k)
                } else {
                    self.upper_stop(k) + self.lower_stop(k)
                };
                stop * self.times[k - 1]
            })
            .sum()
    }

    /// Probability of reaching the stage-`k` analysis.
    pub fn reach(&self, k: usize) -> f64 {
        if k == 1 {
            return 1.0;
        }
        match &self.continuing[k - 2] {
            Some((_, mass)) => mass.iter().sum(),
            None => 0.0,
        }
    }

    /// Step from the previous analysis to stage `k`: `(dt, mean shift)`.
    fn increment(&self, k: usize) -> (f64, f64) {
        let prev = if k == 1 { 0.0 } else { self.times[k - 2] };
        let dt = self.times[k - 1] - prev;
        (dt, self.delta * dt)
    }

    /// `P(reach stage k, X(t_k) >= x)`.
    pub fn reach_above(&self, k: usize, x: f64) -> f64 {
        let (dt, shift) = self.increment(k);
        let sd = dt.sqrt();
        if k == 1 {
            return phi_bar((x - shift) / sd);
        }
        match &self.continuing[k - 2] {
            Some((grid, mass)) => grid
                .nodes()
                .zip(mass)
                .map(|(s, m)| m * phi_bar((x - s - shift) / sd))
                .sum(),
            None => 0.0,
        }
    }

    /// Sub-density of `X(t_k)` over paths reaching stage `k`.
    pub fn reach_density(&self, k: usize, x: f64) -> f64 {
        let (dt, shift) = self.increment(k);
        let sd = dt.sqrt();
        if k == 1 {
            return phi_density((x - shift) / sd) / sd;
        }
        match &self.continuing[k - 2] {
            Some((grid, mass)) => {
                grid.nodes()
                    .zip(mass)
                    .map(|(s, m)| m * phi_density((x - s - shift) / sd))
                    .sum::<f64>()
                    / sd
            }
            None => 0.0,
        }
    }

    /// Stagewise p-value of stopping at stage `k` with value `x`, for testing
    /// this table's drift against larger values. `x` must already be a valid
    /// stopping value.
    pub fn stagewise_p(&self, design: &GroupDesign, k: usize, x: f64) -> f64 {
        let k_max = self.stages();
        let p = if k == k_max || x >= design.continuation(k).1 {
            self.upper_before(k) + self.reach_above(k, x)
        } else {
            1.0 - self.lower_before(k) - (self.reach(k) - self.reach_above(k, x))
        };
        p.clamp(0.0, 1.0)
    }
}

/// Stagewise p-value of stopping at stage `k` (1-based) with `X(t_k) = x`,
/// testing `delta0` against larger drifts. Upper stops are ordered by stage
/// and then by `x`; lower stops mirror that ordering.
pub fn gs_stagewise_p(design: &GroupDesign, k: usize, x: f64, delta0: f64) -> Result<f64> {
    let x = design.validate_stop(k, x)?;
    // Only the first k stages matter.
    let head = design.rescheduled(k, 0.0)?;
    Ok(gs_stage_densities(&head, delta0).stagewise_p(design, k, x))
}

/// Constant `C` such that stopping when `|X(t_k)| >= C` has two-sided type
/// I error `alpha`.
pub fn obf_constant(times: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let t_max = *times
        .last()
        .ok_or_else(|| Error::Config("a design needs at least one analysis".into()))?;
    let k = times.len() as f64;
    // The final analysis alone and the Bonferroni bound bracket the root.
    let lo = z_of(alpha / 2.0)? * t_max.sqrt();
    if times.len() == 1 {
        return Ok(lo);
    }
    let hi = z_of(alpha / (2.0 * k))? * t_max.sqrt();
    let error = |c: f64| -> Result<f64> {
        let design = GroupDesign::with_constant(times.to_vec(), c)?;
        Ok(gs_stage_densities(&design, 0.0).rejection() - alpha)
    };
    brent(error, lo * 0.999, hi * 1.001, 1e-10, 200)
}

/// Horizon `t_K` of an equally spaced `k`-analysis O'Brien-Fleming design
/// with two-sided level `alpha` and the given power at drift `delta`.
///
/// With constant limits on the `X` scale the design is scale-free: the
/// constant for horizon `t` is `c sqrt(t)` with `c` the constant for unit
/// horizon. So the type I equation is solved once and the power equation
/// then has a single unknown.
pub fn required_horizon(k: usize, alpha: f64, power: f64, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("a design needs at least one analysis".into()));
    }
    if !(alpha > 0.0 && alpha < power && power < 1.0) {
        return Err(Error::Domain(format!(
            "need 0 < alpha < power < 1, got alpha = {alpha}, power = {power}"
        )));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Domain(format!("drift must be nonzero, got {delta}")));
    }
    let unit = obf_constant(&GroupDesign::equally_spaced(k, 1.0), alpha)?;
    let power_gap = |t: f64| -> Result<f64> {
        let design =
            GroupDesign::with_constant(GroupDesign::equally_spaced(k, t), unit * t.sqrt())?;
        Ok(gs_stage_densities(&design, delta).rejection() - power)
    };
    // A fixed-sample trial needs less information; the Bonferroni constant
    // at every stage needs more.
    let fixed = ((z_of(alpha / 2.0)? + z_of(1.0 - power)?) / delta).powi(2);
    if k == 1 {
        return Ok(fixed);
    }
    let worst = ((unit + z_of(1.0 - power)?) / delta).powi(2);
    brent(power_gap, 0.9 * fixed, 1.1 * worst.max(fixed), 1e-8, 200)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obf_example() -> GroupDesign {
        GroupDesign::with_constant(GroupDesign::equally_spaced(5, 10.781), 6.6988).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GroupDesign::new(vec![], vec![], vec![], -1.0, 1.0).is_err());
        assert!(GroupDesign::new(vec![2.0, 1.0], vec![-1.0], vec![1.0], -1.0, 1.0).is_err());
        assert!(GroupDesign::new(vec![1.0, 2.0], vec![1.0], vec![-1.0], -1.0, 1.0).is_err());
        assert!(GroupDesign::new(vec![1.0, 2.0], vec![], vec![], -1.0, 1.0).is_err());
        let d = obf_example();
        assert!(matches!(d.validate_stop(2, 0.0), Err(Error::Input(_))));
        assert!(d.validate_stop(6, 7.0).is_err());
        assert_eq!(d.validate_stop(2, 6.6985).unwrap(), 6.6988);
    }

    #[test]
    fn single_analysis_is_a_normal_tail() {
        let d = GroupDesign::new(vec![4.0], vec![], vec![], -3.0, 3.0).unwrap();
        for delta in [-0.5, 0.0, 0.7] {
            let dens = gs_stage_densities(&d, delta);
            let want = phi_bar((3.0 - 4.0 * delta) / 2.0);
            assert!((dens.upper_stop(1) - want).abs() < 1e-15);
            let p = gs_stagewise_p(&d, 1, 2.5, delta).unwrap();
            assert!((p - phi_bar((2.5 - 4.0 * delta) / 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn masses_sum_to_one() {
        let d = obf_example();
        for delta in [-1.0, 0.0, 1.0] {
            let m = gs_stage_densities(&d, delta).total_mass();
            assert!((m - 1.0).abs() < 1e-6, "delta={delta} mass={m}");
        }
    }

    #[test]
    fn obf_example_has_level_five_percent() {
        let alpha = gs_stage_densities(&obf_example(), 0.0).rejection();
        assert!((alpha - 0.05).abs() < 0.001, "{alpha}");
    }

    #[test]
    fn obf_constant_examples() {
        let c = obf_constant(&GroupDesign::equally_spaced(5, 10.781), 0.05).unwrap();
        assert!((c - 6.6988).abs() < 0.003, "{c}");
        assert!((c / 10.781f64.sqrt() - 2.040).abs() < 0.002);
        let one = obf_constant(&[3.0], 0.05).unwrap();
        assert!((one - z_of(0.025).unwrap() * 3.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn required_horizon_examples() {
        let t = required_horizon(5, 0.05, 0.9, 1.0).unwrap();
        assert!((t - 10.781).abs() < 0.02, "{t}");
        let t1 = required_horizon(1, 0.05, 0.9, 0.5).unwrap();
        let want = ((z_of(0.025).unwrap() + z_of(0.1).unwrap()) / 0.5).powi(2);
        assert!((t1 - want).abs() < 1e-12);
    }

    #[test]
    fn symmetric_p_values_add_to_one() {
        let d = obf_example();
        for (k, x) in [(1, 7.0), (3, 6.7), (5, 2.0), (5, 0.3)] {
            let a = gs_stagewise_p(&d, k, x, 0.0).unwrap();
            let b = gs_stagewise_p(&d, k, -x, 0.0).unwrap();
            assert!((a + b - 1.0).abs() < 1e-6, "k={k} x={x}: {a} + {b}");
        }
    }

    #[test]
    fn p_is_continuous_within_a_stage() {
        let d = obf_example();
        let x = 7.3;
        let a = gs_stagewise_p(&d, 2, x - 1e-9, 0.0).unwrap();
        let b = gs_stagewise_p(&d, 2, x + 1e-9, 0.0).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn p_increases_with_delta0() {
        let d = obf_example();
        let mut prev = 0.0;
        for i in 0..50 {
            let delta0 = -1.0 + 3.0 * i as f64 / 49.0;
            let p = gs_stagewise_p(&d, 3, 7.0, delta0).unwrap();
            assert!(p > prev, "delta0={delta0}");
            prev = p;
        }
    }

    #[test]
    fn rescheduled_design_keeps_earlier_limits() {
        let d = obf_example();
        let r = d.rescheduled(3, 1.5).unwrap();
        assert_eq!(r.stages(), 3);
        assert!((r.time(3) - (d.time(3) + 1.5)).abs() < 1e-12);
        assert_eq!(r.continuation(2), d.continuation(2));
    }

    #[test]
    fn expected_stop_time_is_bounded_by_horizon() {
        let d = obf_example();
        let e = gs_stage_densities(&d, 1.0).expected_stop_time();
        assert!(e > d.time(1) && e < d.time(5));
    }
}
