//! Operating characteristics of inference with overrun data: the true
//! coverage of nominal confidence bounds and intervals, and how often the
//! overrun data reverse the decision reached at stopping.
//!
//! Both are expectations over the stopping distribution, evaluated against
//! the crossing table (linear designs) or the stage densities (group
//! designs). Given the stopping point, the overrun increment is normal, so
//! the inner expectation is a normal probability in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::OverrunData;
use crate::error::{Error, Result};
use crate::group::{gs_stage_densities, GroupDesign, StageDensity};
use crate::inference::{z_saturating, Design};
use crate::linear::{CrossingTable, GridOptions};
use crate::numerics::{phi, phi_bar, z_of};
use crate::quad::SimpsonGrid;

/// Simpson nodes per stopping region of a group design.
const REGION_NODES: usize = 201;
/// Extent of a stopping region beyond its limit, in standard deviations.
const REGION_REACH: f64 = 9.0;

/// Drifts `-2.5, -2.45, ..., 2.5`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..=100).map(|i| -2.5 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub delta_grid: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `q_values[g][d]` is the coverage of the bound with nominal
    /// `gammas[g]` at drift `delta_grid[d]`.
    pub q_values: Vec<Vec<f64>>,
    pub levels: Vec<f64>,
    /// Coverage of the equal-tail interval, indexed like `q_values`.
    pub interval_values: Vec<Vec<f64>>,
    /// Infima over the drift range, refined between grid points.
    pub q_inf: Vec<f64>,
    pub q_argmin: Vec<f64>,
    pub interval_inf: Vec<f64>,
    pub interval_argmin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversalReport {
    pub delta_grid: Vec<f64>,
    pub p_reject_to_accept: Vec<f64>,
    pub p_accept_to_reject: Vec<f64>,
    pub pow: Vec<f64>,
    pub ovpow: Vec<f64>,
}

/// Reversal probabilities and power at one drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reversal {
    pub reject_to_accept: f64,
    pub accept_to_reject: f64,
    pub pow: f64,
    pub ovpow: f64,
}

/// A stopping point with its probability and its stagewise p-value.
#[derive(Debug, Clone, Copy)]
struct StopPoint {
    t: f64,
    mass: f64,
    p: f64,
}

/// Stopping points of a crossing table: upper crossings, lower crossings and
/// survivors at the horizon, each with the p-value under the table's drift.
struct StopPoints {
    upper: Vec<StopPoint>,
    lower: Vec<StopPoint>,
    terminal: Vec<StopPoint>,
}

fn stop_points(table: &CrossingTable) -> StopPoints {
    let n = table.steps();
    let (mu, ml) = (table.upper_masses(), table.lower_masses());
    let (cu, cl) = (table.upper_cumulative(), table.lower_cumulative());
    let up_total = cu[n];
    let surv = table.survival();
    let low_total = cl[n];
    // Mid-step cumulative values: the p-value is uniform only if each
    // step's mass is split evenly around its point.
    let upper = (0..n)
        .map(|i| StopPoint {
            t: table.midpoint(i),
            mass: mu[i],
            p: cu[i] + 0.5 * mu[i],
        })
        .collect();
    let lower = (0..n)
        .map(|i| StopPoint {
            t: table.midpoint(i),
            mass: ml[i],
            p: up_total + surv + low_total - cl[i] - 0.5 * ml[i],
        })
        .collect();
    let pts = table.terminal_points();
    let mut terminal = Vec::with_capacity(pts.len());
    let mut above = 0.0;
    let t_max = table.design().t_max();
    for &(_, m) in pts.iter().rev() {
        terminal.push(StopPoint {
            t: t_max,
            mass: m,
            p: up_total + above + 0.5 * m,
        });
        above += m;
    }
    StopPoints {
        upper,
        lower,
        terminal,
    }
}

/// Probability that the bound with nominal `gamma` lies above the true drift
/// `delta`, given stopping at `t` with stagewise p-value `p1` at `delta`:
/// `Phi((sqrt(t) z(p1) - sqrt(t + rho t_o) z(gamma)) / sqrt(rho t_o))`.
#[inline]
fn bound_exceeds(p1: f64, t: f64, t_o: f64, rho: f64, z_gamma: f64) -> f64 {
    let z1 = z_saturating(p1);
    if t_o <= 0.0 {
        return if z1 > z_gamma { 1.0 } else { 0.0 };
    }
    phi((t.sqrt() * z1 - (t + rho * t_o).sqrt() * z_gamma) / (rho * t_o).sqrt())
}

/// A stopping region of a group design, discretised in `x`.
struct Region {
    t: f64,
    /// `(x, mass)`.
    nodes: Vec<(f64, f64)>,
}

/// Simpson discretisation of the stopping regions of stages `k < K`.
fn stage_regions(design: &GroupDesign, dens: &StageDensity) -> (Vec<Region>, Vec<Region>) {
    let delta = dens.delta();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for k in 1..design.stages() {
        let t = design.time(k);
        let (lo, hi) = design.continuation(k);
        let reach = delta * t + REGION_REACH * t.sqrt();
        let floor = delta * t - REGION_REACH * t.sqrt();
        let discretise = |a: f64, b: f64| -> Vec<(f64, f64)> {
            if !(b > a) || !a.is_finite() || !b.is_finite() {
                return Vec::new();
            }
            let g = SimpsonGrid::new(a, b, REGION_NODES);
            let f: Vec<f64> = g.nodes().map(|x| dens.reach_density(k, x)).collect();
            g.nodes().zip(g.weighted(&f)).collect()
        };
        upper.push(Region {
            t,
            nodes: discretise(hi.max(floor), reach),
        });
        lower.push(Region {
            t,
            nodes: discretise(floor, lo.min(reach)),
        });
    }
    (upper, lower)
}

/// How overrun data after the final analysis of a group design are used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalStage {
    /// The final analysis is simply performed later, on all the data.
    #[default]
    Extend,
    /// The overrun p-value is combined with the final stagewise p-value, as
    /// at the interim analyses.
    Combine,
}

/// Evaluates operating characteristics of one design; holds the drift-zero
/// crossing table of a linear design so that sweeps reuse it.
pub struct OperatingCharacteristics {
    design: Design,
    table: Option<CrossingTable>,
    final_stage: FinalStage,
}

impl OperatingCharacteristics {
    pub fn new(design: &Design, grid: &GridOptions) -> Result<Self> {
        let table = match design {
            Design::Linear(d) => Some(CrossingTable::build(d, 0.0, grid)?),
            Design::Group(_) => None,
        };
        Ok(Self {
            design: design.clone(),
            table,
            final_stage: FinalStage::default(),
        })
    }

    pub fn with_final_stage(mut self, final_stage: FinalStage) -> Self {
        self.final_stage = final_stage;
        self
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    /// `q_gamma(delta)` for each of `gammas`.
    pub fn coverage_qs(
        &self,
        overrun: &OverrunData,
        gammas: &[f64],
        delta: f64,
    ) -> Result<Vec<f64>> {
        overrun.validate(None)?;
        let z_gammas = gammas
            .iter()
            .map(|&g| z_of(g))
            .collect::<Result<Vec<_>>>()?;
        let rho = overrun.rho;
        match (&self.design, &self.table) {
            (Design::Linear(_), Some(base)) => {
                let table = base.tilt(delta);
                let pts = stop_points(&table);
                let all: Vec<StopPoint> = pts
                    .upper
                    .into_iter()
                    .chain(pts.lower)
                    .chain(pts.terminal)
                    .filter(|p| p.mass > 0.0)
                    .collect();
                let infos = all
                    .iter()
                    .map(|p| overrun.information_at(p.t))
                    .collect::<Result<Vec<_>>>()?;
                Ok(z_gammas
                    .iter()
                    .map(|&zg| {
                        all.iter()
                            .zip(&infos)
                            .map(|(p, &t_o)| p.mass * bound_exceeds(p.p, p.t, t_o, rho, zg))
                            .sum::<f64>()
                            .clamp(0.0, 1.0)
                    })
                    .collect())
            }
            (Design::Group(design), _) => {
                let dens = gs_stage_densities(design, delta);
                let (upper, lower) = stage_regions(design, &dens);
                // (t, t_o, mass, p) for every early stopping node.
                let mut nodes = Vec::new();
                for (k, region) in upper.iter().chain(&lower).enumerate() {
                    let stage = k % (design.stages() - 1) + 1;
                    let t_o = overrun.information_at(region.t)?;
                    for &(x, m) in &region.nodes {
                        nodes.push((region.t, t_o, m, dens.stagewise_p(design, stage, x)));
                    }
                }
                let k_max = design.stages();
                let combine_last = self.final_stage == FinalStage::Combine;
                if combine_last {
                    let t = design.time(k_max);
                    let t_o = overrun.information_at(t)?;
                    let half = REGION_REACH * t.sqrt();
                    let g =
                        SimpsonGrid::new(delta * t - half, delta * t + half, 2 * REGION_NODES - 1);
                    for x in g.nodes() {
                        let m = dens.reach_density(k_max, x);
                        nodes.push((t, t_o, m, dens.stagewise_p(design, k_max, x)));
                    }
                    let w = g.weighted(&vec![1.0; g.n]);
                    let start = nodes.len() - g.n;
                    for (node, wi) in nodes[start..].iter_mut().zip(w) {
                        node.2 *= wi;
                    }
                }
                let early_upper = dens.upper_before(k_max);
                let reach = dens.reach(k_max);
                Ok(gammas
                    .iter()
                    .zip(&z_gammas)
                    .map(|(&g, &zg)| {
                        let early: f64 = nodes
                            .iter()
                            .map(|&(t, t_o, m, p)| m * bound_exceeds(p, t, t_o, rho, zg))
                            .sum();
                        // At the final analysis the overrun only extends it,
                        // so the extended stagewise p-value is exactly
                        // uniform there.
                        let last = if combine_last {
                            0.0
                        } else {
                            (g - early_upper).clamp(0.0, reach)
                        };
                        (early + last).clamp(0.0, 1.0)
                    })
                    .collect())
            }
            _ => unreachable!("linear designs always carry a table"),
        }
    }

    pub fn coverage_q(&self, overrun: &OverrunData, gamma: f64, delta: f64) -> Result<f64> {
        Ok(self.coverage_qs(overrun, &[gamma], delta)?[0])
    }

    /// `Q_level(delta) = q_{(1+level)/2}(delta) - q_{(1-level)/2}(delta)`.
    pub fn coverage_interval(&self, overrun: &OverrunData, level: f64, delta: f64) -> Result<f64> {
        check_level(level)?;
        let q = self.coverage_qs(overrun, &[(1.0 + level) / 2.0, (1.0 - level) / 2.0], delta)?;
        Ok(q[0] - q[1])
    }

    /// Coverage of bounds and intervals over a grid of drifts.
    pub fn coverage_sweep(
        &self,
        overrun: &OverrunData,
        gammas: &[f64],
        levels: &[f64],
        delta_grid: &[f64],
    ) -> Result<CoverageReport> {
        if delta_grid.is_empty() {
            return Err(Error::Config("the drift grid is empty".into()));
        }
        for &l in levels {
            check_level(l)?;
        }
        let mut all_gammas = gammas.to_vec();
        for &l in levels {
            all_gammas.push((1.0 + l) / 2.0);
            all_gammas.push((1.0 - l) / 2.0);
        }
        let rows = delta_grid
            .par_iter()
            .map(|&d| self.coverage_qs(overrun, &all_gammas, d))
            .collect::<Result<Vec<_>>>()?;
        let ng = gammas.len();
        let q_values: Vec<Vec<f64>> = (0..ng)
            .map(|g| rows.iter().map(|r| r[g]).collect())
            .collect();
        let interval_values: Vec<Vec<f64>> = (0..levels.len())
            .map(|l| {
                rows.iter()
                    .map(|r| r[ng + 2 * l] - r[ng + 2 * l + 1])
                    .collect()
            })
            .collect();
        let mut q_inf = Vec::with_capacity(ng);
        let mut q_argmin = Vec::with_capacity(ng);
        for (g, v) in q_values.iter().enumerate() {
            let (d, m) = refine_min(delta_grid, v, |d| self.coverage_q(overrun, gammas[g], d))?;
            q_argmin.push(d);
            q_inf.push(m);
        }
        let mut interval_inf = Vec::with_capacity(levels.len());
        let mut interval_argmin = Vec::with_capacity(levels.len());
        for (l, v) in interval_values.iter().enumerate() {
            let (d, m) = refine_min(delta_grid, v, |d| {
                self.coverage_interval(overrun, levels[l], d)
            })?;
            interval_argmin.push(d);
            interval_inf.push(m);
        }
        Ok(CoverageReport {
            delta_grid: delta_grid.to_vec(),
            gammas: gammas.to_vec(),
            q_values,
            levels: levels.to_vec(),
            interval_values,
            q_inf,
            q_argmin,
            interval_inf,
            interval_argmin,
        })
    }

    /// Probabilities of rejection at stopping followed by acceptance once the
    /// overrun data are added, and the reverse, when `t_o = c t`.
    pub fn reversal(&self, delta: f64, c: f64, rho: f64, alpha: f64) -> Result<Reversal> {
        if !(c > 0.0 && rho > 0.0) {
            return Err(Error::Domain(format!(
                "overrun coefficient and weighting factor must be positive, got c = {c}, rho = {rho}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        let z_alpha = z_of(alpha)?;
        let rc = rho * c;
        let a = ((1.0 + rc) / rc).sqrt();
        let b = 1.0 / rc.sqrt();
        // Argument of Phi in the reject-to-accept integrand.
        let arg = |p0: f64, t: f64| a * z_alpha - b * z_saturating(p0) - delta * (c * t).sqrt();
        let (ra, ar, pow) = match (&self.design, &self.table) {
            (Design::Linear(_), Some(base)) => {
                let null = stop_points(base);
                let n = base.steps();
                let mut ra = 0.0;
                let mut ar = 0.0;
                for i in 0..n {
                    let mu = base.upper_masses()[i] * base.upper_tilt(delta, i);
                    let ml = base.lower_masses()[i] * base.lower_tilt(delta, i);
                    let t = base.midpoint(i);
                    if mu > 0.0 {
                        ra += mu * phi(arg(null.upper[i].p, t));
                    }
                    if ml > 0.0 {
                        ar += ml * phi_bar(arg(null.lower[i].p, t));
                    }
                }
                let pow = base.upper_cdf_at(delta, base.design().t_max());
                (ra, ar, pow)
            }
            (Design::Group(design), _) => {
                let dens = gs_stage_densities(design, delta);
                let null = gs_stage_densities(design, 0.0);
                let (upper, lower) = stage_regions(design, &dens);
                let mut ra = 0.0;
                let mut ar = 0.0;
                for (k, (u, l)) in upper.iter().zip(&lower).enumerate() {
                    let stage = k + 1;
                    for &(x, m) in &u.nodes {
                        ra += m * phi(arg(null.stagewise_p(design, stage, x), u.t));
                    }
                    for &(x, m) in &l.nodes {
                        ar += m * phi_bar(arg(null.stagewise_p(design, stage, x), l.t));
                    }
                }
                let pow: f64 = (1..=design.stages()).map(|k| dens.upper_stop(k)).sum();
                (ra, ar, pow)
            }
            _ => unreachable!("linear designs always carry a table"),
        };
        Ok(Reversal {
            reject_to_accept: ra,
            accept_to_reject: ar,
            pow,
            ovpow: pow - ra + ar,
        })
    }

    pub fn reversal_sweep(
        &self,
        delta_grid: &[f64],
        c: f64,
        rho: f64,
        alpha: f64,
    ) -> Result<ReversalReport> {
        if delta_grid.is_empty() {
            return Err(Error::Config("the drift grid is empty".into()));
        }
        let rows = delta_grid
            .par_iter()
            .map(|&d| self.reversal(d, c, rho, alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReversalReport {
            delta_grid: delta_grid.to_vec(),
            p_reject_to_accept: rows.iter().map(|r| r.reject_to_accept).collect(),
            p_accept_to_reject: rows.iter().map(|r| r.accept_to_reject).collect(),
            pow: rows.iter().map(|r| r.pow).collect(),
            ovpow: rows.iter().map(|r| r.ovpow).collect(),
        })
    }
}

/// Minimum of `f` over the range of a sorted grid, given its values on the
/// grid. Golden-section search runs over the two cells next to the grid
/// minimum, so a cusp between grid points is not missed.
fn refine_min<F>(grid: &[f64], values: &[f64], mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (i, &m) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let mut best = (grid[i], m);
    if grid.len() < 2 {
        return Ok(best);
    }
    let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-5 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "level must lie in (0, 1), got {level}"
        )))
    }
}

pub fn coverage_q(
    design: &Design,
    overrun: &OverrunData,
    gamma: f64,
    delta: f64,
    grid: &GridOptions,
) -> Result<f64> {
    OperatingCharacteristics::new(design, grid)?.coverage_q(overrun, gamma, delta)
}

pub fn coverage_interval(
    design: &Design,
    overrun: &OverrunData,
    level: f64,
    delta: f64,
    grid: &GridOptions,
) -> Result<f64> {
    OperatingCharacteristics::new(design, grid)?.coverage_interval(overrun, level, delta)
}

pub fn coverage_sweep(
    design: &Design,
    overrun: &OverrunData,
    gammas: &[f64],
    levels: &[f64],
    delta_grid: &[f64],
    grid: &GridOptions,
) -> Result<CoverageReport> {
    OperatingCharacteristics::new(design, grid)?.coverage_sweep(overrun, gammas, levels, delta_grid)
}

/// `(P(R -> A), P(A -> R))` at drift `delta` with overrun `t_o = c t`.
pub fn reversal_probs(
    design: &Design,
    delta: f64,
    c: f64,
    rho: f64,
    alpha: f64,
    grid: &GridOptions,
) -> Result<(f64, f64)> {
    let r = OperatingCharacteristics::new(design, grid)?.reversal(delta, c, rho, alpha)?;
    Ok((r.reject_to_accept, r.accept_to_reject))
}

/// Power once the overrun data are included.
pub fn overrun_power(
    design: &Design,
    delta: f64,
    c: f64,
    rho: f64,
    alpha: f64,
    grid: &GridOptions,
) -> Result<f64> {
    Ok(OperatingCharacteristics::new(design, grid)?
        .reversal(delta, c, rho, alpha)?
        .ovpow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::OverrunModel;
    use crate::linear::{Line, LinearDesign};

    fn triangular() -> Design {
        Design::Linear(LinearDesign::closed(Line::new(5.99, 0.25), Line::new(-5.99, 0.75)).unwrap())
    }

    fn obf() -> Design {
        Design::Group(
            GroupDesign::with_constant(GroupDesign::equally_spaced(5, 10.781), 6.6988).unwrap(),
        )
    }

    fn coarse() -> GridOptions {
        GridOptions::with_steps(1000)
    }

    #[test]
    fn proportional_overrun_is_exact() {
        let prop = OverrunData::model(OverrunModel::Proportional, 0.3);
        for design in [triangular(), obf()] {
            let oc = OperatingCharacteristics::new(&design, &coarse())
                .unwrap()
                .with_final_stage(FinalStage::Combine);
            for delta in [-1.0, 0.0, 0.5, 1.0] {
                let q = oc.coverage_qs(&prop, &[0.1, 0.5, 0.9], delta).unwrap();
                for (g, v) in [0.1, 0.5, 0.9].iter().zip(&q) {
                    assert!((v - g).abs() < 0.002, "delta={delta} gamma={g} q={v}");
                }
            }
        }
    }

    #[test]
    fn extending_the_final_analysis_breaks_exactness() {
        let prop = OverrunData::model(OverrunModel::Proportional, 0.3);
        let oc = OperatingCharacteristics::new(&obf(), &coarse()).unwrap();
        let q = oc.coverage_q(&prop, 0.5, 1.0).unwrap();
        assert!((q - 0.5).abs() > 0.003, "{q}");
    }

    #[test]
    fn interval_coverage_orientation() {
        let oc = OperatingCharacteristics::new(&triangular(), &coarse()).unwrap();
        let prop = OverrunData::model(OverrunModel::Proportional, 0.3);
        let q = oc.coverage_interval(&prop, 0.9, 0.4).unwrap();
        assert!((q - 0.9).abs() < 0.003, "{q}");
    }

    #[test]
    fn symmetric_design_gives_symmetric_coverage() {
        let oc = OperatingCharacteristics::new(&obf(), &coarse()).unwrap();
        let cst = OverrunData::model(OverrunModel::Constant, 0.1 * 10.781);
        for delta in [0.3, 1.1, 2.0] {
            let a = oc.coverage_q(&cst, 0.5, delta).unwrap();
            let b = oc.coverage_q(&cst, 0.5, -delta).unwrap();
            assert!((a + b - 1.0).abs() < 0.005, "delta={delta}: {a} + {b}");
        }
    }

    #[test]
    fn reversals_vanish_with_rho() {
        let oc = OperatingCharacteristics::new(&triangular(), &coarse()).unwrap();
        // The design's own level, so that every upper crossing rejects.
        let alpha = oc.table.as_ref().unwrap().upper_cdf(30.0);
        for delta in [0.0, 0.5, 1.0] {
            let r = oc.reversal(delta, 0.2, 1e-10, alpha).unwrap();
            assert!(
                r.reject_to_accept < 1e-4 && r.accept_to_reject < 1e-4,
                "{r:?}"
            );
            let r = oc.reversal(delta, 0.2, 1.0, 0.025).unwrap();
            assert!(r.reject_to_accept <= r.pow);
            assert!((r.ovpow - r.pow + r.reject_to_accept - r.accept_to_reject).abs() < 1e-12);
        }
    }

    #[test]
    fn reversals_decrease_with_rho() {
        let oc = OperatingCharacteristics::new(&obf(), &coarse()).unwrap();
        let mut prev = f64::INFINITY;
        for rho in [1.0, 0.5, 0.1] {
            let r = oc.reversal(0.8, 0.2, rho, 0.025).unwrap();
            assert!(r.reject_to_accept < prev);
            prev = r.reject_to_accept;
        }
    }

    #[test]
    fn sweep_shapes_and_infima() {
        let oc = OperatingCharacteristics::new(&triangular(), &coarse()).unwrap();
        let cst = OverrunData::model(OverrunModel::Constant, 0.938);
        let grid = [-1.0, 0.0, 1.0];
        let r = oc.coverage_sweep(&cst, &[0.5], &[0.9], &grid).unwrap();
        assert_eq!(r.q_values.len(), 1);
        assert_eq!(r.q_values[0].len(), 3);
        assert!(r.q_inf[0] <= r.q_values[0].iter().copied().fold(1.0, f64::min));
        let at = oc.coverage_q(&cst, 0.5, r.q_argmin[0]).unwrap();
        assert!((at - r.q_inf[0]).abs() < 1e-12);
        assert!(oc.coverage_sweep(&cst, &[0.5], &[0.9], &[]).is_err());
        assert!(oc
            .coverage_q(&OverrunData::observed(1.0, 0.0), 0.5, 0.0)
            .is_err());
    }

    #[test]
    fn refinement_finds_a_cusp_between_grid_points() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let f = |d: f64| (d - 0.537).abs();
        let v: Vec<f64> = grid.iter().map(|&d| f(d)).collect();
        let (d, m) = refine_min(&grid, &v, |d| Ok(f(d))).unwrap();
        assert!((d - 0.537).abs() < 1e-4 && m < 1e-4);
    }

    #[test]
    fn default_grid_has_101_points() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 101);
        assert!((g[0] + 2.5).abs() < 1e-12 && (g[100] - 2.5).abs() < 1e-12);
    }
}
