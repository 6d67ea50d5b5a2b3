//! Seeded Monte Carlo sampling of trials, used as an independent check on
//! the quadrature engines.
//!
//! Work is split into fixed chunks, each drawing from its own ChaCha8
//! stream, so a sample depends only on the seed and never on the number of
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupDesign;
use crate::inference::Design;
use crate::linear::{Hit, LinearDesign, Monitoring, TrialOutcome};

const CHUNK: usize = 4096;
/// Siegmund's constant, for the shifted monitoring mode.
const SHIFT: f64 = 0.5826;

/// Path discretisation for linear designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub dt: f64,
    pub monitoring: Monitoring,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            monitoring: Monitoring::Bridge,
        }
    }
}

/// Empirical summary of a sample of trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub upper: usize,
    pub lower: usize,
    pub finals: usize,
    pub p_upper: f64,
    pub se_upper: f64,
    pub p_lower: f64,
    pub se_lower: f64,
    pub mean_t: f64,
    pub se_t: f64,
}

impl SampleSummary {
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len();
        let count = |h: Hit| outcomes.iter().filter(|o| o.hit == h).count();
        let (upper, lower, finals) = (count(Hit::Upper), count(Hit::Lower), count(Hit::Final));
        let nf = n.max(1) as f64;
        let rate = |k: usize| {
            let p = k as f64 / nf;
            (p, (p * (1.0 - p) / nf).sqrt())
        };
        let (p_upper, se_upper) = rate(upper);
        let (p_lower, se_lower) = rate(lower);
        let mean_t = outcomes.iter().map(|o| o.t).sum::<f64>() / nf;
        let var =
            outcomes.iter().map(|o| (o.t - mean_t).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
        Self {
            n,
            upper,
            lower,
            finals,
            p_upper,
            se_upper,
            p_lower,
            se_lower,
            mean_t,
            se_t: (var / nf).sqrt(),
        }
    }
}

/// Fraction of `outcomes` that crossed the upper boundary by time `t`.
pub fn empirical_upper_cdf(outcomes: &[TrialOutcome], t: f64) -> f64 {
    let k = outcomes
        .iter()
        .filter(|o| o.hit == Hit::Upper && o.t <= t)
        .count();
    k as f64 / outcomes.len().max(1) as f64
}

/// A generator for chunk `chunk` of the sample drawn with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    Ok(())
}

/// Draws `n` independent values with `draw`, in seeded chunks.
fn chunked<T, F>(n: usize, seed: u64, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Samples stopping points of a linear design by Euler steps of Brownian
/// motion with drift `delta`.
///
/// Under `Monitoring::Bridge` a path that ends a step inside the band is
/// still stopped with the Brownian-bridge crossing probability, at the step
/// midpoint. Observed crossings are placed where the straight line between
/// the two step ends meets the boundary.
pub fn simulate_paths(
    design: &LinearDesign,
    delta: f64,
    n: usize,
    seed: u64,
    opts: &PathOptions,
) -> Result<Vec<TrialOutcome>> {
    check_n(n)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Domain(format!(
            "step must be positive, got {}",
            opts.dt
        )));
    }
    if !design.t_max().is_finite() {
        return Err(Error::Config("simulation needs a finite horizon".into()));
    }
    let d = *design;
    let o = *opts;
    Ok(chunked(n, seed, move |rng| one_path(&d, delta, &o, rng)))
}

fn one_path(
    design: &LinearDesign,
    delta: f64,
    opts: &PathOptions,
    rng: &mut ChaCha8Rng,
) -> TrialOutcome {
    let (u, l) = (design.upper(), design.lower());
    let t_max = design.t_max();
    let shift = match opts.monitoring {
        Monitoring::Shifted => SHIFT * opts.dt.sqrt(),
        _ => 0.0,
    };
    let (mut t, mut x) = (0.0_f64, 0.0_f64);
    loop {
        let h = opts.dt.min(t_max - t);
        let last = t + h >= t_max - 1e-12;
        let t1 = if last { t_max } else { t + h };
        let z: f64 = rng.sample(StandardNormal);
        let x1 = x + delta * h + h.sqrt() * z;
        let (du0, du1) = (u.at(t) - shift - x, u.at(t1) - shift - x1);
        let (dl0, dl1) = (x - l.at(t) - shift, x1 - l.at(t1) - shift);
        if du1 <= 0.0 {
            let s = t + h * du0 / (du0 - du1);
            return TrialOutcome::linear(s, u.at(s), Hit::Upper);
        }
        if dl1 <= 0.0 {
            let s = t + h * dl0 / (dl0 - dl1);
            return TrialOutcome::linear(s, l.at(s), Hit::Lower);
        }
        // Far from both boundaries the crossing chance is below 1e-16 and
        // no uniform is drawn.
        let (eu, el) = (2.0 * du0 * du1 / h, 2.0 * dl0 * dl1 / h);
        if opts.monitoring == Monitoring::Bridge && eu.min(el) < 37.0 {
            let (pu, pl) = ((-eu).exp(), (-el).exp());
            let v: f64 = rng.random();
            let s = t + 0.5 * h;
            if v < pu {
                return TrialOutcome::linear(s, u.at(s), Hit::Upper);
            }
            if v < pu + pl {
                return TrialOutcome::linear(s, l.at(s), Hit::Lower);
            }
        }
        t = t1;
        x = x1;
        if last {
            return TrialOutcome::linear(t_max, x, Hit::Final);
        }
    }
}

/// Samples stopping points of a group sequential design from exact normal
/// increments between analyses.
pub fn simulate_group(
    design: &GroupDesign,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    check_n(n)?;
    let d = design.clone();
    Ok(chunked(n, seed, move |rng| {
        let mut x = 0.0;
        let mut prev = 0.0;
        let k_max = d.stages();
        for k in 1..=k_max {
            let t = d.time(k);
            let z: f64 = rng.sample(StandardNormal);
            x += delta * (t - prev) + (t - prev).sqrt() * z;
            prev = t;
            let (lo, hi) = d.limits(k);
            let hit = if x >= hi {
                Hit::Upper
            } else if x <= lo {
                Hit::Lower
            } else if k == k_max {
                Hit::Final
            } else {
                continue;
            };
            return TrialOutcome {
                t,
                x,
                hit,
                stage: Some(k),
            };
        }
        unreachable!("the last analysis always stops")
    }))
}

/// Samples trials from either kind of design.
pub fn simulate_trials(
    design: &Design,
    delta: f64,
    n: usize,
    seed: u64,
    opts: &PathOptions,
) -> Result<Vec<TrialOutcome>> {
    match design {
        Design::Linear(d) => simulate_paths(d, delta, n, seed, opts),
        Design::Group(d) => simulate_group(d, delta, n, seed),
    }
}

/// Overrun increments `Y ~ N(delta t_o, t_o)`, one per entry of `t_o`.
pub fn sample_increments(t_o: &[f64], delta: f64, seed: u64) -> Vec<f64> {
    let chunks = t_o.len().div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            t_o[c * CHUNK..((c + 1) * CHUNK).min(t_o.len())]
                .iter()
                .map(|&s| {
                    let z: f64 = rng.sample(StandardNormal);
                    delta * s + s.sqrt() * z
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
