//! Brownian motion with drift monitored continuously against two straight
//! boundaries.
//!
//! Crossing probabilities are obtained from a Markov recursion on a time grid
//! `0 = t_0 < t_1 < ... < t_N = t_max`. The sub-density of paths still inside
//! the continuation band is carried on a composite Simpson grid spanning the
//! band and propagated through Gaussian transition kernels; the mass that
//! leaves through either boundary during a step is recorded. By default each
//! step accounts for excursions between grid times through the closed-form
//! crossing probability of the Brownian bridge, which is exact for straight
//! boundaries; the alternatives are plain discrete monitoring and Siegmund's
//! shift of both boundaries by `0.5826 sqrt(dt)` towards the interior.
//!
//! For a path that first reaches the upper boundary at time `t` the position
//! is `u(t)`, so changing the drift from `d0` to `d` rescales the crossing
//! sub-density by `exp((d - d0) u(t) - (d^2 - d0^2) t / 2)`. [`CrossingTable::tilt`]
//! uses this to move a single table to any drift without repeating the
//! recursion; all inference and operating-characteristic code relies on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{phi, phi_bar, FRAC_1_SQRT_2PI};
use crate::quad::SimpsonGrid;

/// Default number of time steps over `[0, t_max]`.
pub const DEFAULT_STEPS: usize = 4000;
/// Siegmund's constant `-ζ(1/2)/sqrt(2π)` for the discrete-monitoring shift.
pub const CONTINUITY_CORRECTION: f64 = 0.5826;
/// Number of Simpson nodes across a wide continuation band.
pub const STATE_NODES: usize = 801;

/// Kernel support in standard deviations.
const KERNEL_REACH: f64 = 9.0;
/// Half-width, in units of `sqrt(t)`, of the state window around `delta t`.
const STATE_WINDOW: f64 = 10.0;
/// Coarsest and finest node spacing, in nodes per kernel standard deviation.
const MIN_NODES_PER_SD: f64 = 2.5;
const MAX_NODES_PER_SD: f64 = 10.0;
const MAX_STATE_NODES: usize = 20_001;
const FEWEST_STATE_NODES: usize = 41;

/// A straight boundary `intercept + slope t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
}

impl Line {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Which way a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hit {
    Upper,
    Lower,
    /// Reached the horizon (or, for group designs, the last analysis)
    /// without stopping early.
    Final,
}

/// Observed stopping coordinates `(T, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub t: f64,
    pub x: f64,
    pub hit: Hit,
    /// Analysis index (1-based), group designs only.
    #[serde(default)]
    pub stage: Option<usize>,
}

impl TrialOutcome {
    pub fn linear(t: f64, x: f64, hit: Hit) -> Self {
        Self {
            t,
            x,
            hit,
            stage: None,
        }
    }
}

/// Tolerance for snapping a published (rounded) stopping point onto its
/// boundary.
pub fn snap_tolerance(x: f64) -> f64 {
    (1e-4 * x.abs()).max(1e-3)
}

/// Two straight boundaries `l(t) < u(t)` on `(0, t_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDesign {
    upper: Line,
    lower: Line,
    t_max: f64,
    closed: bool,
}

impl LinearDesign {
    /// Boundaries that converge; the horizon is their intersection.
    pub fn closed(upper: Line, lower: Line) -> Result<Self> {
        Self::check_intercepts(upper, lower)?;
        if lower.slope <= upper.slope {
            return Err(Error::Config(
                "boundaries never meet; supply a horizon".to_string(),
            ));
        }
        let apex = (upper.intercept - lower.intercept) / (lower.slope - upper.slope);
        Ok(Self {
            upper,
            lower,
            t_max: apex,
            closed: true,
        })
    }

    /// Boundaries with an explicit horizon. If they meet, `t_max` must equal
    /// the intersection time (within 1e-9) or come before it.
    pub fn with_horizon(upper: Line, lower: Line, t_max: f64) -> Result<Self> {
        Self::check_intercepts(upper, lower)?;
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {t_max}"
            )));
        }
        if lower.slope > upper.slope {
            let apex = (upper.intercept - lower.intercept) / (lower.slope - upper.slope);
            if (t_max - apex).abs() <= 1e-9 * apex.max(1.0) {
                return Self::closed(upper, lower);
            }
            if t_max > apex {
                return Err(Error::Config(format!(
                    "horizon {t_max} lies beyond the boundary intersection at {apex}"
                )));
            }
        }
        Ok(Self {
            upper,
            lower,
            t_max,
            closed: false,
        })
    }

    fn check_intercepts(upper: Line, lower: Line) -> Result<()> {
        let finite = [upper.intercept, upper.slope, lower.intercept, lower.slope]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("boundary coefficients must be finite".into()));
        }
        if !(lower.intercept < 0.0 && 0.0 < upper.intercept) {
            return Err(Error::Config(format!(
                "need lower intercept < 0 < upper intercept, got {} and {}",
                lower.intercept, upper.intercept
            )));
        }
        Ok(())
    }

    pub fn upper(&self) -> Line {
        self.upper
    }

    pub fn lower(&self) -> Line {
        self.lower
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// True when the boundaries meet at `t_max`, so stopping is certain.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Checks an outcome against the boundaries and snaps it onto the one it
    /// claims to have hit.
    pub fn validate_outcome(&self, outcome: &TrialOutcome) -> Result<TrialOutcome> {
        let TrialOutcome { t, x, hit, .. } = *outcome;
        if !(t > 0.0 && t.is_finite() && x.is_finite()) {
            return Err(Error::Input(format!("invalid stopping point ({t}, {x})")));
        }
        let tol_t = 1e-9 * self.t_max.max(1.0);
        if t > self.t_max + tol_t {
            return Err(Error::Input(format!(
                "stopping time {t} exceeds the horizon {}",
                self.t_max
            )));
        }
        let t = t.min(self.t_max);
        let tol = snap_tolerance(x);
        let snapped = match hit {
            Hit::Upper => {
                let u = self.upper.at(t);
                if (x - u).abs() > tol {
                    return Err(Error::Input(format!(
                        "x = {x} is not on the upper boundary u({t}) = {u}"
                    )));
                }
                u
            }
            Hit::Lower => {
                let l = self.lower.at(t);
                if (x - l).abs() > tol {
                    return Err(Error::Input(format!(
                        "x = {x} is not on the lower boundary l({t}) = {l}"
                    )));
                }
                l
            }
            Hit::Final => {
                if self.closed {
                    return Err(Error::Input(
                        "closed designs always stop on a boundary".to_string(),
                    ));
                }
                if (t - self.t_max).abs() > tol_t.max(1e-6) {
                    return Err(Error::Input(format!(
                        "a final outcome must occur at the horizon {}",
                        self.t_max
                    )));
                }
                if x >= self.upper.at(t) || x <= self.lower.at(t) {
                    return Err(Error::Input(format!(
                        "final value {x} lies outside the continuation band"
                    )));
                }
                x
            }
        };
        Ok(TrialOutcome {
            t,
            x: snapped,
            hit,
            stage: None,
        })
    }
}

/// How continuous monitoring is approximated on the time grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitoring {
    /// Plain discrete-time monitoring at the grid times.
    Discrete,
    /// Discrete monitoring with both boundaries pulled in by
    /// `0.5826 sqrt(dt)`.
    Shifted,
    /// Continuous monitoring: within each step the crossing probability of
    /// the Brownian bridge between grid points is accounted for exactly.
    #[default]
    Bridge,
}

/// Numerical options for [`CrossingTable::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub steps: usize,
    pub monitoring: Monitoring,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            monitoring: Monitoring::default(),
        }
    }
}

impl GridOptions {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }
}

/// Sub-density of surviving paths at the horizon (designs that do not close).
#[derive(Debug, Clone, PartialEq)]
struct Terminal {
    grid: SimpsonGrid,
    density: Vec<f64>,
}

/// First-passage distribution of a drifted Brownian motion through a
/// [`LinearDesign`].
///
/// Step `n` covers `(t_{n-1}, t_n]`; its crossing mass is treated as located
/// at the step midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingTable {
    design: LinearDesign,
    delta: f64,
    dt: f64,
    upper_mass: Vec<f64>,
    lower_mass: Vec<f64>,
    upper_cum: Vec<f64>,
    lower_cum: Vec<f64>,
    terminal: Option<Terminal>,
}

/// Carrier of the in-band sub-density during the recursion. `mass` holds
/// Simpson-weighted density values.
enum State {
    Origin,
    Grid { grid: SimpsonGrid, mass: Vec<f64> },
    Empty,
}

impl State {
    /// `(position, weighted mass)` pairs, or the unit mass at the origin.
    fn sources(&self) -> Box<dyn Iterator<Item = (f64, f64)> + '_> {
        match self {
            State::Origin => Box::new(std::iter::once((0.0, 1.0))),
            State::Empty => Box::new(std::iter::empty()),
            State::Grid { grid, mass } => {
                Box::new(mass.iter().enumerate().map(|(i, &m)| (grid.node(i), m)))
            }
        }
    }
}

/// Convenience wrapper for [`CrossingTable::build`] with default options.
pub fn crossing_table(design: &LinearDesign, delta: f64, steps: usize) -> Result<CrossingTable> {
    CrossingTable::build(design, delta, &GridOptions::with_steps(steps))
}

/// One step `(t - dt, t]` of the recursion.
struct Step<'a> {
    design: &'a LinearDesign,
    delta: f64,
    dt: f64,
    sd: f64,
    shift: f64,
    mode: Monitoring,
    t: f64,
}

impl Step<'_> {
    fn drift(&self) -> f64 {
        self.delta * self.dt
    }

    /// Continuation band at the end of the step.
    fn band(&self) -> (f64, f64) {
        (
            self.design.lower.at(self.t) + self.shift,
            self.design.upper.at(self.t) - self.shift,
        )
    }

    /// Probability that a path at `x` at the start of the step leaves
    /// through the upper boundary during the step.
    fn exit_upper(&self, x: f64) -> f64 {
        match self.mode {
            Monitoring::Bridge => {
                let d = self.design.upper.at(self.t - self.dt) - x;
                first_passage(d, self.delta - self.design.upper.slope, self.dt)
            }
            _ => phi_bar((self.band().1 - x - self.drift()) / self.sd),
        }
    }

    fn exit_lower(&self, x: f64) -> f64 {
        match self.mode {
            Monitoring::Bridge => {
                let d = x - self.design.lower.at(self.t - self.dt);
                first_passage(d, self.design.lower.slope - self.delta, self.dt)
            }
            _ => phi((self.band().0 - x - self.drift()) / self.sd),
        }
    }

    /// Sources far from a boundary cannot reach it within one step.
    fn near_upper(&self, x: f64) -> bool {
        let d = self.design.upper.at(self.t - self.dt) - x;
        d - (self.delta - self.design.upper.slope).max(0.0) * self.dt
            < KERNEL_REACH * self.sd + self.shift
    }

    fn near_lower(&self, x: f64) -> bool {
        let d = x - self.design.lower.at(self.t - self.dt);
        d - (self.design.lower.slope - self.delta).max(0.0) * self.dt
            < KERNEL_REACH * self.sd + self.shift
    }

    fn crossing_masses(&self, state: &State) -> (f64, f64) {
        let mut up = 0.0;
        let mut low = 0.0;
        for (x, m) in state.sources() {
            if self.near_upper(x) {
                up += m * self.exit_upper(x);
            }
            if self.near_lower(x) {
                low += m * self.exit_lower(x);
            }
        }
        (up, low)
    }

    /// Everything still in the band leaves now; each source is split between
    /// the boundaries in proportion to its exit probabilities.
    fn closing_masses(&self, state: &State) -> (f64, f64) {
        let split = 0.5 * (self.design.upper.at(self.t) + self.design.lower.at(self.t));
        let mut up = 0.0;
        let mut low = 0.0;
        for (x, m) in state.sources() {
            let (pu, pl) = match self.mode {
                Monitoring::Bridge => (self.exit_upper(x), self.exit_lower(x)),
                _ => {
                    let z = (split - x - self.drift()) / self.sd;
                    (phi_bar(z), phi(z))
                }
            };
            let total = pu + pl;
            let frac = if total > 0.0 {
                pu / total
            } else if x >= split {
                1.0
            } else {
                0.0
            };
            up += m * frac;
            low += m * (1.0 - frac);
        }
        (up, low)
    }

    /// In-band density at the end of the step on `target`.
    fn propagate(&self, state: &State, target: &SimpsonGrid) -> Vec<f64> {
        let sd = self.sd;
        let inv_var = 1.0 / (sd * sd);
        let norm = FRAC_1_SQRT_2PI / sd;
        let drift = self.drift();
        let bridge = self.mode == Monitoring::Bridge;
        let (u_prev, l_prev) = (
            self.design.upper.at(self.t - self.dt),
            self.design.lower.at(self.t - self.dt),
        );
        let (u_next, l_next) = (self.design.upper.at(self.t), self.design.lower.at(self.t));
        // Bridge factor for the origin source.
        let survive = |x: f64, xn: f64| {
            let pu = (-2.0 * (u_prev - x) * (u_next - xn) * inv_var).exp();
            let pl = (-2.0 * (x - l_prev) * (xn - l_next) * inv_var).exp();
            (1.0 - pu - pl).max(0.0)
        };
        let bridge_zone = (KERNEL_REACH + 2.0) * sd;
        match state {
            State::Empty => vec![0.0; target.n],
            State::Origin => target
                .nodes()
                .map(|xn| {
                    let d = xn - drift;
                    let k = norm * (-0.5 * d * d * inv_var).exp();
                    if bridge {
                        k * survive(0.0, xn)
                    } else {
                        k
                    }
                })
                .collect(),
            State::Grid { grid, mass } => {
                let h = grid.h;
                let reach = KERNEL_REACH * sd;
                // exp(-(d - h)^2 / 2v) = exp(-d^2 / 2v) * exp((d h - h^2/2) / v);
                // the second factor itself shrinks by exp(-h^2 / v) per node.
                let ratio_step = (-h * h * inv_var).exp();
                let mut out = vec![0.0; target.n];
                for (j, slot) in out.iter_mut().enumerate() {
                    let xn = target.node(j);
                    let a = xn - drift;
                    let i0 = ((a - reach - grid.lo) / h).ceil().max(0.0);
                    let i1 = ((a + reach - grid.lo) / h).floor();
                    if i1 < 0.0 || i0 > (grid.n - 1) as f64 {
                        continue;
                    }
                    let (i0, i1) = (i0 as usize, (i1 as usize).min(grid.n - 1));
                    if i0 > i1 {
                        continue;
                    }
                    let d0 = a - grid.node(i0);
                    let k = (-0.5 * d0 * d0 * inv_var).exp();
                    let r = ((d0 * h - 0.5 * h * h) * inv_var).exp();
                    let gap_u = u_next - xn;
                    let gap_l = xn - l_next;
                    let near_u = bridge && gap_u < bridge_zone;
                    let near_l = bridge && gap_l < bridge_zone;
                    let acc = if near_u || near_l {
                        // Bridge hitting probabilities exp(-2 D D' / v) are
                        // geometric in the source index.
                        let x0 = grid.node(i0);
                        let (pu, gu) = if near_u {
                            (
                                (-2.0 * (u_prev - x0) * gap_u * inv_var).exp(),
                                (2.0 * h * gap_u * inv_var).exp(),
                            )
                        } else {
                            (0.0, 1.0)
                        };
                        let (pl, gl) = if near_l {
                            (
                                (-2.0 * (x0 - l_prev) * gap_l * inv_var).exp(),
                                (-2.0 * h * gap_l * inv_var).exp(),
                            )
                        } else {
                            (0.0, 1.0)
                        };
                        bridge_sum(&mass[i0..=i1], k, r, ratio_step, (pu, gu), (pl, gl))
                    } else {
                        gauss_sum(&mass[i0..=i1], k, r, ratio_step)
                    };
                    *slot = norm * acc;
                }
                out
            }
        }
    }
}

impl CrossingTable {
    pub fn build(design: &LinearDesign, delta: f64, opts: &GridOptions) -> Result<Self> {
        if opts.steps < 100 {
            return Err(Error::Config(format!(
                "at least 100 time steps are required, got {}",
                opts.steps
            )));
        }
        if !delta.is_finite() {
            return Err(Error::Domain(format!("drift must be finite, got {delta}")));
        }
        let n_steps = opts.steps;
        let dt = design.t_max / n_steps as f64;
        let sd = dt.sqrt();
        let shift = if opts.monitoring == Monitoring::Shifted {
            CONTINUITY_CORRECTION * sd
        } else {
            0.0
        };
        if design.upper.intercept - shift <= 0.0 || design.lower.intercept + shift >= 0.0 {
            return Err(Error::Config(
                "boundaries touch the origin at this resolution".to_string(),
            ));
        }

        let mut upper_mass = Vec::with_capacity(n_steps);
        let mut lower_mass = Vec::with_capacity(n_steps);
        let mut state = State::Origin;

        for n in 1..=n_steps {
            let t = n as f64 * dt;
            let step = Step {
                design,
                delta,
                dt,
                sd,
                shift,
                mode: opts.monitoring,
                t,
            };
            let (lo, hi) = step.band();
            let last = n == n_steps;
            if hi <= lo || (last && design.closed) {
                let (up, low) = step.closing_masses(&state);
                upper_mass.push(up);
                lower_mass.push(low);
                state = State::Empty;
                continue;
            }
            let (up, low) = step.crossing_masses(&state);
            upper_mass.push(up);
            lower_mass.push(low);

            let w = STATE_WINDOW * t.sqrt();
            let span_lo = lo.max(delta * t - w);
            let span_hi = hi.min(delta * t + w);
            if span_hi <= span_lo || matches!(state, State::Empty) {
                state = State::Empty;
                continue;
            }
            let nodes = state_nodes((span_hi - span_lo) / sd);
            let grid = SimpsonGrid::new(span_lo, span_hi, nodes);
            let density = step.propagate(&state, &grid);
            if last {
                let terminal = Terminal { grid, density };
                return Ok(Self::assemble(
                    *design,
                    delta,
                    dt,
                    upper_mass,
                    lower_mass,
                    Some(terminal),
                ));
            }
            let mass = grid.weighted(&density);
            state = State::Grid { grid, mass };
        }
        Ok(Self::assemble(
            *design, delta, dt, upper_mass, lower_mass, None,
        ))
    }
    fn assemble(
        design: LinearDesign,
        delta: f64,
        dt: f64,
        upper_mass: Vec<f64>,
        lower_mass: Vec<f64>,
        terminal: Option<Terminal>,
    ) -> Self {
        let cumulate = |m: &[f64]| {
            let mut out = Vec::with_capacity(m.len() + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for v in m {
                acc += v;
                out.push(acc);
            }
            out
        };
        let upper_cum = cumulate(&upper_mass);
        let lower_cum = cumulate(&lower_mass);
        Self {
            design,
            delta,
            dt,
            upper_mass,
            lower_mass,
            upper_cum,
            lower_cum,
            terminal,
        }
    }

    pub fn design(&self) -> &LinearDesign {
        &self.design
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn steps(&self) -> usize {
        self.upper_mass.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid times `t_0 = 0, ..., t_N`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|n| n as f64 * self.dt).collect()
    }

    /// Midpoint of step `n` (0-based).
    #[inline]
    pub fn midpoint(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.dt
    }

    /// Upper crossing mass per step.
    pub fn upper_masses(&self) -> &[f64] {
        &self.upper_mass
    }

    pub fn lower_masses(&self) -> &[f64] {
        &self.lower_mass
    }

    /// Upper crossing sub-density `dP^U/dt` per step.
    pub fn upper_density(&self) -> Vec<f64> {
        self.upper_mass.iter().map(|m| m / self.dt).collect()
    }

    pub fn lower_density(&self) -> Vec<f64> {
        self.lower_mass.iter().map(|m| m / self.dt).collect()
    }

    /// Cumulative `P^U(t_n)` on the grid, `N + 1` entries.
    pub fn upper_cumulative(&self) -> &[f64] {
        &self.upper_cum
    }

    pub fn lower_cumulative(&self) -> &[f64] {
        &self.lower_cum
    }

    fn interpolate(&self, cum: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let pos = t / self.dt;
        let n = pos.floor() as usize;
        if n >= self.steps() {
            return cum[self.steps()];
        }
        let frac = pos - n as f64;
        cum[n] + frac * (cum[n + 1] - cum[n])
    }

    /// Probability of reaching the upper boundary first, by time `t`.
    pub fn upper_cdf(&self, t: f64) -> f64 {
        self.interpolate(&self.upper_cum, t)
    }

    pub fn lower_cdf(&self, t: f64) -> f64 {
        self.interpolate(&self.lower_cum, t)
    }

    /// Probability of still being in the band at the horizon.
    pub fn survival(&self) -> f64 {
        self.terminal
            .as_ref()
            .map_or(0.0, |term| term.grid.integrate(&term.density))
    }

    /// `P(survive to t_max, X(t_max) >= x)`.
    pub fn terminal_upper_tail(&self, x: f64) -> f64 {
        let Some(term) = &self.terminal else {
            return 0.0;
        };
        let g = &term.grid;
        if x <= g.lo {
            return self.survival();
        }
        if x >= g.hi() {
            return 0.0;
        }
        // Simpson above the first node at or past x, trapezoid for the sliver.
        let pos = (x - g.lo) / g.h;
        let mut k = pos.ceil() as usize;
        if (g.n - 1 - k) % 2 == 1 {
            k += 1;
        }
        let mut tail = 0.0;
        if k < g.n - 1 {
            let sub = SimpsonGrid {
                lo: g.node(k),
                h: g.h,
                n: g.n - k,
            };
            tail += sub.integrate(&term.density[k..]);
        }
        let k = k.min(g.n - 1);
        let fx = linear_interp(g, &term.density, x);
        tail += 0.5 * (fx + term.density[k]) * (g.node(k) - x);
        tail
    }

    /// Survivors at the horizon as `(x, mass)` pairs on the terminal grid.
    pub fn terminal_points(&self) -> Vec<(f64, f64)> {
        match &self.terminal {
            None => Vec::new(),
            Some(term) => term
                .grid
                .nodes()
                .zip(term.grid.weighted(&term.density))
                .collect(),
        }
    }

    /// Total probability accounted for: crossings plus survivors.
    pub fn total_mass(&self) -> f64 {
        self.upper_cum[self.steps()] + self.lower_cum[self.steps()] + self.survival()
    }

    /// `E_delta(T)`; requires boundaries that meet.
    pub fn expected_stop_time(&self) -> Result<f64> {
        if !self.design.closed {
            return Err(Error::Config(
                "expected stopping time needs boundaries that meet".to_string(),
            ));
        }
        let sum: f64 = (0..self.steps())
            .map(|n| self.midpoint(n) * (self.upper_mass[n] + self.lower_mass[n]))
            .sum();
        Ok(sum / (self.upper_cum[self.steps()] + self.lower_cum[self.steps()]))
    }

    /// Log of the density ratio between drift `delta` and the table's drift
    /// for a path at `x` at time `t`.
    #[inline]
    fn log_tilt(&self, delta: f64, x: f64, t: f64) -> f64 {
        (delta - self.delta) * x - 0.5 * (delta * delta - self.delta * self.delta) * t
    }

    /// Tilt factor for the upper crossing mass of step `n`.
    #[inline]
    pub fn upper_tilt(&self, delta: f64, n: usize) -> f64 {
        let t = self.midpoint(n);
        self.log_tilt(delta, self.design.upper.at(t), t).exp()
    }

    #[inline]
    pub fn lower_tilt(&self, delta: f64, n: usize) -> f64 {
        let t = self.midpoint(n);
        self.log_tilt(delta, self.design.lower.at(t), t).exp()
    }

    /// The same first-passage distribution under drift `delta`.
    pub fn tilt(&self, delta: f64) -> CrossingTable {
        let upper: Vec<f64> = (0..self.steps())
            .map(|n| self.upper_mass[n] * self.upper_tilt(delta, n))
            .collect();
        let lower: Vec<f64> = (0..self.steps())
            .map(|n| self.lower_mass[n] * self.lower_tilt(delta, n))
            .collect();
        let terminal = self.terminal.as_ref().map(|term| {
            let t = self.design.t_max;
            let density = term
                .grid
                .nodes()
                .zip(&term.density)
                .map(|(x, f)| f * self.log_tilt(delta, x, t).exp())
                .collect();
            Terminal {
                grid: term.grid.clone(),
                density,
            }
        });
        Self::assemble(self.design, delta, self.dt, upper, lower, terminal)
    }

    /// `P_delta^U(t)` without materialising the tilted table.
    pub fn upper_cdf_at(&self, delta: f64, t: f64) -> f64 {
        if delta == self.delta {
            return self.upper_cdf(t);
        }
        self.tilted_partial(delta, t, true)
    }

    pub fn lower_cdf_at(&self, delta: f64, t: f64) -> f64 {
        if delta == self.delta {
            return self.lower_cdf(t);
        }
        self.tilted_partial(delta, t, false)
    }

    fn tilted_partial(&self, delta: f64, t: f64, upper: bool) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let pos = (t / self.dt).min(self.steps() as f64);
        let full = pos.floor() as usize;
        let frac = pos - full as f64;
        let mass_at = |n: usize| {
            if upper {
                self.upper_mass[n] * self.upper_tilt(delta, n)
            } else {
                self.lower_mass[n] * self.lower_tilt(delta, n)
            }
        };
        let mut acc: f64 = (0..full).map(mass_at).sum();
        if full < self.steps() && frac > 0.0 {
            acc += frac * mass_at(full);
        }
        acc
    }

    fn survival_at(&self, delta: f64) -> f64 {
        self.terminal_tail_at(delta, f64::NEG_INFINITY)
    }

    fn terminal_tail_at(&self, delta: f64, x: f64) -> f64 {
        if delta == self.delta {
            return if x == f64::NEG_INFINITY {
                self.survival()
            } else {
                self.terminal_upper_tail(x)
            };
        }
        match &self.terminal {
            None => 0.0,
            Some(_) => self.tilt(delta).terminal_tail_at(delta, x),
        }
    }

    /// Stagewise p-value of `outcome` for testing drift `delta0` against
    /// larger values. Upper crossings are most extreme (earlier first),
    /// then survivors to the horizon by decreasing `x`, then lower crossings
    /// with later ones more extreme.
    pub fn stagewise_p(&self, outcome: &TrialOutcome, delta0: f64) -> Result<f64> {
        let o = self.design.validate_outcome(outcome)?;
        let t_max = self.design.t_max;
        let p = match o.hit {
            Hit::Upper => self.upper_cdf_at(delta0, o.t),
            Hit::Final => self.upper_cdf_at(delta0, t_max) + self.terminal_tail_at(delta0, o.x),
            Hit::Lower => {
                self.upper_cdf_at(delta0, t_max)
                    + self.survival_at(delta0)
                    + (self.lower_cdf_at(delta0, t_max) - self.lower_cdf_at(delta0, o.t))
            }
        };
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Stagewise p-value on a freshly built table at `delta0`.
pub fn stagewise_p_linear(
    design: &LinearDesign,
    outcome: &TrialOutcome,
    delta0: f64,
    opts: &GridOptions,
) -> Result<f64> {
    CrossingTable::build(design, delta0, opts)?.stagewise_p(outcome, delta0)
}

/// `E_delta(T)` for a design whose boundaries meet.
pub fn expected_stop_time(design: &LinearDesign, delta: f64, opts: &GridOptions) -> Result<f64> {
    if !design.is_closed() {
        return Err(Error::Config(
            "expected stopping time needs boundaries that meet".to_string(),
        ));
    }
    CrossingTable::build(design, delta, opts)?.expected_stop_time()
}

fn linear_interp(g: &SimpsonGrid, values: &[f64], x: f64) -> f64 {
    let pos = ((x - g.lo) / g.h).clamp(0.0, (g.n - 1) as f64);
    let i = (pos.floor() as usize).min(g.n - 2);
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Node count for a band `width_sd` kernel standard deviations wide: the
/// default count, refined for wide bands and thinned for narrow ones.
fn state_nodes(width_sd: f64) -> usize {
    let coarse = (width_sd * MIN_NODES_PER_SD).ceil() as usize + 1;
    let fine = (width_sd * MAX_NODES_PER_SD).ceil() as usize + 1;
    STATE_NODES
        .min(fine)
        .max(coarse)
        .clamp(FEWEST_STATE_NODES, MAX_STATE_NODES)
}

/// `sum m_i k_i` with `k_{i+1} = k_i r_i` and `r_{i+1} = r_i q`.
#[inline(never)]
fn gauss_sum(mass: &[f64], mut k: f64, mut r: f64, q: f64) -> f64 {
    let mut acc = 0.0;
    for m in mass {
        acc += m * k;
        k *= r;
        r *= q;
    }
    acc
}

/// [`gauss_sum`] with each term scaled by the bridge survival factor
/// `1 - pu_i - pl_i`, where both hitting probabilities are geometric.
#[inline(never)]
fn bridge_sum(
    mass: &[f64],
    mut k: f64,
    mut r: f64,
    q: f64,
    (mut pu, gu): (f64, f64),
    (mut pl, gl): (f64, f64),
) -> f64 {
    let mut acc = 0.0;
    for m in mass {
        acc += m * k * (1.0 - pu - pl).max(0.0);
        k *= r;
        r *= q;
        pu *= gu;
        pl *= gl;
    }
    acc
}

/// Probability that Brownian motion with drift `mu` towards a boundary at
/// distance `d` reaches it within time `dt`.
fn first_passage(d: f64, mu: f64, dt: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let s = dt.sqrt();
    let direct = phi_bar((d - mu * dt) / s);
    let reflected = phi_bar((d + mu * dt) / s);
    if reflected == 0.0 {
        return direct;
    }
    (direct + (2.0 * mu * d + reflected.ln()).exp()).min(1.0)
}
