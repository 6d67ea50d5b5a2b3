//! Published reference values and the computations that reproduce them.

use clap::ValueEnum;
use overrun_core::eval::{default_delta_grid, OperatingCharacteristics};
use overrun_core::group::{obf_constant, required_horizon};
use overrun_core::inference::deletion_analyze;
use overrun_core::linear::{expected_stop_time, CrossingTable};
use overrun_core::{
    analyze, AnalysisOptions, Design, GridOptions, GroupDesign, Hit, InferenceReport, Line,
    LinearDesign, OverrunData, OverrunModel, TrialOutcome,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    /// Linear-boundary trial stopped at the upper boundary, with overrun.
    Madit,
    /// Second linear-boundary trial, with overrun.
    Madit2,
    /// Five-analysis O'Brien-Fleming variant of the first trial.
    MaditGs,
    /// Error probabilities, power and expected duration of a triangular test.
    TriangularOc,
    /// Horizon, boundary constant and coverage of an O'Brien-Fleming design.
    ObfOc,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [
        CaseId::Madit,
        CaseId::Madit2,
        CaseId::MaditGs,
        CaseId::TriangularOc,
        CaseId::ObfOc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Madit => "madit",
            CaseId::Madit2 => "madit2",
            CaseId::MaditGs => "madit-gs",
            CaseId::TriangularOc => "triangular-oc",
            CaseId::ObfOc => "obf-oc",
        }
    }
}

/// One computed value against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub case: String,
    pub cell: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Checks {
    case: &'static str,
    rows: Vec<Check>,
}

impl Checks {
    fn new(case: CaseId) -> Self {
        Self {
            case: case.name(),
            rows: Vec::new(),
        }
    }

    fn add(&mut self, cell: impl Into<String>, computed: f64, expected: f64, tolerance: f64) {
        self.rows.push(Check {
            case: self.case.into(),
            cell: cell.into(),
            computed,
            expected,
            tolerance,
            pass: (computed - expected).abs() <= tolerance,
        });
    }

    /// Two-sided p, estimate and interval on the drift scale.
    fn drift_row(&mut self, label: &str, r: &InferenceReport, want: [f64; 4], tol: [f64; 3]) {
        self.add(
            format!("{label} two-sided p"),
            r.two_sided_p,
            want[0],
            tol[0],
        );
        self.add(format!("{label} estimate"), r.delta_hat, want[1], tol[1]);
        self.add(format!("{label} lower limit"), r.ci_lo, want[2], tol[2]);
        self.add(format!("{label} upper limit"), r.ci_hi, want[3], tol[2]);
    }

    /// Two-sided p, estimate and interval on the hazard-ratio scale.
    fn hr_row(&mut self, label: &str, r: &InferenceReport, want: [f64; 4], tol: [f64; 3]) {
        self.add(
            format!("{label} two-sided p"),
            r.two_sided_p,
            want[0],
            tol[0],
        );
        self.add(format!("{label} HR estimate"), r.hr_hat, want[1], tol[1]);
        self.add(format!("{label} HR lower limit"), r.hr_lo, want[2], tol[2]);
        self.add(format!("{label} HR upper limit"), r.hr_hi, want[3], tol[2]);
    }
}

pub fn madit_design() -> LinearDesign {
    LinearDesign::closed(Line::new(7.935, 0.189), Line::new(-7.935, 0.566)).expect("valid design")
}

pub fn madit_outcome() -> TrialOutcome {
    TrialOutcome::linear(12.037, 10.210, Hit::Upper)
}

pub fn madit_overrun() -> OverrunData {
    OverrunData::observed(1.240, 2.957)
}

pub fn madit2_design() -> LinearDesign {
    LinearDesign::closed(Line::new(11.77, 0.1273), Line::new(-11.77, 0.3819)).expect("valid design")
}

pub fn madit2_outcome() -> TrialOutcome {
    TrialOutcome::linear(45.415, 17.551, Hit::Upper)
}

pub fn madit2_overrun() -> OverrunData {
    OverrunData::observed(0.483, 1.441)
}

/// Five equally spaced O'Brien-Fleming analyses at two-sided level 0.05,
/// with the third analysis at the time the linear-boundary trial stopped.
pub fn madit_gs_design() -> Result<GroupDesign, CliError> {
    let times = GroupDesign::equally_spaced(5, 12.037 * 5.0 / 3.0);
    Ok(GroupDesign::obf(times, 0.05)?)
}

/// The triangular test with intercepts `±5.99` and slopes `0.25`, `0.75`.
pub fn triangular_design() -> LinearDesign {
    LinearDesign::closed(Line::new(5.99, 0.25), Line::new(-5.99, 0.75)).expect("valid design")
}

/// Drift at which the triangular test has power 0.9.
pub const TRIANGULAR_ALTERNATIVE: f64 = 0.8233;

/// The four overrun settings of the O'Brien-Fleming coverage table: a
/// constant `t_o = c t_5` and a proportional `t_o = c t_k`, for `c = 0.02`
/// and `c = 0.1`.
pub fn obf_overruns(t5: f64) -> [(String, OverrunData); 4] {
    [
        (
            "t_o = 0.02 t5".into(),
            OverrunData::model(OverrunModel::Constant, 0.02 * t5),
        ),
        (
            "t_o = 0.1 t5".into(),
            OverrunData::model(OverrunModel::Constant, 0.1 * t5),
        ),
        (
            "t_o = 0.02 tk".into(),
            OverrunData::model(OverrunModel::Proportional, 0.02),
        ),
        (
            "t_o = 0.1 tk".into(),
            OverrunData::model(OverrunModel::Proportional, 0.1),
        ),
    ]
}

pub fn run_case(case: CaseId, grid: &GridOptions) -> Result<Vec<Check>, CliError> {
    let opts = AnalysisOptions {
        grid: *grid,
        delta0: 0.0,
    };
    let mut c = Checks::new(case);
    match case {
        CaseId::Madit => {
            let d = Design::Linear(madit_design());
            let o = madit_outcome();
            let without = analyze(&d, &o, None, 0.95, &opts)?;
            let with = analyze(&d, &o, Some(&madit_overrun()), 0.95, &opts)?;
            let tol = [0.0005, 0.005, 0.01];
            c.drift_row("without", &without, [0.0084, 0.786, 0.204, 1.361], tol);
            c.add("without HR estimate", without.hr_hat, 0.456, 0.003);
            let tol = [0.0002, 0.005, 0.01];
            c.drift_row("with", &with, [0.0009, 0.938, 0.388, 1.484], tol);
            c.add("with HR estimate", with.hr_hat, 0.391, 0.003);
        }
        CaseId::Madit2 => {
            let d = Design::Linear(madit2_design());
            let o = madit2_outcome();
            let without = analyze(&d, &o, None, 0.95, &opts)?;
            let with = analyze(&d, &o, Some(&madit2_overrun()), 0.95, &opts)?;
            let tol = [0.001, 0.005, 0.01];
            c.hr_row("without", &without, [0.028, 0.708, 0.525, 0.962], tol);
            c.hr_row("with", &with, [0.016, 0.688, 0.511, 0.932], tol);
        }
        CaseId::MaditGs => {
            let g = madit_gs_design()?;
            let d = Design::Group(g.clone());
            let x = 10.210;
            let o = TrialOutcome {
                t: g.time(3),
                x,
                hit: Hit::Upper,
                stage: Some(3),
            };
            let ov = madit_overrun();
            let without = analyze(&d, &o, None, 0.95, &opts)?;
            let with = analyze(&d, &o, Some(&ov), 0.95, &opts)?;
            let deletion = deletion_analyze(&g, 3, x, &ov, 0.95, 0.0)?;
            c.hr_row(
                "without",
                &without,
                [0.0039, 0.431, 0.244, 0.762],
                [0.0004, 0.01, 0.015],
            );
            c.hr_row(
                "with",
                &with,
                [0.0004, 0.373, 0.217, 0.641],
                [0.0002, 0.01, 0.015],
            );
            c.hr_row(
                "deletion",
                &deletion,
                [0.0014, 0.384, 0.221, 0.680],
                [0.0003, 0.01, 0.015],
            );
        }
        CaseId::TriangularOc => {
            let tri = triangular_design();
            let null = CrossingTable::build(&tri, 0.0, grid)?;
            let t_max = tri.t_max();
            c.add("upper error at 0", null.upper_cdf(t_max), 0.025, 0.001);
            // The design is symmetric about 0.5, so the lower error at 1
            // mirrors the upper error at 0.
            let one = CrossingTable::build(&tri, 1.0, grid)?;
            c.add("lower error at 1", one.lower_cdf(t_max), 0.025, 0.001);
            let alt = CrossingTable::build(&tri, TRIANGULAR_ALTERNATIVE, grid)?;
            c.add("power at 0.8233", alt.upper_cdf(t_max), 0.9, 0.005);
            for (delta, want) in [(0.0, 7.776), (TRIANGULAR_ALTERNATIVE, 9.382), (0.5, 11.217)] {
                let e = expected_stop_time(&tri, delta, grid)?;
                c.add(format!("E(T) at {delta}"), e, want, 0.02);
            }
        }
        CaseId::ObfOc => {
            let t5 = required_horizon(5, 0.05, 0.9, 1.0)?;
            c.add("horizon t5", t5, 10.781, 0.02);
            let times = GroupDesign::equally_spaced(5, t5);
            let k = obf_constant(&times, 0.05)?;
            c.add("boundary constant", k, 6.6988, 0.003);
            let design = Design::Group(GroupDesign::with_constant(times, k)?);
            let oc = OperatingCharacteristics::new(&design, grid)?;
            let grid_d = default_delta_grid();
            let q5 = [0.475, 0.445, 0.478, 0.451];
            let q90 = [0.894, 0.887, 0.894, 0.888];
            let q95 = [0.947, 0.943, 0.947, 0.943];
            for (j, (label, ov)) in obf_overruns(t5).iter().enumerate() {
                let r = oc.coverage_sweep(ov, &[0.5], &[0.9, 0.95], &grid_d)?;
                c.add(format!("{label} inf q.5"), r.q_inf[0], q5[j], 0.005);
                c.add(format!("{label} inf Q.9"), r.interval_inf[0], q90[j], 0.003);
                c.add(
                    format!("{label} inf Q.95"),
                    r.interval_inf[1],
                    q95[j],
                    0.003,
                );
            }
        }
    }
    Ok(c.rows)
}
