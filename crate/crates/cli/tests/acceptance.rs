//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 1 to 5 are the reproduce cases of the command-line tool, which
//! carry the published reference values. Criteria 6 to 9 are checked here
//! against closed forms and Monte Carlo oracles.

use std::process::ExitCode;
use std::time::Instant;

use overrun_cli::cases::{run_case, triangular_design, CaseId, TRIANGULAR_ALTERNATIVE};
use overrun_core::combine::combine_overrun_linear;
use overrun_core::eval::default_delta_grid;
use overrun_core::group::gs_stage_densities;
use overrun_core::inference::Evaluator;
use overrun_core::linear::{expected_stop_time, CrossingTable};
use overrun_core::numerics::phi_bar;
use overrun_core::simulate::{sample_increments, simulate_paths};
use overrun_core::{
    Design, FinalStage, GridOptions, GroupDesign, Hit, Line, LinearDesign,
    OperatingCharacteristics, OverrunData, OverrunModel, PathOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn reproduce(case: CaseId) -> Outcome {
    match run_case(case, &GridOptions::default()) {
        Ok(checks) => {
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| {
                    format!(
                        "{}: {:.4} vs {:.4} +- {}",
                        c.cell, c.computed, c.expected, c.tolerance
                    )
                })
                .collect();
            let n = checks.len();
            if failed.is_empty() {
                outcome(true, format!("{n}/{n} cells"))
            } else {
                outcome(
                    false,
                    format!("{}/{n} cells; {}", n - failed.len(), failed.join("; ")),
                )
            }
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn obf() -> GroupDesign {
    GroupDesign::with_constant(GroupDesign::equally_spaced(5, 10.781), 6.6988).unwrap()
}

/// Largest `|q_gamma(delta) - gamma|` over the 101-point grid when
/// `t_o = c t`.
fn exactness(design: &Design, final_stage: FinalStage) -> f64 {
    let oc = OperatingCharacteristics::new(design, &GridOptions::default())
        .unwrap()
        .with_final_stage(final_stage);
    let gammas = [0.025, 0.5, 0.975];
    let mut worst: f64 = 0.0;
    for c in [0.1, 0.5] {
        let ov = OverrunData::model(OverrunModel::Proportional, c);
        let r = oc
            .coverage_sweep(&ov, &gammas, &[], &default_delta_grid())
            .unwrap();
        for (g, row) in gammas.iter().zip(&r.q_values) {
            for q in row {
                worst = worst.max((q - g).abs());
            }
        }
    }
    worst
}

fn criterion_6() -> Outcome {
    let tri = exactness(&Design::Linear(triangular_design()), FinalStage::Combine);
    let gs = exactness(&Design::Group(obf()), FinalStage::Combine);
    outcome(
        tri <= 0.003 && gs <= 0.003,
        format!("max |q - gamma|: triangular {tri:.2e}, O'Brien-Fleming {gs:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let tri = triangular_design();
    let grid = GridOptions::default();
    let e1 = expected_stop_time(&tri, TRIANGULAR_ALTERNATIVE, &grid).unwrap();
    let oc = OperatingCharacteristics::new(&Design::Linear(tri), &grid).unwrap();
    // (c, q.5 range, Q.9 range, Q.95 range)
    let cases = [
        (0.1, [0.484, 0.516], [0.897, 0.911], [0.947, 0.958]),
        (0.5, [0.468, 0.532], [0.896, 0.920], [0.946, 0.963]),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (c, r5, r90, r95) in cases {
        let ov = OverrunData::model(OverrunModel::Constant, c * e1);
        let r = oc
            .coverage_sweep(&ov, &[0.5], &[0.9, 0.95], &default_delta_grid())
            .unwrap();
        let span = |v: &[f64], inf: f64| {
            let lo = v.iter().copied().fold(inf, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let spans = [
            (span(&r.q_values[0], r.q_inf[0]), r5),
            (span(&r.interval_values[0], r.interval_inf[0]), r90),
            (span(&r.interval_values[1], r.interval_inf[1]), r95),
        ];
        for ((lo, hi), [a, b]) in spans {
            pass &= lo >= a && hi <= b;
            detail.push(format!("[{lo:.4}, {hi:.4}] in [{a}, {b}]"));
        }
    }
    outcome(pass, detail.join(", "))
}

/// `P(W(s) + delta s >= a + b s for some s <= t)`.
fn line_crossing(a: f64, b: f64, delta: f64, t: f64) -> f64 {
    let mu = delta - b;
    let st = t.sqrt();
    phi_bar((a - mu * t) / st) + (2.0 * mu * a).exp() * phi_bar((a + mu * t) / st)
}

fn oracle_line() -> (bool, String) {
    let (a, b, t_max) = (2.0, 0.3, 4.0);
    let d = LinearDesign::with_horizon(Line::new(a, b), Line::new(-8.0, 0.0), t_max).unwrap();
    let mut worst: f64 = 0.0;
    for delta in [0.0, 0.5, 1.0] {
        let table = CrossingTable::build(&d, delta, &GridOptions::default()).unwrap();
        worst = worst.max((table.upper_cdf(t_max) - line_crossing(a, b, delta, t_max)).abs());
    }
    (
        worst <= 0.002,
        format!("line crossing max error {worst:.1e}"),
    )
}

/// Stage-wise stopping frequencies from `n` brute-force paths.
fn group_monte_carlo(g: &GroupDesign, delta: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let k_max = g.stages();
    let mut up = vec![0usize; k_max];
    let mut lo = vec![0usize; k_max];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let mut x = 0.0;
        let mut prev = 0.0;
        for k in 1..=k_max {
            let t = g.time(k);
            let z: f64 = rng.sample(StandardNormal);
            x += delta * (t - prev) + (t - prev).sqrt() * z;
            prev = t;
            let (l, u) = g.limits(k);
            if x >= u {
                up[k - 1] += 1;
                break;
            }
            if x <= l {
                lo[k - 1] += 1;
                break;
            }
        }
    }
    let f = |v: Vec<usize>| v.into_iter().map(|c| c as f64 / n as f64).collect();
    (f(up), f(lo))
}

fn oracle_group() -> (bool, String) {
    let n = 10_000_000;
    let designs = [
        GroupDesign::with_constant(vec![1.0, 2.0], 2.5).unwrap(),
        GroupDesign::with_constant(vec![1.0, 2.0, 3.0], 3.0).unwrap(),
    ];
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for (i, g) in designs.iter().enumerate() {
        let delta = 0.3;
        let dens = gs_stage_densities(g, delta);
        let (up, lo) = group_monte_carlo(g, delta, n, 100 + i as u64);
        for k in 1..=g.stages() {
            for (engine, mc) in [
                (dens.upper_stop(k), up[k - 1]),
                (dens.lower_stop(k), lo[k - 1]),
            ] {
                let se = (mc * (1.0 - mc) / n as f64).sqrt().max(1e-9);
                let z = (engine - mc).abs() / se;
                worst = worst.max(z);
                pass &= z <= 3.0;
            }
        }
    }
    (pass, format!("group stage masses worst {worst:.2} SE"))
}

fn oracle_reversal() -> (bool, String) {
    let tri = triangular_design();
    let (delta, c, alpha, n) = (0.5, 0.2, 0.025, 1_000_000);
    let sims = simulate_paths(&tri, delta, n, 2024, &PathOptions::default()).unwrap();
    let t_o: Vec<f64> = sims.iter().map(|o| c * o.t).collect();
    let y = sample_increments(&t_o, delta, 2025);
    let null = CrossingTable::build(&tri, 0.0, &GridOptions::default()).unwrap();
    let (mut ra, mut ar) = (0usize, 0usize);
    for ((o, &y), &t_o) in sims.iter().zip(&y).zip(&t_o) {
        let p1 = null.stagewise_p(o, 0.0).unwrap();
        let p = combine_overrun_linear(p1, o.t, &OverrunData::observed(t_o, y), 0.0).unwrap();
        match o.hit {
            Hit::Upper if p > alpha => ra += 1,
            Hit::Lower if p < alpha => ar += 1,
            _ => {}
        }
    }
    let oc = OperatingCharacteristics::new(&Design::Linear(tri), &GridOptions::default()).unwrap();
    let r = oc.reversal(delta, c, 1.0, alpha).unwrap();
    let z = |count: usize, want: f64| {
        let p = count as f64 / n as f64;
        (p - want).abs() / (p * (1.0 - p) / n as f64).sqrt()
    };
    let (zr, za) = (z(ra, r.reject_to_accept), z(ar, r.accept_to_reject));
    (
        zr <= 3.0 && za <= 3.0,
        format!("reversal integrals {zr:.2} and {za:.2} SE from simulation"),
    )
}

fn oracle_uniformity() -> (bool, String) {
    let tri = triangular_design();
    let n = 100_000;
    let sims = simulate_paths(&tri, 0.0, n, 77, &PathOptions::default()).unwrap();
    let t_o: Vec<f64> = sims.iter().map(|o| 0.3 * o.t).collect();
    let y = sample_increments(&t_o, 0.0, 78);
    let null = CrossingTable::build(&tri, 0.0, &GridOptions::default()).unwrap();
    let mut ps: Vec<f64> = sims
        .iter()
        .zip(&y)
        .zip(&t_o)
        .map(|((o, &y), &t_o)| {
            let p1 = null.stagewise_p(o, 0.0).unwrap();
            combine_overrun_linear(p1, o.t, &OverrunData::observed(t_o, y), 0.0).unwrap()
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / nf).max((i + 1) as f64 / nf - p))
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at level 0.01.
    let crit = 1.6276 / nf.sqrt();
    (d <= crit, format!("KS D = {d:.5} (critical {crit:.5})"))
}

fn criterion_8() -> Outcome {
    let parts = [
        oracle_line(),
        oracle_group(),
        oracle_reversal(),
        oracle_uniformity(),
    ];
    let pass = parts.iter().all(|p| p.0);
    let detail: Vec<String> = parts.into_iter().map(|p| p.1).collect();
    outcome(pass, detail.join("; "))
}

fn criterion_9() -> Outcome {
    let tri = triangular_design();
    let table = CrossingTable::build(&tri, 0.0, &GridOptions::default()).unwrap();
    let sims = simulate_paths(&tri, 0.5, 200, 9, &PathOptions::default()).unwrap();
    let t_o: Vec<f64> = sims.iter().map(|o| 0.3 * o.t).collect();
    let y = sample_increments(&t_o, 0.5, 10);
    let gammas = [0.025, 0.05, 0.5, 0.95, 0.975];
    let deltas: Vec<f64> = (0..=30).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut tested = 0;
    let mut exceptions = 0;
    for ((o, &y), &t_o) in sims.iter().zip(&y).zip(&t_o) {
        let ov = OverrunData::observed(t_o, y);
        let ev = Evaluator::from_table(table.clone(), o, Some(&ov)).unwrap();
        for &g in &gammas {
            let bound = ev.bound(g).unwrap();
            for &d in &deltas {
                tested += 1;
                if (d < bound) != (ev.p(d).unwrap() < g) {
                    exceptions += 1;
                }
            }
        }
    }
    outcome(
        exceptions == 0,
        format!("{exceptions} exceptions in {tested} (gamma, delta) pairs over 200 trials"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 linear-boundary trial analysis", || {
            reproduce(CaseId::Madit)
        }),
        ("2 second linear-boundary trial", || {
            reproduce(CaseId::Madit2)
        }),
        ("3 group sequential variant", || reproduce(CaseId::MaditGs)),
        ("4 triangular operating characteristics", || {
            reproduce(CaseId::TriangularOc)
        }),
        ("5 O'Brien-Fleming horizon and coverage", || {
            reproduce(CaseId::ObfOc)
        }),
        ("6 exact coverage under proportional overrun", criterion_6),
        ("7 coverage ranges under constant overrun", criterion_7),
        ("8 closed-form and Monte Carlo oracles", criterion_8),
        ("9 inversion duality", criterion_9),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let r = check();
        if !r.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}) [{:.1}s]",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
