use overrun_core::group::{gs_stagewise_p, obf_constant, required_horizon};
use overrun_core::inference::Evaluator;
use overrun_core::linear::{expected_stop_time, CrossingTable};
use overrun_core::numerics::phi_bar;
use overrun_core::simulate::{simulate_group, simulate_paths, SampleSummary};
use overrun_core::{GridOptions, GroupDesign, Hit, Line, LinearDesign, PathOptions, TrialOutcome};

fn triangular() -> LinearDesign {
    LinearDesign::closed(Line::new(5.99, 0.25), Line::new(-5.99, 0.75)).unwrap()
}

fn madit() -> LinearDesign {
    LinearDesign::closed(Line::new(7.935, 0.189), Line::new(-7.935, 0.566)).unwrap()
}

fn madit_gs() -> GroupDesign {
    GroupDesign::obf(GroupDesign::equally_spaced(5, 12.037 * 5.0 / 3.0), 0.05).unwrap()
}

#[test]
fn expected_stopping_times() {
    let grid = GridOptions::default();
    for (delta, want) in [(0.0, 7.776), (0.8233, 9.382), (0.5, 11.217)] {
        let e = expected_stop_time(&triangular(), delta, &grid).unwrap();
        assert!((e - want).abs() < 0.02, "delta={delta}: {e}");
    }
}

#[test]
fn crossing_probability_converges_with_the_grid() {
    let t_max = triangular().t_max();
    let p: Vec<f64> = [500, 1000, 2000, 4000]
        .iter()
        .map(|&n| {
            CrossingTable::build(&triangular(), 0.0, &GridOptions::with_steps(n))
                .unwrap()
                .upper_cdf(t_max)
        })
        .collect();
    let diffs: Vec<f64> = p.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs[2] < 1e-4, "{p:?}");
    assert!(diffs[2] <= diffs[0] + 1e-9, "{p:?}");
}

#[test]
fn stagewise_p_of_the_linear_trial() {
    let table = CrossingTable::build(&madit(), 0.0, &GridOptions::default()).unwrap();
    let o = TrialOutcome::linear(12.037, 10.210, Hit::Upper);
    let p = table.stagewise_p(&o, 0.0).unwrap();
    assert!((p - 0.0042).abs() < 0.0002, "{p}");
    assert!(table.stagewise_p(&o, 0.5).unwrap() > p);
}

#[test]
fn p_is_monotone_in_the_null_drift() {
    let table = CrossingTable::build(&madit(), 0.0, &GridOptions::default()).unwrap();
    let o = TrialOutcome::linear(12.037, 10.210, Hit::Upper);
    let ev = Evaluator::from_table(table, &o, None).unwrap();
    let gs = madit_gs();
    let grid: Vec<f64> = (0..50).map(|i| -1.0 + 0.06 * i as f64).collect();
    let lin: Vec<f64> = grid.iter().map(|&d| ev.p(d).unwrap()).collect();
    let grp: Vec<f64> = grid
        .iter()
        .map(|&d| gs_stagewise_p(&gs, 3, 10.210, d).unwrap())
        .collect();
    for v in [lin, grp] {
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    }
}

#[test]
fn group_variant_without_overrun() {
    let p = gs_stagewise_p(&madit_gs(), 3, 10.210, 0.0).unwrap();
    assert!((2.0 * p - 0.0039).abs() < 0.0004, "{}", 2.0 * p);
}

#[test]
fn horizon_for_a_power_target() {
    // Power 0.8 at the drift of a 0.537 hazard ratio.
    let t5 = required_horizon(5, 0.05, 0.8, 0.6218).unwrap();
    let c = obf_constant(&GroupDesign::equally_spaced(5, t5), 0.05).unwrap();
    let g = GroupDesign::with_constant(GroupDesign::equally_spaced(5, t5), c).unwrap();
    let dens = overrun_core::group::gs_stage_densities(&g, 0.6218);
    assert!(
        (dens.rejection() - 0.8).abs() < 1e-4,
        "{}",
        dens.rejection()
    );
}

#[test]
fn simulated_error_probability() {
    let out = simulate_paths(&triangular(), 0.0, 1_000_000, 31, &PathOptions::default()).unwrap();
    let s = SampleSummary::from_outcomes(&out);
    assert!((s.p_upper - 0.025).abs() < 3.0 * s.se_upper, "{s:?}");
}

#[test]
fn simulated_group_masses() {
    let g = GroupDesign::with_constant(vec![1.0, 2.0, 3.0], 3.0).unwrap();
    let dens = overrun_core::group::gs_stage_densities(&g, 0.5);
    let out = simulate_group(&g, 0.5, 400_000, 12).unwrap();
    let n = out.len() as f64;
    for k in 1..=3 {
        let f = out
            .iter()
            .filter(|o| o.hit == Hit::Upper && o.stage == Some(k))
            .count() as f64
            / n;
        let se = (f * (1.0 - f) / n).sqrt();
        assert!((f - dens.upper_stop(k)).abs() < 4.0 * se, "stage {k}");
    }
}

#[test]
fn single_analysis_p_is_a_normal_tail() {
    let g = GroupDesign::new(vec![4.0], vec![], vec![], -3.0, 3.0).unwrap();
    let p = gs_stagewise_p(&g, 1, 3.5, 0.2).unwrap();
    assert!((p - phi_bar((3.5 - 0.8) / 2.0)).abs() < 1e-9);
}
