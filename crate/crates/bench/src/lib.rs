//! Shared fixtures for the benchmarks.

use overrun_core::{GroupDesign, Hit, Line, LinearDesign, TrialOutcome};

/// Triangular test with intercepts `±5.99` and slopes `0.25`, `0.75`.
pub fn triangular() -> LinearDesign {
    LinearDesign::closed(Line::new(5.99, 0.25), Line::new(-5.99, 0.75)).expect("valid design")
}

/// Five equally spaced analyses with a constant limit.
pub fn five_stage() -> GroupDesign {
    GroupDesign::with_constant(GroupDesign::equally_spaced(5, 10.781), 6.6988)
        .expect("valid design")
}

pub fn upper_stop() -> TrialOutcome {
    TrialOutcome::linear(8.0, 7.99, Hit::Upper)
}
