//! Inference for sequential trials whose data keep arriving after the
//! stopping boundary is reached. The monitored statistic is a Brownian
//! motion with drift; the overrun data are combined with the stagewise
//! p-value at stopping by a weighted sum of normal deviates.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combine;
pub mod error;
pub mod eval;
pub mod group;
pub mod inference;
pub mod linear;
pub mod numerics;
pub mod quad;
pub mod roots;
pub mod simulate;

pub use combine::{OverrunData, OverrunModel};
pub use error::{Error, Result};
pub use eval::{CoverageReport, FinalStage, OperatingCharacteristics, Reversal, ReversalReport};
pub use group::GroupDesign;
pub use inference::{analyze, AnalysisOptions, Design, InferenceReport, Method};
pub use linear::{GridOptions, Hit, Line, LinearDesign, Monitoring, TrialOutcome};
pub use simulate::PathOptions;
