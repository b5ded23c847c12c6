//! Analytic oracles and spectrum feature extraction.

pub mod analysis;
pub mod bessel;
pub mod jacobi;
pub mod lines;

pub use analysis::{analyze_spectrum, assign_sub_lines, height_scaling, linear_fit, AnalysisOptions, Dip, Peak, SidebandAnalysis, SubLine};
pub use jacobi::jacobi_anger_amplitudes;
pub use lines::{harmonic_line_positions, LinePredictions, PredictedLine};
