//! Line positions of the harmonic well with the first anharmonic correction.
//!
//! Near a well bottom `E_ν = -V + ω(ν + ½) - (ω_k/16)(2ν² + 2ν + 1)` with
//! `ω = √(2Vω_k)`. Lines are returned as detunings in rad/s measured from the
//! lattice-free resonance.

use serde::Serialize;

use crate::model::{well_frequency, DerivedScales, LatticeModel};

/// Bound levels below which the harmonic picture is not trusted.
pub const MIN_BOUND_LEVELS: usize = 4;

/// Predicted line of a transition `ν → ν'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedLine {
    pub nu: u32,
    pub nu_prime: u32,
    /// Detuning (rad/s).
    pub delta: f64,
}

impl PredictedLine {
    pub fn nu_min(&self) -> u32 {
        self.nu.min(self.nu_prime)
    }

    pub fn nu_av(&self) -> f64 {
        0.5 * (self.nu + self.nu_prime) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinePredictions {
    /// Harmonic angular frequencies of both wells (rad/s).
    pub omega1: f64,
    pub omega2: f64,
    /// Well-bottom offset `V₁ - V₂` of every `ν → ν'` line (rad/s).
    pub offset: f64,
    /// Harmonic estimate of the number of bound levels in the shallower well.
    pub bound_levels: usize,
    /// `Δν = 0` lines at `offset + (ν + ½)(ω₂ - ω₁)`; all at zero in a magic lattice.
    pub central: Vec<PredictedLine>,
    /// `Δν = +2` and `Δν = -2` lines.
    pub blue2: Vec<PredictedLine>,
    pub red2: Vec<PredictedLine>,
    /// `Δν = +1` and `Δν = -1` lines.
    pub blue1: Vec<PredictedLine>,
    pub red1: Vec<PredictedLine>,
    pub warning: Option<String>,
}

/// `E_ν + V` of a `V cos(2kz)` well (rad/s).
pub fn level_energy(v: f64, omega_k: f64, nu: u32) -> f64 {
    let n = nu as f64;
    well_frequency(v, omega_k) * (n + 0.5) - omega_k / 16.0 * (2.0 * n * n + 2.0 * n + 1.0)
}

/// Harmonic estimate of the levels with `E_ν < +V`.
pub fn bound_levels(v: f64, omega_k: f64) -> usize {
    let w = well_frequency(v, omega_k);
    if w == 0.0 {
        return 0;
    }
    let mut n = 0u32;
    while level_energy(v, omega_k, n) < 2.0 * v && n < 10_000 {
        // The quadratic correction turns over far above the bound region.
        if n > 0 && level_energy(v, omega_k, n) <= level_energy(v, omega_k, n - 1) {
            break;
        }
        n += 1;
    }
    n as usize
}

/// Predictions for `ν_min = 0..=nu_min_max`.
pub fn harmonic_line_positions(model: &LatticeModel, scales: &DerivedScales, nu_min_max: u32) -> LinePredictions {
    let wk = scales.omega_k;
    let (v1, v2) = (model.v1, model.v2);
    let offset = v1 - v2;
    let line = |nu: u32, nu_p: u32| PredictedLine {
        nu,
        nu_prime: nu_p,
        delta: offset + level_energy(v2, wk, nu_p) - level_energy(v1, wk, nu),
    };
    let mut out = LinePredictions {
        omega1: well_frequency(v1, wk),
        omega2: well_frequency(v2, wk),
        offset,
        bound_levels: bound_levels(v1.min(v2), wk),
        central: Vec::new(),
        blue2: Vec::new(),
        red2: Vec::new(),
        blue1: Vec::new(),
        red1: Vec::new(),
        warning: None,
    };
    for nu in 0..=nu_min_max {
        out.central.push(line(nu, nu));
        out.blue2.push(line(nu, nu + 2));
        out.red2.push(line(nu + 2, nu));
        out.blue1.push(line(nu, nu + 1));
        out.red1.push(line(nu + 1, nu));
    }
    if out.bound_levels < MIN_BOUND_LEVELS {
        out.warning = Some(format!(
            "only {} bound levels; harmonic line positions are unreliable",
            out.bound_levels
        ));
    }
    out
}
