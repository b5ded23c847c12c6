//! Physical model: lattice, internal levels, drive pulse and derived scales.
//!
//! All frequencies are stored as angular frequencies in rad/s. Lattice depths
//! `v1`, `v2` are `U/ħ` so that the ponderomotive potential of level `i` is
//! `ħ v_i cos(2kz)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

pub mod constants {
    /// Reduced Planck constant (J s).
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Boltzmann constant (J/K).
    pub const K_B: f64 = 1.380_649e-23;
    /// Atomic mass unit (kg).
    pub const AMU: f64 = 1.660_539_066_60e-27;
    /// Mass of 85Rb in atomic mass units.
    pub const RB85_MASS_AMU: f64 = 84.911_789_738;
    /// Nd:YAG lattice wavelength (m).
    pub const LAMBDA_1064: f64 = 1064.0e-9;
}

use constants::{HBAR, K_B};

/// Spatial parity of the coupling drive relative to the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Drive profile `cos(2kz)`, in phase with the lattice.
    Even,
    /// Drive profile `sin(2kz)`, shifted by a quarter lattice period.
    Odd,
}

impl Parity {
    /// Coupling profile evaluated at phase `2kz`.
    #[inline]
    pub fn profile(self, phase: f64) -> f64 {
        match self {
            Parity::Even => phase.cos(),
            Parity::Odd => phase.sin(),
        }
    }
}

/// Immutable description of the lattice, atom and drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    /// Lattice laser wavelength (m).
    pub wavelength: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Lattice depth of the lower Rydberg level (rad/s).
    pub v1: f64,
    /// Lattice depth of the upper Rydberg level (rad/s).
    pub v2: f64,
    /// Peak Rabi frequency used to build the default pulse (rad/s).
    pub omega0: f64,
    pub parity: Parity,
    /// Detuning grid (rad/s), strictly increasing.
    pub delta_grid: Vec<f64>,
    /// Temperature (K).
    pub temperature: f64,
}

impl LatticeModel {
    pub fn new(
        wavelength: f64,
        mass: f64,
        v1: f64,
        v2: f64,
        omega0: f64,
        parity: Parity,
        delta_grid: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        let m = LatticeModel {
            wavelength,
            mass,
            v1,
            v2,
            omega0,
            parity,
            delta_grid,
            temperature,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(invalid("wavelength must be positive"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass must be positive"));
        }
        if !(self.v1.is_finite() && self.v1 >= 0.0 && self.v2.is_finite() && self.v2 >= 0.0) {
            return Err(invalid("lattice depths must be non-negative"));
        }
        if !(self.omega0.is_finite() && self.omega0 >= 0.0) {
            return Err(invalid("Rabi frequency must be non-negative"));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("temperature must be non-negative"));
        }
        if self.delta_grid.is_empty() {
            return Err(invalid("detuning grid is empty"));
        }
        if self.delta_grid.iter().any(|d| !d.is_finite()) {
            return Err(invalid("detuning grid contains non-finite values"));
        }
        if self.delta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("detuning grid must be strictly increasing"));
        }
        Ok(())
    }

    /// Both levels see the same lattice depth.
    pub fn is_magic(&self) -> bool {
        self.v1 == self.v2
    }

    pub fn derived(&self) -> DerivedScales {
        DerivedScales::new(self)
    }
}

/// Scales derived from a [`LatticeModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// Lattice laser wavenumber (1/m).
    pub k: f64,
    /// Two-photon recoil frequency `2ħk²/m` (rad/s).
    pub omega_k: f64,
    /// Thermal frequency `k_B T/ħ` (rad/s).
    pub omega_t: f64,
    /// Harmonic well frequency of level 1 (Hz).
    pub f1: f64,
    /// Harmonic well frequency of level 2 (Hz).
    pub f2: f64,
}

impl DerivedScales {
    pub fn new(model: &LatticeModel) -> Self {
        let k = 2.0 * PI / model.wavelength;
        let omega_k = 2.0 * HBAR * k * k / model.mass;
        let omega_t = K_B * model.temperature / HBAR;
        DerivedScales {
            k,
            omega_k,
            omega_t,
            f1: well_frequency(model.v1, omega_k) / (2.0 * PI),
            f2: well_frequency(model.v2, omega_k) / (2.0 * PI),
        }
    }

    /// Thermal width of the scaled momentum `β = p/(ħk)`.
    pub fn sigma_beta(&self) -> f64 {
        (2.0 * self.omega_t / self.omega_k).sqrt()
    }

    /// Angular harmonic frequencies of both wells (rad/s).
    pub fn omega_osc(&self) -> (f64, f64) {
        (2.0 * PI * self.f1, 2.0 * PI * self.f2)
    }
}

/// Angular frequency `2k√(ħV/m) = √(2Vω_k)` at the bottom of a `V cos(2kz)` well.
pub fn well_frequency(v: f64, omega_k: f64) -> f64 {
    (2.0 * v * omega_k).sqrt()
}

/// Gaussian drive pulse `Ω(t) = Ω₀ exp(-(t - t_p/2)²/τ₀²)` on `[0, t_p]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivePulse {
    /// Gaussian width of the envelope (s).
    pub tau0: f64,
    /// Total integration window (s).
    pub t_p: f64,
    /// Peak Rabi frequency (rad/s).
    pub omega0: f64,
}

/// Ratio of the envelope FWHM to `τ₀`.
pub fn fwhm_factor() -> f64 {
    2.0 * (2.0f64.ln()).sqrt()
}

impl DrivePulse {
    pub fn new(tau0: f64, t_p: f64, omega0: f64) -> Result<Self> {
        if !(tau0.is_finite() && tau0 > 0.0) {
            return Err(invalid("tau0 must be positive"));
        }
        if !(t_p.is_finite() && t_p > 0.0) {
            return Err(invalid("pulse window must be positive"));
        }
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(invalid("Rabi frequency must be non-negative"));
        }
        Ok(DrivePulse { tau0, t_p, omega0 })
    }

    /// π-normalized pulse with `t_p = 10 τ₀`.
    pub fn pi_pulse(tau0: f64) -> Result<Self> {
        let omega0 = pi_pulse_amplitude(tau0)?;
        DrivePulse::new(tau0, 10.0 * tau0, omega0)
    }

    /// Same shape with the peak amplitude scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DrivePulse::new(self.tau0, self.t_p, self.omega0 * factor)
    }

    /// Dimensionless envelope `g(t)` with peak 1 at `t_p/2`.
    #[inline]
    pub fn shape(&self, t: f64) -> f64 {
        let x = (t - 0.5 * self.t_p) / self.tau0;
        (-x * x).exp()
    }

    /// Rabi frequency `Ω(t)` (rad/s).
    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        self.omega0 * self.shape(t)
    }

    pub fn tau_fwhm(&self) -> f64 {
        fwhm_factor() * self.tau0
    }

    /// Area `Ω₀τ₀√π` of the untruncated envelope.
    pub fn area(&self) -> f64 {
        self.omega0 * self.tau0 * PI.sqrt()
    }

    /// `∫ g(t)² dt = τ₀√(π/2)` over the full line.
    pub fn g2_integral(&self) -> f64 {
        self.tau0 * (PI / 2.0).sqrt()
    }

    /// Default energy resolution `1/τ₀` (rad/s).
    pub fn fourier_sigma(&self) -> f64 {
        1.0 / self.tau0
    }
}

/// Peak Rabi frequency `√π/τ₀` of a π pulse.
pub fn pi_pulse_amplitude(tau0: f64) -> Result<f64> {
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(invalid("tau0 must be positive"));
    }
    Ok(PI.sqrt() / tau0)
}

pub fn tau0_from_fwhm(tau_fwhm: f64) -> Result<f64> {
    if !(tau_fwhm.is_finite() && tau_fwhm > 0.0) {
        return Err(invalid("pulse FWHM must be positive"));
    }
    Ok(tau_fwhm / fwhm_factor())
}
