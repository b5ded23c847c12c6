//! First-order (golden-rule) spectrum between Bloch bands.
//!
//! Every initial Bloch state `(i, p₀)` of level 1 carries the thermal weight
//! `Σ_{n₀} W(n₀, p₀) |a_{i,n₀,p₀}|²` and couples at the same `p₀` to every
//! band `i'` of level 2. The excitation probability of one pair is
//! `2π |V|² ρ(ΔE) ∫g² dt` with a Gaussian density of states of width `σ_E`
//! and `ΔE = E_b - E_a - δ`. With `σ_E = 1/τ₀` this is exactly first-order
//! perturbation theory for the Gaussian pulse.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bands::{compute_bands, coupling_overlaps, p0_grid, BlochBandSet};
use crate::ensemble::{default_beta_max, Convergence, FgrConvergence, ModelTag, Spectrum};
use crate::error::{invalid, Result};
use crate::model::{DerivedScales, DrivePulse, LatticeModel};
use crate::tdse::window::bound_reach;
use crate::tdse::Ladder;

/// Pairs further than this many `σ_E` from every grid detuning are skipped.
const WINDOW_SIGMAS: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FgrConfig {
    /// Density-of-states width (rad/s); `None` uses `1/τ₀` of the pulse.
    pub sigma_e: Option<f64>,
    /// Global rescaling of the spectrum, in `(0, 1]`.
    pub saturation_scale: f64,
    pub p0_points: usize,
    /// Use `(p₀ + n₀ħk)²` instead of `(p₀ + 2n₀ħk)²` in the thermal weight.
    pub literal_weight_exponent: bool,
    /// Initial Bloch states lighter than this are dropped.
    pub weight_tolerance: f64,
}

impl Default for FgrConfig {
    fn default() -> Self {
        FgrConfig {
            sigma_e: None,
            saturation_scale: 1.0,
            p0_points: 200,
            literal_weight_exponent: false,
            weight_tolerance: 1e-6,
        }
    }
}

impl FgrConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sigma_e {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("sigma_e must be positive"));
            }
        }
        if !(self.saturation_scale > 0.0 && self.saturation_scale <= 1.0) {
            return Err(invalid("saturation_scale must lie in (0, 1]"));
        }
        if self.p0_points == 0 {
            return Err(invalid("p0_points must be positive"));
        }
        if !(self.weight_tolerance >= 0.0 && self.weight_tolerance < 1.0) {
            return Err(invalid("weight_tolerance must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn sigma_for(&self, pulse: &DrivePulse) -> f64 {
        self.sigma_e.unwrap_or_else(|| pulse.fourier_sigma())
    }
}

/// Normalized Gaussian density of states (per rad/s).
pub fn density_of_states(de: f64, sigma_e: f64) -> f64 {
    (-0.5 * (de / sigma_e).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma_e)
}

/// Golden-rule probability for one pair. `coupling_sq` is `|V|²` at the
/// envelope peak.
pub fn fgr_probability(coupling_sq: f64, de: f64, pulse: &DrivePulse, cfg: &FgrConfig) -> f64 {
    let sigma = cfg.sigma_for(pulse);
    cfg.saturation_scale * 2.0 * PI * coupling_sq * density_of_states(de, sigma) * pulse.g2_integral()
}

/// Unnormalized thermal weight of the ladder site `n₀` at quasimomentum `q`.
fn site_weight(q: f64, n0: i64, scales: &DerivedScales, literal: bool) -> f64 {
    let beta = if literal {
        q + n0 as f64
    } else {
        q + 2.0 * n0 as f64
    };
    (-0.25 * beta * beta * scales.omega_k / scales.omega_t).exp()
}

/// Ladder large enough for the thermal momenta and the band energies reached
/// by the detuning grid.
pub fn fgr_ladder(model: &LatticeModel, scales: &DerivedScales, sigma_e: f64, literal: bool) -> Ladder {
    let reach = bound_reach(model.v1.max(model.v2), scales.omega_k);
    let beta_max = if model.temperature > 0.0 {
        default_beta_max(model.temperature, scales)
    } else {
        1.0
    };
    let sites = if literal { beta_max } else { 0.5 * beta_max };
    let init = sites.ceil() as i64 + 1;
    let dmax = model.delta_grid.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let e_top = scales.omega_k * (0.5 * beta_max + 1.0).powi(2) + dmax + WINDOW_SIGMAS * sigma_e;
    let energy = (e_top / scales.omega_k).sqrt().ceil() as i64;
    let half = (init + reach + 12).max(energy + 12);
    Ladder::centered(0, half)
}

/// Contributions of one quasimomentum to the spectrum.
struct Slice {
    values: Vec<f64>,
    kept: usize,
    dropped: f64,
    top_target: usize,
}

#[allow(clippy::too_many_arguments)]
fn slice(
    p: usize,
    band_a: &BlochBandSet,
    band_b: &BlochBandSet,
    site_w: &[f64],
    delta: &[f64],
    omega0: f64,
    parity: crate::model::Parity,
    prefactor: f64,
    sigma: f64,
    tol: f64,
) -> Result<Slice> {
    let ua = &band_a.vectors[p];
    let d = ua.nrows();
    let m = coupling_overlaps(band_a, band_b, p, parity)?;
    let ea = &band_a.energies[p];
    let eb = &band_b.energies[p];
    let lo = delta[0] - WINDOW_SIGMAS * sigma;
    let hi = delta[delta.len() - 1] + WINDOW_SIGMAS * sigma;
    let mut out = Slice {
        values: vec![0.0; delta.len()],
        kept: 0,
        dropped: 0.0,
        top_target: 0,
    };
    for i in 0..d {
        let w: f64 = (0..d).map(|r| site_w[r] * ua[(r, i)] * ua[(r, i)]).sum();
        if w < tol {
            out.dropped += w;
            continue;
        }
        out.kept += 1;
        for ip in 0..d {
            let e = eb[ip] - ea[i];
            if e < lo || e > hi {
                continue;
            }
            let s = m[(ip, i)];
            let amp = w * prefactor * omega0 * omega0 / 16.0 * s * s;
            if amp == 0.0 {
                continue;
            }
            out.top_target = out.top_target.max(ip + 1);
            let j0 = delta.partition_point(|&x| x < e - WINDOW_SIGMAS * sigma);
            let j1 = delta.partition_point(|&x| x <= e + WINDOW_SIGMAS * sigma);
            for j in j0..j1 {
                let x = (e - delta[j]) / sigma;
                out.values[j] += amp * (-0.5 * x * x).exp();
            }
        }
    }
    Ok(out)
}

/// Bands of both levels on the FGR grid and ladder.
pub fn fgr_bands(
    model: &LatticeModel,
    scales: &DerivedScales,
    cfg: &FgrConfig,
    sigma_e: f64,
) -> Result<(BlochBandSet, BlochBandSet)> {
    let ladder = fgr_ladder(model, scales, sigma_e, cfg.literal_weight_exponent);
    let grid = if model.temperature == 0.0 {
        vec![0.0]
    } else {
        p0_grid(cfg.p0_points)
    };
    let a = compute_bands(model.v1, scales, &grid, ladder)?;
    let b = if model.is_magic() {
        a.clone()
    } else {
        compute_bands(model.v2, scales, &grid, ladder)?
    };
    Ok((a, b))
}

/// Thermally projected golden-rule spectrum `Q_b(δ)` on the model grid.
pub fn fgr_spectrum(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    cfg: &FgrConfig,
) -> Result<Spectrum> {
    model.validate()?;
    cfg.validate()?;
    let sigma = cfg.sigma_for(pulse);
    let (band_a, band_b) = fgr_bands(model, scales, cfg, sigma)?;
    fgr_spectrum_with_bands(model, scales, pulse, cfg, &band_a, &band_b)
}

/// Same as [`fgr_spectrum`] with precomputed bands.
pub fn fgr_spectrum_with_bands(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    cfg: &FgrConfig,
    band_a: &BlochBandSet,
    band_b: &BlochBandSet,
) -> Result<Spectrum> {
    if !band_a.compatible(band_b) {
        return Err(invalid("band sets use different grids or ladders"));
    }
    let sigma = cfg.sigma_for(pulse);
    let ladder = band_a.ladder;
    let grid = &band_a.p0_grid;
    let literal = cfg.literal_weight_exponent;

    // Site weights W(n₀, p₀), normalized over the sampled set.
    let mut site_w: Vec<Vec<f64>> = grid
        .iter()
        .map(|&q| {
            ladder
                .iter()
                .map(|n| {
                    if model.temperature == 0.0 {
                        if n == 0 { 1.0 } else { 0.0 }
                    } else {
                        site_weight(q, n, scales, literal)
                    }
                })
                .collect()
        })
        .collect();
    let total: f64 = site_w.iter().flatten().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(invalid("thermal weights vanish; scales do not match the model temperature"));
    }
    site_w.iter_mut().flatten().for_each(|w| *w /= total);

    let prefactor = cfg.saturation_scale * 2.0 * PI * pulse.g2_integral() / ((2.0 * PI).sqrt() * sigma);
    let delta = &model.delta_grid;
    let slices = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            slice(
                p,
                band_a,
                band_b,
                &site_w[p],
                delta,
                pulse.omega0,
                model.parity,
                prefactor,
                sigma,
                cfg.weight_tolerance,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut value = vec![0.0; delta.len()];
    let mut conv = FgrConvergence {
        p0_points: grid.len(),
        rungs: ladder.len(),
        max_eigen_residual: band_a.max_residual.max(band_b.max_residual),
        sigma_e: sigma,
        ..Default::default()
    };
    for s in &slices {
        for (v, x) in value.iter_mut().zip(&s.values) {
            *v += x;
        }
        conv.initial_bands = conv.initial_bands.max(s.kept);
        conv.target_bands = conv.target_bands.max(s.top_target);
        conv.dropped_weight += s.dropped;
    }
    let mut spec = Spectrum::new(ModelTag::Fgr, delta.clone(), value, None)?;
    spec.meta.omega_k = scales.omega_k;
    spec.meta.convergence = Some(Convergence::Fgr(conv));
    Ok(spec)
}
