//! Thermal averaging and spectrum containers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::{DerivedScales, DrivePulse, LatticeModel};
use crate::tdse::{ConvergenceCheck, TdseOptions, TdseSolver};

/// Maxwell density of the scaled momentum `β = p/(ħk)`.
///
/// `f(β) = √(ω_k/(2ω_T))/√(2π) · exp(-β² ω_k/(4ω_T))`.
pub fn maxwell_beta_weight(beta: f64, scales: &DerivedScales) -> Result<f64> {
    if scales.omega_t <= 0.0 {
        return Err(invalid("Maxwell density needs T > 0"));
    }
    let r = scales.omega_k / scales.omega_t;
    Ok((r / 2.0).sqrt() / (2.0 * PI).sqrt() * (-0.25 * beta * beta * r).exp())
}

/// Splits `β` into the ladder rung `n₀ = NINT(β/2)` and quasimomentum
/// `q = β - 2n₀ ∈ [-1, 1]`, with ties rounded to even.
pub fn initial_ladder_index(beta: f64) -> (i64, f64) {
    let n0 = (0.5 * beta).round_ties_even();
    (n0 as i64, beta - 2.0 * n0)
}

/// Quadrature of the Maxwell distribution in `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalGrid {
    pub beta_points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Temperature (K).
    pub temperature: f64,
}

/// Momentum ranges `10·(T/1 μK)^0.4515`, which pass through ±10 at 1 μK and
/// ±80 at 100 μK.
pub fn reference_beta_max(temperature: f64) -> f64 {
    let expo = 8.0f64.ln() / 100.0f64.ln();
    10.0 * (temperature / 1e-6).powf(expo)
}

/// Default `β_max = max(reference range, 4σ_β)`.
pub fn default_beta_max(temperature: f64, scales: &DerivedScales) -> f64 {
    reference_beta_max(temperature).max(4.0 * scales.sigma_beta())
}

/// Default point count: 161 at 1 μK growing to 321 at 100 μK.
pub fn default_beta_points(temperature: f64) -> usize {
    let x = 161.0 + 80.0 * (temperature / 1e-6).log10();
    let n = x.clamp(161.0, 321.0).round() as usize;
    n | 1
}

impl ThermalGrid {
    /// Uniform grid on `[-beta_max, beta_max]` with trapezoid weights.
    pub fn uniform(scales: &DerivedScales, temperature: f64, beta_max: f64, points: usize) -> Result<Self> {
        if temperature == 0.0 {
            return Ok(ThermalGrid::zero_temperature());
        }
        if !(beta_max.is_finite() && beta_max > 0.0) {
            return Err(invalid("beta_max must be positive"));
        }
        if points < 3 {
            return Err(invalid("thermal grid needs at least 3 points"));
        }
        let h = 2.0 * beta_max / (points - 1) as f64;
        let beta_points: Vec<f64> = (0..points)
            .map(|i| {
                let j = i as i64 - (points as i64 - 1) / 2;
                if points % 2 == 1 {
                    j as f64 * h
                } else {
                    -beta_max + i as f64 * h
                }
            })
            .collect();
        let mut weights = Vec::with_capacity(points);
        for (i, &b) in beta_points.iter().enumerate() {
            let end = i == 0 || i + 1 == points;
            let w = maxwell_beta_weight(b, scales)? * h * if end { 0.5 } else { 1.0 };
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(ThermalGrid {
            beta_points,
            weights,
            temperature,
        })
    }

    /// Grid with the default range and density for the model temperature.
    pub fn default_for(model: &LatticeModel, scales: &DerivedScales) -> Result<Self> {
        let t = model.temperature;
        if t == 0.0 {
            return Ok(ThermalGrid::zero_temperature());
        }
        ThermalGrid::uniform(scales, t, default_beta_max(t, scales), default_beta_points(t))
    }

    pub fn zero_temperature() -> Self {
        ThermalGrid {
            beta_points: vec![0.0],
            weights: vec![1.0],
            temperature: 0.0,
        }
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_points.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    }

    /// Pairs `(i, j)` with `β_j = -β_i` exactly, if the grid is symmetric.
    fn mirror_map(&self) -> Option<Vec<usize>> {
        let n = self.beta_points.len();
        let map: Vec<usize> = (0..n).map(|i| n - 1 - i).collect();
        let symmetric = (0..n).all(|i| self.beta_points[map[i]] == -self.beta_points[i]);
        symmetric.then_some(map)
    }
}

/// Which model produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Tdse,
    Fgr,
    Semiclassical,
}

impl ModelTag {
    pub fn name(self) -> &'static str {
        match self {
            ModelTag::Tdse => "tdse",
            ModelTag::Fgr => "fgr",
            ModelTag::Semiclassical => "semiclassical",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tdse" => Ok(ModelTag::Tdse),
            "fgr" => Ok(ModelTag::Fgr),
            "semiclassical" | "sc" => Ok(ModelTag::Semiclassical),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

/// TDSE convergence summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TdseConvergence {
    pub beta_points: usize,
    pub propagated_betas: usize,
    pub delta_points: usize,
    pub min_rungs: usize,
    pub max_rungs: usize,
    pub steps_per_run: usize,
    pub total_matvecs: u64,
    pub ladder_expansions: usize,
    pub max_norm_drift: f64,
    pub max_edge_population: f64,
    pub audits: Vec<ConvergenceCheck>,
}

/// FGR convergence summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FgrConvergence {
    pub p0_points: usize,
    pub rungs: usize,
    pub initial_bands: usize,
    pub target_bands: usize,
    pub dropped_weight: f64,
    pub max_eigen_residual: f64,
    pub sigma_e: f64,
}

/// Semiclassical convergence summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScConvergence {
    pub n_traj: usize,
    pub seed: u64,
    pub steps_per_trajectory_min: usize,
    pub steps_per_trajectory_max: usize,
    pub max_norm_drift: f64,
    pub max_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convergence {
    Tdse(TdseConvergence),
    Fgr(FgrConvergence),
    Semiclassical(ScConvergence),
}

/// Provenance attached to every spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub omega_k: f64,
    pub convergence: Option<Convergence>,
}

/// Transition probability sampled on a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub model_tag: ModelTag,
    /// Detunings (rad/s), strictly increasing.
    pub delta: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(model_tag: ModelTag, delta: Vec<f64>, value: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        let s = Spectrum {
            model_tag,
            delta,
            value,
            stderr,
            meta: SpectrumMeta::default(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Grid monotonicity and value bounds. First-order FGR values are only
    /// required to be non-negative since they are not capped at one.
    pub fn validate(&self) -> Result<()> {
        if self.delta.len() != self.value.len() {
            return Err(invalid("spectrum length mismatch"));
        }
        if let Some(e) = &self.stderr {
            if e.len() != self.value.len() {
                return Err(invalid("stderr length mismatch"));
            }
        }
        if self.delta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spectrum detunings must be strictly increasing"));
        }
        let upper = match self.model_tag {
            ModelTag::Fgr => f64::INFINITY,
            _ => 1.0 + 1e-9,
        };
        if self
            .value
            .iter()
            .any(|v| !v.is_finite() || *v < -1e-12 || *v > upper)
        {
            return Err(invalid("spectrum values out of range"));
        }
        Ok(())
    }

    pub fn max_value(&self) -> f64 {
        self.value.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation at `delta`.
    pub fn value_at(&self, delta: f64) -> f64 {
        let d = &self.delta;
        if delta <= d[0] {
            return self.value[0];
        }
        if delta >= d[d.len() - 1] {
            return self.value[d.len() - 1];
        }
        let j = d.partition_point(|&x| x <= delta);
        let (x0, x1) = (d[j - 1], d[j]);
        let f = (delta - x0) / (x1 - x0);
        self.value[j - 1] * (1.0 - f) + self.value[j] * f
    }
}

/// Controls of the thermally averaged TDSE spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdseRunOptions {
    pub solver: TdseOptions,
    /// Number of `(β, δ)` points re-run with a halved step and a wider ladder.
    pub audit_points: usize,
    /// Largest change tolerated by an audit.
    pub audit_tolerance: f64,
}

impl Default for TdseRunOptions {
    fn default() -> Self {
        TdseRunOptions {
            solver: TdseOptions::default(),
            audit_points: 2,
            audit_tolerance: 1e-4,
        }
    }
}

/// Thermally averaged TDSE spectrum `P_b(δ) = Σ_j w_j P(β_j, δ)`.
pub fn assemble_tdse_spectrum(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    grid: &ThermalGrid,
    opts: &TdseRunOptions,
) -> Result<Spectrum> {
    let solver = TdseSolver::new(model, scales, pulse, opts.solver);
    let nb = grid.beta_points.len();
    let deltas = &model.delta_grid;
    let nd = deltas.len();

    // P(-β, δ) = P(β, δ) by reflection n → -n, so only one of each
    // mirrored pair is propagated.
    let mirror = grid.mirror_map();
    let source: Vec<usize> = (0..nb)
        .map(|i| match &mirror {
            Some(m) if grid.beta_points[i] < 0.0 => m[i],
            _ => i,
        })
        .collect();
    let unique: Vec<usize> = (0..nb).filter(|&i| source[i] == i).collect();

    let plans = unique
        .par_iter()
        .map(|&i| solver.plan(grid.beta_points[i]))
        .collect::<Result<Vec<_>>>()?;

    let tasks: Vec<(usize, usize)> = (0..unique.len())
        .flat_map(|u| (0..nd).map(move |d| (u, d)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(u, d)| solver.run(&plans[u], deltas[d]))
        .collect::<Result<Vec<_>>>()?;

    let mut slot = vec![usize::MAX; nb];
    for (u, &i) in unique.iter().enumerate() {
        slot[i] = u;
    }
    let mut value = vec![0.0; nd];
    for (d, v) in value.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..nb {
            let u = slot[source[j]];
            acc += grid.weights[j] * outcomes[u * nd + d].population;
        }
        *v = acc.clamp(0.0, 1.0);
    }

    let mut conv = TdseConvergence {
        beta_points: nb,
        propagated_betas: unique.len(),
        delta_points: nd,
        min_rungs: usize::MAX,
        steps_per_run: solver.n_steps(),
        ..Default::default()
    };
    for o in &outcomes {
        conv.min_rungs = conv.min_rungs.min(o.ladder.len());
        conv.max_rungs = conv.max_rungs.max(o.ladder.len());
        conv.total_matvecs += o.matvecs as u64;
        conv.ladder_expansions += o.expansions;
        conv.max_norm_drift = conv.max_norm_drift.max(o.norm_drift);
        conv.max_edge_population = conv.max_edge_population.max(o.edge_population);
    }

    if opts.audit_points > 0 && pulse.omega0 > 0.0 {
        let peak = (0..nd)
            .max_by(|&a, &b| value[a].total_cmp(&value[b]))
            .unwrap_or(0);
        let sigma = if scales.omega_t > 0.0 { scales.sigma_beta() } else { 0.0 };
        let candidates = [(0.0, peak), (1.3 * sigma, nd / 2), (2.2 * sigma, peak), (0.6 * sigma, nd / 3)];
        let audits = candidates
            .iter()
            .take(opts.audit_points)
            .map(|&(b, d)| {
                let beta = nearest(&grid.beta_points, b);
                solver.convergence_check(beta, deltas[d])
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = audits.iter().find(|a| a.max_change() > opts.audit_tolerance) {
            return Err(Error::Convergence(format!(
                "TDSE audit at beta = {}, delta = {} changed by {:.3e} (step) / {:.3e} (ladder)",
                bad.beta, bad.delta, bad.step_halving_change, bad.widening_change
            )));
        }
        conv.audits = audits;
    }

    let mut s = Spectrum::new(crate::ensemble::ModelTag::Tdse, deltas.clone(), value, None)?;
    s.meta.omega_k = scales.omega_k;
    s.meta.convergence = Some(Convergence::Tdse(conv));
    Ok(s)
}

fn nearest(points: &[f64], x: f64) -> f64 {
    points
        .iter()
        .cloned()
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        .unwrap_or(0.0)
}
