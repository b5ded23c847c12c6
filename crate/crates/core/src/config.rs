//! Run description: the TOML document and its validated, SI-resolved form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::ensemble::{ModelTag, TdseRunOptions, ThermalGrid};
use crate::error::{Error, Result};
use crate::fgr::FgrConfig;
use crate::model::{constants, pi_pulse_amplitude, tau0_from_fwhm, DerivedScales, DrivePulse, LatticeModel, Parity};
use crate::semiclassical::{EnsembleConfig, ScOptions};
use crate::units::{resolve, Dimension, Quantity};

/// Top level of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub models: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub lattice: LatticeSection,
    pub pulse: PulseSection,
    pub detuning: DetuningSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tdse: Option<TdseRunOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fgr: Option<FgrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semiclassical: Option<ScSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Quantity>,
    pub v1: Quantity,
    /// Defaults to `v1` (magic lattice).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    pub temperature: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_fwhm: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0: Option<Quantity>,
    /// Explicit peak Rabi frequency; excludes `pi_pulse` and `area_scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_pulse: Option<bool>,
    /// Multiplies the π-pulse amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_scale: Option<f64>,
    /// Integration window; defaults to `10 τ₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_p: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<Quantity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<RangeSpec>,
}

/// `points` equally spaced detunings from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgrSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_weight_exponent: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<ScOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Validated run description with every quantity in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub models: Vec<ModelTag>,
    pub model: LatticeModel,
    pub pulse: DrivePulse,
    pub beta_max: Option<f64>,
    pub beta_points: Option<usize>,
    pub tdse: TdseRunOptions,
    pub fgr: FgrConfig,
    pub ensemble: EnsembleConfig,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::from_doc(&ConfigDoc::parse(text)?)
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn pulse_from(p: &PulseSection) -> Result<DrivePulse> {
    let tau0 = match (&p.tau_fwhm, &p.tau0) {
        (Some(_), Some(_)) => return Err(cfg_err("pulse: give either tau_fwhm or tau0, not both")),
        (None, None) => return Err(cfg_err("pulse: missing tau_fwhm or tau0")),
        (Some(f), None) => tau0_from_fwhm(resolve(f, Dimension::Time, None)?)?,
        (None, Some(t)) => resolve(t, Dimension::Time, None)?,
    };
    let omega0 = match (&p.omega0, p.pi_pulse) {
        (Some(_), Some(true)) => return Err(cfg_err("pulse: omega0 and pi_pulse are mutually exclusive")),
        (Some(_), _) if p.area_scale.is_some() => {
            return Err(cfg_err("pulse: area_scale only applies to a pi pulse"))
        }
        (Some(o), _) => resolve(o, Dimension::Frequency, None)?,
        (None, Some(false)) => return Err(cfg_err("pulse: pi_pulse = false needs an explicit omega0")),
        (None, _) => {
            let s = p.area_scale.unwrap_or(1.0);
            if !(s.is_finite() && s >= 0.0) {
                return Err(cfg_err("pulse: area_scale must be non-negative"));
            }
            s * pi_pulse_amplitude(tau0)?
        }
    };
    let t_p = match &p.t_p {
        Some(t) => resolve(t, Dimension::Time, None)?,
        None => 10.0 * tau0,
    };
    DrivePulse::new(tau0, t_p, omega0)
}

fn detuning_grid(d: &DetuningSection, omega_k: f64) -> Result<Vec<f64>> {
    let wk = Some(omega_k);
    let mut grid = Vec::new();
    for v in &d.values {
        grid.push(resolve(v, Dimension::Frequency, wk)?);
    }
    for r in &d.ranges {
        let a = resolve(&r.start, Dimension::Frequency, wk)?;
        let b = resolve(&r.stop, Dimension::Frequency, wk)?;
        match r.points {
            0 => return Err(cfg_err("detuning range needs at least one point")),
            1 => grid.push(a),
            n => grid.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64)),
        }
    }
    if grid.is_empty() {
        return Err(cfg_err("detuning grid is empty"));
    }
    grid.sort_by(f64::total_cmp);
    // Overlapping ranges meet at points that differ by rounding only.
    let tol = 1e-9 * omega_k;
    grid.dedup_by(|b, a| (*b - *a).abs() <= tol);
    Ok(grid)
}

impl RunConfig {
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        let mut models = doc
            .models
            .iter()
            .map(|m| ModelTag::parse(m))
            .collect::<Result<Vec<_>>>()?;
        models.sort();
        models.dedup();
        if models.is_empty() {
            return Err(cfg_err("at least one model must be selected"));
        }

        let l = &doc.lattice;
        let wavelength = match &l.wavelength {
            Some(q) => resolve(q, Dimension::Length, None)?,
            None => constants::LAMBDA_1064,
        };
        let mass = match &l.mass {
            Some(q) => resolve(q, Dimension::Mass, None)?,
            None => constants::RB85_MASS_AMU * constants::AMU,
        };
        let v1 = resolve(&l.v1, Dimension::Frequency, None)?;
        let v2 = match &l.v2 {
            Some(q) => resolve(q, Dimension::Frequency, None)?,
            None => v1,
        };
        let temperature = resolve(&l.temperature, Dimension::Temperature, None)?;
        let pulse = pulse_from(&doc.pulse)?;

        // The recoil scale only needs wavelength and mass.
        let probe = LatticeModel::new(wavelength, mass, v1, v2, pulse.omega0, Parity::Even, vec![0.0], temperature)?;
        let omega_k = probe.derived().omega_k;
        let delta_grid = detuning_grid(&doc.detuning, omega_k)?;
        let model = LatticeModel::new(
            wavelength,
            mass,
            v1,
            v2,
            pulse.omega0,
            l.parity.unwrap_or(Parity::Even),
            delta_grid,
            temperature,
        )?;

        let (beta_max, beta_points) = match &doc.thermal {
            Some(t) => (t.beta_max, t.points),
            None => (None, None),
        };
        if let Some(b) = beta_max {
            if !(b.is_finite() && b > 0.0) {
                return Err(cfg_err("thermal.beta_max must be positive"));
            }
        }
        if matches!(beta_points, Some(n) if n < 3) {
            return Err(cfg_err("thermal.points must be at least 3"));
        }

        let mut fgr = FgrConfig::default();
        if let Some(f) = &doc.fgr {
            if let Some(s) = &f.sigma_e {
                fgr.sigma_e = Some(resolve(s, Dimension::Frequency, Some(omega_k))?);
            }
            if let Some(s) = f.saturation_scale {
                fgr.saturation_scale = s;
            }
            if let Some(n) = f.p0_points {
                fgr.p0_points = n;
            }
            if let Some(b) = f.literal_weight_exponent {
                fgr.literal_weight_exponent = b;
            }
            if let Some(w) = f.weight_tolerance {
                fgr.weight_tolerance = w;
            }
        }
        fgr.validate().map_err(|e| cfg_err(format!("fgr: {e}")))?;

        let mut ensemble = EnsembleConfig {
            seed: doc.seed.unwrap_or(1),
            ..Default::default()
        };
        if let Some(s) = &doc.semiclassical {
            if let Some(n) = s.n_traj {
                ensemble.n_traj = n;
            }
            if let Some(o) = s.options {
                ensemble.options = o;
            }
        }
        ensemble.validate().map_err(|e| cfg_err(format!("semiclassical: {e}")))?;

        let tdse = doc.tdse.unwrap_or_default();
        if !(tdse.solver.steps_per_tau0 > 0.0 && tdse.audit_tolerance > 0.0) {
            return Err(cfg_err("tdse: steps_per_tau0 and audit_tolerance must be positive"));
        }

        Ok(RunConfig {
            models,
            model,
            pulse,
            beta_max,
            beta_points,
            tdse,
            fgr,
            ensemble,
            workers: doc.workers.unwrap_or(0),
            output_dir: doc.output.as_ref().and_then(|o| o.dir.clone()),
        })
    }

    pub fn scales(&self) -> DerivedScales {
        self.model.derived()
    }

    /// Thermal quadrature with any overrides applied.
    pub fn thermal_grid(&self) -> Result<ThermalGrid> {
        let scales = self.scales();
        let t = self.model.temperature;
        if t == 0.0 {
            return Ok(ThermalGrid::zero_temperature());
        }
        let bmax = self
            .beta_max
            .unwrap_or_else(|| crate::ensemble::default_beta_max(t, &scales));
        let n = self
            .beta_points
            .unwrap_or_else(|| crate::ensemble::default_beta_points(t));
        ThermalGrid::uniform(&scales, t, bmax, n)
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
