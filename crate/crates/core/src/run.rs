//! Dispatch of the selected models and the run report.

use serde::Serialize;
use std::time::Instant;

use crate::config::RunConfig;
use crate::ensemble::{assemble_tdse_spectrum, Convergence, ModelTag, Spectrum};
use crate::error::{Error, Result};
use crate::fgr::fgr_spectrum;
use crate::semiclassical::sc_spectrum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: ModelTag,
    pub wall_time_s: f64,
    pub points: usize,
    pub convergence: Option<Convergence>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub software: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub omega_k: f64,
    pub threads: usize,
    pub models: Vec<ModelReport>,
    /// Set when a model failed and the run stopped.
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub spectra: Vec<Spectrum>,
    pub report: RunReport,
}

/// A failed run with whatever finished before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunOutput,
}

fn compute(cfg: &RunConfig, tag: ModelTag) -> Result<Spectrum> {
    let scales = cfg.scales();
    match tag {
        ModelTag::Tdse => {
            let grid = cfg.thermal_grid()?;
            assemble_tdse_spectrum(&cfg.model, &scales, &cfg.pulse, &grid, &cfg.tdse)
        }
        ModelTag::Fgr => fgr_spectrum(&cfg.model, &scales, &cfg.pulse, &cfg.fgr),
        ModelTag::Semiclassical => sc_spectrum(&cfg.model, &scales, &cfg.pulse, &cfg.ensemble),
    }
}

/// Runs every selected model in order on a pool of `cfg.workers` threads.
pub fn run(cfg: &RunConfig) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let hash = cfg.hash();
    let mut out = RunOutput {
        spectra: Vec::new(),
        report: RunReport {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash.clone(),
            config: cfg.clone(),
            omega_k: cfg.scales().omega_k,
            threads: 0,
            models: Vec::new(),
            failure: None,
        },
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            let error = Error::Config(format!("cannot start {} workers: {e}", cfg.workers));
            out.report.failure = Some(error.to_string());
            return Err(Box::new(RunFailure { error, partial: out }));
        }
    };
    out.report.threads = pool.current_num_threads();
    for &tag in &cfg.models {
        let start = Instant::now();
        let res = pool.install(|| compute(cfg, tag));
        let wall = start.elapsed().as_secs_f64();
        match res {
            Ok(mut s) => {
                s.meta.config_hash = Some(hash.clone());
                s.meta.seed = (tag == ModelTag::Semiclassical).then_some(cfg.ensemble.seed);
                out.report.models.push(ModelReport {
                    model: tag,
                    wall_time_s: wall,
                    points: s.delta.len(),
                    convergence: s.meta.convergence.clone(),
                    error: None,
                });
                out.spectra.push(s);
            }
            Err(error) => {
                out.report.models.push(ModelReport {
                    model: tag,
                    wall_time_s: wall,
                    points: 0,
                    convergence: None,
                    error: Some(error.to_string()),
                });
                out.report.failure = Some(format!("{}: {error}", tag.name()));
                return Err(Box::new(RunFailure { error, partial: out }));
            }
        }
    }
    Ok(out)
}
