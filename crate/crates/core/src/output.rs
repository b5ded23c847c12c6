//! CSV spectra and the JSON run report.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bands::BandRow;
use crate::ensemble::{ModelTag, Spectrum};
use crate::error::{Error, Result};
use crate::run::RunReport;

pub const CSV_HEADER: [&str; 4] = ["delta_rad_per_s", "delta_over_omega_k", "probability", "stderr"];

/// Twelve significant digits in scientific notation.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

fn io_ctx(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub fn write_spectrum_csv(spec: &Spectrum, path: &Path) -> Result<()> {
    let wk = spec.meta.omega_k;
    if !(wk.is_finite() && wk > 0.0) {
        return Err(Error::InvalidParameter("spectrum has no recoil scale".into()));
    }
    let file = fs::File::create(path).map_err(|e| io_ctx(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER)?;
    for (i, (&d, &p)) in spec.delta.iter().zip(&spec.value).enumerate() {
        let err = match &spec.stderr {
            Some(s) => fmt12(s[i]),
            None => String::new(),
        };
        w.write_record([fmt12(d), fmt12(d / wk), fmt12(p), err])?;
    }
    w.flush().map_err(|e| io_ctx(path, e))?;
    Ok(())
}

/// Reads a spectrum written by [`write_spectrum_csv`]. The recoil scale is
/// recovered from the first two columns.
pub fn read_spectrum_csv(path: &Path, tag: ModelTag) -> Result<Spectrum> {
    let file = fs::File::open(path).map_err(|e| io_ctx(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    let (mut delta, mut value, mut err) = (Vec::new(), Vec::new(), Vec::new());
    let mut omega_k = None;
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad number {s:?}", path.display())))
    };
    for rec in r.records() {
        let rec = rec?;
        let d = num(&rec[0])?;
        let dk = num(&rec[1])?;
        if omega_k.is_none() && dk != 0.0 {
            omega_k = Some(d / dk);
        }
        delta.push(d);
        value.push(num(&rec[2])?);
        if !rec[3].trim().is_empty() {
            err.push(num(&rec[3])?);
        }
    }
    let stderr = if err.is_empty() {
        None
    } else if err.len() == value.len() {
        Some(err)
    } else {
        return Err(Error::Config(format!("{}: stderr column is partly empty", path.display())));
    };
    let mut s = Spectrum::new(tag, delta, value, stderr)?;
    s.meta.omega_k = omega_k.unwrap_or(f64::NAN);
    Ok(s)
}

/// Writes `<model>.csv` for every spectrum and `report.json` into `dir`.
pub fn write_output(spectra: &[Spectrum], report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_ctx(dir, e))?;
    let mut written = Vec::new();
    for s in spectra {
        let p = dir.join(format!("{}.csv", s.model_tag.name()));
        write_spectrum_csv(s, &p)?;
        written.push(p);
    }
    let p = dir.join("report.json");
    write_report(report, &p)?;
    written.push(p);
    Ok(written)
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").map_err(|e| io_ctx(path, e))
}

/// Band diagram rows with energies also in units of `omega_k`.
pub fn write_bands_csv(rows: &[BandRow], omega_k: f64, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_ctx(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["level", "p0_over_hbar_k", "band", "energy_rad_per_s", "energy_over_omega_k"])?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            fmt12(r.p0_over_hbar_k),
            r.band.to_string(),
            fmt12(r.energy_rad_per_s),
            fmt12(r.energy_rad_per_s / omega_k),
        ])?;
    }
    w.flush().map_err(|e| io_ctx(path, e))?;
    Ok(())
}
