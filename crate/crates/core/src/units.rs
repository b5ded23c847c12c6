//! Conversion of human-unit quantities to SI.
//!
//! Frequencies quoted in Hz, kHz, MHz or GHz are cyclic and converted to
//! angular frequency (`"1.25 MHz"` is `2π × 1.25e6 rad/s`). Angular values
//! may be given in `rad/s`, `krad/s` or `Mrad/s`; detunings may also use
//! `omega_k`. A bare number is taken as SI.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// A number or a `"value unit"` string as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        Quantity::Text(s.to_string())
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Number(x) => write!(f, "{x}"),
            Quantity::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Mass,
    Time,
    Temperature,
    /// Angular frequency; `omega_k` allowed when a recoil scale is supplied.
    Frequency,
}

fn split(text: &str) -> Result<(f64, &str)> {
    let t = text.trim();
    let cut = t
        .char_indices()
        .find(|&(i, c)| {
            c.is_alphabetic() && !((c == 'e' || c == 'E') && t[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(cut);
    let unit = unit.trim();
    let num = num.trim().trim_end_matches('*').trim();
    let value: f64 = num
        .parse()
        .map_err(|_| Error::Unit(format!("cannot read a number from {text:?}")))?;
    Ok((value, unit))
}

fn scale(unit: &str, dim: Dimension, omega_k: Option<f64>) -> Option<f64> {
    use Dimension::*;
    let two_pi = 2.0 * PI;
    Some(match (dim, unit) {
        (_, "") => 1.0,
        (Length, "m") => 1.0,
        (Length, "mm") => 1e-3,
        (Length, "um" | "μm" | "µm") => 1e-6,
        (Length, "nm") => 1e-9,
        (Mass, "kg") => 1.0,
        (Mass, "amu" | "u" | "Da") => crate::model::constants::AMU,
        (Time, "s") => 1.0,
        (Time, "ms") => 1e-3,
        (Time, "us" | "μs" | "µs") => 1e-6,
        (Time, "ns") => 1e-9,
        (Temperature, "K") => 1.0,
        (Temperature, "mK") => 1e-3,
        (Temperature, "uK" | "μK" | "µK") => 1e-6,
        (Temperature, "nK") => 1e-9,
        (Frequency, "rad/s") => 1.0,
        (Frequency, "krad/s") => 1e3,
        (Frequency, "Mrad/s") => 1e6,
        (Frequency, "Hz") => two_pi,
        (Frequency, "kHz") => two_pi * 1e3,
        (Frequency, "MHz") => two_pi * 1e6,
        (Frequency, "GHz") => two_pi * 1e9,
        (Frequency, "omega_k" | "ω_k" | "wk") => omega_k?,
        _ => return None,
    })
}

/// SI value of `q` in dimension `dim`.
pub fn resolve(q: &Quantity, dim: Dimension, omega_k: Option<f64>) -> Result<f64> {
    let v = match q {
        Quantity::Number(x) => *x,
        Quantity::Text(s) => {
            let (value, unit) = split(s)?;
            let f = scale(unit, dim, omega_k).ok_or_else(|| {
                if matches!(unit, "omega_k" | "ω_k" | "wk") {
                    Error::Unit(format!("{s:?}: omega_k is only allowed for detunings"))
                } else {
                    Error::Unit(format!("{s:?}: unknown unit {unit:?} for {dim:?}"))
                }
            })?;
            value * f
        }
    };
    if !v.is_finite() {
        return Err(Error::Unit(format!("{q} is not finite")));
    }
    Ok(v)
}
