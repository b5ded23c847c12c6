//! Fourier content of the coupling seen by an atom oscillating in a well.
//!
//! For `2kz(t) = π + 2kz₁cos(2πf₁t)` the coupling `cos(2kz)` is, up to an
//! overall sign, `cos(x cos θ) = J₀(x) + 2Σ_p (-1)^p J_{2p}(x) cos(2pθ)` with
//! `x = 2kz₁`.

use super::bessel::bessel_j_sequence;
use crate::error::{invalid, Result};

/// Coefficients `[J₀(x), -2J₂(x), 2J₄(x), …]` up to harmonic `2·max_order`.
pub fn jacobi_anger_amplitudes(z1: f64, k: f64, max_order: usize) -> Result<Vec<f64>> {
    if !(z1.is_finite() && z1 >= 0.0) {
        return Err(invalid("oscillation amplitude must be non-negative"));
    }
    let x = 2.0 * k * z1;
    let j = bessel_j_sequence(x, 2 * max_order);
    Ok((0..=max_order)
        .map(|p| {
            if p == 0 {
                j[0]
            } else {
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                2.0 * sign * j[2 * p]
            }
        })
        .collect())
}

/// `Σ_p c_p cos(2pθ)`.
pub fn resum(coeffs: &[f64], theta: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(p, c)| c * (2.0 * p as f64 * theta).cos())
        .sum()
}
