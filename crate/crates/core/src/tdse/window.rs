//! Truncation planning for the momentum ladder.
//!
//! For a given quasimomentum the static Hamiltonians `H_A`, `H_B` are
//! diagonalized on a generous ladder. Starting from rung `n₀`, band `i` of
//! level 1 carries weight `U_{n₀i}²` and the long-time average population of
//! rung `n` is `Σ_i U_ni² U_{n₀i}²`. Level-2 bands are weighted by the
//! coherent transfer `(Σ_i |C_{i'i}| |U_{n₀i}|)²`, with `C` the cross-link
//! matrix in the band basis with each link scaled to one half. The truncation keeps every
//! rung whose estimated population exceeds a threshold, plus a margin; the
//! edge guard of the propagation checks the result afterwards and widens
//! the ladder if needed.

use nalgebra::{DMatrix, SymmetricEigen};

use super::hamiltonian::{kinetic, Ladder};
use crate::error::{Error, Result};
use crate::model::{DerivedScales, LatticeModel, Parity};

/// Tridiagonal single-level Hamiltonian on `ladder`.
pub fn level_matrix(omega_k: f64, v: f64, quasi: f64, ladder: Ladder) -> DMatrix<f64> {
    let d = ladder.len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (i, n) in ladder.iter().enumerate() {
        m[(i, i)] = kinetic(omega_k, quasi, n);
        if i + 1 < d {
            m[(i, i + 1)] = 0.5 * v;
            m[(i + 1, i)] = 0.5 * v;
        }
    }
    m
}

/// Eigenvectors of the level, rungs in rows.
fn eigenbasis(omega_k: f64, v: f64, quasi: f64, ladder: Ladder) -> DMatrix<f64> {
    SymmetricEigen::new(level_matrix(omega_k, v, quasi, ladder)).eigenvectors
}

/// `out[n] = Σ_i U_ni² w_i`.
fn rung_populations(u: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    (0..u.nrows())
        .map(|n| (0..u.ncols()).map(|i| u[(n, i)] * u[(n, i)] * w[i]).sum())
        .collect()
}

/// Estimated long-time populations of every rung of `wide`.
fn population_estimate(
    model: &LatticeModel,
    omega_k: f64,
    quasi: f64,
    n0: i64,
    wide: Ladder,
) -> Vec<f64> {
    let ua = eigenbasis(omega_k, model.v1, quasi, wide);
    let ub = eigenbasis(omega_k, model.v2, quasi, wide);
    let d = wide.len();
    let i0 = wide.index(n0);
    let amp: Vec<f64> = (0..d).map(|i| ua[(i0, i)].abs()).collect();
    let weight_a: Vec<f64> = amp.iter().map(|a| a * a).collect();
    let sign = match model.parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let mut shifted = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for m in 0..d {
            let lo = if m > 0 { ua[(m - 1, i)] } else { 0.0 };
            let hi = if m + 1 < d { ua[(m + 1, i)] } else { 0.0 };
            shifted[(m, i)] = 0.5 * (lo + sign * hi);
        }
    }
    let cross = (ub.transpose() * shifted).map(f64::abs);
    let weight_b: Vec<f64> = (0..d)
        .map(|j| {
            let t: f64 = (0..d).map(|i| cross[(j, i)] * amp[i]).sum();
            (t * t).min(1.0)
        })
        .collect();
    let pa = rung_populations(&ua, &weight_a);
    let pb = rung_populations(&ub, &weight_b);
    (0..d).map(|n| pa[n].max(pb[n])).collect()
}

/// Momentum reach (in rungs) of states bound below the lattice maximum.
pub fn bound_reach(v_max: f64, omega_k: f64) -> i64 {
    if v_max <= 0.0 {
        0
    } else {
        (2.0 * v_max / omega_k).sqrt().ceil() as i64
    }
}

/// Chooses the ladder for initial rung `n0` at quasimomentum `quasi`;
/// `threshold` is a population.
pub fn plan_ladder(
    model: &LatticeModel,
    scales: &DerivedScales,
    quasi: f64,
    n0: i64,
    threshold: f64,
    margin: i64,
) -> Result<Ladder> {
    let reach = bound_reach(model.v1.max(model.v2), scales.omega_k);
    let pad = 12;
    let mut wide = Ladder::new((n0 - pad).min(-reach - pad), (n0 + pad).max(reach + pad));
    for _ in 0..8 {
        let env = population_estimate(model, scales.omega_k, quasi, n0, wide);
        let d = env.len();
        let edge = env[..2]
            .iter()
            .chain(env[d - 2..].iter())
            .cloned()
            .fold(0.0, f64::max);
        if edge > threshold {
            wide = wide.widened(8, 8);
            continue;
        }
        let i0 = wide.index(n0);
        let first = env.iter().position(|&e| e > threshold).unwrap_or(i0).min(i0);
        let last = env.iter().rposition(|&e| e > threshold).unwrap_or(i0).max(i0);
        return Ok(Ladder::new(wide.rung(first) - margin, wide.rung(last) + margin));
    }
    Err(Error::Convergence(format!(
        "truncation planning did not settle for n0 = {n0}, quasi = {quasi}"
    )))
}
