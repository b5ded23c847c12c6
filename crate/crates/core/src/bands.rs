//! Bloch bands of the single-level ladder Hamiltonians.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{DerivedScales, Parity};
use crate::tdse::window::level_matrix;
use crate::tdse::Ladder;

/// `points` cell-centred quasimomenta `q = p₀/(ħk)` in `(-1, 1)`.
pub fn p0_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| -1.0 + (2.0 * i as f64 + 1.0) / points as f64)
        .collect()
}

/// Bands and Bloch vectors on a quasimomentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochBandSet {
    /// Lattice depth (rad/s).
    pub depth: f64,
    pub p0_grid: Vec<f64>,
    pub ladder: Ladder,
    /// `energies[p][i]`, ascending in `i` (rad/s).
    pub energies: Vec<Vec<f64>>,
    /// `vectors[p]` holds band `i` in column `i`, indexed by ladder rung.
    pub vectors: Vec<DMatrix<f64>>,
    /// Largest `‖Hv - Ev‖/‖H‖` over all bands.
    pub max_residual: f64,
}

/// Diagonalizes the level at every grid quasimomentum.
pub fn compute_bands(
    v: f64,
    scales: &DerivedScales,
    p0_grid: &[f64],
    ladder: Ladder,
) -> Result<BlochBandSet> {
    if p0_grid.is_empty() {
        return Err(invalid("empty quasimomentum grid"));
    }
    let solved = p0_grid
        .par_iter()
        .map(|&q| solve_one(v, scales.omega_k, q, ladder))
        .collect::<Result<Vec<_>>>()?;
    let mut energies = Vec::with_capacity(solved.len());
    let mut vectors = Vec::with_capacity(solved.len());
    let mut max_residual = 0.0f64;
    for (e, u, r) in solved {
        energies.push(e);
        vectors.push(u);
        max_residual = max_residual.max(r);
    }
    Ok(BlochBandSet {
        depth: v,
        p0_grid: p0_grid.to_vec(),
        ladder,
        energies,
        vectors,
        max_residual,
    })
}

fn solve_one(v: f64, omega_k: f64, q: f64, ladder: Ladder) -> Result<(Vec<f64>, DMatrix<f64>, f64)> {
    let h = level_matrix(omega_k, v, q, ladder);
    let eig = SymmetricEigen::try_new(h.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence at quasimomentum {q}")))?;
    let d = ladder.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut u = DMatrix::<f64>::zeros(d, d);
    let mut e = Vec::with_capacity(d);
    for (col, &src) in order.iter().enumerate() {
        let mut c = eig.eigenvectors.column(src).into_owned();
        // Fix the sign by the largest component so that bands vary smoothly.
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c = -c;
        }
        u.set_column(col, &c);
        e.push(eig.eigenvalues[src]);
    }
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen(format!("non-finite band energy at quasimomentum {q}")));
    }
    let hnorm = h.norm().max(1e-300);
    let resid = &h * &u - &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.clone()));
    let r = (0..d)
        .map(|j| resid.column(j).norm() / hnorm)
        .fold(0.0, f64::max);
    Ok((e, u, r))
}

impl BlochBandSet {
    pub fn n_bands(&self) -> usize {
        self.ladder.len()
    }

    pub fn energy(&self, band: usize, p: usize) -> f64 {
        self.energies[p][band]
    }

    /// Minimum and maximum of band `i` over the grid.
    pub fn band_range(&self, band: usize) -> (f64, f64) {
        self.energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e[band]), hi.max(e[band]))
        })
    }

    /// Bands lying entirely below the lattice maximum `+V` that are narrower
    /// than the gap to the band above.
    pub fn tightly_bound_bands(&self) -> usize {
        let top = self.depth;
        let mut count = 0;
        for i in 0..self.n_bands().saturating_sub(1) {
            let (lo, hi) = self.band_range(i);
            let (next_lo, _) = self.band_range(i + 1);
            if hi >= top || hi - lo >= next_lo - hi {
                break;
            }
            count += 1;
        }
        count
    }

    pub fn compatible(&self, other: &BlochBandSet) -> bool {
        self.ladder == other.ladder && self.p0_grid == other.p0_grid
    }
}

/// Overlap matrix `M[i', i] = Σ_m b_{i',m} (a_{i,m-1} ± a_{i,m+1})` at grid
/// point `p`, with `+` for even and `-` for odd parity.
pub fn coupling_overlaps(
    a: &BlochBandSet,
    b: &BlochBandSet,
    p: usize,
    parity: Parity,
) -> Result<DMatrix<f64>> {
    if !a.compatible(b) {
        return Err(invalid("band sets use different grids or ladders"));
    }
    let ua = &a.vectors[p];
    let d = ua.nrows();
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let mut shifted = DMatrix::<f64>::zeros(d, ua.ncols());
    for i in 0..ua.ncols() {
        for m in 0..d {
            let lo = if m > 0 { ua[(m - 1, i)] } else { 0.0 };
            let hi = if m + 1 < d { ua[(m + 1, i)] } else { 0.0 };
            shifted[(m, i)] = lo + sign * hi;
        }
    }
    Ok(b.vectors[p].transpose() * shifted)
}

/// `|V(i', i, p₀)|²` for drive `Ω`: each cross link carries `Ω/4`.
pub fn coupling_sq(
    a: &BlochBandSet,
    b: &BlochBandSet,
    i: usize,
    i_prime: usize,
    p: usize,
    omega: f64,
    parity: Parity,
) -> Result<f64> {
    if !a.compatible(b) {
        return Err(invalid("band sets use different grids or ladders"));
    }
    if i >= a.n_bands() || i_prime >= b.n_bands() || p >= a.p0_grid.len() {
        return Err(invalid("band or grid index out of range"));
    }
    let ua = a.vectors[p].column(i);
    let ub = b.vectors[p].column(i_prime);
    let d = ua.len();
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let mut s = 0.0;
    for m in 0..d {
        let lo = if m > 0 { ua[m - 1] } else { 0.0 };
        let hi = if m + 1 < d { ua[m + 1] } else { 0.0 };
        s += ub[m] * (lo + sign * hi);
    }
    Ok(omega * omega / 16.0 * s * s)
}

/// One row of a band-diagram export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandRow {
    pub level: u8,
    pub p0_over_hbar_k: f64,
    pub band: usize,
    pub energy_rad_per_s: f64,
}

pub fn band_rows(level: u8, set: &BlochBandSet, max_bands: usize) -> Vec<BandRow> {
    let mut rows = Vec::new();
    for (p, q) in set.p0_grid.iter().enumerate() {
        for band in 0..set.n_bands().min(max_bands) {
            rows.push(BandRow {
                level,
                p0_over_hbar_k: *q,
                band,
                energy_rad_per_s: set.energies[p][band],
            });
        }
    }
    rows
}
