//! Momentum-ladder Hamiltonian for one quasimomentum family.
//!
//! Rung `n` of level `i` carries momentum `p₀ + 2nħk`. The quasimomentum is
//! stored as `q = p₀/(ħk) ∈ [-1, 1]`, so the scaled momentum of rung `n` is
//! `β = q + 2n`.
//!
//! The drive `Ω(t)` is the Rabi frequency of an atom pinned at a coupling
//! antinode. In position space the coupling is `-(Ω/2) s(2kz) σ_x`, which
//! links neighbouring rungs of opposite levels with amplitude `Ω/4`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::model::{DerivedScales, LatticeModel, Parity};

/// Inclusive range of rung indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ladder {
    pub n_min: i64,
    pub n_max: i64,
}

impl Ladder {
    pub fn new(n_min: i64, n_max: i64) -> Self {
        assert!(n_max >= n_min, "empty ladder");
        Ladder { n_min, n_max }
    }

    pub fn centered(n0: i64, half_width: i64) -> Self {
        Ladder::new(n0 - half_width, n0 + half_width)
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.n_min && n <= self.n_max
    }

    pub fn index(&self, n: i64) -> usize {
        debug_assert!(self.contains(n));
        (n - self.n_min) as usize
    }

    pub fn rung(&self, idx: usize) -> i64 {
        self.n_min + idx as i64
    }

    pub fn widened(&self, lo: i64, hi: i64) -> Self {
        Ladder::new(self.n_min - lo, self.n_max + hi)
    }

    pub fn shifted(&self, by: i64) -> Self {
        Ladder::new(self.n_min + by, self.n_max + by)
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.n_min..=self.n_max
    }
}

/// Free kinetic energy `ω_k (q/2 + n)²` of rung `n`.
#[inline]
pub fn kinetic(omega_k: f64, quasi: f64, n: i64) -> f64 {
    let x = 0.5 * quasi + n as f64;
    omega_k * x * x
}

/// Two-level ladder Hamiltonian (units of rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct LadderHamiltonian {
    pub quasi: f64,
    pub ladder: Ladder,
    /// Diagonal of level 1: kinetic plus `δ/2`.
    pub diag_a: Vec<f64>,
    /// Diagonal of level 2: kinetic minus `δ/2`.
    pub diag_b: Vec<f64>,
    /// Intra-level hop `V₁/2`.
    pub offdiag_a: f64,
    /// Intra-level hop `V₂/2`.
    pub offdiag_b: f64,
    pub parity: Parity,
    /// Instantaneous Rabi frequency `Ω(t)`.
    pub omega: f64,
}

/// Builds the ladder Hamiltonian at detuning `delta` and drive `omega_t`.
///
/// A positive `delta` is a drive tuned above the bare transition.
pub fn assemble(
    model: &LatticeModel,
    scales: &DerivedScales,
    quasi: f64,
    ladder: Ladder,
    delta: f64,
    omega_t: f64,
) -> LadderHamiltonian {
    let kin: Vec<f64> = ladder
        .iter()
        .map(|n| kinetic(scales.omega_k, quasi, n))
        .collect();
    LadderHamiltonian {
        quasi,
        ladder,
        diag_a: kin.iter().map(|e| e + 0.5 * delta).collect(),
        diag_b: kin.iter().map(|e| e - 0.5 * delta).collect(),
        offdiag_a: 0.5 * model.v1,
        offdiag_b: 0.5 * model.v2,
        parity: model.parity,
        omega: omega_t,
    }
}

impl LadderHamiltonian {
    pub fn dim(&self) -> usize {
        2 * self.ladder.len()
    }

    /// Magnitude of one cross-level link.
    pub fn link(&self) -> f64 {
        0.25 * self.omega
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        LadderHamiltonian {
            omega,
            ..self.clone()
        }
    }

    /// `y = H x` with `x = [a; b]`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        let d = self.ladder.len();
        let (xa, xb) = x.split_at(d);
        let (ya, yb) = y.split_at_mut(d);
        let c = self.link();
        for i in 0..d {
            let am = if i > 0 { xa[i - 1] } else { C64::new(0.0, 0.0) };
            let ap = if i + 1 < d { xa[i + 1] } else { C64::new(0.0, 0.0) };
            let bm = if i > 0 { xb[i - 1] } else { C64::new(0.0, 0.0) };
            let bp = if i + 1 < d { xb[i + 1] } else { C64::new(0.0, 0.0) };
            let (cross_a, cross_b) = match self.parity {
                Parity::Even => (-(bm + bp) * c, -(am + ap) * c),
                Parity::Odd => (
                    (bp - bm) * C64::new(0.0, c),
                    (ap - am) * C64::new(0.0, c),
                ),
            };
            ya[i] = xa[i] * self.diag_a[i] + (am + ap) * self.offdiag_a + cross_a;
            yb[i] = xb[i] * self.diag_b[i] + (bm + bp) * self.offdiag_b + cross_b;
        }
    }

    /// Dense matrix in the `[a; b]` basis.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::<C64>::zeros(n, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// Gershgorin enclosure of the spectrum for any `|Ω| ≤ omega_max`.
    pub fn spectral_bounds(&self, omega_max: f64) -> (f64, f64) {
        let d = self.ladder.len();
        let c = 0.25 * omega_max.abs();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..d {
            let nb = (i > 0) as u8 as f64 + (i + 1 < d) as u8 as f64;
            let ra = nb * (self.offdiag_a.abs() + c);
            let rb = nb * (self.offdiag_b.abs() + c);
            lo = lo.min(self.diag_a[i] - ra).min(self.diag_b[i] - rb);
            hi = hi.max(self.diag_a[i] + ra).max(self.diag_b[i] + rb);
        }
        (lo, hi)
    }
}
