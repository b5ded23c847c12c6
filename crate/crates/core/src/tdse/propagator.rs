//! Time stepping for the ladder Hamiltonian.
//!
//! The production integrator is the fourth-order commutator-free Magnus
//! scheme with two exponentials per step; each exponential is applied with a
//! Chebyshev expansion whose coefficients are Bessel functions. A plain RK4
//! integrator is kept as an independent reference.

use num_complex::Complex64 as C64;

use super::hamiltonian::LadderHamiltonian;
use crate::diagnostics::bessel::bessel_j_sequence;
use crate::model::Parity;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Work counters of one evolution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolveStats {
    pub steps: usize,
    pub matvecs: usize,
}

/// Hamiltonian mapped onto `[-1, 1]` for the Chebyshev recurrence.
struct ScaledOp {
    da: Vec<f64>,
    db: Vec<f64>,
    ha: f64,
    hb: f64,
    parity: Parity,
    inv_half: f64,
}

impl ScaledOp {
    fn new(h: &LadderHamiltonian, center: f64, half: f64) -> Self {
        let inv_half = 1.0 / half;
        ScaledOp {
            da: h.diag_a.iter().map(|e| (e - center) * inv_half).collect(),
            db: h.diag_b.iter().map(|e| (e - center) * inv_half).collect(),
            ha: h.offdiag_a * inv_half,
            hb: h.offdiag_b * inv_half,
            parity: h.parity,
            inv_half,
        }
    }

    /// `y = Hn x` when `RECUR` is false, `y = 2 Hn x - y` otherwise.
    #[inline(always)]
    fn apply<const RECUR: bool>(&self, link: f64, x: &[C64], y: &mut [C64]) {
        let d = self.da.len();
        let (xa, xb) = x.split_at(d);
        let (ya, yb) = y.split_at_mut(d);
        let c = link * self.inv_half;
        let (s, t) = if RECUR { (2.0, -1.0) } else { (1.0, 0.0) };
        for i in 0..d {
            let am = if i > 0 { xa[i - 1] } else { ZERO };
            let ap = if i + 1 < d { xa[i + 1] } else { ZERO };
            let bm = if i > 0 { xb[i - 1] } else { ZERO };
            let bp = if i + 1 < d { xb[i + 1] } else { ZERO };
            let (ca, cb) = match self.parity {
                Parity::Even => (-(bm + bp) * c, -(am + ap) * c),
                Parity::Odd => {
                    let u = bp - bm;
                    let v = ap - am;
                    (C64::new(-u.im * c, u.re * c), C64::new(-v.im * c, v.re * c))
                }
            };
            let va = xa[i] * self.da[i] + (am + ap) * self.ha + ca;
            let vb = xb[i] * self.db[i] + (bm + bp) * self.hb + cb;
            if RECUR {
                ya[i] = va * s + ya[i] * t;
                yb[i] = vb * s + yb[i] * t;
            } else {
                ya[i] = va;
                yb[i] = vb;
            }
        }
    }
}

/// Chebyshev coefficients of `exp(-i H τ)` on a spectrum of half-width `half`.
fn chebyshev_coefficients(half: f64, tau: f64, tol: f64) -> Vec<C64> {
    let r = half * tau;
    let kmax = (r + 40.0 + 10.0 * r.cbrt()).ceil() as usize;
    let j = bessel_j_sequence(r, kmax);
    let mut last = 0;
    for (k, v) in j.iter().enumerate() {
        if v.abs() > tol {
            last = k;
        }
    }
    let last = last.max(1);
    let rot = [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ];
    (0..=last)
        .map(|k| {
            let w = if k == 0 { 1.0 } else { 2.0 };
            rot[k % 4] * (w * j[k])
        })
        .collect()
}

struct Expm {
    op: ScaledOp,
    coeffs: Vec<C64>,
    phase: C64,
    phi0: Vec<C64>,
    phi1: Vec<C64>,
    acc: Vec<C64>,
}

impl Expm {
    fn new(h: &LadderHamiltonian, omega_max: f64, tau: f64, tol: f64) -> Self {
        let (lo, hi) = h.spectral_bounds(omega_max);
        let center = 0.5 * (hi + lo);
        let half = (0.5 * (hi - lo)).max(1e-300) * (1.0 + 1e-10) + 1e-12;
        let n = h.dim();
        Expm {
            op: ScaledOp::new(h, center, half),
            coeffs: chebyshev_coefficients(half, tau, tol),
            phase: C64::from_polar(1.0, -center * tau),
            phi0: vec![ZERO; n],
            phi1: vec![ZERO; n],
            acc: vec![ZERO; n],
        }
    }

    /// `psi ← exp(-i H(Ω) τ) psi`; returns the number of operator applications.
    fn apply(&mut self, omega: f64, psi: &mut [C64]) -> usize {
        let link = 0.25 * omega;
        let c = &self.coeffs;
        self.phi0.copy_from_slice(psi);
        self.op.apply::<false>(link, &self.phi0, &mut self.phi1);
        for i in 0..psi.len() {
            self.acc[i] = self.phi0[i] * c[0] + self.phi1[i] * c[1];
        }
        for ck in c.iter().skip(2) {
            self.op.apply::<true>(link, &self.phi1, &mut self.phi0);
            std::mem::swap(&mut self.phi0, &mut self.phi1);
            let ck = *ck;
            for (a, p) in self.acc.iter_mut().zip(self.phi1.iter()) {
                *a += *p * ck;
            }
        }
        for (p, a) in psi.iter_mut().zip(self.acc.iter()) {
            *p = *a * self.phase;
        }
        c.len() - 1
    }
}

pub(crate) const CF4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
pub(crate) const CF4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;
pub(crate) const GAUSS_C1: f64 = 0.5 - 0.288_675_134_594_812_9;
pub(crate) const GAUSS_C2: f64 = 0.5 + 0.288_675_134_594_812_9;

/// Evolves `psi` over `[0, t_end]` under `H(t) = H₀ + coupling(Ω(t))`.
///
/// `drive(t)` returns `Ω(t)` and must satisfy `|Ω| ≤ omega_max`; the drive
/// value stored in `h` is ignored.
pub fn evolve_cfm4<F: Fn(f64) -> f64>(
    h: &LadderHamiltonian,
    drive: F,
    omega_max: f64,
    t_end: f64,
    n_steps: usize,
    series_tol: f64,
    psi: &mut [C64],
) -> EvolveStats {
    let n_steps = n_steps.max(1);
    let dt = t_end / n_steps as f64;
    // Each exponential sees an effective drive up to
    // 2(|a1| + a2) max|Ω|.
    let eff_max = 2.0 * (CF4_A1.abs() + CF4_A2) * omega_max;
    let mut ex = Expm::new(h, eff_max, 0.5 * dt, series_tol);
    let mut stats = EvolveStats::default();
    for s in 0..n_steps {
        let t0 = s as f64 * dt;
        let g1 = drive(t0 + GAUSS_C1 * dt);
        let g2 = drive(t0 + GAUSS_C2 * dt);
        let w_first = 2.0 * (CF4_A2 * g1 + CF4_A1 * g2);
        let w_second = 2.0 * (CF4_A1 * g1 + CF4_A2 * g2);
        stats.matvecs += ex.apply(w_first, psi);
        stats.matvecs += ex.apply(w_second, psi);
        stats.steps += 1;
    }
    stats
}

/// Classical RK4 on the same problem; reference integrator for tests.
pub fn evolve_rk4<F: Fn(f64) -> f64>(
    h: &LadderHamiltonian,
    drive: F,
    t_end: f64,
    n_steps: usize,
    psi: &mut [C64],
) -> EvolveStats {
    let n = psi.len();
    let dt = t_end / n_steps as f64;
    let mut k = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    let mut tmp = vec![ZERO; n];
    let mi = C64::new(0.0, -1.0);
    let mut hh = h.clone();
    let mut rhs = |omega: f64, x: &[C64], out: &mut [C64]| {
        hh.omega = omega;
        hh.apply(x, out);
        out.iter_mut().for_each(|v| *v *= mi);
    };
    for s in 0..n_steps {
        let t0 = s as f64 * dt;
        let om0 = drive(t0);
        let omh = drive(t0 + 0.5 * dt);
        let om1 = drive(t0 + dt);
        rhs(om0, psi, &mut k[0]);
        for i in 0..n {
            tmp[i] = psi[i] + k[0][i] * (0.5 * dt);
        }
        rhs(omh, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = psi[i] + k[1][i] * (0.5 * dt);
        }
        rhs(omh, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = psi[i] + k[2][i] * dt;
        }
        rhs(om1, &tmp, &mut k[3]);
        for i in 0..n {
            psi[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (dt / 6.0);
        }
    }
    EvolveStats {
        steps: n_steps,
        matvecs: 4 * n_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{constants::*, LatticeModel};
    use crate::tdse::hamiltonian::{assemble, Ladder};
    use nalgebra::{DMatrix, DVector};
    use std::f64::consts::PI;

    fn model(v: f64, parity: Parity) -> LatticeModel {
        LatticeModel::new(
            LAMBDA_1064,
            RB85_MASS_AMU * AMU,
            v,
            0.8 * v,
            1.0e5,
            parity,
            vec![0.0],
            1e-6,
        )
        .unwrap()
    }

    fn exact_expm(h: &LadderHamiltonian, tau: f64, psi: &[C64]) -> Vec<C64> {
        let dense = h.to_dense();
        let eig = dense.clone().symmetric_eigen();
        let u = &eig.eigenvectors;
        let v = DVector::from_column_slice(psi);
        let coef = u.adjoint() * v;
        let phases = DMatrix::from_diagonal(&DVector::from_iterator(
            coef.len(),
            eig.eigenvalues.iter().map(|e| C64::from_polar(1.0, -e * tau)),
        ));
        let out = u * phases * coef;
        out.iter().cloned().collect()
    }

    #[test]
    fn chebyshev_matches_dense_exponential() {
        for parity in [Parity::Even, Parity::Odd] {
            let m = model(2.0 * PI * 40e3, parity);
            let s = m.derived();
            let h = assemble(&m, &s, 0.37, Ladder::centered(1, 7), 3.0e4, 2.5e5);
            let n = h.dim();
            let mut psi: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            let tau = 3.0e-5;
            let want = exact_expm(&h, tau, &psi);
            let mut ex = Expm::new(&h, 2.5e5, tau, 1e-15);
            ex.apply(2.5e5, &mut psi);
            for (a, b) in psi.iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-11, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cfm4_agrees_with_fine_rk4() {
        let m = model(2.0 * PI * 30e3, Parity::Even);
        let s = m.derived();
        let tau0 = 10e-6;
        let t_end = 10.0 * tau0;
        let om0 = PI.sqrt() / tau0;
        let drive = |t: f64| {
            let x = (t - 0.5 * t_end) / tau0;
            om0 * (-x * x).exp()
        };
        let h = assemble(&m, &s, 0.2, Ladder::centered(0, 8), 1.5 * s.omega_k, 0.0);
        let n = h.dim();
        let mut init = vec![ZERO; n];
        init[h.ladder.index(0)] = C64::new(1.0, 0.0);
        let mut a = init.clone();
        evolve_cfm4(&h, drive, om0, t_end, 80, 1e-15, &mut a);
        let mut b = init.clone();
        evolve_rk4(&h, drive, t_end, 40_000, &mut b);
        let pa: f64 = a[n / 2..].iter().map(|z| z.norm_sqr()).sum();
        let pb: f64 = b[n / 2..].iter().map(|z| z.norm_sqr()).sum();
        assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
        let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
        assert!(diff.sqrt() < 1e-5);
    }
}
