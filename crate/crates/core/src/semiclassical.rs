//! Classical centre-of-mass trajectories with quantum internal dynamics.
//!
//! The COM moves on the population-weighted lattice potential
//! `ħ(p₁V₁ + p₂V₂)cos(2kz)` and is advanced with classical RK4 in the
//! variables `φ = 2kz`, `u = 2kv`. The internal state sees
//! `H = (δ_c/2)σz - (Ω(t)s(φ)/2)σx` with `δ_c = δ - (V₂ - V₁)cos φ`, and is
//! advanced in the same step loop by a fourth-order commutator-free Magnus
//! step whose two exact SU(2) exponentials use `φ` at the Gauss nodes of the
//! step (quintic Hermite interpolation of the RK4 path). The internal update
//! is therefore unitary to rounding.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Convergence, ModelTag, ScConvergence, Spectrum};
use crate::error::{invalid, Error, Result};
use crate::model::constants::{HBAR, K_B};
use crate::model::{DerivedScales, DrivePulse, LatticeModel};
use crate::tdse::propagator::{CF4_A1, CF4_A2, GAUSS_C1, GAUSS_C2};

/// Trajectories summed sequentially before the pairwise reduction.
const CHUNK: usize = 64;

/// COM and internal state of one atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    /// Position (m).
    pub z: f64,
    /// Velocity (m/s).
    pub v: f64,
    pub c1: C64,
    pub c2: C64,
    /// Time (s).
    pub t: f64,
}

/// Step-size controls. The step is the smallest of `τ₀/200`, `1/(100 f_max)`,
/// `max_phase_step/u_max` and `max_internal_step/ω_int`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScOptions {
    /// Largest lattice phase `2kvΔt` covered in one step.
    pub max_phase_step: f64,
    /// Largest `(|δ| + |V₂ - V₁| + Ω₀)Δt`.
    pub max_internal_step: f64,
    /// Divides every step; 2 is the halving check.
    pub refine: usize,
}

impl Default for ScOptions {
    fn default() -> Self {
        ScOptions {
            max_phase_step: 0.2,
            max_internal_step: 1.0,
            refine: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub options: ScOptions,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_traj: 10_000,
            seed: 1,
            options: ScOptions::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(invalid("n_traj must be at least 1"));
        }
        let o = &self.options;
        if !(o.max_phase_step > 0.0 && o.max_internal_step > 0.0 && o.refine >= 1) {
            return Err(invalid("semiclassical step controls must be positive"));
        }
        Ok(())
    }
}

/// Classical force (N) at position `z` with level populations `pop1`, `pop2`.
pub fn step_force(model: &LatticeModel, scales: &DerivedScales, z: f64, pop1: f64, pop2: f64) -> f64 {
    2.0 * scales.k * HBAR * (pop1 * model.v1 + pop2 * model.v2) * (2.0 * scales.k * z).sin()
}

/// Internal Hamiltonian `(δ_c/2)σz - (w/2)σx` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalHamiltonian {
    /// Local detuning `δ_c`.
    pub detuning: f64,
    /// Local Rabi frequency `w = Ω(t)s(2kz)`.
    pub rabi: f64,
}

impl InternalHamiltonian {
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let d = C64::new(0.5 * self.detuning, 0.0);
        let w = C64::new(-0.5 * self.rabi, 0.0);
        [[d, w], [w, -d]]
    }

    /// `H c`.
    pub fn apply(&self, c: [C64; 2]) -> [C64; 2] {
        let m = self.matrix();
        [m[0][0] * c[0] + m[0][1] * c[1], m[1][0] * c[0] + m[1][1] * c[1]]
    }
}

/// Local detuning `δ_c = δ - (V₂ - V₁)cos φ`.
fn local_detuning(model: &LatticeModel, phase: f64, delta: f64) -> f64 {
    delta - (model.v2 - model.v1) * phase.cos()
}

/// Internal Hamiltonian of an atom at `z` at time `t`.
pub fn internal_hamiltonian(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    z: f64,
    t: f64,
    delta: f64,
) -> InternalHamiltonian {
    let phase = 2.0 * scales.k * z;
    InternalHamiltonian {
        detuning: local_detuning(model, phase, delta),
        rabi: pulse.envelope(t) * model.parity.profile(phase),
    }
}

/// `(cos θ, sin θ/θ)` from `θ²`.
#[inline]
fn cos_sinc(theta2: f64) -> (f64, f64) {
    if theta2 > 2.25 {
        let t = theta2.sqrt();
        return (t.cos(), t.sin() / t);
    }
    // Taylor series in θ², accurate to rounding for θ ≤ 1.5.
    let x = theta2;
    let mut c = COS_SERIES[COS_SERIES.len() - 1];
    for k in (0..COS_SERIES.len() - 1).rev() {
        c = c * x + COS_SERIES[k];
    }
    let mut s = SINC_SERIES[SINC_SERIES.len() - 1];
    for k in (0..SINC_SERIES.len() - 1).rev() {
        s = s * x + SINC_SERIES[k];
    }
    (c, s)
}

const COS_SERIES: [f64; 12] = series(0);
const SINC_SERIES: [f64; 12] = series(1);

/// `(-1)^k/(2k + offset)!`.
const fn series(offset: u32) -> [f64; 12] {
    let mut out = [0.0; 12];
    let mut k = 0;
    while k < 12 {
        let mut f = 1.0;
        let mut j = 1;
        while j <= 2 * k + offset {
            f *= j as f64;
            j += 1;
        }
        out[k as usize] = if k % 2 == 0 { 1.0 / f } else { -1.0 / f };
        k += 1;
    }
    out
}

/// Applies `exp(-i h (a σz + b σx))`.
#[inline]
fn su2_step(a: f64, b: f64, h: f64, c1: &mut C64, c2: &mut C64) {
    let (cs, sinc) = cos_sinc(h * h * (a * a + b * b));
    let s = h * sinc;
    let (x1, x2) = (*c1, *c2);
    let mi = C64::new(0.0, -s);
    *c1 = x1 * cs + mi * (x1 * a + x2 * b);
    *c2 = x2 * cs + mi * (x1 * b - x2 * a);
}

/// One Magnus step from the local detunings and Rabi frequencies at the two
/// Gauss nodes.
#[inline]
fn internal_step(dc: [f64; 2], w: [f64; 2], h: f64, c1: &mut C64, c2: &mut C64) {
    su2_step(
        0.5 * (CF4_A2 * dc[0] + CF4_A1 * dc[1]),
        -0.5 * (CF4_A2 * w[0] + CF4_A1 * w[1]),
        h,
        c1,
        c2,
    );
    su2_step(
        0.5 * (CF4_A1 * dc[0] + CF4_A2 * dc[1]),
        -0.5 * (CF4_A1 * w[0] + CF4_A2 * w[1]),
        h,
        c1,
        c2,
    );
}

/// Quintic Hermite basis at fraction `s` of the step.
fn hermite5(s: f64) -> [f64; 6] {
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5) = (s3 * s, s3 * s2);
    [
        1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
        s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
        0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
        10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
        0.5 * (s3 - 2.0 * s4 + s5),
    ]
}

/// COM equations in `(φ, u)`: `φ' = u`, `u' = 2ω_k V̄ sin φ`.
#[derive(Clone, Copy)]
struct Com {
    two_omega_k: f64,
}

impl Com {
    #[inline]
    fn accel(&self, vbar: f64, phi: f64) -> f64 {
        self.two_omega_k * vbar * phi.sin()
    }

    /// RK4 step with the mean depth at the start, middle and end of the step.
    #[inline]
    fn rk4(&self, phi: f64, u: f64, h: f64, vbar: [f64; 3]) -> (f64, f64) {
        let k1p = u;
        let k1u = self.accel(vbar[0], phi);
        let k2p = u + 0.5 * h * k1u;
        let k2u = self.accel(vbar[1], phi + 0.5 * h * k1p);
        let k3p = u + 0.5 * h * k2u;
        let k3u = self.accel(vbar[1], phi + 0.5 * h * k2p);
        let k4p = u + h * k3u;
        let k4u = self.accel(vbar[2], phi + h * k3p);
        (
            phi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        )
    }
}

/// Step count for one trajectory.
pub fn plan_steps(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    v0: f64,
    max_abs_delta: f64,
    opts: &ScOptions,
) -> usize {
    let mut h = pulse.tau0 / 200.0;
    let fmax = scales.f1.max(scales.f2);
    if fmax > 0.0 {
        h = h.min(1.0 / (100.0 * fmax));
    }
    let u0 = 2.0 * scales.k * v0;
    let umax = (u0 * u0 + 8.0 * scales.omega_k * model.v1.max(model.v2)).sqrt();
    if umax > 0.0 {
        h = h.min(opts.max_phase_step / umax);
    }
    let wint = max_abs_delta + (model.v2 - model.v1).abs() + pulse.omega0;
    if wint > 0.0 {
        h = h.min(opts.max_internal_step / wint);
    }
    ((pulse.t_p / h).ceil() as usize).max(1) * opts.refine
}

/// Outcome of one trajectory over several detunings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    /// Final `|c₂|²` per detuning.
    pub population: Vec<f64>,
    pub steps: usize,
    pub norm_drift: f64,
}

/// Magic lattice: the COM path is independent of the internal state, so one
/// path serves every detuning.
fn run_magic(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    deltas: &[f64],
    phi0: f64,
    u0: f64,
    n: usize,
) -> TrajectoryOutcome {
    let com = Com {
        two_omega_k: 2.0 * scales.omega_k,
    };
    let h = pulse.t_p / n as f64;
    let b1 = hermite5(GAUSS_C1);
    let b2 = hermite5(GAUSS_C2);
    let vbar = [model.v1; 3];
    let nd = deltas.len();
    let mut c1 = vec![C64::new(1.0, 0.0); nd];
    let mut c2 = vec![C64::new(0.0, 0.0); nd];
    let (mut phi, mut u) = (phi0, u0);
    for s in 0..n {
        let t0 = s as f64 * h;
        let (phi1, u1) = com.rk4(phi, u, h, vbar);
        let y = [
            phi,
            h * u,
            h * h * com.accel(model.v1, phi),
            phi1,
            h * u1,
            h * h * com.accel(model.v1, phi1),
        ];
        let g1: f64 = b1.iter().zip(&y).map(|(b, y)| b * y).sum();
        let g2: f64 = b2.iter().zip(&y).map(|(b, y)| b * y).sum();
        let w = [
            pulse.envelope(t0 + GAUSS_C1 * h) * model.parity.profile(g1),
            pulse.envelope(t0 + GAUSS_C2 * h) * model.parity.profile(g2),
        ];
        for j in 0..nd {
            internal_step([deltas[j]; 2], w, h, &mut c1[j], &mut c2[j]);
        }
        phi = phi1;
        u = u1;
    }
    finish(c1, c2, n)
}

fn finish(c1: Vec<C64>, c2: Vec<C64>, steps: usize) -> TrajectoryOutcome {
    let norm_drift = c1
        .iter()
        .zip(&c2)
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max);
    TrajectoryOutcome {
        population: c2.iter().map(|c| c.norm_sqr().min(1.0)).collect(),
        steps,
        norm_drift,
    }
}

/// Co-integrates COM and internal state for one detuning, optionally
/// recording `(t, φ, u, |c₂|²)` every `record` steps.
#[allow(clippy::too_many_arguments)]
fn run_coupled(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    delta: f64,
    phi0: f64,
    u0: f64,
    n: usize,
    record: Option<usize>,
) -> (Trajectory, Vec<[f64; 4]>) {
    let com = Com {
        two_omega_k: 2.0 * scales.omega_k,
    };
    let h = pulse.t_p / n as f64;
    let b1 = hermite5(GAUSS_C1);
    let b2 = hermite5(GAUSS_C2);
    let depth = |p2: f64| (1.0 - p2) * model.v1 + p2 * model.v2;
    let (mut phi, mut u) = (phi0, u0);
    let mut c1 = C64::new(1.0, 0.0);
    let mut c2 = C64::new(0.0, 0.0);
    let mut trace = Vec::new();
    if record.is_some() {
        trace.push([0.0, phi, u, 0.0]);
    }
    for s in 0..n {
        let t0 = s as f64 * h;
        let p_start = c2.norm_sqr();
        let mut p_end = p_start;
        let mut out = (phi, u, c1, c2);
        // Predictor with the start populations, then a corrector with the
        // populations interpolated across the step.
        for _ in 0..2 {
            let vb = [depth(p_start), depth(0.5 * (p_start + p_end)), depth(p_end)];
            let (phi1, u1) = com.rk4(phi, u, h, vb);
            let y = [
                phi,
                h * u,
                h * h * com.accel(vb[0], phi),
                phi1,
                h * u1,
                h * h * com.accel(vb[2], phi1),
            ];
            let g1: f64 = b1.iter().zip(&y).map(|(b, y)| b * y).sum();
            let g2: f64 = b2.iter().zip(&y).map(|(b, y)| b * y).sum();
            let dc = [local_detuning(model, g1, delta), local_detuning(model, g2, delta)];
            let w = [
                pulse.envelope(t0 + GAUSS_C1 * h) * model.parity.profile(g1),
                pulse.envelope(t0 + GAUSS_C2 * h) * model.parity.profile(g2),
            ];
            let (mut a, mut b) = (c1, c2);
            internal_step(dc, w, h, &mut a, &mut b);
            p_end = b.norm_sqr();
            out = (phi1, u1, a, b);
            if model.is_magic() {
                break;
            }
        }
        (phi, u, c1, c2) = out;
        if let Some(every) = record {
            if (s + 1) % every == 0 || s + 1 == n {
                trace.push([t0 + h, phi, u, c2.norm_sqr()]);
            }
        }
    }
    let traj = Trajectory {
        z: phi / (2.0 * scales.k),
        v: u / (2.0 * scales.k),
        c1,
        c2,
        t: pulse.t_p,
    };
    (traj, trace)
}

/// Final `|c₂|²` of every detuning in `deltas` for one trajectory.
pub fn run_trajectory_multi(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    deltas: &[f64],
    z0: f64,
    v0: f64,
    opts: &ScOptions,
) -> TrajectoryOutcome {
    let dmax = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let n = plan_steps(model, scales, pulse, v0, dmax, opts);
    let phi0 = 2.0 * scales.k * z0;
    let u0 = 2.0 * scales.k * v0;
    if pulse.omega0 == 0.0 {
        return TrajectoryOutcome {
            population: vec![0.0; deltas.len()],
            steps: 0,
            norm_drift: 0.0,
        };
    }
    if model.is_magic() {
        return run_magic(model, scales, pulse, deltas, phi0, u0, n);
    }
    let mut c1 = Vec::with_capacity(deltas.len());
    let mut c2 = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let (t, _) = run_coupled(model, scales, pulse, d, phi0, u0, n, None);
        c1.push(t.c1);
        c2.push(t.c2);
    }
    finish(c1, c2, n)
}

/// Final `|c₂|²` of one trajectory started in level 1 at `(z0, v0)`.
pub fn run_trajectory(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    delta: f64,
    z0: f64,
    v0: f64,
) -> Result<f64> {
    let out = run_trajectory_multi(model, scales, pulse, &[delta], z0, v0, &ScOptions::default());
    if out.norm_drift > 1e-6 {
        return Err(Error::Convergence(format!(
            "internal norm drift {:.3e} exceeds 1e-6",
            out.norm_drift
        )));
    }
    Ok(out.population[0])
}

/// One row of a trajectory trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub z: f64,
    pub v: f64,
    pub population_2: f64,
}

/// Trajectory sampled every `every` steps, for debugging and energy checks.
#[allow(clippy::too_many_arguments)]
pub fn trace_trajectory(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    delta: f64,
    z0: f64,
    v0: f64,
    opts: &ScOptions,
    every: usize,
) -> Vec<TracePoint> {
    let n = plan_steps(model, scales, pulse, v0, delta.abs(), opts);
    let k2 = 2.0 * scales.k;
    let (_, trace) = run_coupled(model, scales, pulse, delta, k2 * z0, k2 * v0, n, Some(every.max(1)));
    trace
        .into_iter()
        .map(|[t, phi, u, p]| TracePoint {
            t,
            z: phi / k2,
            v: u / k2,
            population_2: p,
        })
        .collect()
}

/// Initial `(z₀, v₀)` of trajectory `index`: `z` uniform on one lattice
/// period, `v` Maxwellian. Each index owns its own counter-based stream.
pub fn sample_initial(model: &LatticeModel, seed: u64, index: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z = rng.random::<f64>() * 0.5 * model.wavelength;
    let sigma_v = (K_B * model.temperature / model.mass).sqrt();
    let v = if sigma_v > 0.0 {
        Normal::new(0.0, sigma_v)
            .map_err(|e| invalid(format!("velocity distribution: {e}")))?
            .sample(&mut rng)
    } else {
        0.0
    };
    Ok((z, v))
}

/// Running sums of one block of trajectories.
#[derive(Debug, Clone)]
struct Block {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    steps_min: usize,
    steps_max: usize,
    norm_drift: f64,
}

impl Block {
    fn merge(mut self, other: &Block) -> Block {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.steps_min = self.steps_min.min(other.steps_min);
        self.steps_max = self.steps_max.max(other.steps_max);
        self.norm_drift = self.norm_drift.max(other.norm_drift);
        self
    }
}

/// Pairwise reduction in a fixed tree, independent of scheduling.
fn pairwise(blocks: &[Block]) -> Block {
    if blocks.len() == 1 {
        return blocks[0].clone();
    }
    let mid = blocks.len() / 2;
    pairwise(&blocks[..mid]).merge(&pairwise(&blocks[mid..]))
}

/// Ensemble-averaged spectrum `K_b(δ)` with Monte Carlo standard errors.
pub fn sc_spectrum(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    ens: &EnsembleConfig,
) -> Result<Spectrum> {
    model.validate()?;
    ens.validate()?;
    let deltas = &model.delta_grid;
    let nd = deltas.len();
    let n_blocks = ens.n_traj.div_ceil(CHUNK);
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<Block> {
            let mut blk = Block {
                sum: vec![0.0; nd],
                sum_sq: vec![0.0; nd],
                steps_min: usize::MAX,
                steps_max: 0,
                norm_drift: 0.0,
            };
            for i in b * CHUNK..((b + 1) * CHUNK).min(ens.n_traj) {
                let (z0, v0) = sample_initial(model, ens.seed, i as u64)?;
                let out = run_trajectory_multi(model, scales, pulse, deltas, z0, v0, &ens.options);
                for (j, p) in out.population.iter().enumerate() {
                    blk.sum[j] += p;
                    blk.sum_sq[j] += p * p;
                }
                blk.steps_min = blk.steps_min.min(out.steps);
                blk.steps_max = blk.steps_max.max(out.steps);
                blk.norm_drift = blk.norm_drift.max(out.norm_drift);
            }
            Ok(blk)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = pairwise(&blocks);
    if total.norm_drift > 1e-6 {
        return Err(Error::Convergence(format!(
            "internal norm drift {:.3e} exceeds 1e-6",
            total.norm_drift
        )));
    }
    let n = ens.n_traj as f64;
    let value: Vec<f64> = total.sum.iter().map(|s| (s / n).clamp(0.0, 1.0)).collect();
    let stderr: Vec<f64> = (0..nd)
        .map(|j| {
            if ens.n_traj < 2 {
                return 0.0;
            }
            let mean = total.sum[j] / n;
            let var = ((total.sum_sq[j] - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    let conv = ScConvergence {
        n_traj: ens.n_traj,
        seed: ens.seed,
        steps_per_trajectory_min: total.steps_min,
        steps_per_trajectory_max: total.steps_max,
        max_norm_drift: total.norm_drift,
        max_stderr: stderr.iter().cloned().fold(0.0, f64::max),
    };
    let mut spec = Spectrum::new(ModelTag::Semiclassical, deltas.clone(), value, Some(stderr))?;
    spec.meta.omega_k = scales.omega_k;
    spec.meta.seed = Some(ens.seed);
    spec.meta.convergence = Some(Convergence::Semiclassical(conv));
    Ok(spec)
}
