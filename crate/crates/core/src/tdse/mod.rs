//! Exact propagation on the coupled internal ⊗ momentum ladder.

pub mod hamiltonian;
pub mod propagator;
pub mod window;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use hamiltonian::{assemble, Ladder, LadderHamiltonian};

use crate::ensemble::initial_ladder_index;
use crate::error::{Error, Result};
use crate::model::{DerivedScales, DrivePulse, LatticeModel};
use propagator::{evolve_cfm4, EvolveStats};

/// Amplitudes of both levels on a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSpinor {
    /// Quasimomentum `p₀/(ħk)`.
    pub quasi: f64,
    pub ladder: Ladder,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
}

impl MomentumSpinor {
    /// All population in level 1 on rung `n0`.
    pub fn ground(quasi: f64, ladder: Ladder, n0: i64) -> Self {
        let d = ladder.len();
        let mut a = vec![C64::new(0.0, 0.0); d];
        a[ladder.index(n0)] = C64::new(1.0, 0.0);
        MomentumSpinor {
            quasi,
            ladder,
            a,
            b: vec![C64::new(0.0, 0.0); d],
        }
    }

    fn from_packed(quasi: f64, ladder: Ladder, psi: &[C64]) -> Self {
        let d = ladder.len();
        MomentumSpinor {
            quasi,
            ladder,
            a: psi[..d].to_vec(),
            b: psi[d..].to_vec(),
        }
    }

    fn packed(&self) -> Vec<C64> {
        let mut v = self.a.clone();
        v.extend_from_slice(&self.b);
        v
    }

    /// Scaled momentum `q + 2n` of rung index `i`.
    pub fn beta_of(&self, i: usize) -> f64 {
        self.quasi + 2.0 * self.ladder.rung(i) as f64
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.iter().chain(self.b.iter()).map(|z| z.norm_sqr()).sum()
    }

    pub fn population_b(&self) -> f64 {
        self.b.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Populations of the `width` outermost rungs below and above.
    pub fn edge_populations(&self, width: usize) -> (f64, f64) {
        let d = self.a.len();
        let w = width.min(d);
        let pop = |i: usize| self.a[i].norm_sqr() + self.b[i].norm_sqr();
        let lo = (0..w).map(pop).sum();
        let hi = (d - w..d).map(pop).sum();
        (lo, hi)
    }
}

/// Numerical controls of the TDSE solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdseOptions {
    /// Magnus steps per `τ₀`.
    pub steps_per_tau0: f64,
    /// Truncation of the Chebyshev series.
    pub series_tol: f64,
    /// Estimated population above which a rung is kept.
    pub reach_threshold: f64,
    /// Extra rungs on each side of the planned window.
    pub margin: i64,
    /// Bound on the population of the two outermost rungs on each side.
    pub edge_guard: f64,
    /// Rungs added to a failing side.
    pub expand_by: i64,
    pub max_expansions: usize,
}

impl Default for TdseOptions {
    fn default() -> Self {
        TdseOptions {
            steps_per_tau0: 8.0,
            series_tol: 1e-15,
            reach_threshold: 1e-13,
            margin: 2,
            edge_guard: 1e-10,
            expand_by: 8,
            max_expansions: 6,
        }
    }
}

/// Ladder choice for one scaled momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderPlan {
    pub quasi: f64,
    pub n0: i64,
    pub ladder: Ladder,
}

/// Result of one `(β, δ)` propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TdseOutcome {
    /// Final population of level 2.
    pub population: f64,
    pub norm_drift: f64,
    pub edge_population: f64,
    pub ladder: Ladder,
    pub steps: usize,
    pub matvecs: usize,
    pub expansions: usize,
}

/// Differences against a refined run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub beta: f64,
    pub delta: f64,
    pub population: f64,
    pub step_halving_change: f64,
    pub widening_change: f64,
}

impl ConvergenceCheck {
    pub fn max_change(&self) -> f64 {
        self.step_halving_change.max(self.widening_change)
    }
}

/// TDSE solver bound to one model and pulse.
#[derive(Debug, Clone)]
pub struct TdseSolver<'a> {
    pub model: &'a LatticeModel,
    pub scales: &'a DerivedScales,
    pub pulse: &'a DrivePulse,
    pub opts: TdseOptions,
}

impl<'a> TdseSolver<'a> {
    pub fn new(
        model: &'a LatticeModel,
        scales: &'a DerivedScales,
        pulse: &'a DrivePulse,
        opts: TdseOptions,
    ) -> Self {
        TdseSolver {
            model,
            scales,
            pulse,
            opts,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.opts.steps_per_tau0 * self.pulse.t_p / self.pulse.tau0).ceil() as usize
    }

    pub fn plan(&self, beta: f64) -> Result<LadderPlan> {
        let (n0, quasi) = initial_ladder_index(beta);
        self.plan_with_index(quasi, n0)
    }

    /// Plan for an explicit `(n₀, q)` decomposition of the momentum.
    pub fn plan_with_index(&self, quasi: f64, n0: i64) -> Result<LadderPlan> {
        if !quasi.is_finite() {
            return Err(Error::InvalidParameter("non-finite momentum".into()));
        }
        let ladder = window::plan_ladder(
            self.model,
            self.scales,
            quasi,
            n0,
            self.opts.reach_threshold,
            self.opts.margin,
        )?;
        Ok(LadderPlan { quasi, n0, ladder })
    }

    /// Propagates on a fixed ladder without any guard.
    pub fn evolve_on(
        &self,
        plan: &LadderPlan,
        ladder: Ladder,
        delta: f64,
        n_steps: usize,
    ) -> (MomentumSpinor, EvolveStats) {
        let h = assemble(self.model, self.scales, plan.quasi, ladder, delta, 0.0);
        let mut psi = MomentumSpinor::ground(plan.quasi, ladder, plan.n0).packed();
        let pulse = *self.pulse;
        let stats = if pulse.omega0 == 0.0 {
            EvolveStats::default()
        } else {
            evolve_cfm4(
                &h,
                |t| pulse.envelope(t),
                pulse.omega0,
                pulse.t_p,
                n_steps,
                self.opts.series_tol,
                &mut psi,
            )
        };
        (MomentumSpinor::from_packed(plan.quasi, ladder, &psi), stats)
    }

    /// Propagates with the edge guard, widening the ladder as needed.
    pub fn run(&self, plan: &LadderPlan, delta: f64) -> Result<TdseOutcome> {
        self.run_with(plan, plan.ladder, delta, self.n_steps())
    }

    fn run_with(
        &self,
        plan: &LadderPlan,
        start: Ladder,
        delta: f64,
        n_steps: usize,
    ) -> Result<TdseOutcome> {
        let mut ladder = start;
        let mut expansions = 0;
        loop {
            let (spinor, stats) = self.evolve_on(plan, ladder, delta, n_steps);
            let (lo, hi) = spinor.edge_populations(2);
            let guard = self.opts.edge_guard;
            if lo < guard && hi < guard {
                let norm = spinor.norm_sqr();
                return Ok(TdseOutcome {
                    population: spinor.population_b(),
                    norm_drift: (norm - 1.0).abs(),
                    edge_population: lo.max(hi),
                    ladder,
                    steps: stats.steps,
                    matvecs: stats.matvecs,
                    expansions,
                });
            }
            if expansions == self.opts.max_expansions {
                return Err(Error::Convergence(format!(
                    "edge population {:.3e}/{:.3e} above guard after {} expansions \
                     (q = {}, n0 = {}, delta = {delta}, ladder {}..{})",
                    lo, hi, expansions, plan.quasi, plan.n0, ladder.n_min, ladder.n_max
                )));
            }
            let e = self.opts.expand_by;
            ladder = ladder.widened(
                if lo >= guard { e } else { 0 },
                if hi >= guard { e } else { 0 },
            );
            expansions += 1;
        }
    }

    /// Compares the production result with a halved step and a ladder
    /// widened by four rungs on each side.
    pub fn convergence_check(&self, beta: f64, delta: f64) -> Result<ConvergenceCheck> {
        let plan = self.plan(beta)?;
        let base = self.run(&plan, delta)?;
        let fine = self.run_with(&plan, base.ladder, delta, 2 * self.n_steps())?;
        let wide = self.run_with(&plan, base.ladder.widened(4, 4), delta, self.n_steps())?;
        Ok(ConvergenceCheck {
            beta,
            delta,
            population: base.population,
            step_halving_change: (fine.population - base.population).abs(),
            widening_change: (wide.population - base.population).abs(),
        })
    }
}

/// Final level-2 population after the pulse for scaled momentum `beta`.
pub fn propagate(
    model: &LatticeModel,
    scales: &DerivedScales,
    pulse: &DrivePulse,
    beta: f64,
    delta: f64,
) -> Result<f64> {
    let solver = TdseSolver::new(model, scales, pulse, TdseOptions::default());
    let plan = solver.plan(beta)?;
    Ok(solver.run(&plan, delta)?.population)
}
