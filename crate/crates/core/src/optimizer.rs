//! Iterative orbital optimization.
//!
//! One step optimizes the orbital in slot one against all others: with
//! `P` the projector on `span(phi_2 .. phi_M)` and `g~_J = (1 - P) g_J`
//! for every configuration `J` that contains slot one, the best new
//! `phi_1` is the top eigenvector of `T_1 = sum_J |g~_J><g~_J|`. A sweep
//! applies this step `M` times, rotating the orbitals circularly after each
//! step so that every orbital takes a turn. `I` never decreases.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms;
use crate::error::{Error, Result};
use crate::fock::{FockBasis, WaveFunction};
use crate::linalg::{self, C64};
use crate::projection::{eta_all, g_functions, objective, ConfigAmplitudes, OrbitalSet};

/// Top eigenvalues of `T_1` at or below this count as zero (stagnation).
pub const STAGNATION_EIGENVALUE: f64 = 1e-26;

/// Relative width of the top eigenspace used for tie-breaking.
pub const DEGENERATE_TOP_RTOL: f64 = 1e-10;

/// Orbital drift that triggers re-orthonormalization after a sweep.
pub const DRIFT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Orthonormalized complex Gaussian matrices, one stream per restart.
    #[default]
    Random,
    /// Restart 0 starts from the `M` most occupied natural orbitals; the
    /// others are random.
    NaturalOrbitals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub n_orbitals: usize,
    pub max_sweeps: usize,
    /// Convergence threshold on the gain of `I` over one full sweep.
    pub sweep_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: Initialization,
}

impl OptimizerConfig {
    pub fn new(n_orbitals: usize) -> Self {
        Self {
            n_orbitals,
            max_sweeps: 500,
            sweep_tolerance: 1e-12,
            restarts: 6,
            seed: 0,
            init: Initialization::Random,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.sweep_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if self.sweep_tolerance.is_nan() || self.sweep_tolerance <= 0.0 {
            return Err(Error::Config("sweep_tolerance must be > 0".into()));
        }
        if self.n_orbitals < 1 {
            return Err(Error::Config("M must be >= 1".into()));
        }
        Ok(())
    }
}

/// History of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub restart_id: usize,
    /// `I` of the initial orbitals.
    pub initial: f64,
    /// `I` after every single-orbital update.
    pub steps: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Some update found `T_1` numerically zero.
    pub stagnated: bool,
    pub orbitals: OrbitalSet,
    pub amplitudes: ConfigAmplitudes,
}

impl OptimizationTrace {
    pub fn final_objective(&self) -> f64 {
        self.steps.last().copied().unwrap_or(self.initial)
    }

    /// `I` after `k` updates (`k = 0` is the initial value); saturates at the end.
    pub fn objective_after(&self, k: usize) -> f64 {
        if k == 0 {
            self.initial
        } else {
            self.steps
                .get(k - 1)
                .copied()
                .unwrap_or_else(|| self.final_objective())
        }
    }
}

/// Outcome of a multi-restart optimization.
#[derive(Debug, Clone)]
pub struct OptimizeReport {
    /// Index into `traces` of the run with the largest final `I`.
    pub best: usize,
    pub traces: Vec<OptimizationTrace>,
}

impl OptimizeReport {
    pub fn best_trace(&self) -> &OptimizationTrace {
        &self.traces[self.best]
    }

    pub fn best_objective(&self) -> f64 {
        self.best_trace().final_objective()
    }

    pub fn final_objectives(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.final_objective()).collect()
    }

    /// Spread of final `I` across restarts; large values flag local maxima.
    pub fn spread(&self) -> f64 {
        let finals = self.final_objectives();
        let max = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// CSV with header `restart,step,I`; step 0 holds the initial value.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("restart,step,I\n");
        for t in &self.traces {
            out.push_str(&format!("{},0,{:.16e}\n", t.restart_id, t.initial));
            for (k, v) in t.steps.iter().enumerate() {
                out.push_str(&format!("{},{},{:.16e}\n", t.restart_id, k + 1, v));
            }
        }
        out
    }
}

/// Seeded random orthonormal orbitals.
pub fn random_orbitals(d: usize, m: usize, seed: u64) -> Result<OrbitalSet> {
    random_orbitals_stream(d, m, seed, 0)
}

/// As [`random_orbitals`], drawing from an independent stream per restart.
pub fn random_orbitals_stream(d: usize, m: usize, seed: u64, stream: u64) -> Result<OrbitalSet> {
    if m > d || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= M <= d, got d={d} M={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // column-major fill
    let data: Vec<C64> = (0..d * m)
        .map(|_| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    OrbitalSet::orthonormalized(DMatrix::from_vec(d, m, data))
}

/// Per-step result of [`update_slot1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotUpdate {
    pub objective: f64,
    pub top_eigenvalue: f64,
    pub stagnated: bool,
}

/// Configurations containing slot one, as the partner columns `{2..M}` they use.
fn slot1_partner_sets(m: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![Vec::new()];
    }
    let rest = FockBasis::new(m - 1, n - 1).expect("N <= M");
    rest.iter()
        .map(|t| t.iter().map(|&j| j + 1).collect())
        .collect()
}

fn check_problem(f: &WaveFunction, m: usize) -> Result<()> {
    let (d, n) = (f.dim(), f.n_particles());
    if m < n || m > d {
        return Err(Error::InvalidDimension(format!(
            "need N <= M <= d, got N={n} M={m} d={d}"
        )));
    }
    Ok(())
}

/// Replace `phi_1` by the top eigenvector of `T_1`. Returns the new orbitals and `I`.
pub fn update_slot1(f: &WaveFunction, v: &OrbitalSet) -> Result<(OrbitalSet, f64)> {
    check_problem(f, v.n_orbitals())?;
    let before = objective(f, v)?;
    let mut out = v.clone();
    let sets = slot1_partner_sets(v.n_orbitals(), f.n_particles());
    update_in_place(f, &mut out, before, &sets)?;
    let after = objective(f, &out)?;
    Ok((out, after))
}

fn update_in_place(
    f: &WaveFunction,
    v: &mut OrbitalSet,
    current: f64,
    partner_sets: &[Vec<usize>],
) -> Result<SlotUpdate> {
    let d = v.dim();
    let m = v.n_orbitals();
    let n = f.n_particles();
    let gs = g_functions(f, v.matrix(), partner_sets);
    let others = v.matrix().columns(1, m - 1).clone_owned();
    let project_out = |g: &[C64]| -> Vec<C64> {
        let gv = linalg::to_dvector(g);
        if m == 1 {
            return g.to_vec();
        }
        let coeffs = others.adjoint() * &gv;
        let r = gv - &others * coeffs;
        r.iter().copied().collect()
    };
    let g_tilde: Vec<Vec<C64>> = gs.iter().map(|g| project_out(g)).collect();
    let old_phi = v.orbital(0);

    let (candidate, top) = if m == n {
        // single configuration: the optimum is g~ itself
        let g = &g_tilde[0];
        let norm2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        (g.clone(), norm2)
    } else {
        let mut t = DMatrix::<C64>::zeros(d, d);
        for g in &g_tilde {
            let gv = linalg::to_dvector(g);
            t.ger(C64::new(1.0, 0.0), &gv, &gv.conjugate(), C64::new(1.0, 0.0));
        }
        let (values, vectors) = linalg::hermitian_eigen_desc(&t);
        let top = values[0];
        let width = values
            .iter()
            .take_while(|&&x| x >= top - DEGENERATE_TOP_RTOL * top.abs())
            .count();
        let mut pick: Vec<C64> = vectors.column(0).iter().copied().collect();
        if width > 1 {
            // degenerate top level: stay as close to the current phi_1 as possible
            let basis = vectors.columns(0, width);
            let coeffs = basis.adjoint() * linalg::to_dvector(&old_phi);
            let proj = basis * coeffs;
            if proj.norm() > 1e-8 {
                pick = proj.iter().copied().collect();
            }
        }
        (pick, top)
    };

    if top <= STAGNATION_EIGENVALUE {
        return Ok(SlotUpdate {
            objective: current,
            top_eigenvalue: top,
            stagnated: true,
        });
    }

    let mut phi = project_out(&candidate);
    let norm = linalg::vec_norm(&phi);
    if norm == 0.0 {
        return Ok(SlotUpdate {
            objective: current,
            top_eigenvalue: top,
            stagnated: true,
        });
    }
    for z in &mut phi {
        *z /= norm;
    }
    linalg::fix_phase(&mut phi);
    // Only configurations containing slot one change:
    // I = I_rest + sum_J |<g_J|phi_1>|^2.
    let captured =
        |phi: &[C64]| -> f64 { gs.iter().map(|g| linalg::vdot(g, phi).norm_sqr()).sum() };
    let gain = captured(&phi) - captured(&old_phi);
    if gain < 0.0 {
        // the eigenvector is optimal up to round-off; never step downhill
        return Ok(SlotUpdate {
            objective: current,
            top_eigenvalue: top,
            stagnated: false,
        });
    }
    v.matrix_mut().column_mut(0).copy_from_slice(&phi);
    Ok(SlotUpdate {
        objective: current + gain,
        top_eigenvalue: top,
        stagnated: false,
    })
}

/// One sweep: `M` times (update slot one, then rotate). Returns `I` after each update.
pub fn sweep(f: &WaveFunction, v: &OrbitalSet) -> Result<(OrbitalSet, Vec<f64>)> {
    check_problem(f, v.n_orbitals())?;
    let mut out = v.clone();
    let sets = slot1_partner_sets(v.n_orbitals(), f.n_particles());
    let mut current = objective(f, v)?;
    let mut trace = Vec::with_capacity(v.n_orbitals());
    sweep_in_place(f, &mut out, &mut current, &sets, &mut trace)?;
    Ok((out, trace))
}

fn sweep_in_place(
    f: &WaveFunction,
    v: &mut OrbitalSet,
    current: &mut f64,
    sets: &[Vec<usize>],
    trace: &mut Vec<f64>,
) -> Result<bool> {
    let mut stagnated = false;
    for _ in 0..v.n_orbitals() {
        let step = update_in_place(f, v, *current, sets)?;
        stagnated |= step.stagnated;
        *current = step.objective;
        trace.push(step.objective);
        v.rotate_right();
    }
    if v.orthonormality_error() > DRIFT_TOL {
        linalg::orthonormalize_columns(v.matrix_mut())?;
    }
    // refresh the running value so round-off cannot accumulate across sweeps
    let exact = objective(f, v)?;
    *current = exact;
    if let Some(last) = trace.last_mut() {
        *last = exact;
    }
    Ok(stagnated)
}

/// Initial orbitals for restart `r`.
fn initial_orbitals(f: &WaveFunction, config: &OptimizerConfig, r: usize) -> Result<OrbitalSet> {
    let (d, m) = (f.dim(), config.n_orbitals);
    if r == 0 && config.init == Initialization::NaturalOrbitals {
        let rdm = closed_forms::one_particle_rdm(f);
        let (_, vectors) = rdm.natural_orbitals();
        return OrbitalSet::orthonormalized(vectors.columns(0, m).clone_owned());
    }
    random_orbitals_stream(d, m, config.seed, r as u64)
}

/// Sweep from `start` until the gain per sweep drops below tolerance.
pub fn run_from(
    f: &WaveFunction,
    start: OrbitalSet,
    config: &OptimizerConfig,
    restart_id: usize,
) -> Result<OptimizationTrace> {
    check_problem(f, start.n_orbitals())?;
    let sets = slot1_partner_sets(start.n_orbitals(), f.n_particles());
    let mut v = start;
    let initial = objective(f, &v)?;
    let mut current = initial;
    let mut steps = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    let mut sweeps = 0;
    while sweeps < config.max_sweeps {
        let before = current;
        stagnated |= sweep_in_place(f, &mut v, &mut current, &sets, &mut steps)?;
        sweeps += 1;
        if current - before < config.sweep_tolerance {
            converged = true;
            break;
        }
    }
    let amplitudes = eta_all(f, &v)?;
    Ok(OptimizationTrace {
        restart_id,
        initial,
        steps,
        sweeps,
        converged,
        stagnated,
        orbitals: v,
        amplitudes,
    })
}

/// One seeded run (restart `r` of `config`).
pub fn run_single(
    f: &WaveFunction,
    config: &OptimizerConfig,
    r: usize,
) -> Result<OptimizationTrace> {
    config.validate()?;
    check_problem(f, config.n_orbitals)?;
    let start = initial_orbitals(f, config, r)?;
    run_from(f, start, config, r)
}

/// Independent restarts; the report keeps all traces and marks the best.
pub fn optimize(f: &WaveFunction, config: &OptimizerConfig) -> Result<OptimizeReport> {
    config.validate()?;
    check_problem(f, config.n_orbitals)?;
    let traces = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_single(f, config, r))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, t) in traces.iter().enumerate() {
        if t.final_objective() > traces[best].final_objective() {
            best = k;
        }
    }
    Ok(OptimizeReport { best, traces })
}
