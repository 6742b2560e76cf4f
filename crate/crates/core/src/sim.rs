//! The particle time loop and ensemble/error diagnostics.
//!
//! Each step: right-hand side and operator from the time-level moments, field
//! solve, centered electric field, particle push, deposition.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{electric_field, FieldSolver, Linearization};
use crate::ic::InitialCondition;
use crate::math;
use crate::params::{derive_time_step, Grid, PoissonMode, SimParams};
use crate::particles::{deposit_into, deposit_moments, init_particles, push_particles, MomentSet, ParticleEnsemble};

/// Grid fields at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub n: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub e: Vec<f64>,
    /// Current `J = nu`; kept so coarse-graining can average `J` and `n`
    /// separately.
    pub current: Vec<f64>,
}

impl Snapshot {
    fn from_state(t: f64, moments: &MomentSet, phi: &[f64], e: &[f64]) -> Self {
        Snapshot {
            t,
            n: moments.density.clone(),
            u: moments.velocity(),
            phi: phi.to_vec(),
            e: e.to_vec(),
            current: moments.current.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    /// Newton iterations of every step (1 per step for the penalty scheme).
    pub newton_iterations: Vec<usize>,
}

impl RunOutput {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("run output always holds a snapshot")
    }

    pub fn mean_newton_iterations(&self) -> f64 {
        if self.newton_iterations.is_empty() {
            return 0.0;
        }
        self.newton_iterations.iter().sum::<usize>() as f64 / self.newton_iterations.len() as f64
    }
}

/// Everything a run carries from one time level to the next.
#[derive(Debug, Clone)]
pub struct SimState {
    pub ensemble: ParticleEnsemble,
    pub moments: MomentSet,
    pub phi: Vec<f64>,
    pub e: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

pub fn field_solver(params: &SimParams) -> FieldSolver {
    FieldSolver {
        epsilon: params.effective_epsilon(),
        linearization: match params.poisson_mode {
            PoissonMode::Penalty => Linearization::Penalty,
            PoissonMode::Newton | PoissonMode::Quasineutral => Linearization::Newton,
        },
        tol: params.newton_tol,
        max_iter: params.newton_max_iter,
    }
}

/// Builds the initial state around an existing ensemble.
///
/// The initial potential solves the `dt = 0` form of the field equation,
/// `-eps^2 phi'' + e^phi = n`, by Newton iteration from `phi = 0`.
pub fn state_from_ensemble(
    ensemble: ParticleEnsemble,
    grid: &Grid,
    solver: &FieldSolver,
) -> Result<SimState> {
    let moments = deposit_moments(&ensemble, grid);
    let initial = FieldSolver {
        linearization: Linearization::Newton,
        ..*solver
    };
    let phi = initial
        .solve(&moments, grid, 0.0, &vec![0.0; grid.n_cells])
        .map_err(|e| e.at_step(0))?
        .phi;
    let e = electric_field(&phi, grid);
    Ok(SimState {
        ensemble,
        moments,
        phi,
        e,
        t: 0.0,
        step: 0,
    })
}

/// Initializes particles for `params`/`ic` and returns the state with the
/// run's fixed time step.
pub fn initial_state(params: &SimParams, ic: &InitialCondition, seed: u64) -> Result<(SimState, f64)> {
    params.validate()?;
    let grid = params.grid();
    ic.check_positive(&grid)?;
    let dt = derive_time_step(params.cfl, grid.h, ic.max_speed(grid.centers()))?;
    let ens = init_particles(ic, &grid, params.particles_per_cell(), params.placement, seed)?;
    let state = state_from_ensemble(ens, &grid, &field_solver(params))?;
    Ok((state, dt))
}

/// Advances one step of length `dt`; returns the Newton iteration count.
pub fn step(state: &mut SimState, solver: &FieldSolver, grid: &Grid, dt: f64) -> Result<usize> {
    let index = state.step + 1;
    let sol = solver
        .solve(&state.moments, grid, dt, &state.phi)
        .map_err(|e| e.at_step(index))?;
    state.phi = sol.phi;
    state.e = electric_field(&state.phi, grid);
    push_particles(&mut state.ensemble, &state.e, grid, dt).map_err(|e| e.at_step(index))?;
    deposit_into(&state.ensemble, grid, &mut state.moments);
    state.t += dt;
    state.step = index;
    Ok(sol.iterations)
}

/// Runs to `params.t_final`, recording a snapshot at the step nearest each
/// requested output time (and always at the end). The last step is shortened
/// to land on `t_final`.
pub fn run(
    params: &SimParams,
    ic: &InitialCondition,
    seed: u64,
    output_times: &[f64],
) -> Result<RunOutput> {
    let (mut state, dt) = initial_state(params, ic, seed)?;
    run_from_state(params, &mut state, dt, seed, output_times)
}

/// Advances `state` to `params.t_final`; the final particles stay in `state`.
pub fn run_from_state(
    params: &SimParams,
    state: &mut SimState,
    dt: f64,
    seed: u64,
    output_times: &[f64],
) -> Result<RunOutput> {
    let grid = params.grid();
    let solver = field_solver(params);
    let t_final = params.t_final;
    let eps_t = 1e-9 * dt;
    let mut pending: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&s| s < t_final - eps_t)
        .collect();
    pending.sort_by(|a, b| b.total_cmp(a));

    let mut snapshots = Vec::new();
    let mut iterations = Vec::new();
    loop {
        let remaining = t_final - state.t;
        let done = remaining <= eps_t;
        let h_next = if remaining < dt { remaining } else { dt };
        while pending
            .last()
            .is_some_and(|&s| done || s <= state.t + 0.5 * h_next)
        {
            pending.pop();
            snapshots.push(Snapshot::from_state(state.t, &state.moments, &state.phi, &state.e));
        }
        if done {
            break;
        }
        iterations.push(step(state, &solver, &grid, h_next)?);
        if h_next == remaining {
            state.t = t_final;
        }
    }
    snapshots.push(Snapshot::from_state(state.t, &state.moments, &state.phi, &state.e));
    Ok(RunOutput {
        snapshots,
        seed,
        dt,
        steps: state.step,
        newton_iterations: iterations,
    })
}

/// Pointwise arithmetic mean over runs, accumulated in slice order.
pub fn ensemble_mean(runs: &[RunOutput]) -> Result<Vec<Snapshot>> {
    let first = runs.first().ok_or(Error::InvalidParameter {
        name: "n_ensemble",
        reason: "need at least one run",
    })?;
    let mut mean = first.snapshots.clone();
    for r in &runs[1..] {
        if r.snapshots.len() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: r.snapshots.len(),
            });
        }
        for (m, s) in mean.iter_mut().zip(&r.snapshots) {
            for (a, b) in [
                (&mut m.n, &s.n),
                (&mut m.u, &s.u),
                (&mut m.phi, &s.phi),
                (&mut m.e, &s.e),
                (&mut m.current, &s.current),
            ] {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
    }
    let inv = 1.0 / runs.len() as f64;
    for m in &mut mean {
        for v in [&mut m.n, &mut m.u, &mut m.phi, &mut m.e, &mut m.current] {
            v.iter_mut().for_each(|x| *x *= inv);
        }
    }
    Ok(mean)
}

/// `||g - q|| / ||q||` with Euclidean norms.
pub fn relative_error(g: &[f64], q: &[f64]) -> Result<f64> {
    if g.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: g.len(),
        });
    }
    let den: f64 = q.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = g.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(math::sqrt(num) / math::sqrt(den))
}

/// `sqrt(h sum (g - q)^2)`
pub fn l2_error(g: &[f64], q: &[f64], h: f64) -> f64 {
    let s: f64 = g.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    math::sqrt(h * s)
}

/// Averages consecutive blocks of `factor` cells.
pub fn block_average(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || fine.len() % factor != 0 {
        return Err(Error::InvalidParameter {
            name: "n_cells",
            reason: "reference resolution must be a multiple of the test resolution",
        });
    }
    let inv = 1.0 / factor as f64;
    Ok(fine.chunks(factor).map(|c| c.iter().sum::<f64>() * inv).collect())
}

/// Coarse-grains a snapshot: cell averages of `n`, `J` and `phi`, with
/// `u = <J>/<n>` and `E` recomputed from the averaged potential.
pub fn coarsen_snapshot(fine: &Snapshot, factor: usize, coarse: &Grid) -> Result<Snapshot> {
    let n = block_average(&fine.n, factor)?;
    let current = block_average(&fine.current, factor)?;
    let phi = block_average(&fine.phi, factor)?;
    let u = n
        .iter()
        .zip(&current)
        .map(|(&d, &j)| if d < crate::particles::DENSITY_GUARD { 0.0 } else { j / d })
        .collect();
    let e = electric_field(&phi, coarse);
    Ok(Snapshot {
        t: fine.t,
        n,
        u,
        phi,
        e,
        current,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|&v| math::ln(v)).collect();
    let ly: Vec<f64> = y.iter().map(|&v| math::ln(v)).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
