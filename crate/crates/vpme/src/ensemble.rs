//! Parallel ensembles of independent particle runs.

use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use vpme_core::sim::{ensemble_mean, initial_state, run_from_state, SimState};
use vpme_core::{run_seed, InitialCondition, RunOutput, SimParams, Snapshot};

/// One finished run plus its wall time (reported, never written to CSV).
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub output: RunOutput,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn summary(&self) -> String {
        format!(
            "run {:>4}: steps {:>6}, mean newton iterations {:.3}, wall {:.3} s",
            self.index,
            self.output.steps,
            self.output.mean_newton_iterations(),
            self.wall_seconds
        )
    }
}

/// Run-index-ordered mean of the snapshots, plus every run.
#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub mean: Vec<Snapshot>,
    pub runs: Vec<RunRecord>,
}

impl EnsembleOutput {
    pub fn last(&self) -> &Snapshot {
        self.mean.last().expect("ensemble mean always holds a snapshot")
    }
}

/// Runs member `index` with seed `run_seed(base_seed, index, sample)`; returns
/// the final state as well so callers can dump particles.
pub fn run_member(
    params: &SimParams,
    ic: &InitialCondition,
    index: usize,
    sample: u64,
    output_times: &[f64],
) -> Result<(RunRecord, SimState)> {
    let start = Instant::now();
    let seed = run_seed(params.base_seed, index as u64, sample);
    let (mut state, dt) = initial_state(params, ic, seed)?;
    let output = run_from_state(params, &mut state, dt, seed, output_times)?;
    let rec = RunRecord {
        index,
        output,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    log::debug!("{}", rec.summary());
    Ok((rec, state))
}

/// `params.n_ensemble` runs in parallel; the mean is reduced in run order, so
/// the result does not depend on the thread count.
pub fn run_ensemble(
    params: &SimParams,
    ic: &InitialCondition,
    sample: u64,
    output_times: &[f64],
) -> Result<EnsembleOutput> {
    let runs: Vec<RunRecord> = (0..params.n_ensemble)
        .into_par_iter()
        .map(|i| {
            run_member(params, ic, i, sample, output_times)
                .map(|(r, _)| r)
                .with_context(|| format!("ensemble run {i} failed"))
        })
        .collect::<Result<_>>()?;
    let outputs: Vec<RunOutput> = runs.iter().map(|r| r.output.clone()).collect();
    let mean = ensemble_mean(&outputs)?;
    Ok(EnsembleOutput { mean, runs })
}

/// Runs `f` inside a dedicated pool of `threads` workers (`None`: the
/// global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| anyhow!("cannot build a {n}-thread pool: {e}"))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vpme_core::ic;

    fn small() -> SimParams {
        SimParams {
            n_cells: 10,
            n_particles_total: 2000,
            n_ensemble: 4,
            t_final: 0.05,
            ..SimParams::default()
        }
    }

    #[test]
    fn single_member_ensemble_is_that_run() {
        let p = SimParams {
            n_ensemble: 1,
            ..small()
        };
        let e = run_ensemble(&p, &ic::ap_test(), 0, &[]).unwrap();
        let solo = vpme_core::sim::run(&p, &ic::ap_test(), run_seed(p.base_seed, 0, 0), &[]).unwrap();
        assert_eq!(e.mean, solo.snapshots);
    }

    #[test]
    fn thread_count_does_not_change_the_mean() {
        let p = small();
        let a = with_threads(Some(1), || run_ensemble(&p, &ic::ap_test(), 0, &[0.02])).unwrap().unwrap();
        let b = with_threads(Some(3), || run_ensemble(&p, &ic::ap_test(), 0, &[0.02])).unwrap().unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.runs.len(), 4);
        assert!(a.runs.iter().enumerate().all(|(i, r)| r.index == i));
    }

    #[test]
    fn deterministic_layout_mean_equals_each_run() {
        let p = SimParams {
            placement: vpme_core::Placement::Centered,
            ..small()
        };
        let e = run_ensemble(&p, &ic::ap_test(), 0, &[]).unwrap();
        for r in &e.runs {
            let d: f64 = r.output.last().n.iter().zip(&e.last().n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn failures_name_the_run() {
        let p = SimParams {
            newton_max_iter: 1,
            newton_tol: 1e-300,
            ..small()
        };
        let err = run_ensemble(&p, &ic::ap_test(), 0, &[]).unwrap_err();
        assert!(format!("{err:#}").contains("ensemble run"));
    }
}
