//! Parameter families, sample sets and the bi-fidelity study loop.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal, Uniform};
use rayon::prelude::*;
use vpme_core::euler::{interpolate_periodic, run_euler_final, EulerParams};
use vpme_core::kl::KlField;
use vpme_core::uq::{greedy_select, validation_error, BifiSurrogate, Selection, SnapshotMatrix};
use vpme_core::{ic, run_seed, Grid, InitialCondition, SimParams};

use crate::config::Distribution;
use crate::ensemble::run_ensemble;

/// Resampling budget for a parameter draw that gives a non-positive density.
pub const MAX_RESAMPLE: usize = 20;

/// Sample streams, mixed into the seed so training and validation sets are
/// independent.
pub const TRAIN_STREAM: u64 = 1;
pub const VALIDATE_STREAM: u64 = 2;

/// A parametrized initial condition.
#[derive(Debug, Clone)]
pub enum IcFamily {
    Test1,
    Test2,
    Kl(Arc<KlField>),
}

impl IcFamily {
    pub fn dim(&self) -> usize {
        match self {
            IcFamily::Test1 | IcFamily::Test2 => 5,
            IcFamily::Kl(f) => f.dim(),
        }
    }

    pub fn ic(&self, z: &[f64]) -> Result<InitialCondition> {
        if z.len() != self.dim() {
            bail!("parameter vector has length {}, expected {}", z.len(), self.dim());
        }
        Ok(match self {
            IcFamily::Test1 => ic::uq_test1(z.try_into().expect("length checked")),
            IcFamily::Test2 => ic::uq_test2(z.try_into().expect("length checked")),
            IcFamily::Kl(f) => ic::uq_test3(f.clone(), z.to_vec()),
        })
    }
}

fn draw(rng: &mut ChaCha8Rng, dist: Distribution, d: usize) -> Vec<f64> {
    match dist {
        Distribution::Uniform => {
            let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
            (0..d).map(|_| u.sample(rng)).collect()
        }
        Distribution::Normal => (0..d).map(|_| StandardNormal.sample(rng)).collect(),
    }
}

fn positive_on(ic: &InitialCondition, xs: &[f64]) -> bool {
    xs.iter().all(|&x| ic.density(x) > 0.0)
}

/// Draws `count` parameter vectors. Sample `k` comes from its own stream
/// `run_seed(seed, stream, k)`, and is redrawn (up to [`MAX_RESAMPLE`] times)
/// while its density is non-positive at any of `probe`.
pub fn sample_parameters(
    family: &IcFamily,
    dist: Distribution,
    count: usize,
    seed: u64,
    stream: u64,
    probe: &[f64],
) -> Result<Vec<Vec<f64>>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, stream, k as u64));
            for _ in 0..=MAX_RESAMPLE {
                let z = draw(&mut rng, dist, family.dim());
                if positive_on(&family.ic(&z)?, probe) {
                    return Ok(z);
                }
            }
            bail!("sample {k}: density non-positive after {MAX_RESAMPLE} redraws")
        })
        .collect()
}

/// `(n, u)` of the low-fidelity model at `t_final`, concatenated.
pub fn lf_column(lf: &EulerParams, ic: &InitialCondition) -> Result<Vec<f64>> {
    let s = run_euler_final(lf, ic)?;
    Ok([s.n, s.u].concat())
}

/// `(n, u)` of the ensemble-mean particle solution at `t_final`.
///
/// Every sample uses the same run seeds, so particle noise is shared across
/// the parameter space.
pub fn hf_column(hf: &SimParams, ic: &InitialCondition) -> Result<Vec<f64>> {
    let e = run_ensemble(hf, ic, 0, &[])?;
    let s = e.last();
    Ok([s.n.clone(), s.u.clone()].concat())
}

pub fn lf_columns(lf: &EulerParams, family: &IcFamily, zs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    zs.par_iter()
        .enumerate()
        .map(|(k, z)| lf_column(lf, &family.ic(z)?).with_context(|| format!("low-fidelity sample {k}")))
        .collect()
}

pub fn hf_columns(hf: &SimParams, family: &IcFamily, zs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    zs.iter()
        .enumerate()
        .map(|(k, z)| {
            log::info!("high-fidelity sample {} of {}", k + 1, zs.len());
            hf_column(hf, &family.ic(z)?).with_context(|| format!("high-fidelity sample {k}"))
        })
        .collect()
}

/// Greedy selection on the LF training columns, then HF runs at the selected
/// points only.
pub struct Surrogate {
    pub selection: Selection,
    pub surrogate: BifiSurrogate,
}

pub fn build_surrogate(
    hf: &SimParams,
    lf: &EulerParams,
    family: &IcFamily,
    train: &[Vec<f64>],
    lf_train: Vec<Vec<f64>>,
    r: usize,
) -> Result<Surrogate> {
    let l = SnapshotMatrix::new(lf_train, lf.h())?;
    let selection = greedy_select(&l, r)?;
    if selection.indices.len() < r {
        log::warn!(
            "low-fidelity basis exhausted after {} of {r} points",
            selection.indices.len()
        );
    }
    let points: Vec<Vec<f64>> = selection.indices.iter().map(|&i| train[i].clone()).collect();
    let hf_basis = hf_columns(hf, family, &points)?;
    let lf_basis = selection.indices.iter().map(|&i| l.column(i).to_vec()).collect();
    let surrogate = BifiSurrogate::new(selection.indices.clone(), lf_basis, hf_basis, lf.h())?;
    Ok(Surrogate { selection, surrogate })
}

/// Errors and predictions of the truncated surrogates on the validation set.
pub struct ValidationReport {
    /// `(r, [err_n, err_u])` for every requested rank that was available.
    pub bifi: Vec<(usize, Vec<f64>)>,
    /// LF interpolated to HF cell centers, `[err_n, err_u]`.
    pub lofi: Vec<f64>,
    /// BF predictions of the largest rank at each validation sample.
    pub bf_largest: Vec<Vec<f64>>,
}

pub fn validate(
    s: &Surrogate,
    ranks: &[usize],
    lf: &EulerParams,
    hf_grid: &Grid,
    lf_val: &[Vec<f64>],
    hf_val: &[Vec<f64>],
) -> Result<ValidationReport> {
    let mut bifi = Vec::new();
    let mut bf_largest = Vec::new();
    let mut ranks: Vec<usize> = ranks.iter().copied().filter(|&r| r <= s.surrogate.rank()).collect();
    ranks.sort_unstable();
    ranks.dedup();
    for &r in &ranks {
        let t = s.surrogate.truncated(r)?;
        let bf: Vec<Vec<f64>> = lf_val.iter().map(|u| t.predict(u)).collect::<Result<_, _>>()?;
        bifi.push((r, validation_error(hf_val, &bf, hf_grid.h, 2)?));
        bf_largest = bf;
    }
    let centers: Vec<f64> = hf_grid.centers().collect();
    let half = lf.n_nodes;
    let lf_on_hf: Vec<Vec<f64>> = lf_val
        .iter()
        .map(|c| {
            [
                interpolate_periodic(&c[..half], lf.x_left, lf.h(), &centers),
                interpolate_periodic(&c[half..], lf.x_left, lf.h(), &centers),
            ]
            .concat()
        })
        .collect();
    let lofi = validation_error(hf_val, &lf_on_hf, hf_grid.h, 2)?;
    Ok(ValidationReport {
        bifi,
        lofi,
        bf_largest,
    })
}
