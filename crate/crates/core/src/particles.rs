//! Marker particles: NGP initialization, moment deposition and the push.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::ic::{Beam, InitialCondition};
use crate::math;
use crate::params::{Grid, Placement};

/// Positions, velocities and (fixed) weights of all markers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    x: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl ParticleEnsemble {
    /// Builds an ensemble from raw arrays, wrapping positions onto the grid.
    pub fn from_parts(grid: &Grid, x: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: v.len(),
            });
        }
        if w.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: w.len(),
            });
        }
        if w.iter().any(|&wk| !(wk > 0.0 && wk.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "particle weights must be finite and positive",
            });
        }
        if x.iter().chain(v.iter()).any(|q| !q.is_finite()) {
            return Err(Error::NonFinite("particle state"));
        }
        let x = x.into_iter().map(|xk| grid.wrap(xk)).collect();
        Ok(ParticleEnsemble { x, v, w })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Concatenates two ensembles (used by deposition-linearity checks).
    pub fn union(&self, other: &ParticleEnsemble) -> ParticleEnsemble {
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        ParticleEnsemble {
            x: cat(&self.x, &other.x),
            v: cat(&self.v, &other.v),
            w: cat(&self.w, &other.w),
        }
    }
}

/// Cell-averaged density `n`, current `J = nu` and momentum flux `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub density: Vec<f64>,
    pub current: Vec<f64>,
    pub flux: Vec<f64>,
}

/// Cells with less density than this report zero velocity.
pub const DENSITY_GUARD: f64 = 1e-12;

impl MomentSet {
    pub fn zeros(n_cells: usize) -> Self {
        MomentSet {
            density: vec![0.0; n_cells],
            current: vec![0.0; n_cells],
            flux: vec![0.0; n_cells],
        }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Mean velocity `J / n`, zero where the cell is (numerically) empty.
    pub fn velocity(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(&self.current)
            .map(|(&n, &j)| if n < DENSITY_GUARD { 0.0 } else { j / n })
            .collect()
    }

    pub fn add(&mut self, other: &MomentSet) {
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            *a += b;
        }
        for (a, b) in self.current.iter_mut().zip(&other.current) {
            *a += b;
        }
        for (a, b) in self.flux.iter_mut().zip(&other.flux) {
            *a += b;
        }
    }

    /// `h * sum_j n_j`
    pub fn total_mass(&self, h: f64) -> f64 {
        h * self.density.iter().sum::<f64>()
    }
}

#[inline]
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Position at fraction `frac` of cell `j`, nudged by an ulp if rounding
/// would put it in a neighbor cell.
fn place_in_cell(grid: &Grid, j: usize, frac: f64) -> f64 {
    let mut x = grid.x_left + (j as f64 + frac) * grid.h;
    while grid.cell_index(x) > j {
        x = x.next_down();
    }
    while grid.cell_index(x) < j {
        x = x.next_up();
    }
    x
}

/// NGP initialization with `ppc` markers per cell.
///
/// Every marker in cell `j` of a beam with density `n_b` carries weight
/// `h n_b(x_j) / m_b`, where `m_b` is the beam's marker count in that cell, and
/// starts at the local beam velocity `u_b(X_k)`. Double-beam conditions split
/// each cell's markers evenly between the beams.
pub fn init_particles(
    ic: &InitialCondition,
    grid: &Grid,
    ppc: usize,
    placement: Placement,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if ppc == 0 {
        return Err(Error::InvalidParameter {
            name: "n_particles_total",
            reason: "need at least one particle per cell",
        });
    }
    let beams: Vec<&Beam> = ic.beam_iter().collect();
    if beams.len() == 2 && ppc % 2 != 0 {
        return Err(Error::OddBeamSplit(ppc));
    }
    let per_beam = ppc / beams.len();
    let total = ppc * grid.n_cells;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(total);
    let mut v = Vec::with_capacity(total);
    let mut w = Vec::with_capacity(total);

    for j in 0..grid.n_cells {
        let xc = grid.center(j);
        for beam in &beams {
            let n0 = beam.density.eval(xc);
            if !(n0 > 0.0) || !n0.is_finite() {
                return Err(Error::NonPositiveDensity { x: xc, value: n0 });
            }
            let weight = grid.h * n0 / per_beam as f64;
            for i in 0..per_beam {
                let frac = match placement {
                    Placement::Uniform => unit_f64(&mut rng),
                    Placement::Centered => (i as f64 + 0.5) / per_beam as f64,
                };
                let xk = place_in_cell(grid, j, frac);
                x.push(xk);
                v.push(beam.velocity.eval(xk));
                w.push(weight);
            }
        }
    }
    Ok(ParticleEnsemble { x, v, w })
}

/// NGP deposition into an existing buffer (overwrites it).
pub fn deposit_into(ens: &ParticleEnsemble, grid: &Grid, out: &mut MomentSet) {
    let nc = grid.n_cells;
    out.density.clear();
    out.density.resize(nc, 0.0);
    out.current.clear();
    out.current.resize(nc, 0.0);
    out.flux.clear();
    out.flux.resize(nc, 0.0);

    for ((&xk, &vk), &wk) in ens.x.iter().zip(&ens.v).zip(&ens.w) {
        let j = grid.cell_index(xk);
        let wv = wk * vk;
        out.density[j] += wk;
        out.current[j] += wv;
        out.flux[j] += wv * vk;
    }
    let inv_h = 1.0 / grid.h;
    for q in out
        .density
        .iter_mut()
        .chain(out.current.iter_mut())
        .chain(out.flux.iter_mut())
    {
        *q *= inv_h;
    }
}

/// Volume-averaged `n`, `J`, `S` per cell.
pub fn deposit_moments(ens: &ParticleEnsemble, grid: &Grid) -> MomentSet {
    let mut m = MomentSet::zeros(grid.n_cells);
    deposit_into(ens, grid, &mut m);
    m
}

/// Semi-implicit push: `V += dt E(X_old)`, then `X += dt V_new`, wrapped.
///
/// `e_field` holds one value per cell; each particle reads its own cell.
pub fn push_particles(
    ens: &mut ParticleEnsemble,
    e_field: &[f64],
    grid: &Grid,
    dt: f64,
) -> Result<()> {
    if e_field.len() != grid.n_cells {
        return Err(Error::DimensionMismatch {
            expected: grid.n_cells,
            actual: e_field.len(),
        });
    }
    if !dt.is_finite() || e_field.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("electric field"));
    }
    for (xk, vk) in ens.x.iter_mut().zip(ens.v.iter_mut()) {
        let j = grid.cell_index(*xk);
        *vk += dt * e_field[j];
        *xk = grid.wrap(*xk + dt * *vk);
    }
    Ok(())
}

/// Cosine velocity kernel of half-width `eta`.
pub fn cosine_kernel(dv: f64, eta: f64) -> f64 {
    let r = dv / eta;
    if math::abs(r) <= 1.0 {
        (1.0 + math::cos(PI * r)) / (2.0 * eta)
    } else {
        0.0
    }
}

/// Reconstructs `f(x_j, v)` on a velocity grid by smearing each marker with
/// the cosine kernel. Row-major: `out[j * v_grid.len() + i]`.
pub fn phase_space_density(
    ens: &ParticleEnsemble,
    grid: &Grid,
    v_grid: &[f64],
    eta: f64,
) -> Vec<f64> {
    let nv = v_grid.len();
    let mut f = vec![0.0; grid.n_cells * nv];
    let inv_h = 1.0 / grid.h;
    for ((&xk, &vk), &wk) in ens.x.iter().zip(&ens.v).zip(&ens.w) {
        let j = grid.cell_index(xk);
        let row = &mut f[j * nv..(j + 1) * nv];
        for (fi, &vi) in row.iter_mut().zip(v_grid) {
            *fi += wk * inv_h * cosine_kernel(vi - vk, eta);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ic;
    use proptest::prelude::*;

    #[test]
    fn uniform_init_weights() {
        let g = Grid::new(0.0, 1.0, 4);
        let ens = init_particles(&ic::equilibrium(1.0), &g, 2, Placement::Uniform, 7).unwrap();
        assert_eq!(ens.len(), 8);
        assert!(ens.weights().iter().all(|&w| w == 0.125));
        assert!(ens.velocities().iter().all(|&v| v == 0.0));
        let m = deposit_moments(&ens, &g);
        assert!(m.density.iter().all(|&n| n == 1.0));
        for j in 0..4 {
            assert_eq!(g.cell_index(ens.positions()[2 * j]), j);
            assert_eq!(g.cell_index(ens.positions()[2 * j + 1]), j);
        }
    }

    #[test]
    fn double_beam_needs_even_split() {
        let g = Grid::new(0.0, 1.0, 4);
        let ic = ic::uq_test2(&[0.0; 5]);
        assert_eq!(
            init_particles(&ic, &g, 3, Placement::Uniform, 1),
            Err(Error::OddBeamSplit(3))
        );
        let ens = init_particles(&ic, &g, 4, Placement::Uniform, 1).unwrap();
        let m = deposit_moments(&ens, &g);
        for j in 0..4 {
            let x = g.center(j);
            assert!((m.density[j] - ic.density(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn non_positive_density_rejected() {
        let g = Grid::new(0.0, 1.0, 4);
        let r = init_particles(&ic::equilibrium(0.0), &g, 2, Placement::Uniform, 1);
        assert!(matches!(r, Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn single_particle_deposit() {
        let g = Grid::new(0.0, 1.0, 4);
        let ens =
            ParticleEnsemble::from_parts(&g, vec![0.6], vec![2.0], vec![0.5]).unwrap();
        let m = deposit_moments(&ens, &g);
        assert_eq!(m.density, vec![0.0, 0.0, 2.0, 0.0]);
        assert_eq!(m.current, vec![0.0, 0.0, 4.0, 0.0]);
        assert_eq!(m.flux, vec![0.0, 0.0, 8.0, 0.0]);
    }

    #[test]
    fn opposite_velocities_cancel_current() {
        let g = Grid::new(0.0, 1.0, 4);
        let ens = ParticleEnsemble::from_parts(
            &g,
            vec![0.3, 0.4],
            vec![1.0, -1.0],
            vec![0.1, 0.1],
        )
        .unwrap();
        let m = deposit_moments(&ens, &g);
        assert_eq!(m.current[1], 0.0);
        assert!((m.flux[1] - 0.2 / 0.25).abs() < 1e-15);
    }

    #[test]
    fn free_streaming_and_wrap() {
        let g = Grid::new(0.0, 1.0, 10);
        let mut ens =
            ParticleEnsemble::from_parts(&g, vec![0.9, 0.1], vec![1.0, -0.5], vec![1.0, 1.0])
                .unwrap();
        push_particles(&mut ens, &[0.0; 10], &g, 0.3).unwrap();
        assert!((ens.positions()[0] - 0.2).abs() < 1e-15);
        assert!((ens.positions()[1] - 0.95).abs() < 1e-15);
        assert_eq!(ens.velocities(), &[1.0, -0.5]);
    }

    #[test]
    fn push_reads_old_cell_and_moves_with_new_velocity() {
        let g = Grid::new(0.0, 1.0, 2);
        // Particle in cell 0 with E = (1, -5): velocity must use E[0].
        let mut ens =
            ParticleEnsemble::from_parts(&g, vec![0.45], vec![0.0], vec![1.0]).unwrap();
        push_particles(&mut ens, &[1.0, -5.0], &g, 0.1).unwrap();
        assert!((ens.velocities()[0] - 0.1).abs() < 1e-16);
        assert!((ens.positions()[0] - 0.46).abs() < 1e-15);
    }

    #[test]
    fn push_rejects_non_finite_field() {
        let g = Grid::new(0.0, 1.0, 2);
        let mut ens =
            ParticleEnsemble::from_parts(&g, vec![0.45], vec![0.0], vec![1.0]).unwrap();
        assert!(push_particles(&mut ens, &[f64::NAN, 0.0], &g, 0.1).is_err());
    }

    #[test]
    fn uniform_field_shifts_every_velocity() {
        let g = Grid::new(0.0, 1.0, 16);
        let mut ens =
            init_particles(&ic::ap_test(), &g, 10, Placement::Uniform, 3).unwrap();
        let before: Vec<f64> = ens.velocities().to_vec();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        push_particles(&mut ens, &[0.7; 16], &g, 0.05).unwrap();
        for (a, b) in before.iter().zip(ens.velocities()) {
            assert!((b - a - 0.035).abs() < 1e-15);
        }
        assert!((mean(ens.velocities()) - mean(&before) - 0.035).abs() < 1e-14);
    }

    #[test]
    fn cosine_kernel_integrates_to_one() {
        let eta = 0.7;
        let n = 20_000;
        let dv = 2.0 * eta / n as f64;
        let s: f64 = (0..n)
            .map(|i| cosine_kernel(-eta + (i as f64 + 0.5) * dv, eta) * dv)
            .sum();
        assert!((s - 1.0).abs() < 1e-8);
        assert_eq!(cosine_kernel(1.5, 1.0), 0.0);
    }

    #[test]
    fn phase_space_marginal_is_density() {
        let g = Grid::new(0.0, 1.0, 8);
        let ens = init_particles(&ic::ap_test(), &g, 16, Placement::Uniform, 9).unwrap();
        let nv = 4001;
        let v_grid: Vec<f64> = (0..nv).map(|i| -2.0 + 4.0 * i as f64 / (nv - 1) as f64).collect();
        let f = phase_space_density(&ens, &g, &v_grid, 1.0);
        let m = deposit_moments(&ens, &g);
        let dv = 4.0 / (nv - 1) as f64;
        for j in 0..8 {
            let s: f64 = f[j * nv..(j + 1) * nv].iter().sum::<f64>() * dv;
            assert!((s - m.density[j]).abs() < 1e-3 * m.density[j]);
        }
    }

    fn arb_ensemble(grid: Grid) -> impl Strategy<Value = ParticleEnsemble> {
        prop::collection::vec((0.0..1.0f64, -3.0..3.0f64, 0.01..2.0f64), 1..200).prop_map(
            move |p| {
                let (x, rest): (Vec<_>, Vec<_>) = p.into_iter().map(|(a, b, c)| (a, (b, c))).unzip();
                let (v, w) = rest.into_iter().unzip();
                ParticleEnsemble::from_parts(&grid, x, v, w).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn deposit_conserves_total_weight(ens in arb_ensemble(Grid::new(0.0, 1.0, 13))) {
            let g = Grid::new(0.0, 1.0, 13);
            let m = deposit_moments(&ens, &g);
            // Brute force: sum the weights directly.
            let brute: f64 = ens.weights().iter().sum();
            prop_assert!((m.total_mass(g.h) - brute).abs() <= 1e-12 * brute);
        }

        #[test]
        fn deposit_is_linear(a in arb_ensemble(Grid::new(0.0, 1.0, 7)),
                             b in arb_ensemble(Grid::new(0.0, 1.0, 7))) {
            let g = Grid::new(0.0, 1.0, 7);
            let mut sum = deposit_moments(&a, &g);
            sum.add(&deposit_moments(&b, &g));
            let joint = deposit_moments(&a.union(&b), &g);
            for j in 0..7 {
                prop_assert!((sum.density[j] - joint.density[j]).abs() < 1e-10);
                prop_assert!((sum.current[j] - joint.current[j]).abs() < 1e-10);
                prop_assert!((sum.flux[j] - joint.flux[j]).abs() < 1e-10);
            }
        }

        #[test]
        fn monokinetic_cells_satisfy_s_n_equals_j2(c in -3.0..3.0f64, seed in 0u64..1000) {
            let g = Grid::new(0.0, 1.0, 9);
            let mut ens = init_particles(&ic::ap_test(), &g, 6, Placement::Uniform, seed).unwrap();
            ens.v.iter_mut().for_each(|v| *v = c);
            let m = deposit_moments(&ens, &g);
            for j in 0..9 {
                prop_assert!((m.current[j] - c * m.density[j]).abs() <= 1e-12 * (1.0 + m.density[j]));
                prop_assert!((m.flux[j] * m.density[j] - m.current[j] * m.current[j]).abs()
                    <= 1e-10 * (1.0 + m.flux[j] * m.density[j]));
            }
        }

        #[test]
        fn free_streaming_splits_exactly(seed in 0u64..1000, steps in 1usize..6) {
            let g = Grid::new(0.0, 1.0, 8);
            let base = init_particles(&ic::ap_test(), &g, 4, Placement::Uniform, seed).unwrap();
            let zero = [0.0; 8];
            let dt = 0.01;
            let mut fine = base.clone();
            for _ in 0..2 * steps {
                push_particles(&mut fine, &zero, &g, dt).unwrap();
            }
            let mut coarse = base;
            for _ in 0..steps {
                push_particles(&mut coarse, &zero, &g, 2.0 * dt).unwrap();
            }
            prop_assert_eq!(fine.velocities(), coarse.velocities());
            for (a, b) in fine.positions().iter().zip(coarse.positions()) {
                let d = (a - b).abs();
                prop_assert!(d < 1e-12 || (1.0 - d) < 1e-12);
            }
        }
    }
}
