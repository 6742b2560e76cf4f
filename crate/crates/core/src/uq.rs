//! Bi-fidelity surrogate: greedy point selection on low-fidelity snapshots,
//! Galerkin coefficients from the low-fidelity Gramian, and reconstruction
//! from the matching high-fidelity snapshots.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, symmetric_eigenvalues};
use crate::math;

/// Greedy selection stops once the best residual is this small relative to
/// the largest column norm.
pub const GREEDY_REL_TOL: f64 = 1e-13;

/// Relative ridge: `rho = RIDGE_SCALE * trace(G) / r`.
pub const RIDGE_SCALE: f64 = 1e-12;

/// Snapshot columns with the weighted inner product `<a, b> = h sum a_i b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    columns: Vec<Vec<f64>>,
    rows: usize,
    h: f64,
}

impl SnapshotMatrix {
    pub fn new(columns: Vec<Vec<f64>>, h: f64) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        for c in &columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("snapshot column"));
            }
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter {
                name: "h",
                reason: "inner-product weight must be > 0",
            });
        }
        Ok(SnapshotMatrix { columns, rows, h })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// Output of the greedy procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Selected column indices, in selection order.
    pub indices: Vec<usize>,
    /// Residual norm of each selected column at the moment it was picked.
    pub residuals: Vec<f64>,
}

/// Pivoted Gram-Schmidt: repeatedly pick the column whose component
/// orthogonal to the already selected ones is largest (lowest index on ties).
pub fn greedy_select(l: &SnapshotMatrix, r_max: usize) -> Result<Selection> {
    if r_max == 0 || r_max > l.len() {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "need 1 <= r <= number of samples",
        });
    }
    let mut resid: Vec<Vec<f64>> = l.columns.clone();
    let mut norms: Vec<f64> = resid.iter().map(|c| math::sqrt(l.inner(c, c))).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let mut chosen = vec![false; l.len()];
    let mut sel = Selection {
        indices: Vec::new(),
        residuals: Vec::new(),
    };
    while sel.indices.len() < r_max {
        let mut best: Option<usize> = None;
        for (i, &nrm) in norms.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            if best.map_or(true, |b| nrm > norms[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        let nb = norms[b];
        if !(nb > GREEDY_REL_TOL * scale) {
            break;
        }
        chosen[b] = true;
        sel.indices.push(b);
        sel.residuals.push(nb);
        let q: Vec<f64> = resid[b].iter().map(|v| v / nb).collect();
        for i in 0..l.len() {
            if chosen[i] {
                continue;
            }
            let p = l.inner(&resid[i], &q);
            for (x, y) in resid[i].iter_mut().zip(&q) {
                *x -= p * y;
            }
            norms[i] = math::sqrt(l.inner(&resid[i], &resid[i]));
        }
    }
    Ok(sel)
}

/// Low-fidelity basis, its Gramian and the matching high-fidelity columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BifiSurrogate {
    pub indices: Vec<usize>,
    pub lf_basis: Vec<Vec<f64>>,
    pub hf_basis: Vec<Vec<f64>>,
    /// Row-major `r x r`.
    pub gramian: Vec<f64>,
    pub ridge: f64,
    pub lf_h: f64,
}

impl BifiSurrogate {
    pub fn new(
        indices: Vec<usize>,
        lf_basis: Vec<Vec<f64>>,
        hf_basis: Vec<Vec<f64>>,
        lf_h: f64,
    ) -> Result<Self> {
        let r = lf_basis.len();
        if r == 0 || hf_basis.len() != r || indices.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                actual: hf_basis.len(),
            });
        }
        let inner = |a: &[f64], b: &[f64]| lf_h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gramian = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..=i {
                let g = inner(&lf_basis[i], &lf_basis[j]);
                gramian[i * r + j] = g;
                gramian[j * r + i] = g;
            }
        }
        let trace: f64 = (0..r).map(|i| gramian[i * r + i]).sum();
        let ridge = RIDGE_SCALE * trace / r as f64;
        Ok(BifiSurrogate {
            indices,
            lf_basis,
            hf_basis,
            gramian,
            ridge,
            lf_h,
        })
    }

    pub fn rank(&self) -> usize {
        self.lf_basis.len()
    }

    /// The surrogate built from the first `r` selected points.
    pub fn truncated(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.rank() {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: "truncation rank out of range",
            });
        }
        BifiSurrogate::new(
            self.indices[..r].to_vec(),
            self.lf_basis[..r].to_vec(),
            self.hf_basis[..r].to_vec(),
            self.lf_h,
        )
    }

    /// Solves `(G + rho I) c = f` with `f_k = <u_l, lf_basis_k>`.
    pub fn lf_coefficients(&self, u_l: &[f64]) -> Result<Vec<f64>> {
        let rows = self.lf_basis[0].len();
        if u_l.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: u_l.len(),
            });
        }
        if u_l.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("low-fidelity column"));
        }
        let r = self.rank();
        let f: Vec<f64> = self
            .lf_basis
            .iter()
            .map(|b| self.lf_h * b.iter().zip(u_l).map(|(x, y)| x * y).sum::<f64>())
            .collect();
        let mut g = self.gramian.clone();
        for i in 0..r {
            g[i * r + i] += self.ridge;
        }
        cholesky_solve(&g, r, &f)
    }

    /// `sum_k c_k hf_basis_k`
    pub fn bifi_reconstruct(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                actual: c.len(),
            });
        }
        let mut out = vec![0.0; self.hf_basis[0].len()];
        for (ck, col) in c.iter().zip(&self.hf_basis) {
            for (o, v) in out.iter_mut().zip(col) {
                *o += ck * v;
            }
        }
        Ok(out)
    }

    /// Low-fidelity coefficients followed by reconstruction.
    pub fn predict(&self, u_l: &[f64]) -> Result<Vec<f64>> {
        let c = self.lf_coefficients(u_l)?;
        self.bifi_reconstruct(&c)
    }

    /// 2-norm condition number of the (unregularized) Gramian.
    pub fn gramian_condition(&self) -> f64 {
        let ev = symmetric_eigenvalues(&self.gramian, self.rank());
        let hi = ev[0];
        let lo = ev[ev.len() - 1];
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// Mean over samples of `sqrt(h sum (approx - reference)^2)`, computed
/// separately for each of the `n_quantities` equal blocks of a column.
pub fn validation_error(
    reference: &[Vec<f64>],
    approx: &[Vec<f64>],
    h: f64,
    n_quantities: usize,
) -> Result<Vec<f64>> {
    if reference.len() != approx.len() || reference.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            actual: approx.len(),
        });
    }
    let rows = reference[0].len();
    if n_quantities == 0 || rows % n_quantities != 0 {
        return Err(Error::InvalidParameter {
            name: "n_quantities",
            reason: "column length must split evenly into quantities",
        });
    }
    let block = rows / n_quantities;
    let mut err = vec![0.0; n_quantities];
    for (a, b) in reference.iter().zip(approx) {
        if a.len() != rows || b.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: b.len().min(a.len()),
            });
        }
        for (q, e) in err.iter_mut().enumerate() {
            let s: f64 = a[q * block..(q + 1) * block]
                .iter()
                .zip(&b[q * block..(q + 1) * block])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            *e += math::sqrt(h * s);
        }
    }
    let k = reference.len() as f64;
    Ok(err.into_iter().map(|e| e / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(i: usize, n: usize, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = s;
        v
    }

    #[test]
    fn orthogonal_columns_are_taken_by_norm() {
        let l = SnapshotMatrix::new(vec![unit(0, 3, 3.0), unit(1, 3, 1.0), unit(2, 3, 2.0)], 1.0)
            .unwrap();
        let s = greedy_select(&l, 3).unwrap();
        assert_eq!(s.indices, vec![0, 2, 1]);
        assert_eq!(s.residuals, vec![3.0, 2.0, 1.0]);
        assert_eq!(greedy_select(&l, 1).unwrap().indices, vec![0]);
    }

    #[test]
    fn duplicates_are_never_selected() {
        let a = vec![1.0, 2.0, 0.5];
        let b = vec![0.0, 1.0, 1.0];
        let l = SnapshotMatrix::new(vec![a.clone(), b, a], 0.1).unwrap();
        let s = greedy_select(&l, 3).unwrap();
        assert_eq!(s.indices.len(), 2);
        assert!(!(s.indices.contains(&0) && s.indices.contains(&2)));
    }

    #[test]
    fn constant_family_stops_at_one() {
        let c = vec![1.0, 2.0, 3.0];
        let l = SnapshotMatrix::new(vec![c.clone(); 5], 0.5).unwrap();
        let s = greedy_select(&l, 4).unwrap();
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let l = SnapshotMatrix::new(vec![unit(1, 2, 1.0), unit(0, 2, 1.0)], 1.0).unwrap();
        assert_eq!(greedy_select(&l, 2).unwrap().indices, vec![0, 1]);
    }

    fn lcg_matrix(seed: u64, m: usize, rows: usize) -> Vec<Vec<f64>> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..m)
            .map(|_| {
                (0..rows)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                    })
                    .collect()
            })
            .collect()
    }

    // Projection residual of column c onto span of `basis` by normal
    // equations; independent of the Gram-Schmidt path.
    fn projection_residual(basis: &[Vec<f64>], c: &[f64], h: f64) -> f64 {
        let r = basis.len();
        if r == 0 {
            return (h * c.iter().map(|x| x * x).sum::<f64>()).sqrt();
        }
        let ip = |a: &[f64], b: &[f64]| h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut g = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                g[i * r + j] = ip(&basis[i], &basis[j]);
            }
        }
        let f: Vec<f64> = basis.iter().map(|b| ip(b, c)).collect();
        let coef = cholesky_solve(&g, r, &f).unwrap();
        let mut res = c.to_vec();
        for (k, b) in coef.iter().zip(basis) {
            for (x, y) in res.iter_mut().zip(b) {
                *x -= k * y;
            }
        }
        ip(&res, &res).sqrt()
    }

    proptest! {
        #[test]
        fn greedy_matches_brute_force_projection(seed in 0u64..500) {
            let cols = lcg_matrix(seed, 8, 12);
            let l = SnapshotMatrix::new(cols.clone(), 0.25).unwrap();
            let s = greedy_select(&l, 5).unwrap();
            prop_assert!(s.residuals.windows(2).all(|w| w[0] >= w[1]));
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for (&idx, &res) in s.indices.iter().zip(&s.residuals) {
                let all: Vec<f64> = (0..8)
                    .map(|i| if s.indices[..basis.len()].contains(&i) { -1.0 } else { projection_residual(&basis, &cols[i], 0.25) })
                    .collect();
                let best = all.iter().copied().fold(f64::MIN, f64::max);
                prop_assert!((res - best).abs() < 1e-9 * best.max(1.0));
                prop_assert!((all[idx] - best).abs() < 1e-9 * best.max(1.0));
                basis.push(cols[idx].clone());
            }
        }

        #[test]
        fn more_points_never_increase_projection_error(seed in 0u64..200) {
            let cols = lcg_matrix(seed, 8, 10);
            let l = SnapshotMatrix::new(cols.clone(), 1.0).unwrap();
            let s = greedy_select(&l, 6).unwrap();
            for r in 1..s.indices.len() {
                let a: Vec<Vec<f64>> = s.indices[..r].iter().map(|&i| cols[i].clone()).collect();
                let b: Vec<Vec<f64>> = s.indices[..r + 1].iter().map(|&i| cols[i].clone()).collect();
                for c in &cols {
                    prop_assert!(projection_residual(&b, c, 1.0) <= projection_residual(&a, c, 1.0) + 1e-12);
                }
            }
        }
    }

    fn surrogate_from(cols: &[Vec<f64>], hf: &[Vec<f64>], h: f64) -> BifiSurrogate {
        BifiSurrogate::new((0..cols.len()).collect(), cols.to_vec(), hf.to_vec(), h).unwrap()
    }

    #[test]
    fn hand_two_by_two() {
        // Basis with G = [[1, 0.5], [0.5, 1]] under h = 1.
        let s3 = 3f64.sqrt() / 2.0;
        let b = vec![vec![1.0, 0.0], vec![0.5, s3]];
        let s = surrogate_from(&b, &b, 1.0);
        assert!((s.gramian[1] - 0.5).abs() < 1e-15);
        let c = s.lf_coefficients(&b[0]).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && c[1].abs() < 1e-10);
    }

    #[test]
    fn basis_points_reproduce_themselves() {
        let lf = lcg_matrix(3, 4, 10);
        let hf = lcg_matrix(4, 4, 6);
        let s = surrogate_from(&lf, &hf, 0.1);
        assert!(s.gramian_condition() < 1e8);
        for k in 0..4 {
            let c = s.lf_coefficients(&lf[k]).unwrap();
            for (i, ci) in c.iter().enumerate() {
                let e = if i == k { 1.0 } else { 0.0 };
                assert!((ci - e).abs() < 1e-8);
            }
            let u = s.bifi_reconstruct(&c).unwrap();
            let nrm: f64 = hf[k].iter().map(|x| x * x).sum::<f64>().sqrt();
            let d: f64 = u.iter().zip(&hf[k]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(d <= 1e-6 * nrm);
        }
    }

    #[test]
    fn orthogonal_input_gives_zero_coefficients() {
        let s = surrogate_from(&[unit(0, 3, 1.0), unit(1, 3, 2.0)], &[vec![1.0], vec![2.0]], 1.0);
        let c = s.lf_coefficients(&unit(2, 3, 5.0)).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
        assert_eq!(s.bifi_reconstruct(&c).unwrap(), vec![0.0]);
        assert!(s.lf_coefficients(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn reconstruct_hand_case() {
        let v = vec![1.0, 2.0];
        let w = vec![3.0, -4.0];
        let s = surrogate_from(&[unit(0, 2, 1.0), unit(1, 2, 1.0)], &[v, w], 1.0);
        assert_eq!(s.bifi_reconstruct(&[0.5, 0.5]).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn truncation_keeps_leading_points() {
        let lf = lcg_matrix(5, 4, 8);
        let s = surrogate_from(&lf, &lf, 1.0);
        let t = s.truncated(2).unwrap();
        assert_eq!(t.indices, vec![0, 1]);
        assert_eq!(t.gramian, vec![s.gramian[0], s.gramian[1], s.gramian[4], s.gramian[5]]);
    }

    #[test]
    fn validation_error_examples() {
        let a = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]];
        assert_eq!(validation_error(&a, &a, 0.5, 2).unwrap(), vec![0.0, 0.0]);
        // Constant offset 0.3 on a length-1 domain of two cells.
        let b: Vec<Vec<f64>> = a.iter().map(|c| c.iter().map(|v| v + 0.3).collect()).collect();
        let e = validation_error(&a, &b, 0.5, 2).unwrap();
        for v in &e {
            assert!((v - 0.3).abs() < 1e-15);
        }
        let c: Vec<Vec<f64>> = a.iter().map(|c| c.iter().map(|v| v + 0.9).collect()).collect();
        let e3 = validation_error(&a, &c, 0.5, 2).unwrap();
        assert!((e3[0] - 3.0 * e[0]).abs() < 1e-14);
        assert!(validation_error(&a, &a[..1], 0.5, 2).is_err());
    }
}
