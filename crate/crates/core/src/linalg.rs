//! Small direct solvers: periodic tridiagonal (Sherman-Morrison), dense
//! Cholesky and Jacobi eigenvalues for the Gramian.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`
/// (`sub[0]` and `sup[n-1]` are ignored). Overwrites `rhs` with the solution.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Singular("tridiagonal solve"));
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        if beta == 0.0 {
            return Err(Error::Singular("tridiagonal solve"));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
    Ok(())
}

/// Solves the symmetric periodic tridiagonal system
///
/// `off[j-1] x[j-1] + diag[j] x[j] + off[j] x[j+1] = rhs[j]` (indices mod n),
///
/// where `off[j]` couples cells `j` and `j + 1`. The corner coupling is
/// removed with a rank-one Sherman-Morrison correction.
pub fn solve_cyclic_symmetric(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if off.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: off.len(),
        });
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: rhs.len(),
        });
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => {
            if diag[0] == 0.0 {
                return Err(Error::Singular("cyclic solve"));
            }
            return Ok(vec![rhs[0] / diag[0]]);
        }
        2 => {
            // Both edges connect the same pair of cells.
            let c = off[0] + off[1];
            let det = diag[0] * diag[1] - c * c;
            if det == 0.0 {
                return Err(Error::Singular("cyclic solve"));
            }
            return Ok(vec![
                (diag[1] * rhs[0] - c * rhs[1]) / det,
                (diag[0] * rhs[1] - c * rhs[0]) / det,
            ]);
        }
        _ => {}
    }

    // Lower-left and upper-right corners are both off[n-1].
    let corner = off[n - 1];
    let gamma = -diag[0];
    let mut dd = diag.to_vec();
    dd[0] -= gamma;
    dd[n - 1] -= corner * corner / gamma;

    let mut sub = vec![0.0; n];
    sub[1..].copy_from_slice(&off[..n - 1]);
    let sup = &off[..];

    let mut scratch = vec![0.0; n];
    let mut x = rhs.to_vec();
    thomas(&sub, &dd, sup, &mut x, &mut scratch)?;

    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = corner;
    thomas(&sub, &dd, sup, &mut z, &mut scratch)?;

    let denom = 1.0 + z[0] + corner * z[n - 1] / gamma;
    if denom == 0.0 {
        return Err(Error::Singular("Sherman-Morrison correction"));
    }
    let fact = (x[0] + corner * x[n - 1] / gamma) / denom;
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= fact * zi;
    }
    Ok(x)
}

/// Dense symmetric positive definite solve via Cholesky. `a` is row-major `n x n`.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Singular("Cholesky factorization"));
                }
                l[i * n + i] = math::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Ok(y)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted descending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        let scale: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Dense Gaussian elimination with partial pivoting; test-only oracle.
    fn dense_solve(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Vec<f64> {
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))
                .unwrap();
            for k in 0..n {
                a.swap(c * n + k, p * n + k);
            }
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r * n + c] / a[c * n + c];
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
                b[r] -= f * b[c];
            }
        }
        for r in (0..n).rev() {
            for k in r + 1..n {
                b[r] -= a[r * n + k] * b[k];
            }
            b[r] /= a[r * n + r];
        }
        b
    }

    fn dense_cyclic(diag: &[f64], off: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            a[j * n + j] += diag[j];
            let k = (j + 1) % n;
            a[j * n + k] += off[j];
            a[k * n + j] += off[j];
        }
        a
    }

    proptest! {
        #[test]
        fn cyclic_matches_dense(n in 2usize..24,
                                seed in prop::collection::vec(0.1..2.0f64, 48),
                                rhs in prop::collection::vec(-5.0..5.0f64, 24)) {
            // Diagonally dominant SPD: diag = off[j-1] + off[j] + shift.
            let off: Vec<f64> = seed[..n].iter().map(|v| -v).collect();
            let diag: Vec<f64> = (0..n)
                .map(|j| -off[j] - off[(j + n - 1) % n] + seed[24 + j])
                .collect();
            let b = &rhs[..n];
            let x = solve_cyclic_symmetric(&diag, &off, b).unwrap();
            let oracle = dense_solve(dense_cyclic(&diag, &off), n, b.to_vec());
            for (a, o) in x.iter().zip(&oracle) {
                prop_assert!((a - o).abs() < 1e-10 * (1.0 + o.abs()));
            }
        }
    }

    #[test]
    fn cholesky_hand_case() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, 2, &[2.0, 1.0]).unwrap();
        // 4x + 2y = 2, 2x + 3y = 1 -> x = 0.5, y = 0
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
        assert!(cholesky_solve(&[0.0], 1, &[1.0]).is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0];
        let ev = symmetric_eigenvalues(&a, 3);
        assert!((ev[0] - 5.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        assert!((ev[2] - 1.0).abs() < 1e-12);
    }
}
