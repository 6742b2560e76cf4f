//! The reformulated (asymptotic-preserving) field solve.
//!
//! Each step solves
//!
//! ```text
//! A phi + e^phi = b
//! ```
//!
//! where `A` is the periodic weighted Laplacian with edge coefficients
//! `a_j = (eps^2 + dt^2 n_j) / h^2` and
//! `b_j = dt^2 (S_{j+1} - 2 S_j + S_{j-1}) / h^2 + n_j - dt (J_j - J_{j-1}) / h`.
//! Setting `eps = 0` gives the quasineutral limit of the same scheme, so the
//! operator stays invertible (through `e^phi`) for every `eps >= 0`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::solve_cyclic_symmetric;
use crate::math;
use crate::params::Grid;
use crate::particles::MomentSet;

/// `|phi|` beyond which `e^phi` is considered an overflow.
pub const PHI_GUARD: f64 = 700.0;

const MAX_DAMPING_HALVINGS: usize = 60;

/// Symmetric periodic weighted Laplacian. `edges[j]` couples cells `j` and
/// `j + 1` (mod `N`).
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicOperator {
    edges: Vec<f64>,
}

impl CyclicOperator {
    pub fn from_edges(edges: Vec<f64>) -> Self {
        CyclicOperator { edges }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    fn prev(&self, j: usize) -> usize {
        if j == 0 {
            self.edges.len() - 1
        } else {
            j - 1
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.edges[self.prev(j)] + self.edges[j])
            .collect()
    }

    /// `(A phi)_j = a_j (phi_j - phi_{j+1}) + a_{j-1} (phi_j - phi_{j-1})`
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let jp = if j + 1 == n { 0 } else { j + 1 };
                let jm = self.prev(j);
                self.edges[j] * (phi[j] - phi[jp]) + self.edges[jm] * (phi[j] - phi[jm])
            })
            .collect()
    }

    /// Row-major dense copy; for diagnostics and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            let k = if j + 1 == n { 0 } else { j + 1 };
            let e = self.edges[j];
            a[j * n + j] += e;
            a[k * n + k] += e;
            a[j * n + k] -= e;
            a[k * n + j] -= e;
        }
        a
    }

    /// Number of zero edges. Any zero edge enlarges the null space beyond the
    /// constants, which happens when `eps = 0` and the density vanishes.
    pub fn zero_edges(&self) -> usize {
        self.edges.iter().filter(|&&a| a == 0.0).count()
    }

    /// Solves `(A + diag(shift)) x = rhs`.
    pub fn solve_shifted(&self, shift: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let mut diag = self.diagonal();
        for (d, s) in diag.iter_mut().zip(shift) {
            *d += s;
        }
        let off: Vec<f64> = self.edges.iter().map(|a| -a).collect();
        solve_cyclic_symmetric(&diag, &off, rhs)
    }
}

/// Potential, field and the moments that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub phi: Vec<f64>,
    pub electric: Vec<f64>,
    pub moments: MomentSet,
}

/// Result of one nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub phi: Vec<f64>,
    pub iterations: usize,
    /// Discrete L2 norm of `A phi + e^phi - b` at the returned potential.
    pub residual: f64,
    /// Residual norm at every Newton iterate, starting from the initial guess.
    pub residual_history: Vec<f64>,
}

/// Edge coefficients `a_j = (eps^2 + dt^2 n_j) / h^2`.
pub fn build_operator(moments: &MomentSet, grid: &Grid, dt: f64, epsilon: f64) -> CyclicOperator {
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let e2 = epsilon * epsilon;
    let dt2 = dt * dt;
    CyclicOperator {
        edges: moments
            .density
            .iter()
            .map(|&n| (e2 + dt2 * n) * inv_h2)
            .collect(),
    }
}

/// Right-hand side of the reformulated equation from time-level moments.
///
/// The current term is `n^m - n^{m-1} = -dt D^-(J^m)` from the continuity
/// equation, so it carries one factor of `dt`.
pub fn assemble_rhs(moments: &MomentSet, grid: &Grid, dt: f64) -> Vec<f64> {
    let n = grid.n_cells;
    let s = &moments.flux;
    let jc = &moments.current;
    let dt2_h2 = dt * dt / (grid.h * grid.h);
    let dt_h = dt / grid.h;
    (0..n)
        .map(|j| {
            let jp = grid.next(j);
            let jm = grid.prev(j);
            dt2_h2 * (s[jp] - 2.0 * s[j] + s[jm]) + moments.density[j] - (jc[j] - jc[jm]) * dt_h
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| {
        let a = math::abs(x);
        if a > m || a.is_nan() {
            a
        } else {
            m
        }
    })
}

fn guard(phi: &[f64]) -> Result<()> {
    let m = max_abs(phi);
    if !(m <= PHI_GUARD) {
        return Err(Error::PotentialOverflow { max_abs_phi: m });
    }
    Ok(())
}

fn residual(op: &CyclicOperator, phi: &[f64], exp_phi: &[f64], b: &[f64]) -> Vec<f64> {
    let mut f = op.apply(phi);
    for ((fj, ej), bj) in f.iter_mut().zip(exp_phi).zip(b) {
        *fj += ej - bj;
    }
    f
}

/// Newton iteration for `A phi + e^phi = b`.
///
/// The Jacobian `A + diag(e^phi)` is symmetric positive definite, so every
/// linear solve is well posed. Stops when the discrete L2 norm of the update
/// drops below `tol`. Steps that would push `|phi|` past [`PHI_GUARD`] are
/// halved until they fit.
pub fn solve_poisson_newton(
    op: &CyclicOperator,
    b: &[f64],
    phi_init: &[f64],
    tol: f64,
    max_iter: usize,
    h: f64,
) -> Result<PoissonSolution> {
    let n = op.len();
    if b.len() != n || phi_init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len().min(phi_init.len()),
        });
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Poisson right-hand side"));
    }
    guard(phi_init)?;

    let mut phi = phi_init.to_vec();
    let mut exp_phi: Vec<f64> = phi.iter().map(|&p| math::exp(p)).collect();
    let mut f = residual(op, &phi, &exp_phi, b);
    let mut history = vec![math::l2_norm(&f, h)];

    for it in 1..=max_iter {
        let delta = op.solve_shifted(&exp_phi, &f)?;
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut halvings = 0;
        loop {
            candidate = phi.iter().zip(&delta).map(|(p, d)| p - scale * d).collect();
            if max_abs(&candidate) <= PHI_GUARD {
                break;
            }
            halvings += 1;
            if halvings > MAX_DAMPING_HALVINGS {
                return Err(Error::PotentialOverflow {
                    max_abs_phi: max_abs(&candidate),
                });
            }
            scale *= 0.5;
        }
        let step: f64 = scale * math::l2_norm(&delta, h);
        phi = candidate;
        for (e, &p) in exp_phi.iter_mut().zip(&phi) {
            *e = math::exp(p);
        }
        f = residual(op, &phi, &exp_phi, b);
        let r = math::l2_norm(&f, h);
        history.push(r);
        if !step.is_finite() || !r.is_finite() {
            return Err(Error::NewtonDiverged {
                iterations: it,
                residual: r,
            });
        }
        // A damped step says nothing about convergence.
        if scale == 1.0 && step <= tol {
            return Ok(PoissonSolution {
                phi,
                iterations: it,
                residual: r,
                residual_history: history,
            });
        }
    }
    Err(Error::NewtonDiverged {
        iterations: max_iter,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

/// Linearized ("penalty") update `(A + I) phi = b + phi_prev - e^phi_prev`.
pub fn solve_poisson_penalty(op: &CyclicOperator, b: &[f64], phi_prev: &[f64]) -> Result<Vec<f64>> {
    let n = op.len();
    if b.len() != n || phi_prev.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len().min(phi_prev.len()),
        });
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("Poisson right-hand side"));
    }
    guard(phi_prev)?;
    let rhs: Vec<f64> = b
        .iter()
        .zip(phi_prev)
        .map(|(bj, &p)| bj + p - math::exp(p))
        .collect();
    let phi = op.solve_shifted(&vec![1.0; n], &rhs)?;
    guard(&phi)?;
    Ok(phi)
}

/// Centered difference `E_j = -(phi_{j+1} - phi_{j-1}) / (2h)`.
pub fn electric_field(phi: &[f64], grid: &Grid) -> Vec<f64> {
    let inv_2h = 0.5 / grid.h;
    (0..grid.n_cells)
        .map(|j| -(phi[grid.next(j)] - phi[grid.prev(j)]) * inv_2h)
        .collect()
}

/// How `e^phi` is treated at the new time level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    Newton,
    Penalty,
}

/// Field-solve settings shared by every step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSolver {
    pub epsilon: f64,
    pub linearization: Linearization,
    pub tol: f64,
    pub max_iter: usize,
}

impl FieldSolver {
    /// Builds the operator and right-hand side from time-level moments and
    /// returns the potential at the next level.
    pub fn solve(
        &self,
        moments: &MomentSet,
        grid: &Grid,
        dt: f64,
        phi_prev: &[f64],
    ) -> Result<PoissonSolution> {
        let op = build_operator(moments, grid, dt, self.epsilon);
        let b = assemble_rhs(moments, grid, dt);
        match self.linearization {
            Linearization::Newton => {
                solve_poisson_newton(&op, &b, phi_prev, self.tol, self.max_iter, grid.h)
            }
            Linearization::Penalty => {
                let phi = solve_poisson_penalty(&op, &b, phi_prev)?;
                let exp_phi: Vec<f64> = phi.iter().map(|&p| math::exp(p)).collect();
                let r = math::l2_norm(&residual(&op, &phi, &exp_phi, &b), grid.h);
                Ok(PoissonSolution {
                    phi,
                    iterations: 1,
                    residual: r,
                    residual_history: Vec::new(),
                })
            }
        }
    }
}

/// The `eps = 0` solve: same scheme, operator built without the Debye term.
pub fn quasineutral_solve(
    moments: &MomentSet,
    grid: &Grid,
    dt: f64,
    linearization: Linearization,
    phi_prev: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<PoissonSolution> {
    FieldSolver {
        epsilon: 0.0,
        linearization,
        tol,
        max_iter,
    }
    .solve(moments, grid, dt, phi_prev)
}
