//! Truncated Karhunen-Loeve expansion of a periodic Gaussian-covariance field.
//!
//! On a periodic domain of length `L` the covariance operator with kernel
//! `c(x - y) = sigma^2 exp(-|x - y|^2 / l^2)` is diagonalized by the Fourier
//! basis. Eigenfunctions are ordered `1/sqrt(L)`, then `sqrt(2/L) cos(2 pi k x/L)`
//! and `sqrt(2/L) sin(2 pi k x/L)` for `k = 1, 2, ...`; the pair at frequency
//! `k` shares the eigenvalue `mu_k = int_{-L/2}^{L/2} c(x) cos(2 pi k x / L) dx`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ic::{Mode, Profile};
use crate::math;
use crate::quadrature::integrate;

/// Absolute tolerance of the eigenvalue quadrature.
pub const EIGEN_QUAD_TOL: f64 = 1e-10;

const MAX_FREQUENCY: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMode {
    Constant,
    Cos(usize),
    Sin(usize),
}

#[derive(Debug, Clone)]
pub struct KlField {
    pub sigma: f64,
    pub corr_length: f64,
    pub domain_length: f64,
    pub cutoff: f64,
    pub mean: Profile,
    modes: Vec<KlMode>,
    eigenvalues: Vec<f64>,
    sqrt_eigenvalues: Vec<f64>,
}

/// `n(x) = (1.5 + 0.2 cos 2x + 0.1 cos 4x) / (3 pi)`, unit mass on `[0, 2 pi]`.
pub fn default_mean() -> Profile {
    let s = 3.0 * PI;
    Profile::Trig {
        offset: 1.5 / s,
        modes: alloc::vec![Mode::cos(0.2 / s, 2.0), Mode::cos(0.1 / s, 4.0)],
    }
}

/// Builds the expansion, keeping every mode with eigenvalue above `cutoff`.
pub fn kl_build(
    sigma: f64,
    corr_length: f64,
    domain_length: f64,
    cutoff: f64,
    mean: Profile,
) -> Result<KlField> {
    for (name, v) in [
        ("sigma", sigma),
        ("corr_length", corr_length),
        ("domain_length", domain_length),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be finite and > 0",
            });
        }
    }
    if !(cutoff >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "cutoff",
            reason: "must be >= 0",
        });
    }
    let s2 = sigma * sigma;
    let l2 = corr_length * corr_length;
    let half = 0.5 * domain_length;
    let mut modes = Vec::new();
    let mut eigenvalues = Vec::new();
    for k in 0..MAX_FREQUENCY {
        let w = 2.0 * PI * k as f64 / domain_length;
        let mu = integrate(
            |x| s2 * math::exp(-x * x / l2) * math::cos(w * x),
            -half,
            half,
            EIGEN_QUAD_TOL,
        )?;
        // Gaussian Fourier coefficients decrease in k, so the first one below
        // the cutoff ends the ladder.
        if !(mu > cutoff) {
            break;
        }
        if k == 0 {
            modes.push(KlMode::Constant);
            eigenvalues.push(mu);
        } else {
            modes.push(KlMode::Cos(k));
            modes.push(KlMode::Sin(k));
            eigenvalues.push(mu);
            eigenvalues.push(mu);
        }
    }
    let sqrt_eigenvalues = eigenvalues.iter().map(|&l| math::sqrt(l)).collect();
    Ok(KlField {
        sigma,
        corr_length,
        domain_length,
        cutoff,
        mean,
        modes,
        eigenvalues,
        sqrt_eigenvalues,
    })
}

impl KlField {
    /// `sigma = 1/15`, `l = 0.5` on `[0, 2 pi]` with cutoff `1e-6`.
    pub fn standard() -> Result<KlField> {
        kl_build(1.0 / 15.0, 0.5, 2.0 * PI, 1e-6, default_mean())
    }

    /// Truncation dimension.
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[KlMode] {
        &self.modes
    }

    /// Orthonormal eigenfunction `j` at `x`.
    pub fn eigenfunction(&self, j: usize, x: f64) -> f64 {
        let len = self.domain_length;
        match self.modes[j] {
            KlMode::Constant => 1.0 / math::sqrt(len),
            KlMode::Cos(k) => math::sqrt(2.0 / len) * math::cos(2.0 * PI * k as f64 * x / len),
            KlMode::Sin(k) => math::sqrt(2.0 / len) * math::sin(2.0 * PI * k as f64 * x / len),
        }
    }

    /// `mean(x) + sum_j sqrt(lambda_j) z_j phi_j(x)`; extra or missing
    /// coefficients are ignored. No positivity check.
    pub fn evaluate(&self, x: f64, z: &[f64]) -> f64 {
        let mut v = self.mean.eval(x);
        for (j, (&zj, &sl)) in z.iter().zip(&self.sqrt_eigenvalues).enumerate() {
            v += sl * zj * self.eigenfunction(j, x);
        }
        v
    }

    /// Evaluates a realization on `xs`, rejecting non-positive samples.
    pub fn sample_profile(&self, z: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("KL coefficients"));
        }
        xs.iter()
            .map(|&x| {
                let v = self.evaluate(x, z);
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::NonPositiveDensity { x, value: v })
                }
            })
            .collect()
    }

    /// The target covariance kernel.
    pub fn kernel(&self, dx: f64) -> f64 {
        self.sigma * self.sigma * math::exp(-dx * dx / (self.corr_length * self.corr_length))
    }

    /// Covariance of the truncated expansion between `x` and `y`.
    pub fn truncated_covariance(&self, x: f64, y: f64) -> f64 {
        (0..self.dim())
            .map(|j| self.eigenvalues[j] * self.eigenfunction(j, x) * self.eigenfunction(j, y))
            .sum()
    }

    /// Largest `|<phi_i, phi_j> - delta_ij|` over `[0, L]`, by quadrature.
    pub fn orthonormality_defect(&self, tol: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let g = integrate(
                    |x| self.eigenfunction(i, x) * self.eigenfunction(j, x),
                    0.0,
                    self.domain_length,
                    tol,
                )?;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(math::abs(g - target));
            }
        }
        Ok(worst)
    }
}
