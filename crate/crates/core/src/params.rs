//! Run parameters, grid geometry and seed derivation.

use crate::error::{Error, Result};
use crate::math;

/// How the reformulated Poisson equation is closed each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonMode {
    /// Fully implicit `e^phi`, solved by Newton iteration.
    Newton,
    /// `e^phi` linearized around the previous potential; one linear solve.
    Penalty,
    /// The `epsilon = 0` limit of the Newton path.
    Quasineutral,
}

impl PoissonMode {
    pub fn name(self) -> &'static str {
        match self {
            PoissonMode::Newton => "newton",
            PoissonMode::Penalty => "penalty",
            PoissonMode::Quasineutral => "quasineutral",
        }
    }
}

impl core::str::FromStr for PoissonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(PoissonMode::Newton),
            "penalty" => Ok(PoissonMode::Penalty),
            "quasineutral" => Ok(PoissonMode::Quasineutral),
            _ => Err(Error::InvalidParameter {
                name: "poisson_mode",
                reason: "expected newton, penalty or quasineutral",
            }),
        }
    }
}

/// In-cell placement of the initial markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Uniform random inside each cell (the production choice).
    Uniform,
    /// Evenly spaced at `(i + 1/2) h / M` inside each cell; noise free.
    Centered,
}

impl core::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "random" => Ok(Placement::Uniform),
            "centered" => Ok(Placement::Centered),
            _ => Err(Error::InvalidParameter {
                name: "placement",
                reason: "expected uniform or centered",
            }),
        }
    }
}

/// Every scalar knob of a high-fidelity run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub epsilon: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
    pub n_particles_total: usize,
    pub n_ensemble: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Width of the cosine velocity kernel; only used for phase-space dumps.
    pub kernel_width: f64,
    pub base_seed: u64,
    pub poisson_mode: PoissonMode,
    pub placement: Placement,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            epsilon: 1.0,
            x_left: 0.0,
            x_right: 1.0,
            n_cells: 100,
            n_particles_total: 100_000,
            n_ensemble: 20,
            cfl: 0.4,
            t_final: 0.2,
            newton_tol: 1e-8,
            newton_max_iter: 50,
            kernel_width: 1.0,
            base_seed: 20250116,
            poisson_mode: PoissonMode::Newton,
            placement: Placement::Uniform,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: &'static str) -> Result<()> {
            Err(Error::InvalidParameter { name, reason })
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", "must be finite and >= 0");
        }
        if !(self.x_left.is_finite() && self.x_right.is_finite() && self.x_right > self.x_left) {
            return bad("x_right", "domain must satisfy x_left < x_right");
        }
        if self.n_cells < 2 {
            return bad("n_cells", "need at least 2 cells");
        }
        if self.n_particles_total == 0 || self.n_particles_total % self.n_cells != 0 {
            return bad(
                "n_particles_total",
                "must be a positive multiple of n_cells",
            );
        }
        if self.n_ensemble == 0 {
            return bad("n_ensemble", "must be >= 1");
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl", "must lie in (0, 1)");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad("t_final", "must be finite and >= 0");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol", "must be > 0");
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter", "must be >= 1");
        }
        if !(self.kernel_width > 0.0) {
            return bad("kernel_width", "must be > 0");
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.x_left, self.x_right, self.n_cells)
    }

    pub fn particles_per_cell(&self) -> usize {
        self.n_particles_total / self.n_cells
    }

    /// The epsilon the field operator is actually built with.
    pub fn effective_epsilon(&self) -> f64 {
        match self.poisson_mode {
            PoissonMode::Quasineutral => 0.0,
            _ => self.epsilon,
        }
    }
}

/// Uniform periodic cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
    pub h: f64,
    inv_h: f64,
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Self {
        let h = (x_right - x_left) / n_cells as f64;
        Grid {
            x_left,
            x_right,
            n_cells,
            h,
            inv_h: 1.0 / h,
        }
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Center of cell `j` (0-based).
    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        self.x_left + (j as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        (0..self.n_cells).map(move |j| self.center(j))
    }

    /// NGP cell of a wrapped position. A particle sitting exactly on a face
    /// belongs to the cell on its right.
    #[inline]
    pub fn cell_index(&self, x: f64) -> usize {
        let idx = ((x - self.x_left) * self.inv_h) as usize;
        if idx >= self.n_cells {
            self.n_cells - 1
        } else {
            idx
        }
    }

    /// Periodic wrap into `[x_left, x_right)`; identity on that interval.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        if x >= self.x_left && x < self.x_right {
            return x;
        }
        let len = self.length();
        let mut y = x;
        if y >= self.x_right && y < self.x_right + len {
            y -= len;
        } else if y < self.x_left && y >= self.x_left - len {
            y += len;
        } else {
            let s = y - self.x_left;
            y = self.x_left + (s - len * math::floor(s / len));
        }
        // Rounding can land exactly on the right end.
        if y >= self.x_right || y < self.x_left {
            self.x_left
        } else {
            y
        }
    }

    #[inline]
    pub fn next(&self, j: usize) -> usize {
        if j + 1 == self.n_cells {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn prev(&self, j: usize) -> usize {
        if j == 0 {
            self.n_cells - 1
        } else {
            j - 1
        }
    }
}

/// Velocity floor of the time-step rule.
pub const VELOCITY_FLOOR: f64 = 1.0;

/// `dt = cfl * h / max(u0_max, 1)`, computed once per run.
pub fn derive_time_step(cfl: f64, h: f64, u0_max: f64) -> Result<f64> {
    if !(cfl.is_finite() && h.is_finite() && u0_max.is_finite()) {
        return Err(Error::NonFinite("derive_time_step"));
    }
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(Error::InvalidParameter {
            name: "cfl",
            reason: "must lie in (0, 1)",
        });
    }
    if !(h > 0.0) || u0_max < 0.0 {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "need h > 0 and u0_max >= 0",
        });
    }
    let speed = if u0_max > VELOCITY_FLOOR {
        u0_max
    } else {
        VELOCITY_FLOOR
    };
    Ok(cfl * h / speed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for ensemble member `run_index` of parameter sample `sample_index`.
///
/// The three inputs are absorbed one after another through SplitMix64, so the
/// result is order sensitive: `(s, i, k)` and `(s, k, i)` differ.
pub fn run_seed(base_seed: u64, run_index: u64, sample_index: u64) -> u64 {
    let a = splitmix64(base_seed);
    let b = splitmix64(a ^ run_index);
    splitmix64(b.wrapping_add(0xD6E8_FEB8_6659_FD93) ^ sample_index)
}
