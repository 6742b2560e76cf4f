//! Numerical core for 1D1V plasma simulation near quasineutrality.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm:
//!
//! * [`particles`]: NGP particle initialization, moment deposition, the
//!   semi-implicit push.
//! * [`field`]: the reformulated nonlinear Poisson solve (Newton or the
//!   linearized penalty scheme), its quasineutral limit and the electric field.
//! * [`sim`]: the per-step pipeline and single-run driver.
//! * [`euler`]: isothermal Euler with Lax-Friedrichs (the low-fidelity model).
//! * [`uq`] and [`kl`]: greedy point selection, bi-fidelity reconstruction and
//!   Karhunen-Loeve random initial densities.
//!
//! IO, configuration, parallel ensembles and the command line live in the
//! companion `vpme` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod euler;
pub mod field;
pub mod ic;
pub mod kl;
pub mod linalg;
pub mod params;
pub mod particles;
pub mod quadrature;
pub mod sim;
pub mod uq;

pub use error::{Error, Result};
pub use field::{CyclicOperator, FieldState, PoissonSolution};
pub use ic::{Beam, InitialCondition, Profile};
pub use params::{derive_time_step, run_seed, Grid, Placement, PoissonMode, SimParams};
pub use particles::{MomentSet, ParticleEnsemble};
pub use sim::{RunOutput, Snapshot};
