//! Configuration, CSV output, parallel ensembles and experiment drivers on
//! top of `vpme-core`.

pub mod bifi;
pub mod config;
pub mod ensemble;
pub mod experiments;
pub mod io;

pub use config::{Config, ConfigError, Distribution, IcKind};
pub use ensemble::{run_ensemble, with_threads, EnsembleOutput, RunRecord};
