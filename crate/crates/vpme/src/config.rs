//! Flat `key = value` configuration.
//!
//! One assignment per line, `#` starts a comment. Keys mirror the field names
//! of the run parameters; an unknown key is an error. `--set key=value` on the
//! command line is applied after the file, in order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use vpme_core::euler::EulerParams;
use vpme_core::{Placement, PoissonMode, SimParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: `{value}` ({reason})")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Named initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcKind {
    ApTest,
    Equilibrium,
    UqTest1,
    UqTest2,
    UqTest3Kl,
}

impl IcKind {
    pub fn name(self) -> &'static str {
        match self {
            IcKind::ApTest => "ap-test",
            IcKind::Equilibrium => "equilibrium",
            IcKind::UqTest1 => "uq-test1",
            IcKind::UqTest2 => "uq-test2",
            IcKind::UqTest3Kl => "uq-test3-kl",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ap-test" => IcKind::ApTest,
            "equilibrium" => IcKind::Equilibrium,
            "uq-test1" => IcKind::UqTest1,
            "uq-test2" => IcKind::UqTest2,
            "uq-test3-kl" => IcKind::UqTest3Kl,
            _ => return None,
        })
    }

    /// Periodic domain the profile is defined on.
    pub fn default_domain(self) -> (f64, f64) {
        match self {
            IcKind::UqTest3Kl => (0.0, 2.0 * PI),
            _ => (0.0, 1.0),
        }
    }
}

/// Distribution of the random parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// I.i.d. uniform on `[-1, 1]`.
    Uniform,
    /// I.i.d. standard normal.
    Normal,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Normal => "normal",
        }
    }
}

/// Every knob of every subcommand, resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sim: SimParams,
    pub ic: IcKind,
    /// Parameter vector for the IC families (empty means all zeros).
    pub z: Vec<f64>,
    pub equilibrium_density: f64,
    /// Extra output times for `simulate` (the final time is always written).
    pub output_times: Vec<f64>,
    /// Epsilon sweep for `converge`, `limit-compare` and `bifidelity`.
    pub epsilons: Vec<f64>,
    pub converge_cells: Vec<usize>,
    pub reference_cells: usize,
    pub lf: EulerParams,
    pub uq_train: usize,
    pub uq_validate: usize,
    pub uq_ranks: Vec<usize>,
    pub uq_distribution: Distribution,
    pub uq_seed: u64,
    pub kl_sigma: f64,
    pub kl_corr_length: f64,
    pub kl_cutoff: f64,
    pub dump_particles: bool,
    pub dump_phase_space: bool,
    pub phase_space_vmin: f64,
    pub phase_space_vmax: f64,
    pub phase_space_nv: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sim: SimParams::default(),
            ic: IcKind::ApTest,
            z: Vec::new(),
            equilibrium_density: 1.0,
            output_times: Vec::new(),
            epsilons: vec![1.0, 0.01, 1e-4],
            converge_cells: vec![25, 50, 100],
            reference_cells: 200,
            lf: EulerParams::default(),
            uq_train: 100,
            uq_validate: 20,
            uq_ranks: vec![2, 10],
            uq_distribution: Distribution::Uniform,
            uq_seed: 7,
            kl_sigma: 1.0 / 15.0,
            kl_corr_length: 0.5,
            kl_cutoff: 1e-6,
            dump_particles: false,
            dump_phase_space: false,
            phase_space_vmin: -4.0,
            phase_space_vmax: 4.0,
            phase_space_nv: 161,
        }
    }
}

/// Splits a config file into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Parses one `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::Syntax {
            line: 0,
            text: s.to_string(),
        }),
    }
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl Config {
    /// Builds a config from ordered assignments; later ones win.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = &'a (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        let mut domain_set = false;
        for (k, v) in pairs {
            if k == "x_left" || k == "x_right" {
                domain_set = true;
            }
            c.apply(k, v)?;
        }
        if !domain_set {
            let (a, b) = c.ic.default_domain();
            c.sim.x_left = a;
            c.sim.x_right = b;
        }
        c.lf.x_left = c.sim.x_left;
        c.lf.x_right = c.sim.x_right;
        c.lf.t_final = c.sim.t_final;
        c.validate()?;
        Ok(c)
    }

    /// Reads `path` (if given) and applies `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut pairs = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        Config::from_pairs(&pairs)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let s = &mut self.sim;
        match key {
            "epsilon" => s.epsilon = num(key, v)?,
            "x_left" => s.x_left = num(key, v)?,
            "x_right" => s.x_right = num(key, v)?,
            "n_cells" => s.n_cells = num(key, v)?,
            "n_particles_total" => s.n_particles_total = num::<f64>(key, v).and_then(|x| {
                if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
                    Ok(x as usize)
                } else {
                    Err(bad(key, v, "expected a non-negative integer"))
                }
            })?,
            "n_ensemble" => s.n_ensemble = num(key, v)?,
            "cfl" => s.cfl = num(key, v)?,
            "t_final" => s.t_final = num(key, v)?,
            "newton_tol" => s.newton_tol = num(key, v)?,
            "newton_max_iter" => s.newton_max_iter = num(key, v)?,
            "kernel_width" => s.kernel_width = num(key, v)?,
            "base_seed" => s.base_seed = num(key, v)?,
            "poisson_mode" => s.poisson_mode = v.parse::<PoissonMode>().map_err(|e| bad(key, v, e))?,
            "placement" => s.placement = v.parse::<Placement>().map_err(|e| bad(key, v, e))?,
            "ic" => {
                self.ic = IcKind::parse(v).ok_or_else(|| {
                    bad(key, v, "expected ap-test, equilibrium, uq-test1, uq-test2 or uq-test3-kl")
                })?
            }
            "z" => self.z = list(key, v)?,
            "equilibrium_density" => self.equilibrium_density = num(key, v)?,
            "output_times" => self.output_times = list(key, v)?,
            "epsilons" => self.epsilons = list(key, v)?,
            "converge_cells" => self.converge_cells = list(key, v)?,
            "reference_cells" => self.reference_cells = num(key, v)?,
            "lf_nodes" => self.lf.n_nodes = num(key, v)?,
            "lf_tau_ratio" => self.lf.tau_ratio = num(key, v)?,
            "lf_cfl_limit" => self.lf.cfl_limit = num(key, v)?,
            "uq_train" => self.uq_train = num(key, v)?,
            "uq_validate" => self.uq_validate = num(key, v)?,
            "uq_ranks" => self.uq_ranks = list(key, v)?,
            "uq_distribution" => {
                self.uq_distribution = match v {
                    "uniform" => Distribution::Uniform,
                    "normal" => Distribution::Normal,
                    _ => return Err(bad(key, v, "expected uniform or normal")),
                }
            }
            "uq_seed" => self.uq_seed = num(key, v)?,
            "kl_sigma" => self.kl_sigma = num(key, v)?,
            "kl_corr_length" => self.kl_corr_length = num(key, v)?,
            "kl_cutoff" => self.kl_cutoff = num(key, v)?,
            "dump_particles" => self.dump_particles = boolean(key, v)?,
            "dump_phase_space" => self.dump_phase_space = boolean(key, v)?,
            "phase_space_vmin" => self.phase_space_vmin = num(key, v)?,
            "phase_space_vmax" => self.phase_space_vmax = num(key, v)?,
            "phase_space_nv" => self.phase_space_nv = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.lf.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if matches!(self.ic, IcKind::UqTest1 | IcKind::UqTest2) && !self.z.is_empty() && self.z.len() != 5 {
            return inv(format!("{} takes 5 parameters, got {}", self.ic.name(), self.z.len()));
        }
        if self.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return inv("epsilons must be >= 0".into());
        }
        if self.converge_cells.iter().any(|&n| n >= self.reference_cells || n == 0) {
            return inv("reference_cells must exceed every entry of converge_cells".into());
        }
        if self.uq_ranks.iter().any(|&r| r == 0 || r > self.uq_train) {
            return inv("uq_ranks entries must lie in 1..=uq_train".into());
        }
        if self.uq_validate == 0 {
            return inv("uq_validate must be >= 1".into());
        }
        if self.phase_space_nv < 2 || !(self.phase_space_vmax > self.phase_space_vmin) {
            return inv("phase-space velocity grid needs nv >= 2 and vmax > vmin".into());
        }
        Ok(())
    }

    /// The `z` vector for the 5-parameter families (zeros when unset).
    pub fn z5(&self) -> [f64; 5] {
        let mut z = [0.0; 5];
        for (a, b) in z.iter_mut().zip(&self.z) {
            *a = *b;
        }
        z
    }

    /// Every resolved key in a fixed order; the basis of [`Config::hash`].
    pub fn canonical(&self) -> String {
        fn join<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let s = &self.sim;
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("epsilon", format!("{:e}", s.epsilon));
        kv("x_left", format!("{:e}", s.x_left));
        kv("x_right", format!("{:e}", s.x_right));
        kv("n_cells", s.n_cells.to_string());
        kv("n_particles_total", s.n_particles_total.to_string());
        kv("n_ensemble", s.n_ensemble.to_string());
        kv("cfl", format!("{:e}", s.cfl));
        kv("t_final", format!("{:e}", s.t_final));
        kv("newton_tol", format!("{:e}", s.newton_tol));
        kv("newton_max_iter", s.newton_max_iter.to_string());
        kv("kernel_width", format!("{:e}", s.kernel_width));
        kv("base_seed", s.base_seed.to_string());
        kv("poisson_mode", s.poisson_mode.name().to_string());
        kv(
            "placement",
            match s.placement {
                Placement::Uniform => "uniform",
                Placement::Centered => "centered",
            }
            .to_string(),
        );
        kv("ic", self.ic.name().to_string());
        kv("z", join(&self.z));
        kv("equilibrium_density", format!("{:e}", self.equilibrium_density));
        kv("output_times", join(&self.output_times));
        kv("epsilons", join(&self.epsilons));
        kv("converge_cells", join(&self.converge_cells));
        kv("reference_cells", self.reference_cells.to_string());
        kv("lf_nodes", self.lf.n_nodes.to_string());
        kv("lf_tau_ratio", format!("{:e}", self.lf.tau_ratio));
        kv("lf_cfl_limit", format!("{:e}", self.lf.cfl_limit));
        kv("uq_train", self.uq_train.to_string());
        kv("uq_validate", self.uq_validate.to_string());
        kv("uq_ranks", join(&self.uq_ranks));
        kv("uq_distribution", self.uq_distribution.name().to_string());
        kv("uq_seed", self.uq_seed.to_string());
        kv("kl_sigma", format!("{:e}", self.kl_sigma));
        kv("kl_corr_length", format!("{:e}", self.kl_corr_length));
        kv("kl_cutoff", format!("{:e}", self.kl_cutoff));
        kv("dump_particles", self.dump_particles.to_string());
        kv("dump_phase_space", self.dump_phase_space.to_string());
        kv("phase_space_vmin", format!("{:e}", self.phase_space_vmin));
        kv("phase_space_vmax", format!("{:e}", self.phase_space_vmax));
        kv("phase_space_nv", self.phase_space_nv.to_string());
        o
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}
