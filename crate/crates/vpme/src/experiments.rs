//! Subcommand drivers. Each writes its CSVs into `out_dir` and returns the
//! numbers it wrote.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use vpme_core::euler::EulerParams;
use vpme_core::kl::{kl_build, default_mean, KlField};
use vpme_core::particles::phase_space_density;
use vpme_core::sim::{coarsen_snapshot, l2_error, loglog_slope, relative_error};
use vpme_core::{ic, InitialCondition, PoissonMode, SimParams, Snapshot};

use crate::bifi::{self, IcFamily, TRAIN_STREAM, VALIDATE_STREAM};
use crate::config::{Config, IcKind};
use crate::ensemble::{run_ensemble, run_member, EnsembleOutput};
use crate::io::{self, BifiRow, ConvergenceRow, ErrorRow};

pub const QUANTITIES: [&str; 3] = ["n", "u", "phi"];

fn quantity<'a>(s: &'a Snapshot, q: &str) -> &'a [f64] {
    match q {
        "n" => &s.n,
        "u" => &s.u,
        "phi" => &s.phi,
        _ => unreachable!("unknown quantity {q}"),
    }
}

/// Config `epsilon` values as written into file names.
pub fn eps_tag(eps: f64) -> String {
    format!("{eps:e}")
}

pub fn kl_field(cfg: &Config) -> Result<Arc<KlField>> {
    let len = cfg.sim.x_right - cfg.sim.x_left;
    Ok(Arc::new(kl_build(cfg.kl_sigma, cfg.kl_corr_length, len, cfg.kl_cutoff, default_mean())?))
}

/// The single initial condition named by `ic` and `z`.
pub fn build_ic(cfg: &Config) -> Result<InitialCondition> {
    Ok(match cfg.ic {
        IcKind::ApTest => ic::ap_test(),
        IcKind::Equilibrium => ic::equilibrium(cfg.equilibrium_density),
        IcKind::UqTest1 => ic::uq_test1(&cfg.z5()),
        IcKind::UqTest2 => ic::uq_test2(&cfg.z5()),
        IcKind::UqTest3Kl => {
            let f = kl_field(cfg)?;
            if cfg.z.len() > f.dim() {
                bail!("z has {} entries but the expansion has only {}", cfg.z.len(), f.dim());
            }
            let mut z = cfg.z.clone();
            z.resize(f.dim(), 0.0);
            ic::uq_test3(f, z)
        }
    })
}

pub fn family(cfg: &Config) -> Result<IcFamily> {
    Ok(match cfg.ic {
        IcKind::UqTest1 => IcFamily::Test1,
        IcKind::UqTest2 => IcFamily::Test2,
        IcKind::UqTest3Kl => IcFamily::Kl(kl_field(cfg)?),
        other => bail!("`{}` is not a parametrized family", other.name()),
    })
}

fn prepare(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))
}

fn print_runs(label: &str, e: &EnsembleOutput) {
    for r in &e.runs {
        println!("{label} {}", r.summary());
    }
}

fn with_times(cfg: &Config) -> Vec<f64> {
    let mut t: Vec<f64> = cfg.output_times.iter().copied().filter(|&s| s <= cfg.sim.t_final).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// `fields.csv`, plus `particles.csv` / `phase_space.csv` of run 0 on request.
pub fn simulate(cfg: &Config, out_dir: &Path) -> Result<EnsembleOutput> {
    prepare(out_dir)?;
    let ic = build_ic(cfg)?;
    let times = with_times(cfg);
    let e = run_ensemble(&cfg.sim, &ic, 0, &times)?;
    print_runs("simulate", &e);
    let grid = cfg.sim.grid();
    io::write_fields(&out_dir.join("fields.csv"), &grid, &e.mean)?;
    if cfg.dump_particles || cfg.dump_phase_space {
        let (_, state) = run_member(&cfg.sim, &ic, 0, 0, &[])?;
        if cfg.dump_particles {
            io::write_particles(&out_dir.join("particles.csv"), &state.ensemble)?;
        }
        if cfg.dump_phase_space {
            let nv = cfg.phase_space_nv;
            let dv = (cfg.phase_space_vmax - cfg.phase_space_vmin) / (nv - 1) as f64;
            let v: Vec<f64> = (0..nv).map(|i| cfg.phase_space_vmin + i as f64 * dv).collect();
            let f = phase_space_density(&state.ensemble, &grid, &v, cfg.sim.kernel_width);
            io::write_phase_space(&out_dir.join("phase_space.csv"), &grid, &v, &f)?;
        }
    }
    Ok(e)
}

#[derive(Debug, Clone)]
pub struct ConvergeResult {
    pub rows: Vec<ConvergenceRow>,
    /// Fitted log-log slope per `(epsilon, quantity)`.
    pub slopes: Vec<ErrorRow>,
}

impl ConvergeResult {
    pub fn slope(&self, eps: f64, q: &str) -> Option<f64> {
        self.slopes.iter().find(|r| r.epsilon == eps && r.quantity == q).map(|r| r.value)
    }
}

/// Error of each coarse ensemble against the block-averaged reference:
/// `convergence.csv` and `convergence_slopes.csv`.
pub fn converge(cfg: &Config, out_dir: &Path) -> Result<ConvergeResult> {
    prepare(out_dir)?;
    let ic = build_ic(cfg)?;
    let nref = cfg.reference_cells;
    for &n in &cfg.converge_cells {
        if nref % n != 0 {
            bail!("reference_cells = {nref} is not a multiple of {n}");
        }
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &eps in &cfg.epsilons {
        let at = |n_cells: usize| SimParams {
            epsilon: eps,
            n_cells,
            ..cfg.sim.clone()
        };
        let reference = run_ensemble(&at(nref), &ic, 0, &[])
            .with_context(|| format!("reference run, epsilon = {eps}"))?;
        print_runs(&format!("converge eps={eps} Nx={nref}"), &reference);
        let mut hs = Vec::new();
        let mut errs: Vec<Vec<f64>> = vec![Vec::new(); QUANTITIES.len()];
        for &n in &cfg.converge_cells {
            let p = at(n);
            let grid = p.grid();
            let coarse = run_ensemble(&p, &ic, 0, &[]).with_context(|| format!("Nx = {n}, epsilon = {eps}"))?;
            print_runs(&format!("converge eps={eps} Nx={n}"), &coarse);
            let refc = coarsen_snapshot(reference.last(), nref / n, &grid)?;
            hs.push(grid.h);
            for (qi, q) in QUANTITIES.iter().enumerate() {
                let e = l2_error(quantity(coarse.last(), q), quantity(&refc, q), grid.h);
                errs[qi].push(e);
                rows.push(ConvergenceRow {
                    epsilon: eps,
                    n_cells: n,
                    quantity: q.to_string(),
                    l2_error: e,
                });
            }
        }
        for (qi, q) in QUANTITIES.iter().enumerate() {
            let s = loglog_slope(&hs, &errs[qi]);
            println!("converge eps={eps} quantity={q} slope={s:.4}");
            slopes.push(ErrorRow {
                epsilon: eps,
                quantity: q.to_string(),
                value: s,
            });
        }
    }
    io::write_convergence(&out_dir.join("convergence.csv"), &rows)?;
    io::write_error_table(&out_dir.join("convergence_slopes.csv"), &slopes)?;
    Ok(ConvergeResult { rows, slopes })
}

#[derive(Debug, Clone)]
pub struct LimitResult {
    /// `E_r` of n, u, phi against the quasineutral run at `t_final`.
    pub errors: Vec<ErrorRow>,
    /// `(epsilon, t, l2 of n - e^phi)` at every output time.
    pub quasineutrality: Vec<(f64, f64, f64)>,
}

impl LimitResult {
    pub fn error(&self, eps: f64, q: &str) -> Option<f64> {
        self.errors.iter().find(|r| r.epsilon == eps && r.quantity == q).map(|r| r.value)
    }

    /// Mean of `l2(n - e^phi)` over output times `t >= t_start`.
    pub fn saturated_level(&self, eps: f64, t_start: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .quasineutrality
            .iter()
            .filter(|(e, t, _)| *e == eps && *t >= t_start)
            .map(|r| r.2)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// `l2(n - e^phi)` of a snapshot.
pub fn quasineutral_defect(s: &Snapshot, h: f64) -> f64 {
    let ephi: Vec<f64> = s.phi.iter().map(|p| p.exp()).collect();
    l2_error(&s.n, &ephi, h)
}

/// Relative errors against the quasineutral solver on the same grid and seeds
/// (`limit_compare.csv`), and the `n - e^phi` defect over time
/// (`quasineutrality.csv`).
pub fn limit_compare(cfg: &Config, out_dir: &Path) -> Result<LimitResult> {
    prepare(out_dir)?;
    let ic = build_ic(cfg)?;
    let times = with_times(cfg);
    let qn_params = SimParams {
        poisson_mode: PoissonMode::Quasineutral,
        ..cfg.sim.clone()
    };
    let qn = run_ensemble(&qn_params, &ic, 0, &times).context("quasineutral run")?;
    print_runs("limit-compare quasineutral", &qn);
    let h = cfg.sim.grid().h;
    let mut errors = Vec::new();
    let mut qnd = Vec::new();
    for &eps in &cfg.epsilons {
        let p = SimParams {
            epsilon: eps,
            poisson_mode: PoissonMode::Newton,
            ..cfg.sim.clone()
        };
        let e = run_ensemble(&p, &ic, 0, &times).with_context(|| format!("epsilon = {eps}"))?;
        print_runs(&format!("limit-compare eps={eps}"), &e);
        for q in QUANTITIES {
            let v = relative_error(quantity(e.last(), q), quantity(qn.last(), q))?;
            println!("limit-compare eps={eps} E_r({q})={v:.6e}");
            errors.push(ErrorRow {
                epsilon: eps,
                quantity: q.to_string(),
                value: v,
            });
        }
        for s in &e.mean {
            qnd.push((eps, s.t, quasineutral_defect(s, h)));
        }
    }
    io::write_error_table(&out_dir.join("limit_compare.csv"), &errors)?;
    io::write_quasineutrality(&out_dir.join("quasineutrality.csv"), &qnd)?;
    Ok(LimitResult {
        errors,
        quasineutrality: qnd,
    })
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    /// Relative l2 difference (newton vs penalty) of n, u, phi at `t_final`.
    pub rows: Vec<ErrorRow>,
}

/// Newton and penalty runs with shared seeds: `scheme_compare.csv`.
pub fn scheme_compare(cfg: &Config, out_dir: &Path) -> Result<SchemeResult> {
    prepare(out_dir)?;
    let ic = build_ic(cfg)?;
    let with_mode = |m| SimParams {
        poisson_mode: m,
        ..cfg.sim.clone()
    };
    let a = run_ensemble(&with_mode(PoissonMode::Newton), &ic, 0, &[]).context("newton run")?;
    print_runs("scheme-compare newton", &a);
    let b = run_ensemble(&with_mode(PoissonMode::Penalty), &ic, 0, &[]).context("penalty run")?;
    print_runs("scheme-compare penalty", &b);
    let mut rows = Vec::new();
    for q in QUANTITIES {
        let v = relative_error(quantity(b.last(), q), quantity(a.last(), q))?;
        println!("scheme-compare eps={} {q}: relative difference {v:.6e}", cfg.sim.epsilon);
        rows.push(ErrorRow {
            epsilon: cfg.sim.epsilon,
            quantity: q.to_string(),
            value: v,
        });
    }
    io::write_error_table(&out_dir.join("scheme_compare.csv"), &rows)?;
    Ok(SchemeResult { rows })
}

#[derive(Debug, Clone)]
pub struct BifiResult {
    pub rows: Vec<BifiRow>,
    /// Gramian condition number and worst relative interpolation defect at
    /// the selected points, per epsilon.
    pub interpolation: Vec<(f64, f64, f64)>,
}

impl BifiResult {
    pub fn row(&self, eps: f64, r: usize, q: &str) -> Option<&BifiRow> {
        self.rows.iter().find(|x| x.epsilon == eps && x.r == r && x.quantity == q)
    }
}

/// Greedy bi-fidelity surrogates for every epsilon: `bifidelity_errors.csv`,
/// `mean_std_eps<e>_<q>.csv` and `surrogate_eps<e>.txt`.
pub fn bifidelity(cfg: &Config, out_dir: &Path) -> Result<BifiResult> {
    prepare(out_dir)?;
    let fam = family(cfg)?;
    let lf = EulerParams {
        t_final: cfg.sim.t_final,
        ..cfg.lf.clone()
    };
    let hf_grid = cfg.sim.grid();
    let mut probe: Vec<f64> = hf_grid.centers().collect();
    probe.extend(lf.nodes());
    let train = bifi::sample_parameters(&fam, cfg.uq_distribution, cfg.uq_train, cfg.uq_seed, TRAIN_STREAM, &probe)?;
    let val = bifi::sample_parameters(&fam, cfg.uq_distribution, cfg.uq_validate, cfg.uq_seed, VALIDATE_STREAM, &probe)?;
    log::info!("low-fidelity sweep over {} + {} samples", train.len(), val.len());
    let lf_train = bifi::lf_columns(&lf, &fam, &train)?;
    let lf_val = bifi::lf_columns(&lf, &fam, &val)?;
    let r_max = cfg.uq_ranks.iter().copied().max().unwrap_or(1);
    let hash = cfg.hash();
    let centers: Vec<f64> = hf_grid.centers().collect();
    let nh = hf_grid.n_cells;

    let mut rows = Vec::new();
    let mut interpolation = Vec::new();
    for &eps in &cfg.epsilons {
        let hf = SimParams {
            epsilon: eps,
            ..cfg.sim.clone()
        };
        let s = bifi::build_surrogate(&hf, &lf, &fam, &train, lf_train.clone(), r_max)
            .with_context(|| format!("surrogate, epsilon = {eps}"))?;
        let sur = &s.surrogate;
        let mut worst: f64 = 0.0;
        for (k, &i) in sur.indices.iter().enumerate() {
            let u = sur.predict(&lf_train[i])?;
            let h = &sur.hf_basis[k];
            let d: f64 = u.iter().zip(h).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let n: f64 = h.iter().map(|a| a * a).sum::<f64>().sqrt();
            worst = worst.max(d / n);
        }
        let cond = sur.gramian_condition();
        interpolation.push((eps, cond, worst));
        io::write_surrogate_archive(
            &out_dir.join(format!("surrogate_eps{}.txt", eps_tag(eps))),
            &hash,
            eps,
            &s.selection,
            &train,
            sur,
        )?;

        let hf_val = bifi::hf_columns(&hf, &fam, &val).with_context(|| format!("validation, epsilon = {eps}"))?;
        let rep = bifi::validate(&s, &cfg.uq_ranks, &lf, &hf_grid, &lf_val, &hf_val)?;
        for (r, e) in &rep.bifi {
            for (qi, q) in ["n", "u"].iter().enumerate() {
                println!(
                    "bifidelity eps={eps} r={r} {q}: bifi {:.6e}, lofi {:.6e}",
                    e[qi], rep.lofi[qi]
                );
                rows.push(BifiRow {
                    r: *r,
                    quantity: q.to_string(),
                    epsilon: eps,
                    bifi_error: e[qi],
                    lofi_error: rep.lofi[qi],
                });
            }
        }
        for (qi, q) in ["n", "u"].iter().enumerate() {
            let block = |c: &Vec<f64>| c[qi * nh..(qi + 1) * nh].to_vec();
            let hf_q: Vec<Vec<f64>> = hf_val.iter().map(block).collect();
            let bf_q: Vec<Vec<f64>> = rep.bf_largest.iter().map(block).collect();
            io::write_mean_std(
                &out_dir.join(format!("mean_std_eps{}_{q}.csv", eps_tag(eps))),
                &centers,
                &hf_q,
                &bf_q,
            )?;
        }
    }
    io::write_bifi_errors(&out_dir.join("bifidelity_errors.csv"), &rows)?;
    Ok(BifiResult { rows, interpolation })
}

#[derive(Debug, Clone)]
pub struct KlInfo {
    pub dim: usize,
    pub orthonormality_defect: f64,
}

/// Eigenvalue table of the configured expansion: `kl_eigenvalues.csv`.
pub fn kl_info(cfg: &Config, out_dir: &Path) -> Result<KlInfo> {
    prepare(out_dir)?;
    let f = kl_field(cfg)?;
    let defect = f.orthonormality_defect(1e-12)?;
    io::write_kl_eigenvalues(&out_dir.join("kl_eigenvalues.csv"), &f)?;
    println!("kl-info: dimension {}, orthonormality defect {defect:.3e}", f.dim());
    Ok(KlInfo {
        dim: f.dim(),
        orthonormality_defect: defect,
    })
}
