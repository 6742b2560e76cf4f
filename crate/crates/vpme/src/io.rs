//! CSV and archive writers. Floats carry 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use vpme_core::kl::{KlField, KlMode};
use vpme_core::uq::{BifiSurrogate, Selection};
use vpme_core::{Grid, ParticleEnsemble, Snapshot};

/// `{:.16e}`: 17 significant digits, round-trips every `f64`.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// `t,x,n,u,phi,E`, one row per (snapshot, cell).
pub fn write_fields(path: &Path, grid: &Grid, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "n", "u", "phi", "E"])?;
    for s in snapshots {
        for (j, x) in grid.centers().enumerate() {
            w.write_record([
                fmt_f(s.t),
                fmt_f(x),
                fmt_f(s.n[j]),
                fmt_f(s.u[j]),
                fmt_f(s.phi[j]),
                fmt_f(s.e[j]),
            ])?;
        }
    }
    finish(w, path)
}

/// One row of an `epsilon,quantity,value` table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub quantity: String,
    pub value: f64,
}

pub fn write_error_table(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "quantity", "value"])?;
    for r in rows {
        w.write_record([fmt_f(r.epsilon), r.quantity.clone(), fmt_f(r.value)])?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub n_cells: usize,
    pub quantity: String,
    pub l2_error: f64,
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "Nx", "quantity", "l2_error"])?;
    for r in rows {
        w.write_record([
            fmt_f(r.epsilon),
            r.n_cells.to_string(),
            r.quantity.clone(),
            fmt_f(r.l2_error),
        ])?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifiRow {
    pub r: usize,
    pub quantity: String,
    pub epsilon: f64,
    pub bifi_error: f64,
    pub lofi_error: f64,
}

pub fn write_bifi_errors(path: &Path, rows: &[BifiRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["r", "quantity", "epsilon", "bifi_error", "lofi_error"])?;
    for r in rows {
        w.write_record([
            r.r.to_string(),
            r.quantity.clone(),
            fmt_f(r.epsilon),
            fmt_f(r.bifi_error),
            fmt_f(r.lofi_error),
        ])?;
    }
    finish(w, path)
}

/// `epsilon,t,l2_error` for the `n - e^phi` defect.
pub fn write_quasineutrality(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epsilon", "t", "l2_error"])?;
    for &(e, t, v) in rows {
        w.write_record([fmt_f(e), fmt_f(t), fmt_f(v)])?;
    }
    finish(w, path)
}

/// `x,mean_hf,std_hf,mean_bf,std_bf`
pub fn write_mean_std(path: &Path, xs: &[f64], hf: &[Vec<f64>], bf: &[Vec<f64>]) -> Result<()> {
    let (mh, sh) = mean_std(hf);
    let (mb, sb) = mean_std(bf);
    let mut w = writer(path)?;
    w.write_record(["x", "mean_hf", "std_hf", "mean_bf", "std_bf"])?;
    for (j, x) in xs.iter().enumerate() {
        w.write_record([fmt_f(*x), fmt_f(mh[j]), fmt_f(sh[j]), fmt_f(mb[j]), fmt_f(sb[j])])?;
    }
    finish(w, path)
}

/// Pointwise sample mean and (unbiased) standard deviation over samples.
pub fn mean_std(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.first().map_or(0, Vec::len);
    let k = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / k;
        }
    }
    let mut var = vec![0.0; n];
    if samples.len() > 1 {
        for s in samples {
            for ((a, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *a += (v - m) * (v - m) / (k - 1.0);
            }
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

/// `k,x,v,w`
pub fn write_particles(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "x", "v", "w"])?;
    for (k, ((x, v), wt)) in ens
        .positions()
        .iter()
        .zip(ens.velocities())
        .zip(ens.weights())
        .enumerate()
    {
        w.write_record([k.to_string(), fmt_f(*x), fmt_f(*v), fmt_f(*wt)])?;
    }
    finish(w, path)
}

/// `x,v,f` on the cell-center by velocity-grid lattice (cell-major).
pub fn write_phase_space(path: &Path, grid: &Grid, v_grid: &[f64], f: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "v", "f"])?;
    for (j, x) in grid.centers().enumerate() {
        for (i, v) in v_grid.iter().enumerate() {
            w.write_record([fmt_f(x), fmt_f(*v), fmt_f(f[j * v_grid.len() + i])])?;
        }
    }
    finish(w, path)
}

/// `j,mode,frequency,eigenvalue`
pub fn write_kl_eigenvalues(path: &Path, field: &KlField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["j", "mode", "frequency", "eigenvalue"])?;
    for (j, (m, ev)) in field.modes().iter().zip(field.eigenvalues()).enumerate() {
        let (name, k) = match *m {
            KlMode::Constant => ("constant", 0),
            KlMode::Cos(k) => ("cos", k),
            KlMode::Sin(k) => ("sin", k),
        };
        w.write_record([j.to_string(), name.to_string(), k.to_string(), fmt_f(*ev)])?;
    }
    finish(w, path)
}

/// Plain-text surrogate archive: selected points, both bases, the Gramian and
/// the config hash, in `[section]` blocks of comma-separated rows.
pub fn write_surrogate_archive(
    path: &Path,
    config_hash: &str,
    epsilon: f64,
    selection: &Selection,
    points: &[Vec<f64>],
    surrogate: &BifiSurrogate,
) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    let row = |v: &[f64]| v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(",");
    let r = surrogate.rank();
    writeln!(w, "# vpme bi-fidelity surrogate")?;
    writeln!(w, "config_hash = {config_hash}")?;
    writeln!(w, "epsilon = {}", fmt_f(epsilon))?;
    writeln!(w, "rank = {r}")?;
    writeln!(w, "ridge = {}", fmt_f(surrogate.ridge))?;
    writeln!(w, "lf_h = {}", fmt_f(surrogate.lf_h))?;
    writeln!(w, "[indices]")?;
    writeln!(
        w,
        "{}",
        surrogate.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    )?;
    writeln!(w, "[selection_residuals]")?;
    writeln!(w, "{}", row(&selection.residuals[..r]))?;
    writeln!(w, "[points]")?;
    for &i in &surrogate.indices {
        writeln!(w, "{}", row(&points[i]))?;
    }
    writeln!(w, "[gramian]")?;
    for i in 0..r {
        writeln!(w, "{}", row(&surrogate.gramian[i * r..(i + 1) * r]))?;
    }
    writeln!(w, "[lf_basis]")?;
    for c in &surrogate.lf_basis {
        writeln!(w, "{}", row(c))?;
    }
    writeln!(w, "[hf_basis]")?;
    for c in &surrogate.hf_basis {
        writeln!(w, "{}", row(c))?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn mean_std_hand_case() {
        let (m, s) = mean_std(&[vec![1.0, 0.0], vec![3.0, 0.0]]);
        assert_eq!(m, vec![2.0, 0.0]);
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn field_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let g = Grid::new(0.0, 1.0, 2);
        let s = Snapshot {
            t: 0.5,
            n: vec![1.0, 2.0],
            u: vec![0.0, 0.5],
            phi: vec![0.0, 0.0],
            e: vec![0.0, 0.0],
            current: vec![0.0, 1.0],
        };
        write_fields(&p, &g, &[s]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,n,u,phi,E");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5.0000000000000000e-1,7.5000000000000000e-1,2.0"));
    }
}
