//! Output bundle: manifest, `fractions.csv`, `summary.json`, spectra, comparison tables and figure data.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::json;
use sha2::{Digest, Sha256};

use phasespace_core::observables::Estimate;
use phasespace_core::Method;

use crate::ensemble::{detect_tmax, ComparisonReport, RunOutput};
use crate::series::TimeSeries;
use crate::settings::Settings;

pub const FRACTIONS_HEADER: &str =
    "t,Nm_frac,Nm_frac_se,Na_frac,Na_frac_se,g2_bb,g2_bb_se,g2_cl,g2_cl_se,diverged_frac,conservation_residual";

pub const SUMMARY_SCHEMA: u64 = 1;

/// C `printf("%.12e")`: twelve fraction digits and an exponent of at least two digits.
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Resolved configuration plus seed and code version, and its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub text: String,
    pub sha256: String,
}

impl Manifest {
    pub fn new(settings: &Settings) -> Self {
        let mut text = settings.to_text();
        writeln!(text, "version = {}", crate::VERSION).unwrap();
        let sha256 = hex(&Sha256::digest(text.as_bytes()));
        Self { text, sha256 }
    }

    /// Manifest covering several runs: the hashes of the members, in order.
    pub fn combined(members: &[(Method, &Manifest)]) -> Self {
        let mut text = String::new();
        for (m, man) in members {
            writeln!(text, "{m} = {}", man.sha256).unwrap();
        }
        writeln!(text, "version = {}", crate::VERSION).unwrap();
        let sha256 = hex(&Sha256::digest(text.as_bytes()));
        Self { text, sha256 }
    }

    /// Comment line opening every text output.
    pub fn comment(&self) -> String {
        format!("# manifest_sha256={}", self.sha256)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Value of a valid estimate, NaN otherwise.
fn shown(e: &Estimate) -> (f64, f64) {
    if e.is_valid() {
        (e.value, e.se)
    } else {
        (f64::NAN, f64::NAN)
    }
}

/// `fractions.csv` body: manifest comment, header, one row per saved time.
pub fn fractions_csv(series: &TimeSeries, manifest: &Manifest) -> String {
    let mut out = String::new();
    writeln!(out, "{}", manifest.comment()).unwrap();
    writeln!(out, "{FRACTIONS_HEADER}").unwrap();
    for r in &series.rows {
        let (bb, bb_se) = shown(&r.correlation.g2_bb);
        let (cl, cl_se) = shown(&r.correlation.g2_cl);
        let fields = [
            r.t,
            r.nm_frac.value,
            r.nm_frac.se,
            r.na_frac.value,
            r.na_frac.se,
            bb,
            bb_se,
            cl,
            cl_se,
            r.diverged_frac,
            r.conservation_residual.value,
        ];
        let line: Vec<String> = fields.iter().map(|&v| fmt_e12(v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Machine-readable run summary.
pub fn summary_json(out: &RunOutput, manifest: &Manifest) -> serde_json::Value {
    let s = &out.series;
    let last = s.rows.last();
    let t_max = if s.method == Method::PositiveP { detect_tmax(s) } else { None };
    json!({
        "schema": SUMMARY_SCHEMA,
        "manifest_sha256": manifest.sha256,
        "version": crate::VERSION,
        "method": s.method.name(),
        "trajectories": s.trajectories,
        "batches": s.batches,
        "n_m0": s.n_m0,
        "t_max": t_max.map_or(serde_json::Value::Null, |t| json!(t)),
        "t_d": s.diffusion_time().map_or(serde_json::Value::Null, |t| json!(t)),
        "diverged_fraction": s.final_diverged_fraction(),
        "conservation": {
            "final_residual": last.map_or(serde_json::Value::Null, |r| finite_or_null(r.conservation_residual.value)),
            "final_residual_se": last.map_or(serde_json::Value::Null, |r| finite_or_null(r.conservation_residual.se)),
            "max_abs_residual": s.max_conservation_residual(),
            "max_trajectory_relative_drift": s.rows.iter().map(|r| r.max_relative_drift).fold(0.0, f64::max),
        },
        "final": last.map(|r| json!({
            "t": r.t,
            "Nm_frac": finite_or_null(r.nm_frac.value),
            "Na_frac": finite_or_null(r.na_frac.value),
        })),
        "hfb_max_enforcement": out.diagnostics.hfb_max_enforcement,
        "hfb_retries": out.diagnostics.hfb_retries,
        "threads": out.diagnostics.threads,
        "warnings": out.warnings,
        "wall_clock_s": out.wall_clock,
    })
}

/// Position- and momentum-space densities at every snapshot, as two CSV bodies.
pub fn spectra_csv(series: &TimeSeries, manifest: &Manifest) -> (String, String) {
    let mut pos = String::new();
    let mut mom = String::new();
    writeln!(pos, "{}", manifest.comment()).unwrap();
    writeln!(pos, "t,x,n_a,n_a_se,n_m,n_m_se").unwrap();
    writeln!(mom, "{}", manifest.comment()).unwrap();
    writeln!(mom, "t,k,n_a,n_a_se,n_m,n_m_se").unwrap();
    let row = |out: &mut String, t: f64, c: f64, a: &Estimate, m: &Estimate| {
        let vals = [t, c, a.value, a.se, m.value, m.se];
        writeln!(out, "{}", vals.iter().map(|&v| fmt_e12(v)).collect::<Vec<_>>().join(",")).unwrap();
    };
    for snap in &series.snapshots {
        for i in 0..snap.x.len() {
            row(&mut pos, snap.t, snap.x[i], &snap.n_a_x[i], &snap.n_m_x[i]);
        }
        for i in 0..snap.k.len() {
            row(&mut mom, snap.t, snap.k[i], &snap.n_a_k[i], &snap.n_m_k[i]);
        }
    }
    (pos, mom)
}

/// Side-by-side fractions of every method and the pairwise discrepancies.
pub fn comparison_csv(series: &[&TimeSeries], report: &ComparisonReport, manifest: &Manifest) -> String {
    let mut out = String::new();
    writeln!(out, "{}", manifest.comment()).unwrap();
    let mut header = vec!["t".to_string()];
    for s in series {
        let m = s.method.name();
        for col in ["Nm_frac", "Nm_frac_se", "Na_frac", "Na_frac_se"] {
            header.push(format!("{m}_{col}"));
        }
    }
    for p in &report.pairs {
        let (a, b) = (report.methods[p.a].name(), report.methods[p.b].name());
        header.push(format!("{a}_vs_{b}_Nm_z"));
        header.push(format!("{a}_vs_{b}_Na_z"));
    }
    writeln!(out, "{}", header.join(",")).unwrap();
    for (i, &t) in report.times.iter().enumerate() {
        let mut vals = vec![t];
        for s in series {
            let r = &s.rows[i];
            vals.extend([r.nm_frac.value, r.nm_frac.se, r.na_frac.value, r.na_frac.se]);
        }
        for p in &report.pairs {
            vals.extend([p.nm_z[i], p.na_z[i]]);
        }
        writeln!(out, "{}", vals.iter().map(|&v| fmt_e12(v)).collect::<Vec<_>>().join(",")).unwrap();
    }
    out
}

/// Whitespace-separated columns under a `#` header naming each column.
fn dat(manifest: &Manifest, columns: &[String], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    writeln!(out, "{}", manifest.comment()).unwrap();
    writeln!(out, "# {}", columns.join(" ")).unwrap();
    for r in rows {
        writeln!(out, "{}", r.iter().map(|&v| fmt_e12(v)).collect::<Vec<_>>().join(" ")).unwrap();
    }
    out
}

/// Molecule and atom fractions of every method against time.
pub fn numbers_dat(series: &[&TimeSeries], manifest: &Manifest) -> String {
    let mut cols = vec!["t".to_string()];
    for s in series {
        let m = s.method.name();
        cols.extend(["Nm_frac", "Nm_frac_se", "Na_frac", "Na_frac_se"].map(|c| format!("{m}_{c}")));
    }
    let n = series.first().map_or(0, |s| s.rows.len());
    dat(
        manifest,
        &cols,
        (0..n).map(|i| {
            let mut v = vec![series[0].rows[i].t];
            for s in series {
                let r = &s.rows[i];
                v.extend([r.nm_frac.value, r.nm_frac.se, r.na_frac.value, r.na_frac.se]);
            }
            v
        }),
    )
}

/// Back-to-back and collinear g² of every method against time.
pub fn correlations_dat(series: &[&TimeSeries], manifest: &Manifest) -> String {
    let mut cols = vec!["t".to_string()];
    for s in series {
        let m = s.method.name();
        cols.extend(["g2_bb", "g2_bb_se", "g2_cl", "g2_cl_se"].map(|c| format!("{m}_{c}")));
    }
    let n = series.first().map_or(0, |s| s.rows.len());
    dat(
        manifest,
        &cols,
        (0..n).map(|i| {
            let mut v = vec![series[0].rows[i].t];
            for s in series {
                let c = &s.rows[i].correlation;
                let (bb, bb_se) = shown(&c.g2_bb);
                let (cl, cl_se) = shown(&c.g2_cl);
                v.extend([bb, bb_se, cl, cl_se]);
            }
            v
        }),
    )
}

/// Molecular density `n_m(x, t)` as gnuplot blocks, one per snapshot time.
pub fn molecular_density_dat(series: &TimeSeries, manifest: &Manifest) -> String {
    let mut out = String::new();
    writeln!(out, "{}", manifest.comment()).unwrap();
    writeln!(out, "# method={}", series.method.name()).unwrap();
    writeln!(out, "# t x n_m n_m_se").unwrap();
    for (k, snap) in series.snapshots.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for (x, n) in snap.x.iter().zip(&snap.n_m_x) {
            let vals = [snap.t, *x, n.value, n.se];
            writeln!(out, "{}", vals.iter().map(|&v| fmt_e12(v)).collect::<Vec<_>>().join(" ")).unwrap();
        }
    }
    out
}

fn write(path: &Path, body: &str) -> io::Result<PathBuf> {
    fs::write(path, body)?;
    Ok(path.to_path_buf())
}

/// Writes `manifest.txt`, `fractions.csv` and `summary.json` into `dir`.
pub fn write_run_bundle(dir: &Path, out: &RunOutput, manifest: &Manifest) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = vec![
        write(&dir.join("manifest.txt"), &format!("{}\n{}", manifest.comment(), manifest.text))?,
        write(&dir.join("fractions.csv"), &fractions_csv(&out.series, manifest))?,
    ];
    let summary = serde_json::to_string_pretty(&summary_json(out, manifest)).expect("summary serializes");
    written.push(write(&dir.join("summary.json"), &(summary + "\n"))?);
    Ok(written)
}

/// Writes `spectra_position.csv` and `spectra_momentum.csv` into `dir`.
pub fn write_spectra(dir: &Path, series: &TimeSeries, manifest: &Manifest) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let (pos, mom) = spectra_csv(series, manifest);
    Ok(vec![
        write(&dir.join("spectra_position.csv"), &pos)?,
        write(&dir.join("spectra_momentum.csv"), &mom)?,
    ])
}

/// Writes `comparison.csv` and `fig1.dat` … `fig5.dat`. Runs without s-wave
/// interactions fill the number and correlation figures 1 and 3, interacting runs 2 and 4;
/// figure 5 is the molecular density of `density_source`.
pub fn write_comparison(
    dir: &Path,
    series: &[&TimeSeries],
    report: &ComparisonReport,
    density_source: &TimeSeries,
    manifest: &Manifest,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let interacting = series.iter().any(|s| s.u_aa != 0.0);
    let (numbers, correlations) = if interacting { (2, 4) } else { (1, 3) };
    let mut written = vec![write(&dir.join("comparison.csv"), &comparison_csv(series, report, manifest))?];
    written.push(write(&dir.join(format!("fig{numbers}.dat")), &numbers_dat(series, manifest))?);
    written.push(write(&dir.join(format!("fig{correlations}.dat")), &correlations_dat(series, manifest))?);
    written.push(write(&dir.join("fig5.dat"), &molecular_density_dat(density_source, manifest))?);
    Ok(written)
}
