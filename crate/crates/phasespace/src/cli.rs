//! Subcommands `run`, `compare` and `spectra`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use phasespace_core::Method;

use crate::ensemble::{self, RunError, RunOptions, RunOutput};
use crate::output::{self, Manifest};
use crate::settings::Settings;
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "phasespace", version, about = "Molecular BEC dissociation with positive-P, truncated Wigner and HFB")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Suppress progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured method and write fractions.csv, summary.json and manifest.txt.
    Run(Common),
    /// Run several methods on the same configuration and compare them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "positive_p,twa,hfb")]
        methods: Vec<String>,
        /// Number of molecular-density snapshots written to fig5.dat.
        #[arg(long, default_value_t = 21)]
        density_frames: usize,
    },
    /// Write position and momentum densities at the given times.
    Spectra {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times in seconds.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
    },
}

fn load(common: &Common) -> Result<Settings, Error> {
    let mut s = Settings::load(&common.config)?;
    s.apply_overrides(&common.set)?;
    Ok(s)
}

fn report_run(out: &RunOutput, files: &[PathBuf], quiet: bool) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if !quiet {
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
}

/// Runs and writes one bundle into `dir`; a total divergence still writes its partial results.
fn run_into(settings: &Settings, dir: &Path, opts: &RunOptions, quiet: bool) -> Result<(RunOutput, Manifest), Error> {
    let cfg = settings.validate()?;
    let manifest = Manifest::new(settings);
    match ensemble::run(&cfg, opts) {
        Ok(out) => {
            let files = output::write_run_bundle(dir, &out, &manifest)?;
            report_run(&out, &files, quiet);
            Ok((out, manifest))
        }
        Err(RunError::TotalDivergence { t, partial }) => {
            let files = output::write_run_bundle(dir, &partial, &manifest)?;
            report_run(&partial, &files, quiet);
            Err(RunError::TotalDivergence { t, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(common: &Common) -> Result<(), Error> {
    let settings = load(common)?;
    let dir = PathBuf::from(&settings.run.output_dir);
    let opts = RunOptions {
        progress: !common.quiet,
        ..RunOptions::default()
    };
    run_into(&settings, &dir, &opts, common.quiet)?;
    Ok(())
}

fn cmd_compare(common: &Common, methods: &[String], frames: usize) -> Result<(), Error> {
    let base = load(common)?;
    let methods = methods
        .iter()
        .map(|m| {
            m.parse::<Method>().map_err(|message| {
                crate::ConfigError::Keys(vec![crate::settings::KeyError {
                    line: None,
                    key: "methods".into(),
                    message,
                }])
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    // validate everything before running anything
    for &m in &methods {
        base.with_method(m).validate()?;
    }
    let dir = PathBuf::from(&base.run.output_dir);
    let t_final = base.grid.t_final;
    let frames = frames.max(2);
    let snapshot_times: Vec<f64> = (0..frames)
        .map(|i| t_final * i as f64 / (frames - 1) as f64)
        .collect();
    let opts = RunOptions {
        snapshot_times,
        progress: !common.quiet,
        ..RunOptions::default()
    };
    let mut outputs = Vec::new();
    let mut divergence = None;
    for &m in &methods {
        let s = base.with_method(m);
        match run_into(&s, &dir.join(m.name()), &opts, common.quiet) {
            Ok(pair) => outputs.push(pair),
            Err(Error::Run(RunError::TotalDivergence { t, partial })) => {
                eprintln!("warning: {m}: every trajectory diverged by t = {t:.6} s");
                outputs.push((*partial.clone(), Manifest::new(&s)));
                divergence = Some(Error::Run(RunError::TotalDivergence { t, partial }));
            }
            Err(e) => return Err(e),
        }
    }
    let series: Vec<_> = outputs.iter().map(|(o, _)| &o.series).collect();
    let report = ensemble::compare(&series)?;
    let members: Vec<_> = outputs.iter().map(|(o, m)| (o.series.method, m)).collect();
    let manifest = Manifest::combined(&members);
    let density = series
        .iter()
        .find(|s| s.method == Method::Hfb)
        .copied()
        .unwrap_or(series[0]);
    let files = output::write_comparison(&dir, &series, &report, density, &manifest)?;
    for p in &report.pairs {
        let (a, b) = (report.methods[p.a], report.methods[p.b]);
        match p.first_exceed {
            Some(t) => eprintln!("{a} vs {b}: first 3-sigma discrepancy at t = {t:.6} s"),
            None => eprintln!("{a} vs {b}: agree within 3 combined standard errors"),
        }
    }
    if !common.quiet {
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    match divergence {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_spectra(common: &Common, times: &[f64]) -> Result<(), Error> {
    let settings = load(common)?;
    settings.validate()?;
    let t_final = settings.grid.t_final;
    if let Some(&t) = times.iter().find(|&&t| t > t_final * (1.0 + 1e-12)) {
        return Err(RunError::TimeBeyondFinal { t, t_final }.into());
    }
    let dir = PathBuf::from(&settings.run.output_dir);
    let opts = RunOptions {
        snapshot_times: times.to_vec(),
        stop_after_snapshots: true,
        progress: !common.quiet,
        threads: None,
    };
    let (out, manifest) = run_into(&settings, &dir, &opts, common.quiet)?;
    let files = output::write_spectra(&dir, &out.series, &manifest)?;
    if !common.quiet {
        for f in files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Compare {
            common,
            methods,
            density_frames,
        } => cmd_compare(common, methods, *density_frames),
        Command::Spectra { common, times } => cmd_spectra(common, times),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
