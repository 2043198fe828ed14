//! Trajectory ensembles, deterministic runs, breakdown detection and cross-method comparison.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use phasespace_core::hfb::{hfb_init, HfbError, HfbOptions, HfbStepper};
use phasespace_core::observables::{
    conserved_total, densities_hfb, densities_pp, densities_twa, numbers_hfb, numbers_pp, sample_hfb, sample_pp,
    sample_twa, select_modes, MomentSet, SnapshotSample, Species,
};
use phasespace_core::positive_p::{pp_init, PositivePStepper};
use phasespace_core::twa::{classical_total, twa_sample_initial, TwaStepper};
use phasespace_core::{Method, System, ValidatedConfig};

use crate::series::TimeSeries;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PHASESPACE_THREADS";

/// Per-trajectory TWA conservation bound on `2N_m + N_a`.
pub const TWA_CONSERVATION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Times (s) at which density snapshots are taken; the final time is always added.
    pub snapshot_times: Vec<f64>,
    /// Stop integrating after the last requested snapshot.
    pub stop_after_snapshots: bool,
    /// Progress lines on standard error.
    pub progress: bool,
    /// Overrides [`THREADS_ENV`].
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Largest structural projection in any HFB step.
    pub hfb_max_enforcement: f64,
    /// Number of HFB steps redone at half length.
    pub hfb_retries: usize,
    pub threads: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub wall_clock: f64,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("requested time {t} s is beyond t_final = {t_final} s")]
    TimeBeyondFinal { t: f64, t_final: f64 },
    #[error("requested time {0} s is not a valid time")]
    BadTime(f64),
    #[error("all trajectories diverged by t = {t:.6} s")]
    TotalDivergence { t: f64, partial: Box<RunOutput> },
    #[error(transparent)]
    Hfb(#[from] HfbError),
    #[error("cannot start worker threads: {0}")]
    Threads(String),
}

/// Which steps are recorded and what each record carries.
#[derive(Debug, Clone, PartialEq)]
struct Plan {
    steps: Vec<usize>,
    rows: Vec<usize>,
    snapshot_of: Vec<Option<usize>>,
    snapshot_records: Vec<usize>,
}

fn plan(cfg: &ValidatedConfig, opts: &RunOptions) -> Result<Plan, RunError> {
    let grid = cfg.grid();
    let total = grid.total_steps();
    let mut snap_steps = Vec::new();
    for &t in &opts.snapshot_times {
        if !t.is_finite() || t < 0.0 {
            return Err(RunError::BadTime(t));
        }
        let step = (t / grid.dt).round() as usize;
        if step > total {
            return Err(RunError::TimeBeyondFinal {
                t,
                t_final: grid.t_final,
            });
        }
        snap_steps.push(step);
    }
    let last = if opts.stop_after_snapshots && !snap_steps.is_empty() {
        *snap_steps.iter().max().unwrap()
    } else {
        snap_steps.push(total);
        total
    };
    snap_steps.sort_unstable();
    snap_steps.dedup();
    let saves: Vec<usize> = grid.save_steps().into_iter().filter(|&s| s <= last).collect();
    let mut steps: Vec<usize> = saves.iter().chain(&snap_steps).copied().collect();
    steps.sort_unstable();
    steps.dedup();
    let rows = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| saves.contains(s))
        .map(|(i, _)| i)
        .collect();
    let mut snapshot_of = vec![None; steps.len()];
    let mut snapshot_records = Vec::new();
    for (i, s) in steps.iter().enumerate() {
        if snap_steps.contains(s) {
            snapshot_of[i] = Some(snapshot_records.len());
            snapshot_records.push(i);
        }
    }
    Ok(Plan {
        steps,
        rows,
        snapshot_of,
        snapshot_records,
    })
}

/// Worker count: the explicit option, else [`THREADS_ENV`], else all cores.
pub fn thread_count(explicit: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = explicit.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
    });
    cap.map_or(available, |c| c.min(available).max(1))
}

/// Random stream of trajectory `index`: the master seed selects the key, the index the stream.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Physical system actually integrated: the undepleted reference has its s-wave terms off.
pub fn system_for(cfg: &ValidatedConfig) -> System {
    let mut params = *cfg.params();
    if cfg.run().method == Method::Undepleted {
        params.u_aa = 0.0;
        params.u_am = 0.0;
        params.u_mm = 0.0;
    }
    System::new(params, *cfg.grid())
}

/// Runs the configured method to completion.
pub fn run(cfg: &ValidatedConfig, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let plan = plan(cfg, opts)?;
    let sys = system_for(cfg);
    let threads = thread_count(opts.threads);
    let (moments, mut diagnostics) = match cfg.run().method {
        Method::PositiveP | Method::Twa => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| RunError::Threads(e.to_string()))?;
            pool.install(|| run_stochastic(cfg, &sys, &plan, opts.progress))
        }
        Method::Hfb | Method::Undepleted => run_hfb(cfg, &sys, &plan, opts.progress)?,
    };
    diagnostics.threads = threads;
    let run_cfg = cfg.run();
    let series = TimeSeries::from_moments(
        &moments,
        &plan.rows,
        &sys.lattice,
        cfg.derived().n_m0,
        sys.params.u_aa,
        run_cfg.trajectories,
        run_cfg.g2_floor,
    );
    let mut warnings = Vec::new();
    if run_cfg.method == Method::Twa {
        warnings.extend(twa_warnings(&sys, &series, &moments));
    }
    let output = RunOutput {
        series,
        wall_clock: start.elapsed().as_secs_f64(),
        warnings,
        diagnostics,
    };
    let dead = (0..moments.times().len()).find(|&i| moments.live_count(i) == 0);
    if let Some(i) = dead {
        return Err(RunError::TotalDivergence {
            t: moments.times()[i],
            partial: Box::new(output),
        });
    }
    Ok(output)
}

fn new_set(cfg: &ValidatedConfig, sys: &System, plan: &Plan, batches: usize, pairs: usize) -> MomentSet {
    let times = plan.steps.iter().map(|&s| s as f64 * cfg.grid().dt).collect();
    MomentSet::new(
        cfg.run().method,
        times,
        batches,
        pairs,
        sys.num_points(),
        plan.snapshot_records.clone(),
    )
}

fn run_stochastic(cfg: &ValidatedConfig, sys: &System, plan: &Plan, progress: bool) -> (MomentSet, Diagnostics) {
    let run = cfg.run();
    let n = run.trajectories;
    let batches = run.batches.min(n).max(1);
    let pairs = select_modes(&sys.derived).offsets(run.g2_bin_halfwidth, sys.num_points());
    let done = AtomicUsize::new(0);
    let start = Instant::now();

    // trajectory i belongs to batch i·B/N, so the batch map is independent of scheduling
    let parts: Vec<MomentSet> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * n / batches;
            let hi = (b + 1) * n / batches;
            let mut set = new_set(cfg, sys, plan, 1, pairs.len());
            for index in lo..hi {
                let mut rng = trajectory_rng(run.master_seed, index as u64);
                match run.method {
                    Method::PositiveP => positive_p_trajectory(cfg, sys, plan, &pairs, &mut rng, &mut set),
                    _ => twa_trajectory(cfg, sys, plan, &pairs, &mut rng, &mut set),
                }
            }
            let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
            if progress && (finished * 10 / batches != (finished - 1) * 10 / batches || finished == batches) {
                eprintln!(
                    "[{}] {}/{} batches done ({:.1} s)",
                    run.method,
                    finished,
                    batches,
                    start.elapsed().as_secs_f64()
                );
            }
            set
        })
        .collect();

    let mut moments = new_set(cfg, sys, plan, batches, pairs.len());
    for (b, part) in parts.iter().enumerate() {
        moments.absorb_batch(b, part);
    }
    (moments, Diagnostics::default())
}

fn positive_p_trajectory(
    cfg: &ValidatedConfig,
    sys: &System,
    plan: &Plan,
    pairs: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
    set: &mut MomentSet,
) {
    let stepper = PositivePStepper::new(sys, cfg.grid().dt, cfg.run().divergence_threshold);
    let mut s = pp_init(sys);
    let initial = conserved_total(&numbers_pp(sys, &s));
    let mut at = 0;
    for (i, &step) in plan.steps.iter().enumerate() {
        stepper.advance(&mut s, step - at, rng);
        at = step;
        if s.diverged {
            set.record_diverged(0, i);
            continue;
        }
        set.record(0, i, &sample_pp(sys, &s, initial, pairs));
        if let Some(k) = plan.snapshot_of[i] {
            let snap = SnapshotSample {
                atoms: densities_pp(sys, &s, Species::Atom),
                molecules: densities_pp(sys, &s, Species::Molecule),
            };
            set.record_snapshot(0, k, &snap);
        }
    }
}

fn twa_trajectory(
    cfg: &ValidatedConfig,
    sys: &System,
    plan: &Plan,
    pairs: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
    set: &mut MomentSet,
) {
    let stepper = TwaStepper::new(sys, cfg.grid().dt);
    let mut s = twa_sample_initial(sys, rng);
    let initial = classical_total(sys, &s);
    let mut at = 0;
    for (i, &step) in plan.steps.iter().enumerate() {
        stepper.advance(&mut s, step - at);
        at = step;
        set.record(0, i, &sample_twa(sys, &s, initial, pairs));
        if let Some(k) = plan.snapshot_of[i] {
            let snap = SnapshotSample {
                atoms: densities_twa(sys, &s, Species::Atom),
                molecules: densities_twa(sys, &s, Species::Molecule),
            };
            set.record_snapshot(0, k, &snap);
        }
    }
}

fn run_hfb(
    cfg: &ValidatedConfig,
    sys: &System,
    plan: &Plan,
    progress: bool,
) -> Result<(MomentSet, Diagnostics), RunError> {
    let run = cfg.run();
    let opts = HfbOptions {
        freeze_molecules: run.method == Method::Undepleted,
    };
    let pairs = select_modes(&sys.derived).offsets(run.g2_bin_halfwidth, sys.num_points());
    let stepper = HfbStepper::new(sys, cfg.grid().dt, opts);
    let mut moments = new_set(cfg, sys, plan, 1, pairs.len());
    let mut diag = Diagnostics::default();
    let mut s = hfb_init(sys);
    let initial = conserved_total(&numbers_hfb(sys, &s));
    let start = Instant::now();
    let mut at = 0;
    for (i, &step) in plan.steps.iter().enumerate() {
        let report = stepper.advance(&mut s, step - at)?;
        at = step;
        diag.hfb_max_enforcement = diag.hfb_max_enforcement.max(report.enforcement);
        diag.hfb_retries += usize::from(report.retried);
        moments.record(0, i, &sample_hfb(sys, &s, initial, &pairs));
        if let Some(k) = plan.snapshot_of[i] {
            let snap = SnapshotSample {
                atoms: densities_hfb(sys, &s, Species::Atom),
                molecules: densities_hfb(sys, &s, Species::Molecule),
            };
            moments.record_snapshot(0, k, &snap);
        }
        if progress {
            eprintln!(
                "[{}] t = {:.4} s ({:.1} s)",
                run.method,
                step as f64 * cfg.grid().dt,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok((moments, diag))
}

/// Sampling-validity warnings for a truncated Wigner run.
fn twa_warnings(sys: &System, series: &TimeSeries, moments: &MomentSet) -> Vec<String> {
    let mut out = Vec::new();
    let worst = (0..moments.times().len())
        .map(|i| moments.max_relative_drift(i))
        .fold(0.0, f64::max);
    if worst > TWA_CONSERVATION_LIMIT {
        out.push(format!(
            "truncated Wigner: per-trajectory 2N_m+N_a drift reached {worst:.3e} (limit {TWA_CONSERVATION_LIMIT:e})"
        ));
    }
    if let Some(snap) = series.snapshots.last() {
        let k0 = sys.derived.k0;
        let band: Vec<f64> = snap
            .k
            .iter()
            .zip(&snap.n_a_k)
            .filter(|(k, _)| (0.5 * k0..=1.5 * k0).contains(&k.abs()))
            .map(|(_, n)| n.value)
            .collect();
        if !band.is_empty() {
            let mean = band.iter().sum::<f64>() / band.len() as f64;
            if mean < 1.0 {
                out.push(format!(
                    "truncated Wigner: mean occupation {mean:.3} per mode in 0.5k0 <= |k| <= 1.5k0 at t = {:.6} s is below one particle; results are sampling-limited",
                    snap.t
                ));
            }
        }
    }
    let suppressed = series.suppressed_rows();
    if suppressed > 0 {
        out.push(format!(
            "truncated Wigner: g2 suppressed at {suppressed} saved times (mode occupation below g2_floor)"
        ));
    }
    out
}

/// Earliest saved time where more than 0.1% of trajectories have diverged or the
/// standard error of `N_a` exceeds 10% of its mean.
pub fn detect_tmax(series: &TimeSeries) -> Option<f64> {
    series
        .rows
        .iter()
        .find(|r| r.diverged_frac > 1e-3 || r.na_frac.se > 0.1 * r.na_frac.value.abs())
        .map(|r| r.t)
}

/// Frozen-molecule pairing run on the same grid and parameters.
pub fn undepleted_reference(
    settings: &crate::settings::Settings,
    opts: &RunOptions,
) -> Result<RunOutput, crate::Error> {
    let cfg = settings.with_method(Method::Undepleted).validate()?;
    Ok(run(&cfg, opts)?)
}

/// Pairwise discrepancy between two methods on a shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub a: usize,
    pub b: usize,
    /// `(x_a − x_b)/sqrt(se_a² + se_b²)` per time.
    pub nm_z: Vec<f64>,
    pub na_z: Vec<f64>,
    /// First time either fraction differs by more than three combined errors.
    pub first_exceed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub methods: Vec<Method>,
    pub times: Vec<f64>,
    pub pairs: Vec<Discrepancy>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("time grids of {a} and {b} differ")]
    Misaligned { a: Method, b: Method },
    #[error("nothing to compare")]
    Empty,
}

/// Difference in units of the combined standard error; agreement to round-off
/// (1e-12 relative) is 0 whatever the errors.
pub fn combined_z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let d = a - b;
    let s = (sa * sa + sb * sb).sqrt();
    if d.abs() <= 1e-12 * a.abs().max(b.abs()) {
        0.0
    } else {
        d / s
    }
}

pub fn compare(series: &[&TimeSeries]) -> Result<ComparisonReport, CompareError> {
    let first = series.first().ok_or(CompareError::Empty)?;
    let times = first.times();
    for s in series.iter().skip(1) {
        let t = s.times();
        let aligned = t.len() == times.len() && t.iter().zip(&times).all(|(x, y)| (x - y).abs() <= 1e-9 * y.abs().max(1e-12));
        if !aligned {
            return Err(CompareError::Misaligned {
                a: first.method,
                b: s.method,
            });
        }
    }
    let mut pairs = Vec::new();
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            let (sa, sb) = (series[a], series[b]);
            let z = |f: fn(&crate::series::Row) -> (f64, f64)| -> Vec<f64> {
                sa.rows
                    .iter()
                    .zip(&sb.rows)
                    .map(|(x, y)| {
                        let (xv, xs) = f(x);
                        let (yv, ys) = f(y);
                        combined_z(xv, xs, yv, ys)
                    })
                    .collect()
            };
            let nm_z = z(|r| (r.nm_frac.value, r.nm_frac.se));
            let na_z = z(|r| (r.na_frac.value, r.na_frac.se));
            let first_exceed = nm_z
                .iter()
                .zip(&na_z)
                .position(|(m, n)| m.abs() > 3.0 || n.abs() > 3.0)
                .map(|i| times[i]);
            pairs.push(Discrepancy {
                a,
                b,
                nm_z,
                na_z,
                first_exceed,
            });
        }
    }
    Ok(ComparisonReport {
        methods: series.iter().map(|s| s.method).collect(),
        times,
        pairs,
    })
}
