//! Per-save-time estimates assembled from a finished [`MomentSet`].

use phasespace_core::grid::Lattice;
use phasespace_core::observables::{diffusion_time, CorrelationResult, Estimate, MomentSet, Status};
use phasespace_core::Method;

/// One saved time.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    /// `N_m / N_m0`
    pub nm_frac: Estimate,
    /// `N_a / (2 N_m0)`
    pub na_frac: Estimate,
    pub correlation: CorrelationResult,
    pub diverged_frac: f64,
    /// Mean drift of `2N_m + N_a` relative to `2N_m0`.
    pub conservation_residual: Estimate,
    pub max_relative_drift: f64,
    /// Atomic density at `x = 0` (m⁻¹).
    pub center_density: Estimate,
    /// Imaginary parts of the number estimators, relative like the fractions.
    pub nm_frac_imag: Estimate,
    pub na_frac_imag: Estimate,
    pub live: u64,
}

/// Densities at one time; momentum arrays are sorted by `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub n_a_x: Vec<Estimate>,
    pub n_m_x: Vec<Estimate>,
    pub n_a_k: Vec<Estimate>,
    pub n_m_k: Vec<Estimate>,
}

impl Snapshot {
    /// Index of the sorted momentum grid point nearest `k`.
    pub fn k_index(&self, k: f64) -> usize {
        let dk = self.k[1] - self.k[0];
        let i = ((k - self.k[0]) / dk).round();
        i.clamp(0.0, (self.k.len() - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub method: Method,
    pub n_m0: f64,
    pub u_aa: f64,
    pub trajectories: usize,
    pub batches: usize,
    pub rows: Vec<Row>,
    pub snapshots: Vec<Snapshot>,
}

fn scaled(e: Estimate, by: f64) -> Estimate {
    Estimate {
        value: e.value / by,
        se: e.se / by,
        status: e.status,
    }
}

/// Reorders an FFT-ordered array so that momenta increase.
pub fn fft_to_sorted<T: Clone>(v: &[T]) -> Vec<T> {
    let half = v.len() / 2;
    v[half..].iter().chain(&v[..half]).cloned().collect()
}

impl TimeSeries {
    /// `rows_at` lists which recorded times become rows (the save times).
    pub fn from_moments(
        moments: &MomentSet,
        rows_at: &[usize],
        lattice: &Lattice,
        n_m0: f64,
        u_aa: f64,
        trajectories: usize,
        g2_floor: f64,
    ) -> Self {
        let times = moments.times();
        let rows = rows_at
            .iter()
            .map(|&i| Row {
                t: times[i],
                nm_frac: scaled(moments.n_m(i), n_m0),
                na_frac: scaled(moments.n_a(i), 2.0 * n_m0),
                correlation: moments.correlation(i, g2_floor),
                diverged_frac: moments.diverged_fraction(i),
                conservation_residual: scaled(moments.number_drift(i), 2.0 * n_m0),
                max_relative_drift: moments.max_relative_drift(i),
                center_density: moments.center_density(i),
                nm_frac_imag: scaled(moments.n_m_imag(i), n_m0),
                na_frac_imag: scaled(moments.n_a_imag(i), 2.0 * n_m0),
                live: moments.live_count(i),
            })
            .collect();
        let x = lattice.x().to_vec();
        let k = fft_to_sorted(lattice.k());
        let snapshots = moments
            .snapshot_indices()
            .iter()
            .enumerate()
            .map(|(s, &i)| {
                let [na_x, nm_x, na_k, nm_k] = moments.snapshot(s);
                Snapshot {
                    t: times[i],
                    x: x.clone(),
                    k: k.clone(),
                    n_a_x: na_x,
                    n_m_x: nm_x,
                    n_a_k: fft_to_sorted(&na_k),
                    n_m_k: fft_to_sorted(&nm_k),
                }
            })
            .collect();
        Self {
            method: moments.method(),
            n_m0,
            u_aa,
            trajectories,
            batches: moments.batches(),
            rows,
            snapshots,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Row whose time is nearest `t`.
    pub fn row_at(&self, t: f64) -> &Row {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("empty series")
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// Diffusion-time crossing of the mean central atomic density.
    pub fn diffusion_time(&self) -> Option<f64> {
        let times = self.times();
        let n: Vec<f64> = self.rows.iter().map(|r| r.center_density.value).collect();
        diffusion_time(&times, &n, self.u_aa)
    }

    /// Largest |conservation residual| over all rows.
    pub fn max_conservation_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.conservation_residual.value.abs())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }

    pub fn final_diverged_fraction(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.diverged_frac)
    }

    /// Number of rows whose g² entries were suppressed by the occupation floor.
    pub fn suppressed_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.correlation.g2_bb.status == Status::Suppressed)
            .count()
    }
}
