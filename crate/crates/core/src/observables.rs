//! Normally-ordered observables from method-specific phase-space samples.
//!
//! Every trajectory (or the single deterministic state) is reduced to a [`Sample`] of
//! per-trajectory estimator values at each save time. Ordering corrections are applied
//! there, so that the ensemble mean of each channel is the quantum expectation value.
//! [`MomentSet`] accumulates samples per batch; error bars come from the spread of batch
//! means.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::config::{DerivedQuantities, Method};
use crate::grid::{Field2D, Lattice, TransformSign};
use crate::hfb::HfbState;
use crate::positive_p::PositivePState;
use crate::system::System;
use crate::twa::{classical_total, TwaState};
use crate::C64;

/// Modes nearest `+k0` and `−k0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModePair {
    pub plus: usize,
    pub minus: usize,
}

impl ModePair {
    /// Mode pairs `(j₊ + o, j₋ − o)` for `o ∈ [−h, h]`, wrapped onto the grid.
    pub fn offsets(&self, halfwidth: usize, num_points: usize) -> Vec<(usize, usize)> {
        let m = num_points as isize;
        let h = halfwidth as isize;
        (-h..=h)
            .map(|o| {
                let p = (self.plus as isize + o).rem_euclid(m) as usize;
                let q = (self.minus as isize - o).rem_euclid(m) as usize;
                (p, q)
            })
            .collect()
    }
}

/// Grid indices nearest `±k0`. On an even grid `k(j₋) = −k(j₊)` exactly.
pub fn select_modes(derived: &DerivedQuantities) -> ModePair {
    let k = &derived.k_grid;
    let m = k.len();
    let dk = if m > 1 { k[1] - k[0] } else { 1.0 };
    let plus = (derived.k0 / dk).round() as isize;
    let idx = |n: isize| n.rem_euclid(m as isize) as usize;
    ModePair {
        plus: idx(plus),
        minus: idx(-plus),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Atom,
    Molecule,
}

/// Integrated numbers of one sample; the imaginary parts are diagnostics (zero for
/// phase-space methods with a real estimator).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Numbers {
    pub n_a: f64,
    pub n_m: f64,
    pub n_a_imag: f64,
    pub n_m_imag: f64,
}

fn bilinear(phi: &[C64], psi: &[C64]) -> C64 {
    phi.iter().zip(psi).map(|(f, p)| f * p).sum()
}

/// Normally-ordered numbers `dx·Σ Φ·Ψ` of one positive-P trajectory.
pub fn numbers_pp(sys: &System, s: &PositivePState) -> Numbers {
    let dx = sys.dx();
    let a = bilinear(&s.phi_a.values, &s.psi_a.values) * dx;
    let m = bilinear(&s.phi_m.values, &s.psi_m.values) * dx;
    Numbers {
        n_a: a.re,
        n_m: m.re,
        n_a_imag: a.im,
        n_m_imag: m.im,
    }
}

/// Symmetrically-ordered numbers with half a quantum per lattice mode removed.
pub fn numbers_twa(sys: &System, s: &TwaState) -> Numbers {
    let dx = sys.dx();
    let half = 0.5 * sys.num_points() as f64;
    Numbers {
        n_a: dx * s.psi_a.sum_norm_sqr() - half,
        n_m: dx * s.psi_m.sum_norm_sqr() - half,
        ..Numbers::default()
    }
}

pub fn numbers_hfb(sys: &System, s: &HfbState) -> Numbers {
    let (n_m, n_a) = crate::hfb::hfb_numbers(sys, s);
    Numbers {
        n_a,
        n_m,
        ..Numbers::default()
    }
}

fn modes(l: &Lattice, f: &[C64], sign: TransformSign) -> Vec<C64> {
    let mut buf = f.to_vec();
    l.modes_in_place(&mut buf, sign);
    buf
}

/// Pair of mode amplitudes `(a_k, b_k)` with `⟨b a⟩` normally ordered.
fn pp_modes(sys: &System, s: &PositivePState, species: Species) -> (Vec<C64>, Vec<C64>) {
    let (psi, phi) = match species {
        Species::Atom => (&s.psi_a, &s.phi_a),
        Species::Molecule => (&s.psi_m, &s.phi_m),
    };
    let l = &sys.lattice;
    (
        modes(l, &psi.values, TransformSign::Annihilation),
        modes(l, &phi.values, TransformSign::Creation),
    )
}

/// Position density and momentum occupation (FFT order) of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

pub fn densities_pp(sys: &System, s: &PositivePState, species: Species) -> Densities {
    let (psi, phi) = match species {
        Species::Atom => (&s.psi_a, &s.phi_a),
        Species::Molecule => (&s.psi_m, &s.phi_m),
    };
    let (a, b) = pp_modes(sys, s, species);
    Densities {
        position: phi.values.iter().zip(&psi.values).map(|(f, p)| (f * p).re).collect(),
        momentum: b.iter().zip(&a).map(|(b, a)| (b * a).re).collect(),
    }
}

pub fn densities_twa(sys: &System, s: &TwaState, species: Species) -> Densities {
    let psi = match species {
        Species::Atom => &s.psi_a,
        Species::Molecule => &s.psi_m,
    };
    let half_per_site = 0.5 / sys.dx();
    let a = modes(&sys.lattice, &psi.values, TransformSign::Annihilation);
    Densities {
        position: psi.values.iter().map(|v| v.norm_sqr() - half_per_site).collect(),
        momentum: a.iter().map(|v| v.norm_sqr() - 0.5).collect(),
    }
}

pub fn densities_hfb(sys: &System, s: &HfbState, species: Species) -> Densities {
    let l = &sys.lattice;
    match species {
        Species::Molecule => {
            let a = modes(l, &s.phi_m.values, TransformSign::Annihilation);
            Densities {
                position: s.phi_m.values.iter().map(|v| v.norm_sqr()).collect(),
                momentum: a.iter().map(|v| v.norm_sqr()).collect(),
            }
        }
        Species::Atom => {
            let gn = s.g_n.diagonal();
            let gk = l.to_momentum_2d(&s.g_n, (TransformSign::Annihilation, TransformSign::Creation));
            let a = modes(l, &s.phi_a.values, TransformSign::Annihilation);
            Densities {
                position: s.phi_a.values.iter().zip(&gn).map(|(p, g)| p.norm_sqr() + g.re).collect(),
                momentum: gk.diagonal().iter().zip(&a).map(|(g, p)| g.re + p.norm_sqr()).collect(),
            }
        }
    }
}

/// Estimator values at one mode pair: occupations and the numerators of g².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairMoments {
    pub n_plus: f64,
    pub n_minus: f64,
    /// `⟨a†₊ a†₋ a₋ a₊⟩`
    pub bb: f64,
    /// `⟨a†₊ a†₊ a₊ a₊⟩`
    pub cl: f64,
}

pub fn pair_moments_pp(sys: &System, s: &PositivePState, pairs: &[(usize, usize)]) -> Vec<PairMoments> {
    let (a, b) = pp_modes(sys, s, Species::Atom);
    pairs
        .iter()
        .map(|&(p, q)| PairMoments {
            n_plus: (b[p] * a[p]).re,
            n_minus: (b[q] * a[q]).re,
            bb: (b[p] * b[q] * a[q] * a[p]).re,
            cl: (b[p] * b[p] * a[p] * a[p]).re,
        })
        .collect()
}

/// Symmetric-to-normal conversion for Wigner amplitudes `α₊`, `α₋` of distinct modes.
pub fn wigner_to_normal_distinct(a: C64, b: C64) -> f64 {
    let (x, y) = (a.norm_sqr(), b.norm_sqr());
    x * y - 0.5 * x - 0.5 * y + 0.25
}

/// Symmetric-to-normal conversion of `|α|⁴` for a single mode.
pub fn wigner_to_normal_same(a: C64) -> f64 {
    let x = a.norm_sqr();
    x * x - 2.0 * x + 0.5
}

pub fn pair_moments_twa(sys: &System, s: &TwaState, pairs: &[(usize, usize)]) -> Vec<PairMoments> {
    let a = modes(&sys.lattice, &s.psi_a.values, TransformSign::Annihilation);
    pairs
        .iter()
        .map(|&(p, q)| pair_moments_wigner(a[p], a[q]))
        .collect()
}

pub fn pair_moments_wigner(plus: C64, minus: C64) -> PairMoments {
    PairMoments {
        n_plus: plus.norm_sqr() - 0.5,
        n_minus: minus.norm_sqr() - 0.5,
        bb: wigner_to_normal_distinct(plus, minus),
        cl: wigner_to_normal_same(plus),
    }
}

/// Wick-factorized moments of the Gaussian fluctuation state (zero atomic mean field):
/// `⟨n₊n₋⟩ = n₊n₋ + |G̃_A(k₊,k₋)|² + |G̃_N(k₊,k₋)|²`, `⟨a†a†aa⟩ = 2n₊² + |G̃_A(k₊,k₊)|²`.
pub fn pair_moments_hfb(sys: &System, s: &HfbState, pairs: &[(usize, usize)]) -> Vec<PairMoments> {
    use TransformSign::{Annihilation, Creation};
    let l = &sys.lattice;
    let normal = (Annihilation, Creation);
    let anomalous = (Annihilation, Annihilation);
    pairs
        .iter()
        .map(|&(p, q)| {
            let n_plus = l.momentum_element_2d(&s.g_n, p, p, normal).re;
            let n_minus = l.momentum_element_2d(&s.g_n, q, q, normal).re;
            let gn = l.momentum_element_2d(&s.g_n, p, q, normal);
            let ga = l.momentum_element_2d(&s.g_a, p, q, anomalous);
            let ga_pp = l.momentum_element_2d(&s.g_a, p, p, anomalous);
            wick_moments(n_plus, n_minus, gn, ga, ga_pp)
        })
        .collect()
}

fn wick_moments(n_plus: f64, n_minus: f64, gn: C64, ga: C64, ga_pp: C64) -> PairMoments {
    PairMoments {
        n_plus,
        n_minus,
        bb: n_plus * n_minus + ga.norm_sqr() + gn.norm_sqr(),
        cl: 2.0 * n_plus * n_plus + ga_pp.norm_sqr(),
    }
}

/// `g2_bb` and `g2_cl` from the Wick-factorized moments, via the fast 2D transforms.
pub fn g2_hfb_direct(lattice: &Lattice, g_n: &Field2D, g_a: &Field2D, plus: usize, minus: usize) -> (f64, f64) {
    use TransformSign::{Annihilation, Creation};
    let nk = lattice.to_momentum_2d(g_n, (Annihilation, Creation));
    let ak = lattice.to_momentum_2d(g_a, (Annihilation, Annihilation));
    let m = wick_moments(
        nk.get(plus, plus).re,
        nk.get(minus, minus).re,
        nk.get(plus, minus),
        ak.get(plus, minus),
        ak.get(plus, plus),
    );
    (m.bb / (m.n_plus * m.n_minus), m.cl / (m.n_plus * m.n_plus))
}

/// Everything recorded from one trajectory at one save time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub numbers: Numbers,
    /// `(2N_m + N_a)(t) − (2N_m + N_a)(0)` of this trajectory.
    pub number_drift: f64,
    /// Same drift relative to the trajectory's own classical total (TWA); 0 otherwise.
    pub relative_drift: f64,
    /// Atomic density at `x = 0`.
    pub center_density: f64,
    pub pairs: Vec<PairMoments>,
}

/// Number channel of [`Sample`] used for drift bookkeeping.
pub fn conserved_total(n: &Numbers) -> f64 {
    2.0 * n.n_m + n.n_a
}

pub fn sample_pp(sys: &System, s: &PositivePState, initial_total: f64, pairs: &[(usize, usize)]) -> Sample {
    let numbers = numbers_pp(sys, s);
    let c = sys.lattice.center_index();
    Sample {
        numbers,
        number_drift: conserved_total(&numbers) - initial_total,
        relative_drift: 0.0,
        center_density: (s.phi_a.values[c] * s.psi_a.values[c]).re,
        pairs: pair_moments_pp(sys, s, pairs),
    }
}

/// `initial_classical` is [`classical_total`] of the trajectory at `t = 0`.
pub fn sample_twa(sys: &System, s: &TwaState, initial_classical: f64, pairs: &[(usize, usize)]) -> Sample {
    let numbers = numbers_twa(sys, s);
    let c = sys.lattice.center_index();
    let total = classical_total(sys, s);
    Sample {
        numbers,
        // the half-quantum corrections are constant and cancel in the drift
        number_drift: total - initial_classical,
        relative_drift: (total - initial_classical) / initial_classical,
        center_density: s.psi_a.values[c].norm_sqr() - 0.5 / sys.dx(),
        pairs: pair_moments_twa(sys, s, pairs),
    }
}

pub fn sample_hfb(sys: &System, s: &HfbState, initial_total: f64, pairs: &[(usize, usize)]) -> Sample {
    let numbers = numbers_hfb(sys, s);
    let c = sys.lattice.center_index();
    let total = conserved_total(&numbers);
    Sample {
        numbers,
        number_drift: total - initial_total,
        relative_drift: (total - initial_total) / initial_total,
        center_density: s.phi_a.values[c].norm_sqr() + s.g_n.get(c, c).re,
        pairs: pair_moments_hfb(sys, s, pairs),
    }
}

/// Densities of both species at one save time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSample {
    pub atoms: Densities,
    pub molecules: Densities,
}

// channel layout of the scalar accumulator
const CH_NA: usize = 0;
const CH_NM: usize = 1;
const CH_NA_IMAG: usize = 2;
const CH_NM_IMAG: usize = 3;
const CH_DRIFT: usize = 4;
const CH_CENTER: usize = 5;
const SCALAR_CHANNELS: usize = 6;
const PAIR_CHANNELS: usize = 4;

/// Value with a standard error and a validity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Valid,
    /// Truncated Wigner signal below the occupation floor.
    Suppressed,
    /// Denominator not resolved from zero.
    Undefined,
}

impl Estimate {
    pub fn valid(value: f64, se: f64) -> Self {
        Self {
            value,
            se,
            status: Status::Valid,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub t: f64,
    pub g2_bb: Estimate,
    pub g2_cl: Estimate,
    pub n_kplus: Estimate,
    pub n_kminus: Estimate,
}

/// Settings used when turning moments into estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub g2_floor: f64,
    /// Normalization of the fractions: `N_m/N_m0`, `N_a/(2·N_m0)`.
    pub n_m0: f64,
}

/// Per-batch sums of every channel at every save time, plus optional density snapshots.
///
/// Each trajectory belongs to exactly one batch, so merging two sets that cover different
/// batches only adds into disjoint slots and is exact in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    method: Method,
    times: Vec<f64>,
    batches: usize,
    num_pairs: usize,
    num_points: usize,
    /// `[time][batch][channel]`
    sums: Vec<f64>,
    /// `[time][batch]`
    counts: Vec<u64>,
    diverged: Vec<u64>,
    /// `[time]`, max |relative drift| over trajectories
    max_relative_drift: Vec<f64>,
    /// save indices carrying snapshots
    snapshot_indices: Vec<usize>,
    /// `[snapshot][batch][4][M]`: n_a(x), n_m(x), n_a(k), n_m(k)
    snapshots: Vec<f64>,
}

impl MomentSet {
    pub fn new(
        method: Method,
        times: Vec<f64>,
        batches: usize,
        num_pairs: usize,
        num_points: usize,
        snapshot_indices: Vec<usize>,
    ) -> Self {
        let batches = batches.max(1);
        let nt = times.len();
        let width = SCALAR_CHANNELS + PAIR_CHANNELS * num_pairs;
        let snaps = snapshot_indices.len();
        Self {
            method,
            batches,
            num_pairs,
            num_points,
            sums: vec![0.0; nt * batches * width],
            counts: vec![0; nt * batches],
            diverged: vec![0; nt * batches],
            max_relative_drift: vec![0.0; nt],
            snapshots: vec![0.0; snaps * batches * 4 * num_points],
            snapshot_indices,
            times,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn snapshot_indices(&self) -> &[usize] {
        &self.snapshot_indices
    }

    fn width(&self) -> usize {
        SCALAR_CHANNELS + PAIR_CHANNELS * self.num_pairs
    }

    fn slot(&self, time: usize, batch: usize) -> usize {
        time * self.batches + batch
    }

    /// Adds one live trajectory's sample.
    pub fn record(&mut self, batch: usize, time: usize, sample: &Sample) {
        assert_eq!(sample.pairs.len(), self.num_pairs, "pair count mismatch");
        let slot = self.slot(time, batch);
        self.counts[slot] += 1;
        let w = self.width();
        let row = &mut self.sums[slot * w..(slot + 1) * w];
        let n = &sample.numbers;
        row[CH_NA] += n.n_a;
        row[CH_NM] += n.n_m;
        row[CH_NA_IMAG] += n.n_a_imag;
        row[CH_NM_IMAG] += n.n_m_imag;
        row[CH_DRIFT] += sample.number_drift;
        row[CH_CENTER] += sample.center_density;
        for (i, p) in sample.pairs.iter().enumerate() {
            let base = SCALAR_CHANNELS + PAIR_CHANNELS * i;
            row[base] += p.n_plus;
            row[base + 1] += p.n_minus;
            row[base + 2] += p.bb;
            row[base + 3] += p.cl;
        }
        let d = &mut self.max_relative_drift[time];
        *d = d.max(sample.relative_drift.abs());
    }

    /// Counts a trajectory that has diverged by this save time.
    pub fn record_diverged(&mut self, batch: usize, time: usize) {
        let slot = self.slot(time, batch);
        self.diverged[slot] += 1;
    }

    /// Adds densities at snapshot number `snap` (position in `snapshot_indices`).
    pub fn record_snapshot(&mut self, batch: usize, snap: usize, s: &SnapshotSample) {
        let m = self.num_points;
        let base = (snap * self.batches + batch) * 4 * m;
        let block = &mut self.snapshots[base..base + 4 * m];
        let parts = [
            &s.atoms.position,
            &s.molecules.position,
            &s.atoms.momentum,
            &s.molecules.momentum,
        ];
        for (chunk, src) in block.chunks_mut(m).zip(parts) {
            for (d, v) in chunk.iter_mut().zip(src.iter()) {
                *d += v;
            }
        }
    }

    /// Slot-wise sum; both sets must have the same shape.
    pub fn merge(&mut self, other: &MomentSet) {
        assert_eq!(self.sums.len(), other.sums.len(), "moment sets differ in shape");
        assert_eq!(self.snapshots.len(), other.snapshots.len(), "snapshot shapes differ");
        assert_eq!(self.times, other.times, "moment sets differ in time grid");
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.diverged.iter_mut().zip(&other.diverged) {
            *a += b;
        }
        for (a, b) in self.max_relative_drift.iter_mut().zip(&other.max_relative_drift) {
            *a = a.max(*b);
        }
        for (a, b) in self.snapshots.iter_mut().zip(&other.snapshots) {
            *a += b;
        }
    }

    /// Adds a single-batch set (built with `batches = 1`) into slot `batch`.
    pub fn absorb_batch(&mut self, batch: usize, single: &MomentSet) {
        assert_eq!(single.batches, 1, "absorb_batch expects a single-batch set");
        assert_eq!(self.times, single.times, "moment sets differ in time grid");
        assert_eq!(self.num_pairs, single.num_pairs, "pair count mismatch");
        assert_eq!(self.snapshot_indices, single.snapshot_indices, "snapshot times differ");
        let w = self.width();
        for time in 0..self.times.len() {
            let slot = self.slot(time, batch);
            for (a, b) in self.sums[slot * w..(slot + 1) * w].iter_mut().zip(&single.sums[time * w..(time + 1) * w]) {
                *a += b;
            }
            self.counts[slot] += single.counts[time];
            self.diverged[slot] += single.diverged[time];
            let d = &mut self.max_relative_drift[time];
            *d = d.max(single.max_relative_drift[time]);
        }
        let block = 4 * self.num_points;
        for snap in 0..self.snapshot_indices.len() {
            let dst = (snap * self.batches + batch) * block;
            let src = snap * block;
            for (a, b) in self.snapshots[dst..dst + block].iter_mut().zip(&single.snapshots[src..src + block]) {
                *a += b;
            }
        }
    }

    pub fn live_count(&self, time: usize) -> u64 {
        (0..self.batches).map(|b| self.counts[self.slot(time, b)]).sum()
    }

    pub fn diverged_fraction(&self, time: usize) -> f64 {
        let d: u64 = (0..self.batches).map(|b| self.diverged[self.slot(time, b)]).sum();
        let total = d + self.live_count(time);
        if total == 0 {
            0.0
        } else {
            d as f64 / total as f64
        }
    }

    pub fn max_relative_drift(&self, time: usize) -> f64 {
        self.max_relative_drift[time]
    }

    fn channel(&self, time: usize, ch: usize) -> (Vec<f64>, Vec<u64>) {
        let w = self.width();
        let mut sums = Vec::with_capacity(self.batches);
        let mut counts = Vec::with_capacity(self.batches);
        for b in 0..self.batches {
            let slot = self.slot(time, b);
            sums.push(self.sums[slot * w + ch]);
            counts.push(self.counts[slot]);
        }
        (sums, counts)
    }

    fn deterministic(&self) -> bool {
        !self.method.is_stochastic()
    }

    /// Mean and batch-means standard error of one scalar channel.
    fn estimate_channel(&self, time: usize, ch: usize) -> Estimate {
        let (sums, counts) = self.channel(time, ch);
        let est = batch_estimate(&sums, &counts);
        self.finish(est)
    }

    fn finish(&self, mut e: Estimate) -> Estimate {
        if self.deterministic() {
            e.se = 0.0;
        }
        e
    }

    pub fn n_a(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_NA)
    }

    pub fn n_m(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_NM)
    }

    pub fn n_a_imag(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_NA_IMAG)
    }

    pub fn n_m_imag(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_NM_IMAG)
    }

    /// Ensemble mean of `(2N_m + N_a)(t) − (2N_m + N_a)(0)`.
    pub fn number_drift(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_DRIFT)
    }

    pub fn center_density(&self, time: usize) -> Estimate {
        self.estimate_channel(time, CH_CENTER)
    }

    /// Per-pair channel sums `[n₊, n₋, bb, cl]` of one batch and its trajectory count.
    fn pair_sums(&self, time: usize, batch: usize) -> (Vec<[f64; 4]>, u64) {
        let w = self.width();
        let slot = self.slot(time, batch);
        let sums = (0..self.num_pairs)
            .map(|i| {
                let base = slot * w + SCALAR_CHANNELS + PAIR_CHANNELS * i;
                let mut acc = [0.0; 4];
                acc.copy_from_slice(&self.sums[base..base + PAIR_CHANNELS]);
                acc
            })
            .collect();
        (sums, self.counts[slot])
    }

    /// `[n₊, n₋, g2_bb, g2_cl]` from summed pair channels over `count` trajectories.
    fn pair_statistics(sums: &[[f64; 4]], count: u64) -> [f64; 4] {
        let means: Vec<[f64; 4]> = sums.iter().map(|s| s.map(|v| v / count as f64)).collect();
        let (bb, cl) = Self::g2_from_means(&means);
        [means.iter().map(|m| m[0]).sum(), means.iter().map(|m| m[1]).sum(), bb, cl]
    }

    /// `(g2_bb, g2_cl)` from pair means: summed numerators over summed products.
    fn g2_from_means(means: &[[f64; 4]]) -> (f64, f64) {
        let bb: f64 = means.iter().map(|m| m[2]).sum();
        let cl: f64 = means.iter().map(|m| m[3]).sum();
        let nn: f64 = means.iter().map(|m| m[0] * m[1]).sum();
        let n2: f64 = means.iter().map(|m| m[0] * m[0]).sum();
        (bb / nn, cl / n2)
    }

    /// `g2_bb`, `g2_cl` over the configured mode pairs, with delete-one-batch
    /// jackknife errors and the method's validity rules applied.
    pub fn correlation(&self, time: usize, g2_floor: f64) -> CorrelationResult {
        let t = self.times[time];
        let nan = Estimate {
            value: f64::NAN,
            se: f64::NAN,
            status: Status::Undefined,
        };
        let batches: Vec<(Vec<[f64; 4]>, u64)> = (0..self.batches)
            .map(|b| self.pair_sums(time, b))
            .filter(|(_, c)| *c > 0)
            .collect();
        let total_count: u64 = batches.iter().map(|(_, c)| c).sum();
        if total_count == 0 {
            return CorrelationResult {
                t,
                g2_bb: nan,
                g2_cl: nan,
                n_kplus: nan,
                n_kminus: nan,
            };
        }
        let mut total = vec![[0.0f64; 4]; self.num_pairs];
        for (sums, _) in &batches {
            for (acc, s) in total.iter_mut().zip(sums) {
                for (a, v) in acc.iter_mut().zip(s) {
                    *a += v;
                }
            }
        }
        let full = Self::pair_statistics(&total, total_count);
        // delete-one-batch jackknife
        let replicates: Vec<[f64; 4]> = if batches.len() < 2 {
            Vec::new()
        } else {
            batches
                .iter()
                .map(|(sums, c)| {
                    let rest: Vec<[f64; 4]> = total
                        .iter()
                        .zip(sums)
                        .map(|(t, s)| [t[0] - s[0], t[1] - s[1], t[2] - s[2], t[3] - s[3]])
                        .collect();
                    Self::pair_statistics(&rest, total_count - c)
                })
                .collect()
        };
        let se = |i: usize| jackknife_se(&replicates.iter().map(|r| r[i]).collect::<Vec<_>>());
        let n_plus = self.finish(Estimate::valid(full[0], se(0)));
        let n_minus = self.finish(Estimate::valid(full[1], se(1)));
        let mut g2_bb = self.finish(Estimate::valid(full[2], se(2)));
        let mut g2_cl = self.finish(Estimate::valid(full[3], se(3)));

        let per_mode = 1.0 / self.num_pairs as f64;
        match self.method {
            Method::Hfb | Method::Undepleted => {
                if n_plus.value.abs() * per_mode < 1e-12 || n_minus.value.abs() * per_mode < 1e-12 {
                    g2_bb.status = Status::Undefined;
                    g2_cl.status = Status::Undefined;
                }
            }
            Method::PositiveP | Method::Twa => {
                let below_floor = n_plus.value * per_mode < g2_floor || n_minus.value * per_mode < g2_floor;
                // NaN errors (too few batches) also count as unresolved
                let unresolved = |e: &Estimate| !(e.value > 0.0 && e.value >= 3.0 * e.se);
                if self.method == Method::Twa && below_floor {
                    g2_bb.status = Status::Suppressed;
                    g2_cl.status = Status::Suppressed;
                } else {
                    if unresolved(&n_plus) || unresolved(&n_minus) {
                        g2_bb.status = Status::Undefined;
                    }
                    if unresolved(&n_plus) {
                        g2_cl.status = Status::Undefined;
                    }
                }
            }
        }
        CorrelationResult {
            t,
            g2_bb,
            g2_cl,
            n_kplus: n_plus,
            n_kminus: n_minus,
        }
    }

    /// Mean densities at snapshot `snap` with batch-means errors:
    /// `[n_a(x), n_m(x), n_a(k), n_m(k)]`, momentum arrays in FFT order.
    pub fn snapshot(&self, snap: usize) -> [Vec<Estimate>; 4] {
        let m = self.num_points;
        let time = self.snapshot_indices[snap];
        let counts: Vec<u64> = (0..self.batches).map(|b| self.counts[self.slot(time, b)]).collect();
        let mut out: [Vec<Estimate>; 4] = Default::default();
        for (part, dest) in out.iter_mut().enumerate() {
            *dest = (0..m)
                .map(|i| {
                    let sums: Vec<f64> = (0..self.batches)
                        .map(|b| self.snapshots[((snap * self.batches + b) * 4 + part) * m + i])
                        .collect();
                    self.finish(batch_estimate(&sums, &counts))
                })
                .collect();
        }
        out
    }
}

/// Overall mean `Σ sums / Σ counts` and the standard error of the batch means.
pub fn batch_estimate(sums: &[f64], counts: &[u64]) -> Estimate {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Estimate {
            value: f64::NAN,
            se: f64::NAN,
            status: Status::Undefined,
        };
    }
    let mean = sums.iter().sum::<f64>() / total as f64;
    let means: Vec<f64> = sums
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    Estimate::valid(mean, spread_se(&means))
}

/// Standard error of the mean of `values` (sample standard deviation over `sqrt(n)`).
pub fn spread_se(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (var / nf).sqrt()
}

/// Jackknife standard error from leave-one-out replicates.
pub fn jackknife_se(replicates: &[f64]) -> f64 {
    let n = replicates.len();
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = replicates.iter().sum::<f64>() / nf;
    ((nf - 1.0) / nf * replicates.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()).sqrt()
}

/// Earliest saved time with `t ≥ π / (2·u_aa·n_a(0, t))`; `None` means the crossing
/// never happens (always the case for `u_aa ≤ 0`).
pub fn diffusion_time(times: &[f64], center_density: &[f64], u_aa: f64) -> Option<f64> {
    if u_aa <= 0.0 {
        return None;
    }
    times
        .iter()
        .zip(center_density)
        .find(|(&t, &n)| n > 0.0 && t >= core::f64::consts::PI / (2.0 * u_aa * n))
        .map(|(&t, _)| t)
}
