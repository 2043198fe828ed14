//! Uniform periodic lattice, unitary mode transforms and exact kinetic propagators.
//!
//! Position samples `f(x_m)` (units m^(−1/2)) map to dimensionless mode amplitudes
//!
//! ```text
//! α_j = sqrt(dx/M) · Σ_m f(x_m) · exp(−i·s·k_j·x_m)
//! ```
//!
//! with `s = +1` for annihilation-like fields and `s = −1` for creation-like fields,
//! so that `Σ_j |α_j|² = dx·Σ_m |f(x_m)|²` is a particle number.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::config::{k_of_index, x_of_index};
use crate::fft::Radix2;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Position,
    Momentum,
}

/// Sign convention of a mode transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformSign {
    /// `exp(−i·k·x)`; for Ψ-like fields.
    Annihilation,
    /// `exp(+i·k·x)`; for Φ-like (conjugate-partner) fields.
    Creation,
}

/// Complex amplitudes on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub values: Vec<C64>,
    pub space: Space,
}

impl Field1D {
    pub fn zeros(n: usize, space: Space) -> Self {
        Self {
            values: vec![C64::new(0.0, 0.0); n],
            space,
        }
    }

    pub fn position(values: Vec<C64>) -> Self {
        Self {
            values,
            space: Space::Position,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ |f_i|²`, without any measure.
    pub fn sum_norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Square complex matrix `G(x_i, x_j)`, row-major in `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n: usize,
    data: Vec<C64>,
}

impl Field2D {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |G(i,j) − conj G(j,i)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |G(i,j) − G(j,i)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// Projects onto `(G + G†)/2`; returns the largest change made.
    pub fn hermitize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        let n = self.n;
        for i in 0..n {
            for j in i..n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let avg = (a + b.conj()) * 0.5;
                worst = worst.max((a - avg).norm());
                self.set(i, j, avg);
                self.set(j, i, avg.conj());
            }
        }
        worst
    }

    /// Projects onto `(G + Gᵀ)/2`; returns the largest change made.
    pub fn symmetrize(&mut self) -> f64 {
        let mut worst: f64 = 0.0;
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let a = self.get(i, j);
                let b = self.get(j, i);
                let avg = (a + b) * 0.5;
                worst = worst.max((a - avg).norm());
                self.set(i, j, avg);
                self.set(j, i, avg);
            }
        }
        worst
    }

    pub fn transpose_in_place(&mut self) {
        transpose_square(&mut self.data, self.n);
    }
}

fn transpose_square(data: &mut [C64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Periodic box `[−L/2, L/2)` with `M` sites and the associated momentum grid.
#[derive(Debug, Clone)]
pub struct Lattice {
    length: f64,
    n: usize,
    dx: f64,
    hbar: f64,
    plan: Radix2,
    k: Vec<f64>,
    x: Vec<f64>,
}

impl Lattice {
    pub fn new(length: f64, n: usize, hbar: f64) -> Self {
        Self {
            length,
            n,
            dx: length / n as f64,
            hbar,
            plan: Radix2::new(n),
            k: (0..n).map(|j| k_of_index(j, n, length)).collect(),
            x: (0..n).map(|i| x_of_index(i, n, length)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dk(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.length
    }

    /// Index of the site closest to `x = 0`.
    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// FFT index of the lattice momentum nearest to `k`.
    pub fn nearest_mode(&self, k: f64) -> usize {
        let n = self.n as i64;
        let j = (k / self.dk()).round() as i64;
        j.rem_euclid(n) as usize
    }

    pub fn plan(&self) -> &Radix2 {
        &self.plan
    }

    fn parity(j: usize) -> f64 {
        if j % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// In-place position → mode transform of a raw sample buffer.
    pub fn modes_in_place(&self, buf: &mut [C64], sign: TransformSign) {
        match sign {
            TransformSign::Annihilation => self.plan.forward(buf),
            TransformSign::Creation => self.plan.inverse(buf),
        }
        let scale = (self.dx / self.n as f64).sqrt();
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= scale * Self::parity(j);
        }
    }

    /// In-place mode → position transform; exact inverse of [`Self::modes_in_place`].
    pub fn positions_in_place(&self, buf: &mut [C64], sign: TransformSign) {
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= Self::parity(j);
        }
        match sign {
            TransformSign::Annihilation => self.plan.inverse(buf),
            TransformSign::Creation => self.plan.forward(buf),
        }
        let scale = 1.0 / (self.dx * self.n as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Panics if `f` is not in position space.
    pub fn to_momentum(&self, f: &Field1D, sign: TransformSign) -> Field1D {
        assert_eq!(f.space, Space::Position, "to_momentum needs a position-space field");
        let mut values = f.values.clone();
        self.modes_in_place(&mut values, sign);
        Field1D {
            values,
            space: Space::Momentum,
        }
    }

    /// Panics if `f` is not in momentum space.
    pub fn to_position(&self, f: &Field1D, sign: TransformSign) -> Field1D {
        assert_eq!(f.space, Space::Momentum, "to_position needs a momentum-space field");
        let mut values = f.values.clone();
        self.positions_in_place(&mut values, sign);
        Field1D::position(values)
    }

    /// Per-mode phases `exp(−i·ħ·k²·dt/(2·mass))`, with the inverse-FFT `1/M` folded in.
    pub fn kinetic_propagator(&self, dt: f64, mass: f64) -> KineticPropagator {
        let c = self.hbar * dt / (2.0 * mass);
        let inv_n = 1.0 / self.n as f64;
        let phases = self
            .k
            .iter()
            .map(|&k| C64::from_polar(inv_n, -c * k * k))
            .collect();
        KineticPropagator { phases }
    }

    pub fn kinetic_phase_1d(&self, f: &Field1D, dt: f64, mass: f64) -> Field1D {
        assert_eq!(f.space, Space::Position, "kinetic_phase_1d needs a position-space field");
        let mut values = f.values.clone();
        self.kinetic_propagator(dt, mass).apply(&self.plan, &mut values);
        Field1D::position(values)
    }

    /// Applies `exp(−i·ħ·(s₁k² + s₂k′²)·dt/(2·mass))` to `G(x, x′)`.
    pub fn kinetic_phase_2d(&self, g: &Field2D, dt: f64, mass: f64, signs: (i8, i8)) -> Field2D {
        let mut out = g.clone();
        self.kinetic_propagator_2d(dt, mass, signs).apply(&self.plan, &mut out);
        out
    }

    pub fn kinetic_propagator_2d(&self, dt: f64, mass: f64, signs: (i8, i8)) -> KineticPropagator2d {
        KineticPropagator2d {
            first: self.kinetic_propagator(dt * f64::from(signs.0), mass),
            second: self.kinetic_propagator(dt * f64::from(signs.1), mass),
        }
    }

    /// `G̃(k, k′) = (dx/M)·Σ exp(−i·s₁·k·x)·exp(−i·s₂·k′·x′)·G(x, x′)`.
    pub fn to_momentum_2d(&self, g: &Field2D, signs: (TransformSign, TransformSign)) -> Field2D {
        let n = self.n;
        let mut out = g.clone();
        for row in out.as_mut_slice().chunks_mut(n) {
            self.modes_in_place(row, signs.1);
        }
        out.transpose_in_place();
        for row in out.as_mut_slice().chunks_mut(n) {
            self.modes_in_place(row, signs.0);
        }
        out.transpose_in_place();
        out
    }

    /// A single element of [`Self::to_momentum_2d`] by direct summation.
    pub fn momentum_element_2d(
        &self,
        g: &Field2D,
        j: usize,
        jp: usize,
        signs: (TransformSign, TransformSign),
    ) -> C64 {
        let wave = |k: f64, sign: TransformSign| -> Vec<C64> {
            let s = match sign {
                TransformSign::Annihilation => -1.0,
                TransformSign::Creation => 1.0,
            };
            self.x.iter().map(|&x| C64::from_polar(1.0, s * k * x)).collect()
        };
        let w1 = wave(self.k[j], signs.0);
        let w2 = wave(self.k[jp], signs.1);
        let n = self.n;
        let mut acc = C64::new(0.0, 0.0);
        for (i, row) in g.as_slice().chunks(n).enumerate() {
            let inner: C64 = row.iter().zip(&w2).map(|(a, b)| a * b).sum();
            acc += w1[i] * inner;
        }
        acc * (self.dx / n as f64)
    }
}

/// Exact free propagation over one fixed `dt` for one mass.
#[derive(Debug, Clone)]
pub struct KineticPropagator {
    phases: Vec<C64>,
}

impl KineticPropagator {
    pub fn apply(&self, plan: &Radix2, buf: &mut [C64]) {
        plan.forward(buf);
        for (v, p) in buf.iter_mut().zip(&self.phases) {
            *v *= p;
        }
        plan.inverse(buf);
    }
}

/// Separable 2D free propagation: `first` acts on `x`, `second` on `x′`.
#[derive(Debug, Clone)]
pub struct KineticPropagator2d {
    first: KineticPropagator,
    second: KineticPropagator,
}

impl KineticPropagator2d {
    pub fn apply(&self, plan: &Radix2, g: &mut Field2D) {
        let n = g.dim();
        let data = g.as_mut_slice();
        for row in data.chunks_mut(n) {
            self.second.apply(plan, row);
        }
        plan.forward_columns(data, n);
        for (row, p) in data.chunks_mut(n).zip(&self.first.phases) {
            for v in row {
                *v *= p;
            }
        }
        plan.inverse_columns(data, n);
    }
}
