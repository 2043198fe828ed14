//! Positive-P stochastic field equations on the doubled phase space.
//!
//! Four independent fields `Ψ_a, Φ_a, Ψ_m, Φ_m`; `Φ_i` stands for `Ψ_i†` and agrees
//! with `Ψ_i*` only in the ensemble mean. Ten real Gaussian noises enter through
//! complex square-root amplitudes, principal branch.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::{Field1D, KineticPropagator};
use crate::system::System;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Fixed number of fixed-point iterations in the semi-implicit midpoint solve.
pub const MIDPOINT_ITERATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PositivePState {
    pub psi_a: Field1D,
    pub phi_a: Field1D,
    pub psi_m: Field1D,
    pub phi_m: Field1D,
    pub t: f64,
    pub diverged: bool,
}

/// One value per field, e.g. a time derivative or an increment.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub psi_a: Vec<C64>,
    pub phi_a: Vec<C64>,
    pub psi_m: Vec<C64>,
    pub phi_m: Vec<C64>,
}

/// Coherent molecules, vacuum atoms. No initial noise: coherent states are delta functions here.
pub fn pp_init(sys: &System) -> PositivePState {
    let n = sys.num_points();
    let mol = sys.initial_molecular_amplitude();
    PositivePState {
        psi_a: Field1D::position(vec![C64::new(0.0, 0.0); n]),
        phi_a: Field1D::position(vec![C64::new(0.0, 0.0); n]),
        psi_m: Field1D::position(mol.clone()),
        phi_m: Field1D::position(mol),
        t: 0.0,
        diverged: false,
    }
}

#[derive(Debug, Clone, Copy)]
struct Couplings {
    delta: f64,
    chi: f64,
    u_aa: f64,
    u_am: f64,
    u_mm: f64,
    inv_dx: f64,
}

impl Couplings {
    fn new(sys: &System) -> Self {
        let p = &sys.params;
        Self {
            delta: p.delta,
            chi: p.chi_1d,
            u_aa: p.u_aa,
            u_am: p.u_am,
            u_mm: p.u_mm,
            inv_dx: 1.0 / sys.dx(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Point {
    pa: C64,
    fa: C64,
    pm: C64,
    fm: C64,
}

impl core::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point {
            pa: self.pa + o.pa,
            fa: self.fa + o.fa,
            pm: self.pm + o.pm,
            fm: self.fm + o.fm,
        }
    }
}

impl core::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point {
            pa: self.pa * s,
            fa: self.fa * s,
            pm: self.pm * s,
            fm: self.fm * s,
        }
    }
}

impl Point {
    fn load(s: &PositivePState, i: usize) -> Self {
        Self {
            pa: s.psi_a.values[i],
            fa: s.phi_a.values[i],
            pm: s.psi_m.values[i],
            fm: s.phi_m.values[i],
        }
    }

    fn store(self, s: &mut PositivePState, i: usize) {
        s.psi_a.values[i] = self.pa;
        s.phi_a.values[i] = self.fa;
        s.psi_m.values[i] = self.pm;
        s.phi_m.values[i] = self.fm;
    }

    fn max_norm_sqr(&self) -> f64 {
        self.pa
            .norm_sqr()
            .max(self.fa.norm_sqr())
            .max(self.pm.norm_sqr())
            .max(self.fm.norm_sqr())
    }

    fn is_finite(&self) -> bool {
        self.pa.is_finite() && self.fa.is_finite() && self.pm.is_finite() && self.fm.is_finite()
    }
}

/// Local (Itô) drift as written in the field equations, kinetic terms excluded.
fn drift_point(c: &Couplings, p: Point) -> Point {
    let na = p.fa * p.pa;
    let nm = p.fm * p.pm;
    let shift_a = c.delta + c.u_aa * na + c.u_am * nm;
    let shift_m = c.u_am * na + c.u_mm * nm;
    Point {
        pa: -I * shift_a * p.pa - I * c.chi * p.pm * p.fa,
        fa: I * shift_a * p.fa + I * c.chi * p.fm * p.pa,
        pm: -I * shift_m * p.pm - I * (c.chi / 2.0) * p.pa * p.pa,
        fm: I * shift_m * p.fm + I * (c.chi / 2.0) * p.fa * p.fa,
    }
}

/// Drift correction turning the Itô system into its Stratonovich equivalent,
/// `−½·Σ_j B_j·∂B_j` with the lattice `δ(0) = 1/dx`.
fn stratonovich_shift(c: &Couplings, p: Point) -> Point {
    let ra = 0.5 * (c.u_aa + 0.5 * c.u_am) * c.inv_dx;
    let rm = 0.5 * (c.u_mm + 0.5 * c.u_am) * c.inv_dx;
    Point {
        pa: I * ra * p.pa,
        fa: -I * ra * p.fa,
        pm: I * rm * p.pm,
        fm: -I * rm * p.fm,
    }
}

/// Noise term `Σ_j B_j(p)·z_j` for one lattice site; `z` holds the ten noise values.
fn noise_point(c: &Couplings, p: Point, z: &[f64; 10]) -> Point {
    let mut out = Point::default();
    if c.chi != 0.0 {
        out.pa += (-I * c.chi * p.pm).sqrt() * z[0];
        out.fa += (I * c.chi * p.fm).sqrt() * z[4];
    }
    if c.u_am != 0.0 {
        let s = (-I * c.u_am * p.pa * p.pm / 2.0).sqrt();
        let sf = (I * c.u_am * p.fa * p.fm / 2.0).sqrt();
        out.pa += s * C64::new(z[1], z[2]);
        out.pm += s * C64::new(z[1], -z[2]);
        out.fa += sf * C64::new(z[5], z[6]);
        out.fm += sf * C64::new(z[5], -z[6]);
    }
    if c.u_aa != 0.0 {
        out.pa += (-I * c.u_aa * p.pa * p.pa).sqrt() * z[3];
        out.fa += (I * c.u_aa * p.fa * p.fa).sqrt() * z[7];
    }
    if c.u_mm != 0.0 {
        out.pm += (-I * c.u_mm * p.pm * p.pm).sqrt() * z[8];
        out.fm += (I * c.u_mm * p.fm * p.fm).sqrt() * z[9];
    }
    out
}

/// Which of the ten noises carry a nonzero amplitude for these couplings.
fn active_noises(c: &Couplings) -> [bool; 10] {
    let chi = c.chi != 0.0;
    let am = c.u_am != 0.0;
    let aa = c.u_aa != 0.0;
    let mm = c.u_mm != 0.0;
    [chi, am, am, aa, chi, am, am, aa, mm, mm]
}

/// Draws ζ_j(x_i) ~ N(0, 1/(dx·dt)) for every active noise, site-major.
fn draw_noises<R: Rng + ?Sized>(c: &Couplings, n: usize, dt: f64, rng: &mut R) -> Vec<[f64; 10]> {
    let active = active_noises(c);
    let scale = (c.inv_dx / dt).sqrt();
    (0..n)
        .map(|_| {
            let mut z = [0.0; 10];
            for (zj, &on) in z.iter_mut().zip(&active) {
                if on {
                    let g: f64 = rng.sample(StandardNormal);
                    *zj = g * scale;
                }
            }
            z
        })
        .collect()
}

fn collect(n: usize, f: impl Fn(usize) -> Point) -> FieldSet {
    let mut out = FieldSet {
        psi_a: Vec::with_capacity(n),
        phi_a: Vec::with_capacity(n),
        psi_m: Vec::with_capacity(n),
        phi_m: Vec::with_capacity(n),
    };
    for i in 0..n {
        let p = f(i);
        out.psi_a.push(p.pa);
        out.phi_a.push(p.fa);
        out.psi_m.push(p.pm);
        out.phi_m.push(p.fm);
    }
    out
}

/// Non-kinetic, non-noise right-hand sides of the four field equations.
pub fn pp_drift(sys: &System, s: &PositivePState) -> FieldSet {
    let c = Couplings::new(sys);
    collect(sys.num_points(), |i| drift_point(&c, Point::load(s, i)))
}

/// Noise increments `B(s)·ζ·dt` for one step of length `dt`, drawn from `rng`.
pub fn pp_noise_increment<R: Rng + ?Sized>(
    sys: &System,
    s: &PositivePState,
    dt: f64,
    rng: &mut R,
) -> FieldSet {
    assert!(dt > 0.0, "dt must be positive");
    let c = Couplings::new(sys);
    let z = draw_noises(&c, sys.num_points(), dt, rng);
    collect(sys.num_points(), |i| noise_point(&c, Point::load(s, i), &z[i]) * dt)
}

/// Strang-split semi-implicit integrator for one trajectory.
#[derive(Debug, Clone)]
pub struct PositivePStepper<'a> {
    sys: &'a System,
    couplings: Couplings,
    dt: f64,
    limit: f64,
    noise: bool,
    half: [KineticPropagator; 4],
    full: [KineticPropagator; 4],
}

impl<'a> PositivePStepper<'a> {
    /// Trajectories are flagged diverged once `max|field|² > divergence_threshold · n0`.
    pub fn new(sys: &'a System, dt: f64, divergence_threshold: f64) -> Self {
        let l = &sys.lattice;
        let (ma, mm) = (sys.params.m_a, sys.params.m_m);
        let props = |h: f64| {
            [
                l.kinetic_propagator(h, ma),
                l.kinetic_propagator(-h, ma),
                l.kinetic_propagator(h, mm),
                l.kinetic_propagator(-h, mm),
            ]
        };
        Self {
            sys,
            couplings: Couplings::new(sys),
            dt,
            limit: divergence_threshold * sys.params.n0,
            noise: true,
            half: props(0.5 * dt),
            full: props(dt),
        }
    }

    /// Same integrator with every noise switched off (mean-field limit).
    pub fn noiseless(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, s: &mut PositivePState, props: &[KineticPropagator; 4]) {
        let plan = self.sys.lattice.plan();
        props[0].apply(plan, &mut s.psi_a.values);
        props[1].apply(plan, &mut s.phi_a.values);
        props[2].apply(plan, &mut s.psi_m.values);
        props[3].apply(plan, &mut s.phi_m.values);
    }

    /// Midpoint update of drift plus noise; returns false once the trajectory diverges.
    fn local<R: Rng + ?Sized>(&self, s: &mut PositivePState, rng: &mut R) -> bool {
        let c = &self.couplings;
        let dt = self.dt;
        let z = if self.noise {
            draw_noises(c, self.sys.num_points(), dt, rng)
        } else {
            vec![[0.0; 10]; self.sys.num_points()]
        };
        let mut worst: f64 = 0.0;
        let mut finite = true;
        for (i, zi) in z.iter().enumerate() {
            let y0 = Point::load(s, i);
            let mut mid = y0;
            for _ in 0..MIDPOINT_ITERATIONS {
                let rhs = drift_point(c, mid) + stratonovich_shift(c, mid) + noise_point(c, mid, zi);
                mid = y0 + rhs * (0.5 * dt);
            }
            let y1 = mid * 2.0 + y0 * -1.0;
            finite &= y1.is_finite();
            worst = worst.max(y1.max_norm_sqr());
            y1.store(s, i);
        }
        if !finite || worst > self.limit {
            s.diverged = true;
        }
        !s.diverged
    }

    /// One full Strang step: kinetic half-step, local midpoint, kinetic half-step.
    pub fn step<R: Rng + ?Sized>(&self, s: &mut PositivePState, rng: &mut R) {
        self.advance(s, 1, rng);
    }

    /// `n` Strang steps with adjacent kinetic half-steps fused. Stops early on divergence.
    pub fn advance<R: Rng + ?Sized>(&self, s: &mut PositivePState, n: usize, rng: &mut R) {
        if n == 0 || s.diverged {
            return;
        }
        self.kinetic(s, &self.half);
        for k in 0..n {
            if !self.local(s, rng) {
                return;
            }
            s.t += self.dt;
            if k + 1 < n {
                self.kinetic(s, &self.full);
            }
        }
        self.kinetic(s, &self.half);
    }
}
