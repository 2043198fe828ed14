//! Truncated Wigner classical-field equations with sampled vacuum noise.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::{Field1D, KineticPropagator};
use crate::system::System;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Fixed-point iterations are stopped once the update falls below this relative size.
const MIDPOINT_TOLERANCE: f64 = 1e-15;
const MIDPOINT_MAX_ITERATIONS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct TwaState {
    pub psi_a: Field1D,
    pub psi_m: Field1D,
    pub t: f64,
}

/// Complex Gaussian with `⟨|η|²⟩ = 1/(2·dx)` and `⟨η²⟩ = 0`.
fn vacuum_sample<R: Rng + ?Sized>(rng: &mut R, std_per_quadrature: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std_per_quadrature
}

/// Wigner sample of a coherent molecular condensate and the atomic vacuum:
/// half a quantum of noise per lattice mode in both fields.
pub fn twa_sample_initial<R: Rng + ?Sized>(sys: &System, rng: &mut R) -> TwaState {
    let q = (1.0 / (4.0 * sys.dx())).sqrt();
    let psi_m: Vec<C64> = sys
        .initial_molecular_amplitude()
        .into_iter()
        .map(|c| c + vacuum_sample(rng, q))
        .collect();
    let psi_a: Vec<C64> = (0..sys.num_points()).map(|_| vacuum_sample(rng, q)).collect();
    TwaState {
        psi_a: Field1D::position(psi_a),
        psi_m: Field1D::position(psi_m),
        t: 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
struct Couplings {
    delta: f64,
    chi: f64,
    u_aa: f64,
    u_am: f64,
    u_mm: f64,
}

#[inline]
fn local_rhs(c: &Couplings, a: C64, m: C64) -> (C64, C64) {
    let na = a.norm_sqr();
    let nm = m.norm_sqr();
    let da = -I * (c.delta + c.u_aa * na + c.u_am * nm) * a - I * c.chi * m * a.conj();
    let dm = -I * (c.u_am * na + c.u_mm * nm) * m - I * (c.chi / 2.0) * a * a;
    (da, dm)
}

/// Strang-split integrator: exact kinetic half-steps around an implicit midpoint solve
/// of the local terms, iterated to convergence at every site.
#[derive(Debug, Clone)]
pub struct TwaStepper<'a> {
    sys: &'a System,
    couplings: Couplings,
    dt: f64,
    half: [KineticPropagator; 2],
    full: [KineticPropagator; 2],
}

impl<'a> TwaStepper<'a> {
    pub fn new(sys: &'a System, dt: f64) -> Self {
        let l = &sys.lattice;
        let p = &sys.params;
        let props = |h: f64| [l.kinetic_propagator(h, p.m_a), l.kinetic_propagator(h, p.m_m)];
        Self {
            sys,
            couplings: Couplings {
                delta: p.delta,
                chi: p.chi_1d,
                u_aa: p.u_aa,
                u_am: p.u_am,
                u_mm: p.u_mm,
            },
            dt,
            half: props(0.5 * dt),
            full: props(dt),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, s: &mut TwaState, props: &[KineticPropagator; 2]) {
        let plan = self.sys.lattice.plan();
        props[0].apply(plan, &mut s.psi_a.values);
        props[1].apply(plan, &mut s.psi_m.values);
    }

    fn local(&self, s: &mut TwaState) {
        let c = &self.couplings;
        let h = 0.5 * self.dt;
        for (a, m) in s.psi_a.values.iter_mut().zip(s.psi_m.values.iter_mut()) {
            let (a0, m0) = (*a, *m);
            let (mut am, mut mm) = (a0, m0);
            let scale = a0.norm_sqr() + m0.norm_sqr();
            for _ in 0..MIDPOINT_MAX_ITERATIONS {
                let (da, dm) = local_rhs(c, am, mm);
                let (na, nm) = (a0 + da * h, m0 + dm * h);
                let change = (na - am).norm_sqr() + (nm - mm).norm_sqr();
                am = na;
                mm = nm;
                if change <= MIDPOINT_TOLERANCE * MIDPOINT_TOLERANCE * scale {
                    break;
                }
            }
            *a = am * 2.0 - a0;
            *m = mm * 2.0 - m0;
        }
    }

    pub fn step(&self, s: &mut TwaState) {
        self.advance(s, 1);
    }

    /// `n` Strang steps with adjacent kinetic half-steps fused.
    pub fn advance(&self, s: &mut TwaState, n: usize) {
        if n == 0 {
            return;
        }
        self.kinetic(s, &self.half);
        for k in 0..n {
            self.local(s);
            s.t += self.dt;
            if k + 1 < n {
                self.kinetic(s, &self.full);
            }
        }
        self.kinetic(s, &self.half);
    }
}

/// Classical conserved number `dx·Σ(2|Ψ_m|² + |Ψ_a|²)` of one trajectory, uncorrected.
pub fn classical_total(sys: &System, s: &TwaState) -> f64 {
    sys.dx() * (2.0 * s.psi_m.sum_norm_sqr() + s.psi_a.sum_norm_sqr())
}
