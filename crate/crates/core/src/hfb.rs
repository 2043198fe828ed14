//! Pairing mean-field (HFB-type) dynamics: molecular mean field coupled to the normal
//! and anomalous atomic densities.
//!
//! `G_N(x, x′) = ⟨χ†(x′)χ(x)⟩` and `G_A(x, x′) = ⟨χ(x′)χ(x)⟩` are stored as dense
//! `M×M` matrices with row index `x`. On the lattice `δ(x − x′)` becomes `δ_ij/dx`.

use alloc::vec::Vec;

use crate::grid::{Field1D, Field2D, KineticPropagator, KineticPropagator2d};
use crate::system::System;
use crate::C64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// The midpoint solve is iterated until every block changes by less than this, relatively.
const MIDPOINT_TOLERANCE: f64 = 1e-13;
pub const MIDPOINT_MAX_ITERATIONS: usize = 40;

/// Relative structural defect above which a step is retried with two half-steps.
pub const ENFORCEMENT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct HfbState {
    pub phi_a: Field1D,
    pub phi_m: Field1D,
    pub g_a: Field2D,
    pub g_n: Field2D,
    pub t: f64,
}

/// Local time derivatives (everything except the Laplacians).
#[derive(Debug, Clone, PartialEq)]
pub struct HfbRhs {
    pub phi_a: Vec<C64>,
    pub phi_m: Vec<C64>,
    pub g_a: Field2D,
    pub g_n: Field2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HfbOptions {
    /// Undepleted molecular field: `φ_m` keeps its shape and only turns with the
    /// detuning phase `exp(−2i|Δ|t)`; no depletion, spreading or self-interaction.
    pub freeze_molecules: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HfbError {
    #[error("structure of G_N/G_A lost at t = {t:e} s (relative defect {defect:e} after retry)")]
    StructureLost { t: f64, defect: f64 },
}

/// Largest relative projection applied to restore Hermiticity/symmetry in one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub enforcement: f64,
    pub retried: bool,
}

/// Coherent molecules, no atomic mean field, no fluctuations.
pub fn hfb_init(sys: &System) -> HfbState {
    let n = sys.num_points();
    HfbState {
        phi_a: Field1D::position(alloc::vec![C64::new(0.0, 0.0); n]),
        phi_m: Field1D::position(sys.initial_molecular_amplitude()),
        g_a: Field2D::zeros(n),
        g_n: Field2D::zeros(n),
        t: 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
struct Couplings {
    /// Detuning rotation of `φ_m` in the local right-hand side; the stepper sets it to
    /// zero and applies the rotation exactly with the kinetic phases.
    abs_delta: f64,
    chi: f64,
    u_aa: f64,
    u_mm: f64,
    inv_dx: f64,
}

impl Couplings {
    fn new(sys: &System) -> Self {
        let p = &sys.params;
        Self {
            abs_delta: p.delta.abs(),
            chi: p.chi_1d,
            u_aa: p.u_aa,
            u_mm: p.u_mm,
            inv_dx: 1.0 / sys.dx(),
        }
    }
}

/// Writes the local right-hand sides of all four quantities into `out`.
fn local_rhs_into(c: &Couplings, opts: HfbOptions, s: &HfbState, out: &mut HfbRhs) {
    let n = s.g_a.dim();
    let phi_a = &s.phi_a.values;
    let phi_m = &s.phi_m.values;
    let u = c.u_aa;

    // a_i = |φ_a|² + G_N(x,x); p_i = U(φ_a² + G_A(x,x)) + χ φ_m
    let mut a = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut pc = Vec::with_capacity(n);
    for i in 0..n {
        let gn = s.g_n.get(i, i).re;
        let ga = s.g_a.get(i, i);
        a.push(phi_a[i].norm_sqr() + gn);
        let pi = u * (phi_a[i] * phi_a[i] + ga) + c.chi * phi_m[i];
        p.push(pi);
        // conjugate partner entering dG_N: U(φ_a*² + G_A*(x′,x′)) + χ φ_m*(x′)
        pc.push(pi.conj());
    }

    for i in 0..n {
        let gn_ii = s.g_n.get(i, i).re;
        let ga_ii = s.g_a.get(i, i);
        out.phi_a[i] = -I * u * (phi_a[i].norm_sqr() + 2.0 * gn_ii) * phi_a[i]
            - I * u * ga_ii * phi_a[i].conj()
            - I * c.chi * phi_m[i] * phi_a[i].conj();
        out.phi_m[i] = if opts.freeze_molecules {
            -I * 2.0 * c.abs_delta * phi_m[i]
        } else {
            -I * 2.0 * c.abs_delta * phi_m[i]
                - I * c.u_mm * phi_m[i].norm_sqr() * phi_m[i]
                - I * (c.chi / 2.0) * (phi_a[i] * phi_a[i] + ga_ii)
        };
    }

    let ga = s.g_a.as_slice();
    let gn = s.g_n.as_slice();
    let (oa, on) = (out.g_a.as_mut_slice(), out.g_n.as_mut_slice());
    let two_u = 2.0 * u;
    for i in 0..n {
        let row = i * n..(i + 1) * n;
        let (ai, pi) = (a[i], p[i]);
        let rows = oa[row.clone()]
            .iter_mut()
            .zip(on[row.clone()].iter_mut())
            .zip(&ga[row.clone()])
            .zip(&gn[row]);
        for (j, (((ra, rn), &gaij), &gnij)) in rows.enumerate() {
            // dG_A = −i[2U(a_i + a_j)G_A + p_i G_N* + p_j G_N]
            let inner_a = gaij * (two_u * (ai + a[j])) + pi * gnij.conj() + p[j] * gnij;
            // dG_N = −i[2U(a_i − a_j)G_N + p_i G_A* − p_j* G_A]
            let inner_n = gnij * (two_u * (ai - a[j])) + pi * gaij.conj() - pc[j] * gaij;
            *ra = C64::new(inner_a.im, -inner_a.re);
            *rn = C64::new(inner_n.im, -inner_n.re);
        }
        // pair source −i p_i δ_ij/dx
        oa[i * n + i] += -I * pi * c.inv_dx;
    }
}

/// Local right-hand sides of the mean-field and correlation equations.
pub fn hfb_local_rhs(sys: &System, s: &HfbState) -> HfbRhs {
    hfb_local_rhs_with(sys, s, HfbOptions::default())
}

pub fn hfb_local_rhs_with(sys: &System, s: &HfbState, opts: HfbOptions) -> HfbRhs {
    let n = sys.num_points();
    let mut out = HfbRhs {
        phi_a: alloc::vec![C64::new(0.0, 0.0); n],
        phi_m: alloc::vec![C64::new(0.0, 0.0); n],
        g_a: Field2D::zeros(n),
        g_n: Field2D::zeros(n),
    };
    local_rhs_into(&Couplings::new(sys), opts, s, &mut out);
    out
}

/// `(N_m, N_a)` with `N_a` counting condensed and noncondensed atoms.
pub fn hfb_numbers(sys: &System, s: &HfbState) -> (f64, f64) {
    let dx = sys.dx();
    let nm = dx * s.phi_m.sum_norm_sqr();
    let na = dx * (s.phi_a.sum_norm_sqr() + s.g_n.diagonal().iter().map(|v| v.re).sum::<f64>());
    (nm, na)
}

/// Relative structural defect `max(‖G_N − G_N†‖, ‖G_A − G_Aᵀ‖) / max|G|`.
pub fn structural_defect(s: &HfbState) -> f64 {
    let scale = s.g_a.max_abs().max(s.g_n.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    s.g_n.hermiticity_defect().max(s.g_a.symmetry_defect()) / scale
}

fn enforce(s: &mut HfbState) -> f64 {
    let scale = s.g_a.max_abs().max(s.g_n.max_abs());
    let change = s.g_n.hermitize().max(s.g_a.symmetrize());
    if scale == 0.0 {
        0.0
    } else {
        change / scale
    }
}

struct Scratch {
    y0: HfbState,
    rhs: HfbRhs,
}

#[derive(Debug, Clone)]
struct Propagators {
    phi_a: KineticPropagator,
    phi_m: KineticPropagator,
    /// `exp(−2i|Δ|h)`
    detuning: C64,
    g_a: KineticPropagator2d,
    g_n: KineticPropagator2d,
}

/// Strang-split integrator: exact kinetic half-steps (1D for the fields, separable 2D for
/// the matrices, with the molecular detuning phase folded in), an implicit midpoint
/// update of the remaining local terms in between.
#[derive(Debug, Clone)]
pub struct HfbStepper<'a> {
    sys: &'a System,
    couplings: Couplings,
    opts: HfbOptions,
    dt: f64,
    half: Propagators,
    full: Propagators,
    back_quarter: Propagators,
}

impl<'a> HfbStepper<'a> {
    pub fn new(sys: &'a System, dt: f64, opts: HfbOptions) -> Self {
        let l = &sys.lattice;
        let p = &sys.params;
        let props = |h: f64| Propagators {
            phi_a: l.kinetic_propagator(h, p.m_a),
            phi_m: l.kinetic_propagator(h, p.m_m),
            detuning: C64::from_polar(1.0, -2.0 * p.delta.abs() * h),
            g_a: l.kinetic_propagator_2d(h, p.m_a, (1, 1)),
            g_n: l.kinetic_propagator_2d(h, p.m_a, (1, -1)),
        };
        Self {
            sys,
            couplings: Couplings {
                abs_delta: 0.0,
                ..Couplings::new(sys)
            },
            opts,
            dt,
            half: props(0.5 * dt),
            full: props(dt),
            back_quarter: props(-0.25 * dt),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, s: &mut HfbState, props: &Propagators) {
        let plan = self.sys.lattice.plan();
        props.phi_a.apply(plan, &mut s.phi_a.values);
        if !self.opts.freeze_molecules {
            props.phi_m.apply(plan, &mut s.phi_m.values);
        }
        for v in s.phi_m.values.iter_mut() {
            *v *= props.detuning;
        }
        props.g_a.apply(plan, &mut s.g_a);
        props.g_n.apply(plan, &mut s.g_n);
    }

    fn local(&self, s: &mut HfbState, scratch: &mut Scratch, dt: f64) {
        scratch.y0.clone_from(s);
        let h = 0.5 * dt;
        for _ in 0..MIDPOINT_MAX_ITERATIONS {
            local_rhs_into(&self.couplings, self.opts, s, &mut scratch.rhs);
            let changes = [
                axpy(&mut s.phi_a.values, &scratch.y0.phi_a.values, &scratch.rhs.phi_a, h),
                axpy(&mut s.phi_m.values, &scratch.y0.phi_m.values, &scratch.rhs.phi_m, h),
                axpy(s.g_a.as_mut_slice(), scratch.y0.g_a.as_slice(), scratch.rhs.g_a.as_slice(), h),
                axpy(s.g_n.as_mut_slice(), scratch.y0.g_n.as_slice(), scratch.rhs.g_n.as_slice(), h),
            ];
            if changes.iter().all(|&c| c <= MIDPOINT_TOLERANCE * MIDPOINT_TOLERANCE) {
                break;
            }
        }
        extrapolate(&mut s.phi_a.values, &scratch.y0.phi_a.values);
        extrapolate(&mut s.phi_m.values, &scratch.y0.phi_m.values);
        extrapolate(s.g_a.as_mut_slice(), scratch.y0.g_a.as_slice());
        extrapolate(s.g_n.as_mut_slice(), scratch.y0.g_n.as_slice());
    }

    fn scratch(&self) -> Scratch {
        let n = self.sys.num_points();
        Scratch {
            y0: hfb_init(self.sys),
            rhs: HfbRhs {
                phi_a: alloc::vec![C64::new(0.0, 0.0); n],
                phi_m: alloc::vec![C64::new(0.0, 0.0); n],
                g_a: Field2D::zeros(n),
                g_n: Field2D::zeros(n),
            },
        }
    }

    /// One unfused Strang step.
    pub fn step(&self, s: &mut HfbState) -> Result<StepReport, HfbError> {
        self.advance(s, 1)
    }

    /// `n` Strang steps with adjacent kinetic half-steps fused. The structure of
    /// `G_N`/`G_A` is projected back after every local update; a local update whose
    /// projection exceeds [`ENFORCEMENT_LIMIT`] is redone as two half-length steps.
    pub fn advance(&self, s: &mut HfbState, n: usize) -> Result<StepReport, HfbError> {
        let mut report = StepReport::default();
        if n == 0 {
            return Ok(report);
        }
        let mut scratch = self.scratch();
        self.kinetic(s, &self.half);
        for k in 0..n {
            self.local(s, &mut scratch, self.dt);
            let mut change = enforce(s);
            if change > ENFORCEMENT_LIMIT {
                // redo as two half-length Strang steps; the outer kinetic half-steps
                // already applied overshoot by a quarter step on each side
                s.clone_from(&scratch.y0);
                report.retried = true;
                self.kinetic(s, &self.back_quarter);
                self.local(s, &mut scratch, 0.5 * self.dt);
                change = enforce(s);
                self.kinetic(s, &self.half);
                self.local(s, &mut scratch, 0.5 * self.dt);
                change = change.max(enforce(s));
                self.kinetic(s, &self.back_quarter);
                if change > ENFORCEMENT_LIMIT {
                    return Err(HfbError::StructureLost { t: s.t, defect: change });
                }
            }
            report.enforcement = report.enforcement.max(change);
            s.t += self.dt;
            if k + 1 < n {
                self.kinetic(s, &self.full);
            }
        }
        self.kinetic(s, &self.half);
        Ok(report)
    }
}

/// `y ← y0 + h·f`, returning the squared relative change of `y`.
fn axpy(y: &mut [C64], y0: &[C64], f: &[C64], h: f64) -> f64 {
    let (mut change, mut norm) = (0.0, 0.0);
    for ((y, a), b) in y.iter_mut().zip(y0).zip(f) {
        let new = a + b * h;
        change += (new - *y).norm_sqr();
        norm += new.norm_sqr();
        *y = new;
    }
    if norm == 0.0 {
        0.0
    } else {
        change / norm
    }
}

/// `y ← 2·y − y0`, turning the converged midpoint into the end point.
fn extrapolate(y: &mut [C64], y0: &[C64]) {
    for (y, a) in y.iter_mut().zip(y0) {
        *y = *y * 2.0 - a;
    }
}
