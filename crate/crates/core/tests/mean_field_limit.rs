//! Without noise and interactions the positive-P equations are the classical field
//! equations that the truncated Wigner stepper integrates.

use phasespace_core::config::{GridSpec, PhysicalParams};
use phasespace_core::grid::Field1D;
use phasespace_core::positive_p::{pp_init, PositivePStepper};
use phasespace_core::twa::{TwaState, TwaStepper};
use phasespace_core::{System, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noiseless_positive_p_follows_classical_fields() {
    let sys = System::new(PhysicalParams::default(), GridSpec::default());
    let k0 = sys.derived.k0;
    // a weak atomic seed so the coupling has something to act on
    let seed: Vec<C64> = sys
        .lattice
        .x()
        .iter()
        .map(|&x| C64::from_polar(300.0 * (-(x * x) / 4e-10).exp(), k0 * x))
        .collect();
    let initial: f64 = seed.iter().map(|v| v.norm_sqr()).sum::<f64>() * sys.dx();
    let mut pp = pp_init(&sys);
    pp.psi_a = Field1D::position(seed.clone());
    pp.phi_a = Field1D::position(seed.iter().map(|v| v.conj()).collect());
    let mut twa = TwaState {
        psi_a: Field1D::position(seed),
        psi_m: Field1D::position(sys.initial_molecular_amplitude()),
        t: 0.0,
    };
    let dt = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    PositivePStepper::new(&sys, dt, 1e6)
        .noiseless()
        .advance(&mut pp, 1000, &mut rng);
    TwaStepper::new(&sys, dt).advance(&mut twa, 1000);

    let scale = twa.psi_m.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let pairs = [
        (&pp.psi_a, &twa.psi_a),
        (&pp.psi_m, &twa.psi_m),
    ];
    for (a, b) in pairs {
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-8 * scale, "{} vs {}", x, y);
        }
    }
    for (f, p) in pp.phi_a.values.iter().zip(&pp.psi_a.values) {
        assert!((f - p.conj()).norm() < 1e-10 * scale);
    }
    // the seed must have grown for the comparison to exercise the coupling
    let grown = twa.psi_a.sum_norm_sqr() * sys.dx();
    assert!(grown > 1.05 * initial, "{initial} -> {grown}");
}
