//! Physical and numerical parameters, their validation, and derived grid quantities.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Reduced Planck constant (CODATA 2018), J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// 1D atom-atom interaction for ⁸⁷Rb in a 30 Hz transverse trap, `2·ω⊥·a_s`, in m·s⁻¹.
pub fn g0() -> f64 {
    let omega_perp = 2.0 * PI * 30.0;
    let a_s = 5.4e-9;
    2.0 * omega_perp * a_s
}

/// Physical constants and couplings, all SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Atomic mass (kg).
    pub m_a: f64,
    /// Molecular mass (kg); must equal `2·m_a`.
    pub m_m: f64,
    /// Atom-molecule coupling (m^(1/2)·s⁻¹).
    pub chi_1d: f64,
    /// Detuning (s⁻¹), negative for dissociation.
    pub delta: f64,
    /// Atom-atom interaction (m·s⁻¹).
    pub u_aa: f64,
    /// Atom-molecule interaction (m·s⁻¹).
    pub u_am: f64,
    /// Molecule-molecule interaction (m·s⁻¹).
    pub u_mm: f64,
    /// Peak molecular linear density (m⁻¹).
    pub n0: f64,
    /// Gaussian width of the initial molecular density (m).
    pub sigma: f64,
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
}

impl Default for PhysicalParams {
    /// ⁸⁷Rb₂ dissociation in 1D with all s-wave interactions switched off.
    fn default() -> Self {
        let m_a = 1.44e-25;
        Self {
            m_a,
            m_m: 2.0 * m_a,
            chi_1d: 6.7e-3,
            delta: -258.0,
            u_aa: 0.0,
            u_am: 0.0,
            u_mm: 0.0,
            n0: 1.83e7,
            sigma: 5.0e-5,
            hbar: HBAR,
        }
    }
}

/// Lattice and time-step geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Length of the periodic box (m).
    pub box_length: f64,
    /// Number of lattice points; a power of two.
    pub num_points: usize,
    /// Integration step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_final: f64,
    /// Steps between saved observable samples.
    pub save_stride: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            box_length: 6.5e-4,
            num_points: 512,
            dt: 1.0e-5,
            t_final: 0.2,
            save_stride: 500,
        }
    }
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        self.box_length / self.num_points as f64
    }

    /// Total number of integration steps, `round(t_final / dt)`.
    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Step indices at which observables are saved, always including 0 and the last step.
    pub fn save_steps(&self) -> Vec<usize> {
        let total = self.total_steps();
        let mut steps: Vec<usize> = (0..=total).step_by(self.save_stride.max(1)).collect();
        if *steps.last().unwrap_or(&0) != total {
            steps.push(total);
        }
        steps
    }
}

/// Dynamical method used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    PositiveP,
    Twa,
    Hfb,
    /// Pairing theory with the molecular field frozen at its initial value and no s-wave terms.
    Undepleted,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::PositiveP => "positive_p",
            Method::Twa => "twa",
            Method::Hfb => "hfb",
            Method::Undepleted => "undepleted",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::PositiveP | Method::Twa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "positive_p" => Ok(Method::PositiveP),
            "twa" => Ok(Method::Twa),
            "hfb" => Ok(Method::Hfb),
            "undepleted" => Ok(Method::Undepleted),
            other => Err(alloc::format!(
                "unknown method '{other}' (expected positive_p, twa, hfb or undepleted)"
            )),
        }
    }
}

/// Run-level settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub trajectories: usize,
    pub master_seed: u64,
    pub output_dir: String,
    /// A trajectory diverges once `max|field|² > divergence_threshold · n0`.
    pub divergence_threshold: f64,
    /// Number of batches for batch-means error bars.
    pub batches: usize,
    /// Minimum mode occupation below which truncated-Wigner g² is suppressed.
    pub g2_floor: f64,
    /// Half-width (in bins) of the optional momentum-bin average for g²; 0 selects one bin.
    pub g2_bin_halfwidth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Twa,
            trajectories: 10_000,
            master_seed: 1,
            output_dir: "out".to_string(),
            divergence_threshold: 1.0e6,
            batches: 100,
            g2_floor: 0.5,
            g2_bin_halfwidth: 0,
        }
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every constraint violated by a configuration, in check order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration: {}", join_violations(.violations))]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

fn join_violations(v: &[Violation]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    parts.join("; ")
}

impl ValidationError {
    pub fn mentions(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field == field)
    }
}

/// A configuration that has passed [`validate`]. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    params: PhysicalParams,
    grid: GridSpec,
    run: RunConfig,
    derived: DerivedQuantities,
}

impl ValidatedConfig {
    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn run(&self) -> &RunConfig {
        &self.run
    }

    pub fn derived(&self) -> &DerivedQuantities {
        &self.derived
    }
}

/// Quantities computed from the parameters and the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    pub dx: f64,
    /// Resonant momentum `sqrt(2·m_a·|Δ|/ħ)` (m⁻¹).
    pub k0: f64,
    /// Initial molecule number from the discrete sum over the lattice.
    pub n_m0: f64,
    /// Lattice momenta in FFT order.
    pub k_grid: Vec<f64>,
    /// Total atomic particle number `2·N_m0`.
    pub total_number: f64,
}

impl DerivedQuantities {
    /// Grid momentum for FFT index `j`.
    pub fn k_of(&self, j: usize) -> f64 {
        self.k_grid[j]
    }
}

/// Lattice momentum of FFT index `j`: `j·2π/L` below `M/2`, `(j−M)·2π/L` above.
pub fn k_of_index(j: usize, num_points: usize, box_length: f64) -> f64 {
    let dk = 2.0 * PI / box_length;
    if j < num_points / 2 || num_points == 1 {
        j as f64 * dk
    } else {
        (j as f64 - num_points as f64) * dk
    }
}

/// Position of lattice site `i`; the box spans `[−L/2, L/2)`.
pub fn x_of_index(i: usize, num_points: usize, box_length: f64) -> f64 {
    -0.5 * box_length + i as f64 * box_length / num_points as f64
}

pub fn resonant_momentum(params: &PhysicalParams) -> f64 {
    (2.0 * params.m_a * params.delta.abs() / params.hbar).sqrt()
}

/// Initial molecular density `n0·exp(−x²/σ²)` at `x`.
pub fn molecular_density(params: &PhysicalParams, x: f64) -> f64 {
    params.n0 * (-(x * x) / (params.sigma * params.sigma)).exp()
}

/// Pure derivation of grid quantities; assumes validated inputs.
pub fn derive(params: &PhysicalParams, grid: &GridSpec) -> DerivedQuantities {
    let m = grid.num_points;
    let dx = grid.dx();
    let k_grid = (0..m).map(|j| k_of_index(j, m, grid.box_length)).collect();
    let n_m0 = dx
        * (0..m)
            .map(|i| molecular_density(params, x_of_index(i, m, grid.box_length)))
            .sum::<f64>();
    DerivedQuantities {
        dx,
        k0: resonant_momentum(params),
        n_m0,
        k_grid,
        total_number: 2.0 * n_m0,
    }
}

/// Checks every constraint and returns either the validated bundle or all violations.
pub fn validate(
    params: PhysicalParams,
    grid: GridSpec,
    run: RunConfig,
) -> Result<ValidatedConfig, ValidationError> {
    let mut v = Vec::new();
    let mut fail = |field: &'static str, message: &str| {
        v.push(Violation {
            field,
            message: message.to_string(),
        })
    };

    let all_finite = [
        params.m_a,
        params.m_m,
        params.chi_1d,
        params.delta,
        params.u_aa,
        params.u_am,
        params.u_mm,
        params.n0,
        params.sigma,
        params.hbar,
        grid.box_length,
        grid.dt,
        grid.t_final,
        run.divergence_threshold,
        run.g2_floor,
    ]
    .iter()
    .all(|x| x.is_finite());
    if !all_finite {
        fail("params", "all numeric values must be finite");
    }
    if !(params.m_a > 0.0) {
        fail("m_a", "m_a must be positive");
    }
    if (params.m_m - 2.0 * params.m_a).abs() > 1e-12 * params.m_a.abs() {
        fail("m_m", "m_m must equal 2*m_a");
    }
    if !(params.delta < 0.0) {
        fail("delta", "delta must be negative");
    }
    if !(params.n0 > 0.0) {
        fail("n0", "n0 must be positive");
    }
    if !(params.sigma > 0.0) {
        fail("sigma", "sigma must be positive");
    }
    if !(params.chi_1d >= 0.0) {
        fail("chi_1d", "chi_1d must be non-negative");
    }
    if !(params.hbar > 0.0) {
        fail("hbar", "hbar must be positive");
    }

    let pow2 = grid.num_points >= 1 && grid.num_points.is_power_of_two();
    if !pow2 {
        fail("num_points", "num_points must be a power of two");
    }
    if !(grid.box_length > 0.0) {
        fail("box_length", "box_length must be positive");
    }
    if !(grid.dt > 0.0) {
        fail("dt", "dt must be positive");
    }
    if !(grid.t_final >= grid.dt) {
        fail("t_final", "t_final must be at least dt");
    }
    if grid.save_stride < 1 {
        fail("save_stride", "save_stride must be at least 1");
    }

    if pow2 && grid.box_length > 0.0 && params.m_a > 0.0 && params.hbar > 0.0 {
        let k_max = PI / grid.dx();
        let k0 = resonant_momentum(&params);
        if !(k0 <= 0.7 * k_max) {
            fail(
                "delta",
                "resonant momentum k0 exceeds 0.7 of the grid cutoff pi/dx",
            );
        }
        if params.n0 > 0.0 && params.sigma > 0.0 {
            let d = derive(&params, &grid);
            let continuum = params.n0 * params.sigma * PI.sqrt();
            if ((d.n_m0 - continuum) / continuum).abs() > 1e-3 {
                fail(
                    "sigma",
                    "initial Gaussian is not resolved by the box (lattice sum differs from n0*sigma*sqrt(pi) by more than 0.1%)",
                );
            }
        }
    }

    if run.trajectories < 1 {
        fail("trajectories", "trajectories must be at least 1");
    }
    if !run.method.is_stochastic() && run.trajectories != 1 {
        fail(
            "trajectories",
            "trajectories must be 1 for deterministic methods (hfb, undepleted)",
        );
    }
    if !(run.divergence_threshold > 0.0) {
        fail("divergence_threshold", "divergence_threshold must be positive");
    }
    if run.batches < 1 {
        fail("batches", "batches must be at least 1");
    }
    if !(run.g2_floor >= 0.0) {
        fail("g2_floor", "g2_floor must be non-negative");
    }

    if v.is_empty() {
        let derived = derive(&params, &grid);
        Ok(ValidatedConfig {
            params,
            grid,
            run,
            derived,
        })
    } else {
        Err(ValidationError { violations: v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> (PhysicalParams, GridSpec, RunConfig) {
        (
            PhysicalParams::default(),
            GridSpec::default(),
            RunConfig::default(),
        )
    }

    #[test]
    fn defaults_validate_with_k0_well_inside_grid() {
        let (p, g, r) = defaults();
        let cfg = validate(p, g, r).unwrap();
        let k_max = PI / cfg.derived().dx;
        let ratio = cfg.derived().k0 / k_max;
        // k0 = 8.41e5, pi/dx = 2.47e6
        assert!((ratio - 0.34).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn positive_detuning_is_rejected() {
        let (mut p, g, r) = defaults();
        p.delta = 258.0;
        let err = validate(p, g, r).unwrap_err();
        assert!(err.to_string().contains("delta must be negative"));
    }

    #[test]
    fn non_power_of_two_grid_is_rejected() {
        let (p, mut g, r) = defaults();
        g.num_points = 500;
        let err = validate(p, g, r).unwrap_err();
        assert!(err.to_string().contains("num_points must be a power of two"));
    }

    #[test]
    fn all_violations_are_reported() {
        let (mut p, mut g, mut r) = defaults();
        p.delta = 1.0;
        p.sigma = -1.0;
        g.num_points = 500;
        r.method = Method::Hfb;
        r.trajectories = 5;
        let err = validate(p, g, r).unwrap_err();
        for field in ["delta", "sigma", "num_points", "trajectories"] {
            assert!(err.mentions(field), "missing {field}: {err}");
        }
    }

    #[test]
    fn deterministic_methods_need_one_trajectory() {
        for method in [Method::Hfb, Method::Undepleted] {
            let (p, g, mut r) = defaults();
            r.method = method;
            r.trajectories = 5;
            assert!(validate(p, g, r.clone()).unwrap_err().mentions("trajectories"));
            r.trajectories = 1;
            assert!(validate(p, g, r).is_ok());
        }
    }

    #[test]
    fn unequal_masses_rejected() {
        let (mut p, g, r) = defaults();
        p.m_m = 3.0 * p.m_a;
        assert!(validate(p, g, r).unwrap_err().mentions("m_m"));
    }

    #[test]
    fn resonant_momentum_matches_rounded_value() {
        let k0 = resonant_momentum(&PhysicalParams::default());
        assert!(((k0 - 8.41e5) / 8.41e5).abs() < 5e-3, "k0 = {k0}");
    }

    #[test]
    fn zero_detuning_limit() {
        let p = PhysicalParams {
            delta: 0.0,
            ..PhysicalParams::default()
        };
        assert_eq!(resonant_momentum(&p), 0.0);
    }

    #[test]
    fn initial_molecule_number() {
        let (p, g, _) = defaults();
        let d = derive(&p, &g);
        assert!(((d.n_m0 - 1.62e3) / 1.62e3).abs() < 5e-3, "N_m0 = {}", d.n_m0);
        let continuum = p.n0 * p.sigma * PI.sqrt();
        assert!(((d.n_m0 - continuum) / continuum).abs() < 1e-3);
        assert_eq!(d.total_number, 2.0 * d.n_m0);
    }

    #[test]
    fn grid_arithmetic() {
        let g = GridSpec::default();
        assert!((g.dx() - 1.269_531_25e-6).abs() < 1e-15);
        let dk = 2.0 * PI / g.box_length;
        assert!((dk - 9.666e3).abs() < 1.0);
        let d = derive(&PhysicalParams::default(), &g);
        assert_eq!(d.k_grid[1], dk);
        assert_eq!(d.k_grid[256], -256.0 * dk);
        assert_eq!(d.k_grid[511], -dk);
    }

    #[test]
    fn derive_is_bit_reproducible() {
        let (p, g, _) = defaults();
        assert_eq!(derive(&p, &g), derive(&p, &g));
    }

    #[test]
    fn g0_value() {
        assert!((g0() - 2.036e-6).abs() < 1e-9, "g0 = {}", g0());
    }

    #[test]
    fn save_steps_include_endpoints() {
        let g = GridSpec {
            dt: 1e-4,
            t_final: 0.0105,
            save_stride: 50,
            ..GridSpec::default()
        };
        assert_eq!(g.total_steps(), 105);
        assert_eq!(g.save_steps(), alloc::vec![0, 50, 100, 105]);
    }
}
