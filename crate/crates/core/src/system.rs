//! Everything a stepper needs about one physical setup, built once and shared read-only.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::config::{derive, molecular_density, DerivedQuantities, GridSpec, PhysicalParams, ValidatedConfig};
use crate::grid::Lattice;
use crate::C64;

#[derive(Debug, Clone)]
pub struct System {
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub derived: DerivedQuantities,
    pub lattice: Lattice,
}

impl System {
    /// Builds without validation; callers that need the invariants go through [`crate::config::validate`].
    pub fn new(params: PhysicalParams, grid: GridSpec) -> Self {
        let derived = derive(&params, &grid);
        let lattice = Lattice::new(grid.box_length, grid.num_points, params.hbar);
        Self {
            params,
            grid,
            derived,
            lattice,
        }
    }

    pub fn from_config(cfg: &ValidatedConfig) -> Self {
        Self::new(*cfg.params(), *cfg.grid())
    }

    pub fn num_points(&self) -> usize {
        self.grid.num_points
    }

    pub fn dx(&self) -> f64 {
        self.lattice.dx()
    }

    /// Initial molecular density `n_m(x_i)` on the lattice.
    pub fn initial_density(&self) -> Vec<f64> {
        self.lattice
            .x()
            .iter()
            .map(|&x| molecular_density(&self.params, x))
            .collect()
    }

    /// Coherent molecular amplitude `sqrt(n_m(x_i))`, real.
    pub fn initial_molecular_amplitude(&self) -> Vec<C64> {
        self.initial_density()
            .into_iter()
            .map(|n| C64::new(n.sqrt(), 0.0))
            .collect()
    }
}
