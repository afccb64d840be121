//! Elliptic solves, nonlinear terms, the per-mode linear symbol and the IMEX stepper for
//! the perturbed system around a constant equilibrium.

mod flow;
mod nonlinear;
mod simulate;
mod stepper;
mod symbol;

pub use flow::{flow_fields, solve_potential, solve_solvent_flow, species_velocities, FlowFields};
pub use nonlinear::{nonlinear_terms, NonlinearTerms};
pub use simulate::{random_initial_state, simulate, RunOutcome, SimulationOptions, Trajectory, DEFAULT_BLOWUP_FACTOR};
pub use stepper::{step, Scheme, Stepper};
pub use symbol::{default_xi_grid, linear_symbol, spectral_stability_scan, LinearSymbol, ScanReport};

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField};

/// Perturbation `(n_1..n_N, theta, m)` of the equilibrium at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub n: Vec<ScalarField>,
    pub theta: ScalarField,
    pub m: ScalarField,
    pub t: f64,
}

impl State {
    /// The equilibrium itself.
    pub fn zeros(grid: &Grid, species: usize) -> Self {
        Self {
            n: (0..species).map(|_| ScalarField::zeros(grid)).collect(),
            theta: ScalarField::zeros(grid),
            m: ScalarField::zeros(grid),
            t: 0.0,
        }
    }

    /// Builds a state with `m = sum z_i n_i`.
    pub fn from_species(n: Vec<ScalarField>, theta: ScalarField, z: &[f64]) -> Result<Self> {
        if n.len() != z.len() {
            return Err(Error::validation(format!(
                "{} density fields for {} valences",
                n.len(),
                z.len()
            )));
        }
        let m = charge_of(&n, z);
        Ok(Self { n, theta, m, t: 0.0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.theta.grid
    }

    pub fn species(&self) -> usize {
        self.n.len()
    }

    /// `||m - sum z_i n_i||_{L^2}`.
    pub fn consistency_residual(&self, z: &[f64]) -> f64 {
        self.m.sub(&charge_of(&self.n, z)).norm()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n.iter().map(|f| f.scale(c)).collect(),
            theta: self.theta.scale(c),
            m: self.m.scale(c),
            t: self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.n.iter().all(|f| f.is_finite()) && self.theta.is_finite() && self.m.is_finite()
    }

    /// Fields in solver order `(n_1..n_N, theta, m)`.
    pub fn fields(&self) -> Vec<&ScalarField> {
        self.n.iter().chain([&self.theta, &self.m]).collect()
    }
}

/// `sum z_i n_i`.
pub fn charge_of(n: &[ScalarField], z: &[f64]) -> ScalarField {
    let mut out = ScalarField::zeros(&n[0].grid);
    for (f, zi) in n.iter().zip(z) {
        out.axpy(*zi, f);
    }
    out
}
