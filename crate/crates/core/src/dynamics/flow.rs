//! Potential, solvent velocity, pressure and species velocities from a state.

use super::State;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{self, grad, inv_neg_laplacian, leray_project, ScalarField, VectorField};

/// Fields slaved to the state through elliptic equations.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFields {
    pub phi: ScalarField,
    pub u0: VectorField,
    /// Zero-mean representative of the pressure.
    pub p0: ScalarField,
    /// Species velocities.
    pub u: Vec<VectorField>,
}

/// `phi` with `-eps Delta phi = m` and zero mean.
pub fn solve_potential(m: &ScalarField, eps: f64) -> Result<ScalarField> {
    Ok(inv_neg_laplacian(m)?.scale(1.0 / eps))
}

/// Solvent velocity and pressure.
///
/// The gradient forcing `sum k_B grad(rho_i T)` is removed by the projection, so
/// `u0 = -(1/lambda0) (-Delta)^-1 P(m grad phi)`. The pressure is recovered from the
/// divergence of the momentum balance, `P0 = -sum k_B rho_i T + (-Delta)^-1 div(m grad phi)`,
/// normalized to zero mean.
pub fn solve_solvent_flow(state: &State, model: &Model) -> Result<(VectorField, ScalarField)> {
    let c = &model.coeffs;
    let phi = solve_potential(&state.m, c.eps)?;
    let force = grad(&phi).mul_scalar(&state.m).dealias();
    let u0 = solvent_velocity(&force, c.lambda0)?;

    let mut pressure = ScalarField::zeros(state.grid());
    for (i, n) in state.n.iter().enumerate() {
        let rho_t = n
            .map(|v| model.eq.delta[i] + v)
            .zip_map(&state.theta, |r, th| r * (1.0 + th));
        pressure.axpy(-c.k_b, &rho_t);
    }
    let pressure = spectral::dealias(&pressure);
    let mean = pressure.mean();
    let mut p0 = pressure.map(|v| v - mean);
    let div_force = spectral::div(&force);
    p0.axpy(1.0, &inv_neg_laplacian(&div_force)?);
    Ok((u0, p0))
}

/// `-(1/lambda0) (-Delta)^-1 P(force)`, componentwise, zero mean.
pub(crate) fn solvent_velocity(force: &VectorField, lambda0: f64) -> Result<VectorField> {
    let projected = leray_project(force);
    let comps = projected
        .components
        .iter()
        .map(|c| {
            let mean = c.mean();
            inv_neg_laplacian(&c.map(|v| v - mean)).map(|f| f.scale(-1.0 / lambda0))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::from_components(comps)
}

/// `u_i = u0 - k_B/(nu_i rho_i) grad(rho_i T) - (z_i/nu_i) grad phi`, pointwise.
pub fn species_velocities(
    state: &State,
    phi: &ScalarField,
    u0: &VectorField,
    model: &Model,
) -> Result<Vec<VectorField>> {
    let c = &model.coeffs;
    let grad_phi = grad(phi);
    let mut out = Vec::with_capacity(state.species());
    for (i, n) in state.n.iter().enumerate() {
        let rho = n.map(|v| model.eq.delta[i] + v);
        check_positive(&rho, &format!("rho_{}", i + 1))?;
        let grad_rho_t = grad(&rho.mul(&state.theta.map(|v| 1.0 + v)));
        let inv = rho.map(|r| -c.k_b / (c.nu[i] * r));
        let drift = grad_rho_t.mul_scalar(&inv);
        let electric = grad_phi.scale(-c.z[i] / c.nu[i]);
        out.push(u0.add(&drift).add(&electric));
    }
    Ok(out)
}

/// All slaved fields at once.
pub fn flow_fields(state: &State, model: &Model) -> Result<FlowFields> {
    let phi = solve_potential(&state.m, model.coeffs.eps)?;
    let (u0, p0) = solve_solvent_flow(state, model)?;
    let u = species_velocities(state, &phi, &u0, model)?;
    Ok(FlowFields { phi, u0, p0, u })
}

pub(crate) fn check_positive(f: &ScalarField, name: &str) -> Result<()> {
    match f.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, value)) => Err(Error::Degenerate {
            field: name.to_string(),
            index,
            value: *value,
        }),
        None => Ok(()),
    }
}
