//! Nonlinear remainders of the perturbed system.

use super::flow::check_positive;
use super::State;
use crate::error::Result;
use crate::model::Model;
use crate::spectral::{self, ScalarField, VectorField};

/// Nonlinear terms, each dealiased.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTerms {
    pub r_n: Vec<ScalarField>,
    /// Forcing of the solvent momentum balance beyond its linear part; reported, not evolved.
    pub r_u0: VectorField,
    pub r_m: ScalarField,
    /// Remainder of the temperature equation in the form `a d_t theta = ... + R_theta`.
    pub r_theta: ScalarField,
}

struct Derivs {
    grad: VectorField,
    lap: ScalarField,
}

fn derivs(f: &ScalarField) -> Derivs {
    let s = f.spectrum();
    Derivs {
        grad: spectral::grad_spectrum(&s),
        lap: s.laplacian().to_field(),
    }
}

/// Evaluates the nonlinear terms at `state` with the slaved fields `phi`, `u0`.
///
/// Products are formed pointwise and each result is dealiased once at the end. Fails with
/// a degenerate-state error if some density `delta_i + n_i` or the heat capacity
/// `a + sum k_B c_i n_i` is not positive.
pub fn nonlinear_terms(state: &State, phi: &ScalarField, u0: &VectorField, model: &Model) -> Result<NonlinearTerms> {
    let c = &model.coeffs;
    let delta = &model.eq.delta;
    let a = model.derived.a;
    let b = model.derived.b;
    let kb = c.k_b;
    let eps = c.eps;
    let g = state.grid();
    let len = g.len();
    let species = state.species();

    let rho: Vec<ScalarField> = state
        .n
        .iter()
        .enumerate()
        .map(|(i, n)| n.map(|v| delta[i] + v))
        .collect();
    for (i, r) in rho.iter().enumerate() {
        check_positive(r, &format!("rho_{}", i + 1))?;
    }
    let mut heat = ScalarField::constant(g, a);
    for (i, n) in state.n.iter().enumerate() {
        heat.axpy(kb * c.c[i], n);
    }
    check_positive(&heat, "heat capacity a + sum k_B c_i n_i")?;

    let th = derivs(&state.theta);
    let gm = spectral::grad(&state.m);
    let gphi = spectral::grad(phi);
    let dn: Vec<Derivs> = state.n.iter().map(derivs).collect();
    // n_i theta and its derivatives
    let dp: Vec<Derivs> = state.n.iter().map(|n| derivs(&n.mul(&state.theta))).collect();

    let dot = |x: &VectorField, y: &VectorField, k: usize| -> f64 {
        x.components
            .iter()
            .zip(&y.components)
            .map(|(p, q)| p.values[k] * q.values[k])
            .sum()
    };
    let grad_u0: Vec<VectorField> = u0.components.iter().map(spectral::grad).collect();

    let mut r_n: Vec<ScalarField> = (0..species).map(|_| ScalarField::zeros(g)).collect();
    let mut r_m = ScalarField::zeros(g);
    let mut r_theta = ScalarField::zeros(g);

    for k in 0..len {
        let m = state.m.values[k];
        let theta = state.theta.values[k];
        let u0_gm = dot(u0, &gm, k);
        let u0_gth = dot(u0, &th.grad, k);
        let mut rm = -u0_gm;
        let mut q = 0.0;
        let mut f_lin = b * th.lap.values[k];
        let mut r_star = 0.0;
        for i in 0..species {
            let n = state.n[i].values[k];
            let zi = c.z[i];
            let nui = c.nu[i];
            let rho_i = rho[i].values[k];
            let gn_gphi = dot(&dn[i].grad, &gphi, k);
            let lap_p = dp[i].lap.values[k];
            r_n[i].values[k] =
                -dot(u0, &dn[i].grad, k) - zi / (eps * nui) * n * m + zi / nui * gn_gphi + kb / nui * lap_p;
            rm += kb * zi / nui * lap_p - zi * zi / (eps * nui) * n * m + zi * zi / nui * gn_gphi;

            q += kb * c.c[i] * n;
            f_lin += kb * kb / nui * dn[i].lap.values[k] - kb * zi * delta[i] / (eps * nui) * m;

            // w_i = n_i + delta_i theta + n_i theta = rho_i T - delta_i
            let gw: [f64; 3] = std::array::from_fn(|ax| {
                if ax < g.dim() {
                    dn[i].grad.components[ax].values[k]
                        + delta[i] * th.grad.components[ax].values[k]
                        + dp[i].grad.components[ax].values[k]
                } else {
                    0.0
                }
            });
            let lap_w = dn[i].lap.values[k] + delta[i] * th.lap.values[k] + lap_p;
            let gw_gth: f64 = (0..g.dim()).map(|ax| gw[ax] * th.grad.components[ax].values[k]).sum();
            let gn_gw: f64 = (0..g.dim())
                .map(|ax| dn[i].grad.components[ax].values[k] * gw[ax])
                .sum();
            let gphi_gth = dot(&gphi, &th.grad, k);
            let friction: f64 = (0..g.dim())
                .map(|ax| (kb * gw[ax] + c.charge_factor * zi * rho_i * gphi.components[ax].values[k]).powi(2))
                .sum();

            r_star +=
                kb * kb * c.c[i] / nui * gw_gth + kb * c.c[i] * zi / nui * rho_i * gphi_gth + kb * kb / nui * lap_p
                    - kb * zi / (eps * nui) * n * m
                    - kb * kb / (nui * rho_i) * gn_gw
                    + kb * kb / nui * lap_w * theta
                    - kb * zi / (eps * nui) * rho_i * m * theta
                    - kb * kb / (nui * rho_i) * theta * gn_gw
                    + friction / (nui * rho_i);
        }
        let grad_u0_sq: f64 = grad_u0
            .iter()
            .map(|gu| gu.components.iter().map(|d| d.values[k].powi(2)).sum::<f64>())
            .sum();
        r_star += c.lambda0 * grad_u0_sq;

        r_m.values[k] = rm;
        r_theta.values[k] = -a * u0_gth + a * r_star / (a + q) - q / (a + q) * f_lin;
    }

    let mut r_u0 = gphi.mul_scalar(&state.m);
    for d in &dp {
        for (comp, gp) in r_u0.components.iter_mut().zip(&d.grad.components) {
            comp.axpy(kb, gp);
        }
    }

    Ok(NonlinearTerms {
        r_n: r_n.iter().map(spectral::dealias).collect(),
        r_u0: r_u0.dealias(),
        r_m: spectral::dealias(&r_m),
        r_theta: spectral::dealias(&r_theta),
    })
}
