#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use pnpf::admissibility::{construct_certificate, Certificate};
use pnpf::dynamics::{linear_symbol, Scheme, State, Stepper};
use pnpf::model::{Model, PhysicalCoefficients};
use pnpf::spectral::{grad, inv_neg_laplacian, leray_project, random_band_limited, Grid, ScalarField, VectorField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Symmetric density used for the simulations.
pub const SIM_DELTA: f64 = 0.05;
pub const SIM_KAPPA: f64 = 0.05;
pub const SIM_EPS0: f64 = 0.95;

pub fn mid_lambda(eps0: f64) -> f64 {
    0.5 * (1.0 / (2.0 * eps0) + 1.0)
}

/// All-ones binary electrolyte at `delta = (0.05, 0.05)` with its constructed certificate.
pub fn certified() -> (Model, Certificate) {
    let coeffs = PhysicalCoefficients::unit_binary();
    let model = Model::new(coeffs, vec![SIM_DELTA, SIM_DELTA]).unwrap();
    let cert = construct_certificate(&model.coeffs, &model.eq, SIM_KAPPA, SIM_EPS0, mid_lambda(SIM_EPS0)).unwrap();
    (model, cert)
}

/// Model with unequal viscosities and valences so no term vanishes by symmetry.
pub fn asymmetric_model() -> Model {
    let coeffs = PhysicalCoefficients {
        z: vec![-1.0, 2.0],
        k_b: 1.3,
        nu: vec![1.334, 2.032],
        k: 0.8,
        eps: 0.7,
        lambda0: 1.6,
        rho0: 1.1,
        c0: 0.9,
        c: vec![0.6, 1.4],
        charge_factor: 1.0,
    };
    Model::new(coeffs, vec![0.4, 0.2]).unwrap()
}

/// Random state with modes `|k|_inf <= kmax`, each field of sup norm `amp`, `m = sum z_i n_i`.
pub fn random_state(model: &Model, grid: &Grid, kmax: i64, amp: f64, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: Vec<ScalarField> = (0..model.species())
        .map(|_| unit_sup(random_band_limited(grid, kmax, &mut rng)).scale(amp))
        .collect();
    let theta = unit_sup(random_band_limited(grid, kmax, &mut rng)).scale(amp);
    State::from_species(n, theta, &model.coeffs.z).unwrap()
}

pub fn rel(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn unit_sup(f: ScalarField) -> ScalarField {
    let m = f.max_abs();
    f.scale(1.0 / m)
}

/// The solvent velocity written directly in terms of the densities,
/// `u0 = -(-Delta)^-1 sum_i P[(z_i/(eps lambda0)) rho_i grad (-Delta)^-1 (sum_j z_j rho_j)]`.
pub fn u0_closed_form(state: &State, model: &Model) -> VectorField {
    let c = &model.coeffs;
    let g = state.grid();
    let rho: Vec<ScalarField> = state
        .n
        .iter()
        .enumerate()
        .map(|(i, n)| n.map(|v| model.eq.delta[i] + v))
        .collect();
    let mut charge = ScalarField::zeros(g);
    for (zi, r) in c.z.iter().zip(&rho) {
        charge.axpy(*zi, r);
    }
    let psi = grad(&inv_neg_laplacian(&charge).unwrap());
    let mut total = VectorField::zeros(g);
    for (i, r) in rho.iter().enumerate() {
        let term = psi.mul_scalar(r).scale(c.z[i] / (c.eps * c.lambda0)).dealias();
        total = total.add(&leray_project(&term));
    }
    let comps = total
        .components
        .iter()
        .map(|f| {
            let mean = f.mean();
            inv_neg_laplacian(&f.map(|v| v - mean)).unwrap().scale(-1.0)
        })
        .collect();
    VectorField::from_components(comps).unwrap()
}

/// `exp(A)` by Taylor series with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Max error of one linear-only step on `cos 2x` data against the exact propagator.
pub fn linear_step_error(model: &Model, scheme: Scheme, dt: f64) -> f64 {
    let l = 2.0 * PI;
    let g = Grid::new(1, 16, l).unwrap();
    let amp = [0.3, -0.2, 0.5, 0.4];
    let wave = ScalarField::from_fn(&g, |x| (2.0 * x[0]).cos());
    let s = State {
        n: vec![wave.scale(amp[0]), wave.scale(amp[1])],
        theta: wave.scale(amp[2]),
        m: wave.scale(amp[3]),
        t: 0.0,
    };
    let stepper = Stepper::new(model, &g, dt, scheme).unwrap().linear_only();
    let next = stepper.step(&s).unwrap();
    let a = linear_symbol(model, 4.0).a;
    let exact = expm(&(a * dt)) * DVector::from_vec(amp.to_vec());
    let fields = next.fields();
    (0..4)
        .map(|v| fields[v].sub(&wave.scale(exact[v])).max_abs())
        .fold(0.0, f64::max)
}
