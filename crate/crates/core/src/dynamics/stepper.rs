//! Implicit-explicit time stepping: the linear symbol is solved exactly per mode, the
//! nonlinear terms are explicit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::flow::solvent_velocity;
use super::nonlinear::nonlinear_terms;
use super::symbol::linear_symbol;
use super::State;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{self, Grid, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward Euler on the linear part, forward Euler on the rest.
    Imex1,
    /// Trapezoidal linear part with an explicit midpoint for the nonlinear terms.
    Imex2,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Imex1 => "imex1",
            Scheme::Imex2 => "imex2",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "imex1" => Ok(Scheme::Imex1),
            "imex2" => Ok(Scheme::Imex2),
            other => Err(format!("unknown scheme `{other}` (expected imex1 or imex2)")),
        }
    }
}

/// A stepper for a fixed `(model, grid, dt, scheme)`, with the per-mode matrices cached.
#[derive(Debug, Clone)]
pub struct Stepper {
    model: Model,
    grid: Grid,
    dt: f64,
    scheme: Scheme,
    nvar: usize,
    /// `(I - dt A)^-1` or `(I - dt/2 A)^-1`, row-major per resolved mode.
    solve: Vec<Vec<f64>>,
    /// `(I - dt/2 A)^-1 (I + dt/2 A)` for imex2.
    propagate: Vec<Vec<f64>>,
    linear_only: bool,
}

fn apply(mat: &[f64], nvar: usize, x: &[Complex64]) -> Vec<Complex64> {
    (0..nvar)
        .map(|r| (0..nvar).map(|c| x[c] * mat[r * nvar + c]).sum())
        .collect()
}

impl Stepper {
    pub fn new(model: &Model, grid: &Grid, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::validation(format!("dt = {dt} must be positive")));
        }
        let nvar = model.species() + 2;
        let h = match scheme {
            Scheme::Imex1 => dt,
            Scheme::Imex2 => 0.5 * dt,
        };
        let mut solve = Vec::with_capacity(grid.len());
        let mut propagate = Vec::new();
        for mode in 0..grid.len() {
            if !grid.is_resolved(mode) {
                solve.push(Vec::new());
                if scheme == Scheme::Imex2 {
                    propagate.push(Vec::new());
                }
                continue;
            }
            let a = linear_symbol(model, grid.xi_sq(mode)).a;
            let id = DMatrix::<f64>::identity(nvar, nvar);
            let inv = (&id - &a * h).try_inverse().ok_or(Error::SingularSolve { mode })?;
            let row_major = |m: &DMatrix<f64>| -> Vec<f64> {
                (0..nvar)
                    .flat_map(|r| (0..nvar).map(move |c| (r, c)))
                    .map(|(r, c)| m[(r, c)])
                    .collect()
            };
            if scheme == Scheme::Imex2 {
                propagate.push(row_major(&(&inv * (&id + &a * h))));
            }
            solve.push(row_major(&inv));
        }
        Ok(Self {
            model: model.clone(),
            grid: grid.clone(),
            dt,
            scheme,
            nvar,
            solve,
            propagate,
            linear_only: false,
        })
    }

    /// Drops the nonlinear terms, leaving the pure linear propagator.
    pub fn linear_only(mut self) -> Self {
        self.linear_only = true;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn spectra(&self, state: &State) -> Vec<Spectrum> {
        state.fields().iter().map(|f| f.spectrum().dealias()).collect()
    }

    fn to_state(&self, mut u: Vec<Spectrum>, t: f64) -> State {
        let ns = self.model.species();
        // roundoff hygiene: m has zero mean
        u[ns + 1].coeffs[0] = Complex64::default();
        let mut fields: Vec<_> = u.iter().map(|s| s.to_field()).collect();
        let m = fields.pop().expect("m field");
        let theta = fields.pop().expect("theta field");
        State { n: fields, theta, m, t }
    }

    /// `(R_n, R_theta / a, R_m)` in spectral form.
    fn forcing(&self, state: &State) -> Result<Vec<Spectrum>> {
        if self.linear_only {
            return Ok((0..self.nvar).map(|_| Spectrum::zeros(&self.grid)).collect());
        }
        let c = &self.model.coeffs;
        let phi = spectral::inv_neg_laplacian(&state.m.map({
            let mean = state.m.mean();
            move |v| v - mean
        }))?
        .scale(1.0 / c.eps);
        let force = spectral::grad(&phi).mul_scalar(&state.m).dealias();
        let u0 = solvent_velocity(&force, c.lambda0)?;
        let r = nonlinear_terms(state, &phi, &u0, &self.model)?;
        let mut out: Vec<Spectrum> = r.r_n.iter().map(|f| f.spectrum()).collect();
        out.push(r.r_theta.scale(1.0 / self.model.derived.a).spectrum());
        out.push(r.r_m.spectrum());
        Ok(out)
    }

    fn combine(&self, mats: &[Vec<f64>], parts: &[(&[Spectrum], f64)]) -> Vec<Spectrum> {
        let mut out: Vec<Spectrum> = (0..self.nvar).map(|_| Spectrum::zeros(&self.grid)).collect();
        let mut x = vec![Complex64::default(); self.nvar];
        for mode in 0..self.grid.len() {
            if !self.grid.is_resolved(mode) {
                continue;
            }
            for v in 0..self.nvar {
                x[v] = parts.iter().map(|(s, w)| s[v].coeffs[mode] * *w).sum();
            }
            let y = apply(&mats[mode], self.nvar, &x);
            for v in 0..self.nvar {
                out[v].coeffs[mode] = y[v];
            }
        }
        out
    }

    /// Advances `state` by one step of length `dt`.
    pub fn step(&self, state: &State) -> Result<State> {
        let dt = self.dt;
        let u = self.spectra(state);
        let f0 = self.forcing(state)?;
        match self.scheme {
            Scheme::Imex1 => Ok(self.to_state(self.combine(&self.solve, &[(&u, 1.0), (&f0, dt)]), state.t + dt)),
            Scheme::Imex2 => {
                let half = self.to_state(
                    self.combine(&self.solve, &[(&u, 1.0), (&f0, 0.5 * dt)]),
                    state.t + 0.5 * dt,
                );
                let f_half = self.forcing(&half)?;
                let a = self.combine(&self.propagate, &[(&u, 1.0)]);
                let b = self.combine(&self.solve, &[(&f_half, dt)]);
                let sum: Vec<Spectrum> = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| Spectrum {
                        grid: x.grid.clone(),
                        coeffs: x.coeffs.iter().zip(&y.coeffs).map(|(p, q)| p + q).collect(),
                    })
                    .collect();
                Ok(self.to_state(sum, state.t + dt))
            }
        }
    }
}

/// One step without a cached stepper.
pub fn step(state: &State, dt: f64, model: &Model, scheme: Scheme) -> Result<State> {
    Stepper::new(model, state.grid(), dt, scheme)?.step(state)
}
