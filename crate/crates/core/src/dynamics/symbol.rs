//! Per-wavenumber matrix of the linearized dynamics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Model;

/// Linearized dynamics `d_t U = A U` at one `|xi|^2`, on `U = (n_1..n_N, theta, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSymbol {
    pub xi_sq: f64,
    pub a: DMatrix<f64>,
}

/// Assembles `A(|xi|^2)`, eliminating the potential through `phi_hat = m_hat / (eps |xi|^2)`.
pub fn linear_symbol(model: &Model, xi_sq: f64) -> LinearSymbol {
    let c = &model.coeffs;
    let delta = &model.eq.delta;
    let n = c.species();
    let (th, m) = (n, n + 1);
    let kb = c.k_b;
    let eps = c.eps;
    let a_cap = model.derived.a;
    let b = model.derived.b;
    let nu = model.derived.nu_harm;
    let q = xi_sq;

    let mut a = DMatrix::zeros(n + 2, n + 2);
    for i in 0..n {
        a[(i, i)] = -kb / c.nu[i] * q;
        a[(i, th)] = -kb * delta[i] / c.nu[i] * q;
        a[(i, m)] = -c.z[i] * delta[i] / (eps * c.nu[i]);
    }
    a[(th, th)] = -b / a_cap * q;
    for i in 0..n {
        a[(th, i)] = -kb * kb / (c.nu[i] * a_cap) * q;
    }
    a[(th, m)] = -(0..n).map(|i| kb * c.z[i] * delta[i] / (eps * c.nu[i])).sum::<f64>() / a_cap;

    a[(m, m)] = -kb / nu * q - model.charge_damping() / eps;
    for i in 0..n {
        a[(m, i)] = -kb * (1.0 / c.nu[i] - 1.0 / nu) * c.z[i] * q;
    }
    a[(m, th)] = -kb * model.weighted_charge() * q;
    LinearSymbol { xi_sq, a }
}

impl LinearSymbol {
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        // the QR iteration can stall on this structured matrix; reversing the index order is
        // a similarity transform that usually breaks the symmetry
        let n = self.a.nrows();
        let schur = self.a.clone().try_schur(f64::EPSILON, 10_000).or_else(|| {
            let flipped = DMatrix::from_fn(n, n, |i, j| self.a[(n - 1 - i, n - 1 - j)]);
            flipped.try_schur(f64::EPSILON, 10_000)
        });
        let ev = schur.ok_or(Error::Eigen { xi_sq: self.xi_sq })?.complex_eigenvalues();
        let out: Vec<Complex64> = ev.iter().map(|z| Complex64::new(z.re, z.im)).collect();
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Eigen { xi_sq: self.xi_sq });
        }
        Ok(out)
    }
}

/// `0` followed by `points - 1` log-spaced values in `[min, max]`.
pub fn default_xi_grid(points: usize, min: f64, max: f64) -> Vec<f64> {
    if points == 0 {
        return vec![];
    }
    let mut out = vec![0.0];
    let k = points - 1;
    for j in 0..k {
        let s = if k == 1 { 0.0 } else { j as f64 / (k - 1) as f64 };
        out.push((min.ln() + s * (max.ln() - min.ln())).exp());
    }
    out
}

/// Result of [`spectral_stability_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub max_re: f64,
    pub at_xi_sq: f64,
    /// Eigenvalues per scanned `|xi|^2`, sorted by real part, descending.
    pub rows: Vec<(f64, Vec<Complex64>)>,
}

/// Largest real part of the symbol's spectrum over `xi_grid`.
pub fn spectral_stability_scan(model: &Model, xi_grid: &[f64]) -> Result<ScanReport> {
    if xi_grid.is_empty() {
        return Err(Error::validation("empty |xi|^2 grid"));
    }
    let mut rows = Vec::with_capacity(xi_grid.len());
    let mut max_re = f64::NEG_INFINITY;
    let mut at = xi_grid[0];
    for &q in xi_grid {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::validation(format!("|xi|^2 = {q} must be nonnegative")));
        }
        let mut ev = linear_symbol(model, q).eigenvalues()?;
        ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
        if ev[0].re > max_re {
            max_re = ev[0].re;
            at = q;
        }
        rows.push((q, ev));
    }
    Ok(ScanReport {
        max_re,
        at_xi_sq: at,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhysicalCoefficients;

    fn model(nu: [f64; 2], d: f64) -> Model {
        let mut c = PhysicalCoefficients::unit_binary();
        c.nu = nu.to_vec();
        Model::new(c, vec![d, d]).unwrap()
    }

    #[test]
    fn zero_wavenumber_spectrum() {
        let m = model([1.0, 2.0], 0.3);
        let mut ev = linear_symbol(&m, 0.0).eigenvalues().unwrap();
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        let damping = -m.charge_damping() / m.coeffs.eps;
        assert!((ev[0].re - damping).abs() < 1e-12);
        for z in &ev[1..] {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn equal_viscosity_decouples_m_row() {
        let m = model([1.5, 1.5], 0.3);
        let s = linear_symbol(&m, 3.0);
        assert_eq!(s.a[(3, 0)], 0.0);
        assert_eq!(s.a[(3, 1)], 0.0);
    }

    #[test]
    fn large_wavenumber_limit() {
        let m = model([1.0, 2.0], 0.3);
        let q = 1e8;
        let s = linear_symbol(&m, q);
        let scaled = &s.a / q;
        let nu = m.derived.nu_harm;
        assert!((scaled[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((scaled[(1, 1)] + 0.5).abs() < 1e-12);
        assert!((scaled[(2, 2)] + m.derived.b / m.derived.a).abs() < 1e-12);
        assert!((scaled[(3, 3)] + 1.0 / nu).abs() < 1e-7);
        // zeroth-order columns vanish in the limit
        assert!(scaled[(0, 3)].abs() < 1e-7);
    }

    #[test]
    fn charge_direction_is_left_eigenvector() {
        let m = model([1.0, 2.0], 0.3);
        for q in [0.0, 0.7, 30.0] {
            let s = linear_symbol(&m, q);
            let v = nalgebra::DVector::from_vec(vec![-1.0, 1.0, 0.0, -1.0]);
            let lhs = s.a.transpose() * &v;
            let rhs = &v * (-m.coeffs.k_b / m.derived.nu_harm * q);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn xi_grid_shape() {
        let g = default_xi_grid(200, 1e-4, 1e4);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-4).abs() < 1e-18);
        assert!((g[199] - 1e4).abs() < 1e-8);
        assert!(default_xi_grid(0, 1e-4, 1e4).is_empty());
    }

    #[test]
    fn vanishing_damping_limit() {
        let mut prev = f64::NEG_INFINITY;
        for d in [1e-1, 1e-3, 1e-6] {
            let m = model([1.0, 1.0], d);
            let r = spectral_stability_scan(&m, &default_xi_grid(50, 1e-4, 1e4)).unwrap();
            assert!(r.max_re <= 1e-12);
            assert!(r.max_re >= prev - 1e-12);
            prev = r.max_re;
        }
    }
    #[test]
    fn stalled_qr_iteration_recovers() {
        // plain Schur iteration does not converge on this one
        let m = model([1.0, 1.0], 0.6427052410103025);
        let s = linear_symbol(&m, 0.0739072203352579);
        assert!(s.a.clone().try_schur(f64::EPSILON, 10_000).is_none());
        let ev = s.eigenvalues().unwrap();
        let trace: f64 = (0..4).map(|i| s.a[(i, i)]).sum();
        let sum: f64 = ev.iter().map(|z| z.re).sum();
        assert!((sum - trace).abs() < 1e-12);
        assert!(ev.iter().map(|z| z.im).sum::<f64>().abs() < 1e-12);
        let det: Complex64 = ev.iter().product();
        assert!((det.re - s.a.determinant()).abs() < 1e-12 * s.a.determinant().abs());
    }
}
