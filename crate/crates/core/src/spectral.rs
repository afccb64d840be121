//! Pseudo-spectral operators on the periodic box `[0, L)^dim`.
//!
//! Fields are stored as real samples on a uniform grid, row-major with axis 0 slowest.
//! Spectral coefficients use the normalization `f_hat(k) = M^-dim sum_x f(x) e^{-i k x}`,
//! so that `int |f|^2 = L^dim sum_k |f_hat(k)|^2`.
//!
//! The Nyquist wavenumber is treated as zero by every derivative, and every operator
//! output has its Nyquist modes cleared; this keeps derivatives of real fields real.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance for the zero-mean precondition of the Poisson solve.
pub const MEAN_RTOL: f64 = 1e-10;
/// Means below this are roundoff whatever the field's size.
pub const MEAN_ATOL: f64 = 1e-14;

struct GridInner {
    dim: usize,
    m: usize,
    l: f64,
    /// Per-mode wavevector, Nyquist components set to zero.
    xi: Vec<[f64; 3]>,
    xi_sq: Vec<f64>,
    /// Mode touches a Nyquist index on some axis.
    nyquist: Vec<bool>,
    /// Mode survives 2/3 truncation (and is not Nyquist).
    keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    sobolev: Mutex<HashMap<u32, Arc<Vec<f64>>>>,
}

/// Uniform periodic grid with `M` points per axis on a box of side `L`.
///
/// Cloning is cheap; wavenumbers, masks and FFT plans are shared.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.0.dim)
            .field("m", &self.0.m)
            .field("l", &self.0.l)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.dim() == other.dim() && self.m() == other.m() && self.l() == other.l())
    }
}

/// Signed integer wavenumber of index `j` on an axis of `m` points.
pub fn signed_index(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

impl Grid {
    pub fn new(dim: usize, m: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::validation(format!("dim = {dim} must be 1, 2 or 3")));
        }
        if m < 8 || m % 2 != 0 {
            return Err(Error::validation(format!("M = {m} must be even and at least 8")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::validation(format!("L = {l} must be positive")));
        }
        let total = m.pow(dim as u32);
        let base = 2.0 * std::f64::consts::PI / l;
        let cutoff = (m as f64 / 3.0).floor() as i64;
        let mut xi = Vec::with_capacity(total);
        let mut xi_sq = Vec::with_capacity(total);
        let mut nyquist = Vec::with_capacity(total);
        let mut keep = Vec::with_capacity(total);
        for idx in 0..total {
            let mut v = [0.0; 3];
            let mut nyq = false;
            let mut k = true;
            let mut rest = idx;
            for axis in (0..dim).rev() {
                let j = rest % m;
                rest /= m;
                let s = signed_index(j, m);
                if j == m / 2 {
                    nyq = true;
                } else {
                    v[axis] = base * s as f64;
                }
                if s.abs() > cutoff {
                    k = false;
                }
            }
            xi_sq.push(v.iter().map(|x| x * x).sum());
            xi.push(v);
            nyquist.push(nyq);
            keep.push(k && !nyq);
        }
        let mut planner = FftPlanner::new();
        Ok(Grid(Arc::new(GridInner {
            dim,
            m,
            l,
            xi,
            xi_sq,
            nyquist,
            keep,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            sobolev: Mutex::new(HashMap::new()),
        })))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }
    pub fn m(&self) -> usize {
        self.0.m
    }
    pub fn l(&self) -> f64 {
        self.0.l
    }
    /// Number of grid points, `M^dim`.
    pub fn len(&self) -> usize {
        self.0.xi.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn spacing(&self) -> f64 {
        self.0.l / self.0.m as f64
    }
    /// Quadrature weight `(L/M)^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.0.dim as i32)
    }
    pub fn volume(&self) -> f64 {
        self.0.l.powi(self.0.dim as i32)
    }
    pub fn xi(&self, mode: usize) -> [f64; 3] {
        self.0.xi[mode]
    }
    pub fn xi_sq(&self, mode: usize) -> f64 {
        self.0.xi_sq[mode]
    }
    pub fn xi_sq_all(&self) -> &[f64] {
        &self.0.xi_sq
    }
    pub fn is_nyquist(&self, mode: usize) -> bool {
        self.0.nyquist[mode]
    }
    /// Mode survives the 2/3 truncation.
    pub fn is_resolved(&self, mode: usize) -> bool {
        self.0.keep[mode]
    }

    /// Integer wavenumbers of a mode.
    pub fn wavenumber(&self, mode: usize) -> [i64; 3] {
        let m = self.0.m;
        let mut k = [0; 3];
        let mut rest = mode;
        for axis in (0..self.0.dim).rev() {
            k[axis] = signed_index(rest % m, m);
            rest /= m;
        }
        k
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.0.m;
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rest = idx;
        for axis in (0..self.0.dim).rev() {
            x[axis] = (rest % m) as f64 * h;
            rest /= m;
        }
        x
    }

    fn fft(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.0.m;
        let dim = self.0.dim;
        let plan = if inverse { &self.0.inverse } else { &self.0.forward };
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        if dim == 1 {
            plan.process_with_scratch(data, &mut scratch);
            return;
        }
        let mut line = vec![Complex64::default(); m];
        let total = data.len();
        for axis in 0..dim {
            let stride = m.pow((dim - 1 - axis) as u32);
            for start in 0..total {
                // first element of each line: index digit on `axis` is zero
                if (start / stride) % m != 0 {
                    continue;
                }
                for j in 0..m {
                    line[j] = data[start + j * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..m {
                    data[start + j * stride] = line[j];
                }
            }
        }
    }

    /// Normalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.fft(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Inverse transform; the imaginary part (roundoff for Hermitian input) is dropped.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft(&mut data, true);
        data.iter().map(|c| c.re).collect()
    }

    /// `w_s(xi) = sum_{|alpha| <= s} prod_j xi_j^(2 alpha_j)` per mode.
    pub fn sobolev_weights(&self, s: u32) -> Arc<Vec<f64>> {
        let mut cache = self.0.sobolev.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(s)
            .or_insert_with(|| {
                let alphas = multi_indices(self.0.dim, s);
                Arc::new(
                    self.0
                        .xi
                        .iter()
                        .map(|xi| {
                            alphas
                                .iter()
                                .map(|a| {
                                    a.iter()
                                        .enumerate()
                                        .map(|(j, p)| xi[j].powi(2 * *p as i32))
                                        .product::<f64>()
                                })
                                .sum()
                        })
                        .collect(),
                )
            })
            .clone()
    }
}

/// All multi-indices `alpha` in `dim` variables with `|alpha| <= s`.
pub fn multi_indices(dim: usize, s: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for a in &out {
            let used: u32 = a.iter().sum();
            for p in 0..=(s - used) {
                let mut b = a.clone();
                b.push(p);
                next.push(b);
            }
        }
        out = next;
    }
    out
}

/// Real samples of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Spectral coefficients of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

/// `dim` scalar components on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<ScalarField>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self {
            grid: grid.clone(),
            values: (0..grid.len()).map(|i| f(grid.point(i))).collect(),
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            coeffs: self.grid.forward(&self.values),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `||f||_{L^2}^2` by grid quadrature.
    pub fn norm_sq(&self) -> f64 {
        inner_product(self, self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) {
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
    }

    /// Pointwise product, not dealiased.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Spectrum {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.grid.inverse(&self.coeffs),
        }
    }

    fn map_modes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        let g = &self.grid;
        Self {
            grid: g.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    if g.is_nyquist(k) {
                        Complex64::default()
                    } else {
                        f(k, *c)
                    }
                })
                .collect(),
        }
    }

    /// Spectral derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let g = self.grid.clone();
        self.map_modes(|k, c| c * Complex64::new(0.0, g.xi(k)[axis]))
    }

    pub fn laplacian(&self) -> Self {
        let g = self.grid.clone();
        self.map_modes(|k, c| -c * g.xi_sq(k))
    }

    pub fn dealias(&self) -> Self {
        let g = self.grid.clone();
        Self {
            grid: g.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| if g.is_resolved(k) { *c } else { Complex64::default() })
                .collect(),
        }
    }

    /// `L^dim sum_k w(k) |f_hat(k)|^2`.
    pub fn weighted_norm_sq(&self, weight: impl Fn(usize) -> f64) -> f64 {
        self.grid.volume()
            * self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| weight(k) * c.norm_sqr())
                .sum::<f64>()
    }

    /// `||(-Delta)^(p/2) f||_{H^s}^2` (Nyquist modes excluded for `p > 0`).
    pub fn sobolev_norm_sq(&self, s: u32, p: i32) -> f64 {
        let w = self.grid.sobolev_weights(s);
        let g = &self.grid;
        self.weighted_norm_sq(|k| {
            if p == 0 {
                w[k]
            } else if g.is_nyquist(k) {
                0.0
            } else {
                w[k] * g.xi_sq(k).powi(p)
            }
        })
    }
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let grid = components
            .first()
            .map(|c| c.grid.clone())
            .ok_or_else(|| Error::validation("empty vector field"))?;
        if components.len() != grid.dim() {
            return Err(Error::validation(format!(
                "{} components on a {}-d grid",
                components.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, components })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components.iter().map(|f| f.scale(c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// Each component multiplied pointwise by `f`.
    pub fn mul_scalar(&self, f: &ScalarField) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components.iter().map(|c| c.mul(f)).collect(),
        }
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut out = ScalarField::zeros(&self.grid);
        for (a, b) in self.components.iter().zip(&other.components) {
            out.values
                .iter_mut()
                .zip(a.values.iter().zip(&b.values))
                .for_each(|(o, (x, y))| *o += x * y);
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sq()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.mean()).collect()
    }

    pub fn dealias(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components.iter().map(dealias).collect(),
        }
    }
}

/// `<f, g>` by grid quadrature, `(L/M)^dim sum f g`.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> f64 {
    f.grid.cell_volume() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>()
}

/// `<v, w>` summed over components.
pub fn inner_product_vec(v: &VectorField, w: &VectorField) -> f64 {
    v.components
        .iter()
        .zip(&w.components)
        .map(|(a, b)| inner_product(a, b))
        .sum()
}

pub fn grad(f: &ScalarField) -> VectorField {
    let s = f.spectrum();
    grad_spectrum(&s)
}

pub(crate) fn grad_spectrum(s: &Spectrum) -> VectorField {
    VectorField {
        grid: s.grid.clone(),
        components: (0..s.grid.dim()).map(|a| s.derivative(a).to_field()).collect(),
    }
}

pub fn div(v: &VectorField) -> ScalarField {
    let g = &v.grid;
    let mut acc = Spectrum::zeros(g);
    for (axis, c) in v.components.iter().enumerate() {
        let d = c.spectrum().derivative(axis);
        acc.coeffs.iter_mut().zip(&d.coeffs).for_each(|(a, b)| *a += b);
    }
    acc.to_field()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    f.spectrum().laplacian().to_field()
}

/// Solves `-Delta g = f` with `mean(g) = 0`. Fails if `f` has nonzero mean.
pub fn inv_neg_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let mean = f.mean();
    let rms = f.rms();
    if mean.abs() > MEAN_RTOL * rms + MEAN_ATOL {
        return Err(Error::NonZeroMean { mean, rms });
    }
    Ok(inv_neg_laplacian_spectrum(&f.spectrum()).to_field())
}

/// Divides by `|xi|^2`, clearing the zero mode; no mean check.
pub(crate) fn inv_neg_laplacian_spectrum(s: &Spectrum) -> Spectrum {
    let g = s.grid.clone();
    s.map_modes(|k, c| {
        let q = g.xi_sq(k);
        if q == 0.0 {
            Complex64::default()
        } else {
            c / q
        }
    })
}

/// Leray projection `(I - xi xi^T / |xi|^2) v_hat`; the mean passes through.
pub fn leray_project(v: &VectorField) -> VectorField {
    let g = &v.grid;
    let specs: Vec<Spectrum> = v.components.iter().map(|c| c.spectrum()).collect();
    let dim = g.dim();
    let mut out: Vec<Spectrum> = (0..dim).map(|_| Spectrum::zeros(g)).collect();
    for k in 0..g.len() {
        if g.is_nyquist(k) {
            continue;
        }
        let xi = g.xi(k);
        let q = g.xi_sq(k);
        if q == 0.0 {
            for a in 0..dim {
                out[a].coeffs[k] = specs[a].coeffs[k];
            }
            continue;
        }
        let dot: Complex64 = (0..dim).map(|a| specs[a].coeffs[k] * xi[a]).sum();
        for a in 0..dim {
            out[a].coeffs[k] = specs[a].coeffs[k] - dot * (xi[a] / q);
        }
    }
    VectorField {
        grid: g.clone(),
        components: out.iter().map(|s| s.to_field()).collect(),
    }
}

/// Clears every mode with some `|k_j| > M/3`, and the Nyquist modes.
pub fn dealias(f: &ScalarField) -> ScalarField {
    f.spectrum().dealias().to_field()
}

/// `sum_{|alpha| <= s} ||d^alpha f||_{L^2}^2`.
pub fn sobolev_norm_sq(f: &ScalarField, s: u32) -> f64 {
    f.spectrum().sobolev_norm_sq(s, 0)
}

/// Writes a snapshot: a header line `dim,M,L,field,t` then one sample per line, row-major.
pub fn write_snapshot(path: &Path, field: &ScalarField, name: &str, t: f64) -> Result<()> {
    let g = &field.grid;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "dim,M,L,field,t")?;
    writeln!(w, "{},{},{:.16e},{},{:.16e}", g.dim(), g.m(), g.l(), name, t)?;
    for v in &field.values {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]; returns the field, its name and time.
pub fn read_snapshot(path: &Path) -> Result<(ScalarField, String, f64)> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let bad = |m: &str| Error::validation(format!("snapshot {}: {m}", path.display()));
    lines.next().ok_or_else(|| bad("missing header"))??;
    let meta = lines.next().ok_or_else(|| bad("missing metadata"))??;
    let parts: Vec<&str> = meta.split(',').collect();
    if parts.len() != 5 {
        return Err(bad("malformed metadata"));
    }
    let dim: usize = parts[0].parse().map_err(|_| bad("bad dim"))?;
    let m: usize = parts[1].parse().map_err(|_| bad("bad M"))?;
    let l: f64 = parts[2].parse().map_err(|_| bad("bad L"))?;
    let t: f64 = parts[4].parse().map_err(|_| bad("bad t"))?;
    let grid = Grid::new(dim, m, l)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(line.trim().parse::<f64>().map_err(|_| bad("bad sample"))?);
    }
    Ok((ScalarField::from_values(&grid, values)?, parts[3].to_string(), t))
}

/// Random real field with modes `0 < |k|_inf <= kmax` only, zero mean, unit-ish amplitude.
/// Used by tests and the initial-data generator.
pub fn random_band_limited(grid: &Grid, kmax: i64, rng: &mut impl rand::Rng) -> ScalarField {
    let mut spec = Spectrum::zeros(grid);
    for k in 0..grid.len() {
        let w = grid.wavenumber(k);
        let inf = w.iter().map(|x| x.abs()).max().unwrap_or(0);
        if inf == 0 || inf > kmax || grid.is_nyquist(k) {
            continue;
        }
        spec.coeffs[k] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    // symmetrize so the field is real
    let mut sym = spec.clone();
    for k in 0..grid.len() {
        let w = grid.wavenumber(k);
        let mut idx = 0usize;
        for &wa in w.iter().take(grid.dim()) {
            idx = idx * grid.m() + (-wa).rem_euclid(grid.m() as i64) as usize;
        }
        sym.coeffs[k] = 0.5 * (spec.coeffs[k] + spec.coeffs[idx].conj());
    }
    sym.to_field()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        a / b.max(1e-300)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0, 16, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 6, 1.0).is_err());
        assert!(Grid::new(1, 9, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
        assert_eq!(Grid::new(3, 8, 1.0).unwrap().len(), 512);
    }

    #[test]
    fn multi_index_count() {
        // binomial(s + d, d)
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 3).len(), 20);
        assert_eq!(multi_indices(3, 0).len(), 1);
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (d, m) in [(1, 32), (2, 16), (3, 8)] {
            let g = Grid::new(d, m, 3.0).unwrap();
            let f = ScalarField::from_values(&g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let back = f.spectrum().to_field();
            assert!(rel(back.sub(&f).norm(), f.norm()) < 1e-13);
        }
    }

    #[test]
    fn parseval() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ScalarField::from_values(&g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        assert!((sobolev_norm_sq(&f, 0) - f.norm_sq()).abs() < 1e-12 * f.norm_sq());
    }

    #[test]
    fn inverse_laplacian_single_mode() {
        let l = 3.0;
        let g = Grid::new(1, 32, l).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0] / l).cos());
        let u = inv_neg_laplacian(&f).unwrap();
        let expect = f.scale((l / (2.0 * PI)).powi(2));
        assert!(u.sub(&expect).max_abs() < 1e-14);
        assert_eq!(inv_neg_laplacian(&ScalarField::zeros(&g)).unwrap().max_abs(), 0.0);
        assert!(matches!(
            inv_neg_laplacian(&ScalarField::constant(&g, 1.0)),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn laplacian_and_sobolev_of_sine() {
        let l = 2.0;
        let g = Grid::new(1, 32, l).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0] / l).sin());
        let lap = laplacian(&f);
        assert!(lap.add(&f.scale((2.0 * PI / l).powi(2))).max_abs() < 1e-12);
        let expect = l / 2.0 * (1.0 + (2.0 * PI / l).powi(2));
        assert!((sobolev_norm_sq(&f, 1) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn constant_field_norms() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let f = ScalarField::constant(&g, 2.0);
        for s in 0..4 {
            assert!((sobolev_norm_sq(&f, s) - 4.0 * 1.5f64.powi(2)).abs() < 1e-12);
        }
        assert!(grad(&f).max_abs() < 1e-15);
    }

    #[test]
    fn sobolev_matches_repeated_derivatives() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_band_limited(&g, 5, &mut rng);
        let s = 3;
        let mut oracle = 0.0;
        for alpha in multi_indices(2, s) {
            let mut d = f.clone();
            for (axis, p) in alpha.iter().enumerate() {
                for _ in 0..*p {
                    d = grad(&d).components[axis].clone();
                }
            }
            oracle += d.norm_sq();
        }
        let got = sobolev_norm_sq(&f, s);
        assert!((got - oracle).abs() < 1e-11 * oracle, "{got} vs {oracle}");
        let mut prev = 0.0;
        for s in 0..5 {
            let v = sobolev_norm_sq(&f, s);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn dealias_properties() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        // cutoff M/3 = 5
        let low = ScalarField::from_fn(&g, |x| (2.0 * PI * 3.0 * x[0]).cos());
        assert!(dealias(&low).sub(&low).max_abs() < 1e-14);
        let high = ScalarField::from_fn(&g, |x| (2.0 * PI * 6.0 * x[0]).cos());
        assert!(dealias(&high).max_abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = ScalarField::from_values(&g, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let once = dealias(&f);
        assert!(dealias(&once).sub(&once).max_abs() < 1e-14);
    }

    #[test]
    fn dealiased_product_matches_convolution() {
        let m = 24;
        let g = Grid::new(1, m, 1.0).unwrap();
        // two resolved single modes (cutoff 8), product aliases without truncation
        let (p, q) = (5i64, 7i64);
        let a = ScalarField::from_fn(&g, |x| (2.0 * PI * p as f64 * x[0]).cos());
        let b = ScalarField::from_fn(&g, |x| (2.0 * PI * q as f64 * x[0]).cos());
        let got = dealias(&a.mul(&b)).spectrum();
        // direct convolution of the exact coefficients: 1/4 at +-(p+q) and +-(p-q)
        let mut expect = vec![Complex64::default(); m];
        for s1 in [p, -p] {
            for s2 in [q, -q] {
                let k = s1 + s2;
                if k.abs() <= (m as i64) / 3 {
                    expect[k.rem_euclid(m as i64) as usize] += 0.25;
                }
            }
        }
        for k in 0..m {
            assert!((got.coeffs[k] - expect[k]).norm() < 1e-14, "mode {k}");
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::new(2, 8, 1.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_band_limited(&g, 2, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        write_snapshot(&path, &f, "theta", 0.5).unwrap();
        let (back, name, t) = read_snapshot(&path).unwrap();
        assert_eq!(name, "theta");
        assert_eq!(t, 0.5);
        assert_eq!(back.values, f.values);
    }

    #[test]
    fn band_limited_is_real_and_zero_mean() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_band_limited(&g, 2, &mut rng);
        assert!(f.mean().abs() < 1e-15);
        let s = f.spectrum();
        for k in 0..g.len() {
            if !g.is_resolved(k) {
                assert!(s.coeffs[k].norm() < 1e-15);
            }
        }
        assert!(f.norm() > 0.0);
    }
}
