//! Dissipativity certificates for constant equilibria.
//!
//! A [`Certificate`] is a tuple of positive weights `chi` and splitting constants `eta`.
//! It certifies an equilibrium when the four inequalities (H1)-(H4) hold, which makes the
//! linearized energy law strictly dissipative. [`evaluate_H_conditions`] is the single
//! source of truth for that verdict; both [`construct_certificate`] and
//! [`search_certificate`] only propose candidates and then ask it.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    check_global_assumptions, derived_constants_unchecked, harmonic_mean, EquilibriumState, PhysicalCoefficients,
};

/// Positive constants witnessing (H1)-(H4).
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub chi: Vec<f64>,
    pub chi_m: f64,
    pub chi_theta: f64,
    pub chi_phi: f64,
    pub eta: Vec<f64>,
    pub eta_prime: Vec<f64>,
    pub eta_phi_i: Vec<f64>,
    pub eta_phi: f64,
    pub eta_m: f64,
    pub eta_m_prime: f64,
    pub eta_theta: f64,
    pub eta_theta_prime: f64,
}

impl Certificate {
    /// Checks lengths against `n` species and strict positivity of every field.
    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [
            ("chi", &self.chi),
            ("eta", &self.eta),
            ("eta_prime", &self.eta_prime),
            ("eta_phi_i", &self.eta_phi_i),
        ] {
            if v.len() != n {
                return Err(Error::validation(format!(
                    "certificate field {name} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x > 0.0) || !x.is_finite()) {
                return Err(Error::validation(format!(
                    "certificate field {name}[{i}] = {x} is not positive"
                )));
            }
        }
        for (name, x) in self.scalars() {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::validation(format!(
                    "certificate field {name} = {x} is not positive"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn scalars(&self) -> [(&'static str, f64); 8] {
        [
            ("chi_m", self.chi_m),
            ("chi_theta", self.chi_theta),
            ("chi_phi", self.chi_phi),
            ("eta_phi", self.eta_phi),
            ("eta_m", self.eta_m),
            ("eta_m_prime", self.eta_m_prime),
            ("eta_theta", self.eta_theta),
            ("eta_theta_prime", self.eta_theta_prime),
        ]
    }

    /// Multiplies every `chi` weight by `factor`, leaving the `eta`s alone.
    pub fn scale_weights(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.chi.iter_mut().for_each(|c| *c *= factor);
        out.chi_m *= factor;
        out.chi_theta *= factor;
        out.chi_phi *= factor;
        out
    }

    // Flat parameter vector used by the search.
    fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend(&self.chi);
        p.extend(&self.eta);
        p.extend(&self.eta_prime);
        p.extend(&self.eta_phi_i);
        p.extend([
            self.chi_m,
            self.chi_theta,
            self.chi_phi,
            self.eta_phi,
            self.eta_m,
            self.eta_m_prime,
            self.eta_theta,
            self.eta_theta_prime,
        ]);
        p
    }

    fn from_params(n: usize, p: &[f64]) -> Self {
        let v = |k: usize| p[k * n..(k + 1) * n].to_vec();
        let s = &p[4 * n..];
        Self {
            chi: v(0),
            eta: v(1),
            eta_prime: v(2),
            eta_phi_i: v(3),
            chi_m: s[0],
            chi_theta: s[1],
            chi_phi: s[2],
            eta_phi: s[3],
            eta_m: s[4],
            eta_m_prime: s[5],
            eta_theta: s[6],
            eta_theta_prime: s[7],
        }
    }
}

/// One inequality `positive - sum(negatives) > 0`, kept as its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub absolute: f64,
    /// `absolute` divided by the largest single term in magnitude.
    pub normalized: f64,
}

impl Margin {
    fn from_terms(positive: f64, negatives: &[f64]) -> Self {
        let absolute = positive - negatives.iter().sum::<f64>();
        let scale = negatives.iter().fold(positive.abs(), |m, t| m.max(t.abs()));
        let normalized = if scale > 0.0 { absolute / scale } else { absolute };
        Self { absolute, normalized }
    }
}

/// Margins of (H1)-(H4) for one certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub h1: Margin,
    pub h2: Margin,
    pub h3: Margin,
    pub h4: Vec<Margin>,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub fn h1_margin(&self) -> f64 {
        self.h1.absolute
    }
    pub fn h2_margin(&self) -> f64 {
        self.h2.absolute
    }
    pub fn h3_margin(&self) -> f64 {
        self.h3.absolute
    }
    pub fn h4_margins(&self) -> Vec<f64> {
        self.h4.iter().map(|m| m.absolute).collect()
    }

    fn all(&self) -> impl Iterator<Item = &Margin> {
        [&self.h1, &self.h2, &self.h3].into_iter().chain(self.h4.iter())
    }

    pub fn min_normalized_margin(&self) -> f64 {
        self.all().map(|m| m.normalized).fold(f64::INFINITY, f64::min)
    }

    /// Name of the first failing condition, if any.
    pub fn first_violation(&self) -> Option<String> {
        if self.h1.absolute <= 0.0 {
            return Some("H1".into());
        }
        if self.h2.absolute <= 0.0 {
            return Some("H2".into());
        }
        if self.h3.absolute <= 0.0 {
            return Some("H3".into());
        }
        self.h4
            .iter()
            .position(|m| m.absolute <= 0.0)
            .map(|i| format!("H4[{i}]"))
    }

    pub fn summary(&self) -> String {
        let h4: Vec<String> = self.h4.iter().map(|m| format!("{:e}", m.absolute)).collect();
        format!(
            "H1 {:e}, H2 {:e}, H3 {:e}, H4 [{}]{}",
            self.h1.absolute,
            self.h2.absolute,
            self.h3.absolute,
            h4.join(", "),
            match self.first_violation() {
                Some(v) => format!("; first violation {v}"),
                None => String::new(),
            }
        )
    }
}

// Sums that recur in every condition.
struct Sums {
    nu_harm: f64,
    b: f64,
    /// sum z_i delta_i / nu_i
    s1: f64,
    /// sum z_i^2 delta_i / nu_i
    s2: f64,
}

fn sums(coeffs: &PhysicalCoefficients, delta: &[f64]) -> Sums {
    let d = derived_constants_unchecked(coeffs, delta);
    let n = coeffs.species();
    Sums {
        nu_harm: d.nu_harm,
        b: d.b,
        s1: (0..n).map(|i| coeffs.z[i] * delta[i] / coeffs.nu[i]).sum(),
        s2: (0..n).map(|i| coeffs.z[i].powi(2) * delta[i] / coeffs.nu[i]).sum(),
    }
}

fn check_inputs(coeffs: &PhysicalCoefficients, eq: &EquilibriumState) -> Result<()> {
    coeffs.validate()?;
    EquilibriumState::new(coeffs, eq.delta.clone())?;
    Ok(())
}

// Terms of each inequality with chi_m factored out, so the construction can solve for it.
struct Terms {
    h1_pos: f64,
    h1_neg: Vec<f64>,
    h1_chi_m: f64,
    h3_pos: f64,
    h3_neg: Vec<f64>,
    h4_pos: Vec<f64>,
    h4_neg: Vec<Vec<f64>>,
    h4_chi_m: Vec<f64>,
}

fn terms(coeffs: &PhysicalCoefficients, delta: &[f64], c: &Certificate) -> Terms {
    let n = coeffs.species();
    let kb = coeffs.k_b;
    let s = sums(coeffs, delta);
    let nu = s.nu_harm;
    let dev = |i: usize| (1.0 / coeffs.nu[i] - 1.0 / nu).powi(2);

    let h1_pos = c.chi_theta * (1.0 - c.eta_theta - c.eta_theta_prime) * s.b;
    let h1_chi_m = kb * nu / (4.0 * c.eta_m_prime) * s.s1 * s.s1;
    let mut h1_neg = vec![c.chi_m * h1_chi_m];
    h1_neg.extend((0..n).map(|i| c.chi[i] * kb * delta[i].powi(2) / (4.0 * c.eta[i] * coeffs.nu[i])));
    h1_neg.push(c.chi_phi * kb * kb / (4.0 * c.eta_phi) * s.s1 * s.s1);

    let eta_phi_sum: f64 = c.eta_phi_i.iter().sum();
    let h3_pos = c.chi_phi * (s.s2 - eta_phi_sum - c.eta_phi);
    let mut h3_neg = vec![c.chi_theta * kb * kb / (4.0 * c.eta_theta_prime * s.b) * s.s1 * s.s1];
    h3_neg.extend(
        (0..n).map(|i| c.chi[i] * coeffs.z[i].powi(2) * delta[i].powi(2) / (4.0 * c.eta_prime[i] * kb * coeffs.nu[i])),
    );

    let mut h4_pos = Vec::with_capacity(n);
    let mut h4_neg = Vec::with_capacity(n);
    let mut h4_chi_m = Vec::with_capacity(n);
    for i in 0..n {
        let zi2 = coeffs.z[i].powi(2);
        h4_pos.push(c.chi[i] * (1.0 - c.eta[i] - c.eta_prime[i]) * kb / coeffs.nu[i]);
        let chi_m_coef = kb * nu * zi2 / (4.0 * c.eta_m) * dev(i);
        h4_chi_m.push(chi_m_coef);
        h4_neg.push(vec![
            c.chi_theta * n as f64 * kb.powi(4) / (4.0 * c.eta_theta * s.b * coeffs.nu[i]),
            c.chi_m * chi_m_coef,
            c.chi_phi * kb * kb * zi2 / (4.0 * c.eta_phi_i[i]) * dev(i),
        ]);
    }
    Terms {
        h1_pos,
        h1_neg,
        h1_chi_m,
        h3_pos,
        h3_neg,
        h4_pos,
        h4_neg,
        h4_chi_m,
    }
}

fn report_from_terms(t: &Terms, c: &Certificate) -> AdmissibilityReport {
    let h1 = Margin::from_terms(t.h1_pos, &t.h1_neg);
    let h2 = Margin::from_terms(1.0, &[c.eta_m, c.eta_m_prime]);
    let h3 = Margin::from_terms(t.h3_pos, &t.h3_neg);
    let h4: Vec<Margin> = t
        .h4_pos
        .iter()
        .zip(&t.h4_neg)
        .map(|(p, n)| Margin::from_terms(*p, n))
        .collect();
    let admissible = h1.absolute > 0.0 && h2.absolute > 0.0 && h3.absolute > 0.0 && h4.iter().all(|m| m.absolute > 0.0);
    AdmissibilityReport {
        h1,
        h2,
        h3,
        h4,
        admissible,
    }
}

/// Evaluates (H1)-(H4) for `cert` at the equilibrium `eq`.
#[allow(non_snake_case)]
pub fn evaluate_H_conditions(
    coeffs: &PhysicalCoefficients,
    eq: &EquilibriumState,
    cert: &Certificate,
) -> Result<AdmissibilityReport> {
    check_inputs(coeffs, eq)?;
    cert.validate(coeffs.species())?;
    Ok(report_from_terms(&terms(coeffs, &eq.delta, cert), cert))
}

/// Weights of the dissipation functional.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationCoefficients {
    pub d: Vec<f64>,
    pub d_theta: f64,
    pub d_m: f64,
    pub d_m_tilde: f64,
    pub d_phi: f64,
    pub d_phi_tilde: f64,
}

/// Dissipation weights for an admissible certificate; refuses otherwise.
pub fn dissipation_coefficients(
    coeffs: &PhysicalCoefficients,
    eq: &EquilibriumState,
    cert: &Certificate,
) -> Result<DissipationCoefficients> {
    let report = evaluate_H_conditions(coeffs, eq, cert)?;
    if !report.admissible {
        return Err(Error::Inadmissible(Box::new(report)));
    }
    let s = sums(coeffs, &eq.delta);
    Ok(DissipationCoefficients {
        d: report.h4_margins(),
        d_theta: report.h1.absolute,
        d_m: cert.chi_m * (1.0 - cert.eta_m - cert.eta_m_prime) * coeffs.k_b / s.nu_harm,
        d_m_tilde: cert.chi_m / coeffs.eps * s.s2,
        d_phi: report.h3.absolute,
        d_phi_tilde: cert.chi_phi * coeffs.k_b * coeffs.eps / s.nu_harm,
    })
}

/// Why the constructive recipe did not produce a certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstructiveFailure {
    /// `delta[species]` is outside the sampling window `(lower, upper)`.
    OutsideWindow {
        species: usize,
        delta: f64,
        lower: f64,
        upper: f64,
    },
    /// No `chi_theta` satisfies the linear bounds; `binding` names the tightest upper bound.
    EmptyChiThetaInterval { lower: f64, upper: f64, binding: String },
    /// A bound for `chi_m` is not positive.
    NonpositiveChiM { bound: String, value: f64 },
    /// The assembled certificate failed the independent check.
    Rejected(Box<AdmissibilityReport>),
}

impl fmt::Display for ConstructiveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutsideWindow {
                species,
                delta,
                lower,
                upper,
            } => write!(
                f,
                "delta[{species}] = {delta:e} outside the window ({lower:e}, {upper:e})"
            ),
            Self::EmptyChiThetaInterval { lower, upper, binding } => write!(
                f,
                "empty chi_theta interval: lower bound {lower:e} >= upper bound {upper:e} ({binding})"
            ),
            Self::NonpositiveChiM { bound, value } => write!(f, "chi_m bound {bound} = {value:e} is not positive"),
            Self::Rejected(report) => write!(f, "assembled certificate rejected: {}", report.summary()),
        }
    }
}

/// Window `(lower_i, upper_i)` per species for the parameters `(kappa, eps0, lambda)`.
pub fn equilibrium_window(
    coeffs: &PhysicalCoefficients,
    kappa: f64,
    eps0: f64,
    lambda: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::validation(format!("kappa = {kappa} must be positive")));
    }
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::validation(format!("eps0 = {eps0} must lie in (0, 1)")));
    }
    if !(lambda < 1.0) || !(2.0 * lambda * eps0 > 1.0) {
        return Err(Error::validation(format!(
            "lambda = {lambda} must satisfy 1/(2 eps0) < lambda < 1 (eps0 = {eps0})"
        )));
    }
    let nu = harmonic_mean(&coeffs.nu)?;
    let lower = (1.0 / (2.0 * lambda * eps0)).powf(1.0 / kappa);
    Ok(coeffs
        .nu
        .iter()
        .map(|nu_i| {
            let dev = (1.0 - nu_i / nu).powi(2);
            let cap = if dev > 0.0 {
                ((1.0 - lambda) * eps0 / dev).min(1.0)
            } else {
                1.0
            };
            (lower, cap.powf(1.0 / kappa))
        })
        .collect())
}

/// Builds a certificate with the fixed choices of the existence proof and checks it.
///
/// The splitting constants are fixed in closed form. `chi_phi = 1` sets the scale, `chi_i`
/// sits at the midpoint of its admissible band, `chi_theta` at the midpoint of the exact
/// interval left by (H1), (H3) and (H4) once `chi_m` is dropped, and `chi_m` at half the
/// smaller of the two bounds that (H1) and (H4) then impose on it.
pub fn construct_certificate(
    coeffs: &PhysicalCoefficients,
    eq: &EquilibriumState,
    kappa: f64,
    eps0: f64,
    lambda: f64,
) -> Result<Certificate> {
    check_inputs(coeffs, eq)?;
    let assumptions = check_global_assumptions(coeffs);
    if !assumptions.all_pass() {
        let why = assumptions
            .valence_detail
            .clone()
            .or(assumptions.positivity_detail.clone())
            .unwrap_or_else(|| format!("max (1 - nu_i/nu)^2 = {} is not below 1/2", assumptions.max_dev));
        return Err(Error::validation(why));
    }
    let window = equilibrium_window(coeffs, kappa, eps0, lambda)?;
    let delta = &eq.delta;
    for (i, (&(lo, hi), &d)) in window.iter().zip(delta).enumerate() {
        if !(d > lo && d < hi) {
            return Err(Error::Construction(ConstructiveFailure::OutsideWindow {
                species: i,
                delta: d,
                lower: lo,
                upper: hi,
            }));
        }
    }

    let n = coeffs.species();
    let kb = coeffs.k_b;
    let s = sums(coeffs, delta);
    let nu = s.nu_harm;

    let eta_phi_i: Vec<f64> = (0..n)
        .map(|i| coeffs.z[i].powi(2) * delta[i] / (4.0 * coeffs.nu[i]))
        .collect();
    let eta_prime: Vec<f64> = delta.iter().map(|d| 0.5 * d.powf(-kappa)).collect();
    let chi: Vec<f64> = (0..n)
        .map(|i| {
            let dev = (1.0 - coeffs.nu[i] / nu).powi(2);
            0.5 * (kb * dev / (eps0 - eta_prime[i]) + kb * delta[i].powf(-kappa)) / delta[i]
        })
        .collect();
    let mut cert = Certificate {
        chi,
        chi_m: 1.0,
        chi_theta: 1.0,
        chi_phi: 1.0,
        eta: vec![1.0 - eps0; n],
        eta_prime,
        eta_phi: eta_phi_i.iter().sum(),
        eta_phi_i,
        eta_m: 0.25,
        eta_m_prime: 0.25,
        eta_theta: 1.0 / 3.0,
        eta_theta_prime: 1.0 / 3.0,
    };

    // Every condition is affine in chi_theta once chi_m is set aside; evaluate at
    // chi_theta = 0 and 1 to read off the slopes.
    let affine = |chi_theta: f64| {
        let mut c = cert.clone();
        c.chi_theta = chi_theta;
        c.chi_m = 0.0;
        let t = terms(coeffs, delta, &c);
        let h1 = t.h1_pos - t.h1_neg.iter().sum::<f64>();
        let h3 = t.h3_pos - t.h3_neg.iter().sum::<f64>();
        let h4: Vec<f64> = t
            .h4_pos
            .iter()
            .zip(&t.h4_neg)
            .map(|(p, ns)| p - ns.iter().sum::<f64>())
            .collect();
        (h1, h3, h4)
    };
    let (h1_0, h3_0, h4_0) = affine(0.0);
    let (h1_1, h3_1, h4_1) = affine(1.0);

    // h(x) = h0 + x (h1 - h0) > 0
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut binding = String::from("none");
    let mut bound = |name: String, h0: f64, h1: f64| {
        let slope = h1 - h0;
        if slope > 0.0 {
            lower = lower.max(-h0 / slope);
        } else if slope < 0.0 {
            let u = -h0 / slope;
            if u < upper {
                upper = u;
                binding = name;
            }
        } else if h0 <= 0.0 {
            upper = f64::NEG_INFINITY;
            binding = name;
        }
    };
    bound("H1".into(), h1_0, h1_1);
    bound("H3".into(), h3_0, h3_1);
    for i in 0..n {
        bound(format!("H4[{i}]"), h4_0[i], h4_1[i]);
    }
    if !(lower < upper) || !upper.is_finite() {
        return Err(Error::Construction(ConstructiveFailure::EmptyChiThetaInterval {
            lower,
            upper,
            binding,
        }));
    }
    cert.chi_theta = 0.5 * (lower + upper);

    cert.chi_m = 0.0;
    let t = terms(coeffs, delta, &cert);
    let mut chi_m_bound = f64::INFINITY;
    if t.h1_chi_m > 0.0 {
        let c1 = (t.h1_pos - t.h1_neg.iter().sum::<f64>()) / t.h1_chi_m;
        if !(c1 > 0.0) {
            return Err(Error::Construction(ConstructiveFailure::NonpositiveChiM {
                bound: "C1".into(),
                value: c1,
            }));
        }
        chi_m_bound = chi_m_bound.min(c1);
    }
    for i in 0..n {
        if t.h4_chi_m[i] > 0.0 {
            let c2 = (t.h4_pos[i] - t.h4_neg[i].iter().sum::<f64>()) / t.h4_chi_m[i];
            if !(c2 > 0.0) {
                return Err(Error::Construction(ConstructiveFailure::NonpositiveChiM {
                    bound: format!("C2[{i}]"),
                    value: c2,
                }));
            }
            chi_m_bound = chi_m_bound.min(c2);
        }
    }
    cert.chi_m = if chi_m_bound.is_finite() {
        0.5 * chi_m_bound
    } else {
        1.0
    };

    let report = evaluate_H_conditions(coeffs, eq, &cert)?;
    if !report.admissible {
        return Err(Error::Construction(ConstructiveFailure::Rejected(Box::new(report))));
    }
    Ok(cert)
}

/// Draws electroneutral equilibria from the window of [`equilibrium_window`].
///
/// `delta_2..delta_N` are uniform in their windows; `delta_1` is solved from neutrality and
/// the draw is kept only if it lands in its own window.
pub fn sample_equilibria(
    coeffs: &PhysicalCoefficients,
    kappa: f64,
    eps0: f64,
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<EquilibriumState>> {
    coeffs.validate()?;
    let window = equilibrium_window(coeffs, kappa, eps0, lambda)?;
    if let Some((i, (lo, hi))) = window.iter().enumerate().find(|(_, (lo, hi))| lo >= hi) {
        return Err(Error::Sampling(format!(
            "empty window for species {i}: lower {lo:e} >= upper {hi:e}"
        )));
    }
    let budget = 1000 * count.max(1) + 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    let z = &coeffs.z;
    while out.len() < count {
        if attempts >= budget {
            return Err(Error::Sampling(format!(
                "accepted {} of {count} after {attempts} attempts (acceptance rate ~{:.3e})",
                out.len(),
                out.len() as f64 / attempts as f64
            )));
        }
        attempts += 1;
        let mut delta = vec![0.0; z.len()];
        for i in 1..z.len() {
            let (lo, hi) = window[i];
            // open interval: resample the (measure-zero) endpoint
            let mut d = rng.random_range(lo..hi);
            while d <= lo {
                d = rng.random_range(lo..hi);
            }
            delta[i] = d;
        }
        let rest: f64 = (1..z.len()).map(|i| z[i] * delta[i]).sum();
        delta[0] = -rest / z[0];
        let (lo, hi) = window[0];
        if delta[0] > lo && delta[0] < hi {
            if let Ok(eq) = EquilibriumState::new(coeffs, delta) {
                out.push(eq);
            }
        }
    }
    Ok(out)
}

/// Default `(kappa, eps0, lambda)` grid tried by [`search_certificate`].
pub fn default_parameter_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for kappa in [0.05, 0.1, 0.2, 0.4] {
        for eps0 in [0.9, 0.95, 0.99] {
            let lo = 1.0 / (2.0 * eps0);
            let mid = 0.5 * (lo + 1.0);
            for lambda in [mid, 0.5 * (lo + mid), 0.5 * (mid + 1.0)] {
                grid.push((kappa, eps0, lambda));
            }
        }
    }
    grid
}

/// Looks for any admissible certificate within `budget` evaluations of the H-conditions.
///
/// First the constructive recipe over [`default_parameter_grid`], then random restarts
/// refined by coordinate-wise multiplicative moves that maximize the smallest normalized
/// margin. Deterministic for a given `(seed, budget)`.
pub fn search_certificate(
    coeffs: &PhysicalCoefficients,
    eq: &EquilibriumState,
    budget: usize,
    seed: u64,
) -> Result<Certificate> {
    check_inputs(coeffs, eq)?;
    let n = coeffs.species();
    let mut used = 0usize;

    for (kappa, eps0, lambda) in default_parameter_grid() {
        if used >= budget {
            break;
        }
        used += 1;
        if let Ok(c) = construct_certificate(coeffs, eq, kappa, eps0, lambda) {
            return Ok(c);
        }
    }

    let score = |c: &Certificate| -> (f64, AdmissibilityReport) {
        let r = report_from_terms(&terms(coeffs, &eq.delta, c), c);
        let s = r.min_normalized_margin();
        (if s.is_nan() { f64::NEG_INFINITY } else { s }, r)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, AdmissibilityReport, Certificate)> = None;
    let restarts = 8;
    let per_restart = budget.saturating_sub(used) / restarts;
    for _ in 0..restarts {
        if used >= budget {
            break;
        }
        let cert = random_certificate(n, &mut rng);
        let mut params: Vec<f64> = cert.to_params().iter().map(|p| p.ln()).collect();
        let (mut cur, mut cur_report) = score(&cert);
        used += 1;
        let mut step = 1.0f64;
        let stop = (used + per_restart).min(budget);
        while used < stop && step > 1e-6 {
            let mut improved = false;
            for k in 0..params.len() {
                for dir in [1.0, -1.0] {
                    if used >= stop {
                        break;
                    }
                    let mut trial = params.clone();
                    trial[k] += dir * step;
                    let c = Certificate::from_params(n, &trial.iter().map(|p| p.exp()).collect::<Vec<_>>());
                    let (s, r) = score(&c);
                    used += 1;
                    // strict improvement only, so ties keep the earlier candidate
                    if s > cur {
                        cur = s;
                        cur_report = r;
                        params = trial;
                        improved = true;
                        if cur_report.admissible {
                            return Ok(c);
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        let c = Certificate::from_params(n, &params.iter().map(|p| p.exp()).collect::<Vec<_>>());
        if cur_report.admissible {
            return Ok(c);
        }
        if best.as_ref().is_none_or(|(b, _, _)| cur > *b) {
            best = Some((cur, cur_report, c));
        }
    }
    let report = match best {
        Some((_, r, _)) => r,
        None => {
            let c = random_certificate(n, &mut rng);
            score(&c).1
        }
    };
    Err(Error::SearchExhausted(Box::new(report)))
}

fn random_certificate(n: usize, rng: &mut ChaCha8Rng) -> Certificate {
    let mut log_uniform = |lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    let chi: Vec<f64> = (0..n).map(|_| log_uniform(0.1, 10.0)).collect();
    let eta: Vec<f64> = (0..n).map(|_| log_uniform(0.05, 0.5)).collect();
    let eta_prime: Vec<f64> = (0..n).map(|_| log_uniform(0.01, 0.4)).collect();
    let eta_phi_i: Vec<f64> = (0..n).map(|_| log_uniform(0.01, 0.3)).collect();
    Certificate {
        chi,
        eta,
        eta_prime,
        eta_phi_i,
        chi_m: log_uniform(0.01, 1.0),
        chi_theta: log_uniform(0.01, 1.0),
        chi_phi: 1.0,
        eta_phi: log_uniform(0.01, 0.3),
        eta_m: log_uniform(0.05, 0.45),
        eta_m_prime: log_uniform(0.05, 0.45),
        eta_theta: log_uniform(0.05, 0.45),
        eta_theta_prime: log_uniform(0.01, 0.45),
    }
}
