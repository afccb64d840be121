//! Physical coefficients, equilibrium states and the standing assumptions on them.
//!
//! All quantities are nondimensional `f64`s. Species are indexed `0..N` in the order the
//! caller supplies them; nothing here reorders species.

use crate::error::{Error, Result};

/// Relative slack allowed in `sum z_i delta_i = 0`.
pub const NEUTRALITY_RTOL: f64 = 1e-12;

/// Coefficients of the PNPF system for `N` ionic species in an incompressible solvent.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalCoefficients {
    /// Valences `z_i`, sorted nondecreasing, no zero entry.
    pub z: Vec<f64>,
    /// Boltzmann constant.
    pub k_b: f64,
    /// Species/solvent friction coefficients `nu_i`.
    pub nu: Vec<f64>,
    /// Heat conductance.
    pub k: f64,
    /// Dielectric constant.
    pub eps: f64,
    /// Solvent shear viscosity.
    pub lambda0: f64,
    /// Solvent density.
    pub rho0: f64,
    /// Solvent heat capacitance.
    pub c0: f64,
    /// Species heat capacitances `c_i`.
    pub c: Vec<f64>,
    /// Multiplier on the valence inside the friction-heating term. An elementary-charge
    /// factor there is absorbed into `z_i` in these units, so the default is 1.
    pub charge_factor: f64,
}

impl PhysicalCoefficients {
    /// Every coefficient set to one, valences `(-1, 1)`.
    pub fn unit_binary() -> Self {
        Self {
            z: vec![-1.0, 1.0],
            k_b: 1.0,
            nu: vec![1.0, 1.0],
            k: 1.0,
            eps: 1.0,
            lambda0: 1.0,
            rho0: 1.0,
            c0: 1.0,
            c: vec![1.0, 1.0],
            charge_factor: 1.0,
        }
    }

    /// Species count `N`.
    pub fn species(&self) -> usize {
        self.z.len()
    }

    /// Structural checks: consistent lengths, `N >= 2`, finite entries.
    ///
    /// The sign and ordering assumptions are *not* enforced here; they are reported by
    /// [`check_global_assumptions`] so that boundary cases can still be explored.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.z.len();
        if n < 2 {
            return Err(Error::validation(format!("need at least 2 species, got {n}")));
        }
        if self.nu.len() != n || self.c.len() != n {
            return Err(Error::validation(format!(
                "length mismatch: z has {n} entries, nu {}, c {}",
                self.nu.len(),
                self.c.len()
            )));
        }
        let scalars = [
            ("k_b", self.k_b),
            ("k", self.k),
            ("eps", self.eps),
            ("lambda0", self.lambda0),
            ("rho0", self.rho0),
            ("c0", self.c0),
            ("charge_factor", self.charge_factor),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::validation(format!("{name} is not finite")));
            }
        }
        if self.z.iter().chain(&self.nu).chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite entry in z, nu or c"));
        }
        Ok(())
    }

    /// Shape checks plus the positivity assumption; the working precondition for
    /// anything that divides by a coefficient.
    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        let report = check_global_assumptions(self);
        if !report.positivity {
            return Err(Error::validation(report.positivity_detail.unwrap_or_default()));
        }
        Ok(())
    }
}

/// `N / sum(1/nu_i)`.
pub fn harmonic_mean(nu: &[f64]) -> Result<f64> {
    if nu.is_empty() {
        return Err(Error::validation("harmonic mean of an empty list"));
    }
    if let Some((i, v)) = nu.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::validation(format!("viscosity nu[{i}] = {v} is not positive")));
    }
    let inv: f64 = nu.iter().map(|v| 1.0 / v).sum();
    Ok(nu.len() as f64 / inv)
}

/// `(1 - nu_i/nu)^2` per species, with `nu` the harmonic mean.
pub fn viscosity_deviations(nu: &[f64]) -> Result<Vec<f64>> {
    let h = harmonic_mean(nu)?;
    Ok(nu.iter().map(|v| (1.0 - v / h).powi(2)).collect())
}

/// Outcome of the three standing assumptions on the coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Valences sorted nondecreasing, at least one negative and one positive, none zero.
    pub valence_ordering: bool,
    pub valence_detail: Option<String>,
    /// All physical constants strictly positive.
    pub positivity: bool,
    pub positivity_detail: Option<String>,
    /// `(1 - nu_i/nu)^2` per species (empty if the viscosities are not positive).
    pub deviations: Vec<f64>,
    pub max_dev: f64,
    /// `1/2 - max_dev`; the key assumption holds iff this is positive.
    pub key_margin: f64,
    pub key_assumption: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.valence_ordering && self.positivity && self.key_assumption
    }
}

/// Evaluates the valence-ordering, positivity and viscosity-spread assumptions.
/// Never fails; failures are carried in the report.
pub fn check_global_assumptions(coeffs: &PhysicalCoefficients) -> AssumptionReport {
    let z = &coeffs.z;
    let mut valence_detail = None;
    if z.len() < 2 {
        valence_detail = Some(format!("need at least 2 species, got {}", z.len()));
    } else if let Some(i) = z.iter().position(|v| *v == 0.0) {
        valence_detail = Some(format!("z[{i}] is zero"));
    } else if let Some(i) = z.windows(2).position(|w| w[0] > w[1]) {
        valence_detail = Some(format!(
            "z is not sorted: z[{i}] = {} > z[{}] = {}",
            z[i],
            i + 1,
            z[i + 1]
        ));
    } else if !z.iter().any(|v| *v < 0.0) {
        valence_detail = Some("no negative valence".into());
    } else if !z.iter().any(|v| *v > 0.0) {
        valence_detail = Some("no positive valence".into());
    }

    let mut bad = Vec::new();
    for (name, v) in [
        ("k_b", coeffs.k_b),
        ("k", coeffs.k),
        ("eps", coeffs.eps),
        ("lambda0", coeffs.lambda0),
        ("rho0", coeffs.rho0),
        ("c0", coeffs.c0),
    ] {
        if !(v > 0.0) {
            bad.push(format!("{name} = {v}"));
        }
    }
    for (i, v) in coeffs.nu.iter().enumerate() {
        if !(*v > 0.0) {
            bad.push(format!("nu[{i}] = {v}"));
        }
    }
    for (i, v) in coeffs.c.iter().enumerate() {
        if !(*v > 0.0) {
            bad.push(format!("c[{i}] = {v}"));
        }
    }
    let positivity = bad.is_empty();
    let positivity_detail = (!positivity).then(|| format!("nonpositive coefficients: {}", bad.join(", ")));

    let deviations = viscosity_deviations(&coeffs.nu).unwrap_or_default();
    let max_dev = if deviations.is_empty() {
        f64::INFINITY
    } else {
        deviations.iter().cloned().fold(0.0, f64::max)
    };
    let key_margin = 0.5 - max_dev;

    AssumptionReport {
        valence_ordering: valence_detail.is_none(),
        valence_detail,
        positivity,
        positivity_detail,
        deviations,
        max_dev,
        key_margin,
        key_assumption: key_margin > 0.0,
    }
}

/// `sum z_i delta_i`.
pub fn electroneutrality_residual(z: &[f64], delta: &[f64]) -> Result<f64> {
    if z.len() != delta.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} valences, {} densities",
            z.len(),
            delta.len()
        )));
    }
    Ok(z.iter().zip(delta).map(|(z, d)| z * d).sum())
}

/// A constant state `(delta_1, ..., delta_N)` with positive, electroneutral densities.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub delta: Vec<f64>,
}

impl EquilibriumState {
    /// Validates positivity and `|sum z_i delta_i| <= 1e-12 max |z_i delta_i|`.
    pub fn new(coeffs: &PhysicalCoefficients, delta: Vec<f64>) -> Result<Self> {
        let residual = electroneutrality_residual(&coeffs.z, &delta)?;
        if let Some((i, d)) = delta.iter().enumerate().find(|(_, d)| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::validation(format!("density delta[{i}] = {d} is not positive")));
        }
        let scale = coeffs
            .z
            .iter()
            .zip(&delta)
            .map(|(z, d)| (z * d).abs())
            .fold(0.0, f64::max);
        if residual.abs() > NEUTRALITY_RTOL * scale {
            return Err(Error::validation(format!(
                "electroneutrality violated: sum z_i delta_i = {residual:e}"
            )));
        }
        Ok(Self { delta })
    }
}

/// Constants derived from the coefficients and an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Harmonic mean of the viscosities.
    pub nu_harm: f64,
    /// `max_i (1 - nu_i/nu)^2`.
    pub max_dev: f64,
    /// Heat capacity of the equilibrium, `k_B c_0 rho_0 + sum k_B c_i delta_i`.
    pub a: f64,
    /// Effective conductivity, `k + sum k_B^2 delta_i / nu_i`.
    pub b: f64,
}

pub fn derived_constants(coeffs: &PhysicalCoefficients, eq: &EquilibriumState) -> Result<DerivedConstants> {
    coeffs.validate()?;
    // re-check (A1) in case the state was built against other coefficients
    let eq = EquilibriumState::new(coeffs, eq.delta.clone())?;
    Ok(derived_constants_unchecked(coeffs, &eq.delta))
}

/// Same formulas without the positivity/neutrality checks. `delta` may be any
/// nonnegative vector (used for the `delta -> 0` limit and linearity checks).
pub fn derived_constants_unchecked(coeffs: &PhysicalCoefficients, delta: &[f64]) -> DerivedConstants {
    let nu_harm = harmonic_mean(&coeffs.nu).unwrap_or(f64::NAN);
    let max_dev = coeffs
        .nu
        .iter()
        .map(|v| (1.0 - v / nu_harm).powi(2))
        .fold(0.0, f64::max);
    let kb = coeffs.k_b;
    let a = kb * coeffs.c0 * coeffs.rho0 + coeffs.c.iter().zip(delta).map(|(c, d)| kb * c * d).sum::<f64>();
    let b = coeffs.k + coeffs.nu.iter().zip(delta).map(|(nu, d)| kb * kb * d / nu).sum::<f64>();
    DerivedConstants { nu_harm, max_dev, a, b }
}

/// Coefficients, a validated equilibrium and their derived constants, bundled for the
/// solver and certificate code.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub coeffs: PhysicalCoefficients,
    pub eq: EquilibriumState,
    pub derived: DerivedConstants,
}

impl Model {
    pub fn new(coeffs: PhysicalCoefficients, delta: Vec<f64>) -> Result<Self> {
        coeffs.validate()?;
        let eq = EquilibriumState::new(&coeffs, delta)?;
        let derived = derived_constants_unchecked(&coeffs, &eq.delta);
        Ok(Self { coeffs, eq, derived })
    }

    pub fn species(&self) -> usize {
        self.coeffs.species()
    }

    /// `sum z_i delta_i / nu_i`.
    pub fn weighted_charge(&self) -> f64 {
        let c = &self.coeffs;
        (0..c.species()).map(|i| c.z[i] * self.eq.delta[i] / c.nu[i]).sum()
    }

    /// `sum z_i^2 delta_i / nu_i`; divided by `eps` this is the damping rate of `m`.
    pub fn charge_damping(&self) -> f64 {
        let c = &self.coeffs;
        (0..c.species())
            .map(|i| c.z[i] * c.z[i] * self.eq.delta[i] / c.nu[i])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_mean_examples() {
        assert_eq!(harmonic_mean(&[2.0, 2.0]).unwrap(), 2.0);
        assert!((harmonic_mean(&[1.0, 3.0]).unwrap() - 1.5).abs() < 1e-15);
        let nacl = harmonic_mean(&[1.334, 2.032]).unwrap();
        assert!((nacl - 1.6105).abs() < 1e-3, "{nacl}");
        // the closed form quoted for the two-species case
        assert!((nacl - 1.334 * 2.032 / (0.5 * (1.334 + 2.032))).abs() < 1e-12);
        assert!(harmonic_mean(&[1.0, 0.0]).is_err());
        assert!(harmonic_mean(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn key_assumption_equal_viscosities() {
        let c = PhysicalCoefficients::unit_binary();
        let r = check_global_assumptions(&c);
        assert!(r.all_pass());
        assert_eq!(r.max_dev, 0.0);
        assert_eq!(r.key_margin, 0.5);
    }

    #[test]
    fn key_assumption_nacl_reports_computed_deviations() {
        let mut c = PhysicalCoefficients::unit_binary();
        c.nu = vec![1.334, 2.032];
        let r = check_global_assumptions(&c);
        assert!(r.key_assumption);
        assert!((r.deviations[0] - 0.0295).abs() < 5e-4, "{:?}", r.deviations);
        assert!((r.deviations[1] - 0.0684).abs() < 5e-4, "{:?}", r.deviations);
    }

    #[test]
    fn key_assumption_fails_for_wide_spread() {
        let mut c = PhysicalCoefficients::unit_binary();
        c.nu = vec![1.0, 10.0];
        let r = check_global_assumptions(&c);
        assert!(!r.key_assumption);
        assert!((r.max_dev - 20.25).abs() < 1e-12);
        assert!((r.key_margin + 19.75).abs() < 1e-12);
    }

    #[test]
    fn valence_checks() {
        let mut c = PhysicalCoefficients::unit_binary();
        c.z = vec![1.0, -1.0];
        assert!(!check_global_assumptions(&c).valence_ordering);
        c.z = vec![-1.0, 0.0];
        assert!(!check_global_assumptions(&c).valence_ordering);
        c.z = vec![1.0, 2.0];
        assert!(!check_global_assumptions(&c).valence_ordering);
        c.z = vec![-2.0, -1.0, 1.0];
        c.nu = vec![1.0; 3];
        c.c = vec![1.0; 3];
        assert!(check_global_assumptions(&c).valence_ordering);
    }

    #[test]
    fn positivity_check_names_offender() {
        let mut c = PhysicalCoefficients::unit_binary();
        c.lambda0 = 0.0;
        let r = check_global_assumptions(&c);
        assert!(!r.positivity);
        assert!(r.positivity_detail.unwrap().contains("lambda0"));
    }

    #[test]
    fn electroneutrality_examples() {
        assert_eq!(electroneutrality_residual(&[-1.0, 1.0], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(electroneutrality_residual(&[-2.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(electroneutrality_residual(&[-1.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(electroneutrality_residual(&[-1.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn equilibrium_rejects_charged_state() {
        let c = PhysicalCoefficients::unit_binary();
        assert!(EquilibriumState::new(&c, vec![1.0, 2.0]).is_err());
        assert!(EquilibriumState::new(&c, vec![-1.0, -1.0]).is_err());
        assert!(EquilibriumState::new(&c, vec![0.3, 0.3]).is_ok());
    }

    #[test]
    fn derived_constant_examples() {
        let c = PhysicalCoefficients::unit_binary();
        let eq = EquilibriumState::new(&c, vec![0.5, 0.5]).unwrap();
        let d = derived_constants(&c, &eq).unwrap();
        assert_eq!((d.a, d.b), (2.0, 2.0));

        let zero = derived_constants_unchecked(&c, &[0.0, 0.0]);
        assert_eq!((zero.a, zero.b), (c.k_b * c.c0 * c.rho0, c.k));

        let mut c2 = c.clone();
        c2.k_b = 2.0;
        let eq = EquilibriumState::new(&c2, vec![1.0, 1.0]).unwrap();
        let d = derived_constants(&c2, &eq).unwrap();
        assert_eq!((d.a, d.b), (6.0, 9.0));

        assert!(derived_constants(&c, &EquilibriumState { delta: vec![1.0, 2.0] }).is_err());
    }

    proptest! {
        #[test]
        fn harmonic_mean_below_arithmetic(nu in prop::collection::vec(0.01f64..100.0, 2..6)) {
            let h = harmonic_mean(&nu).unwrap();
            let mean = nu.iter().sum::<f64>() / nu.len() as f64;
            prop_assert!(h <= mean * (1.0 + 1e-12));
        }

        #[test]
        fn spread_monotone(base in 0.1f64..10.0, f1 in 1.0f64..5.0, f2 in 1.0f64..5.0) {
            let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let dev = |f: f64| {
                let d = viscosity_deviations(&[base, base * f]).unwrap();
                d.into_iter().fold(0.0, f64::max)
            };
            prop_assert!(dev(hi) >= dev(lo) - 1e-12);
        }

        #[test]
        fn derived_constants_affine_in_delta(
            d1 in prop::collection::vec(0.0f64..2.0, 3),
            d2 in prop::collection::vec(0.0f64..2.0, 3),
        ) {
            let c = PhysicalCoefficients {
                z: vec![-1.0, 1.0, 2.0],
                k_b: 1.3,
                nu: vec![0.7, 1.1, 2.0],
                k: 0.9,
                eps: 1.0,
                lambda0: 1.0,
                rho0: 1.2,
                c0: 0.8,
                c: vec![0.5, 1.5, 1.0],
                charge_factor: 1.0,
            };
            let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
            let f = |d: &[f64]| derived_constants_unchecked(&c, d);
            let zero = f(&[0.0; 3]);
            prop_assert!((f(&sum).a + zero.a - f(&d1).a - f(&d2).a).abs() < 1e-12);
            prop_assert!((f(&sum).b + zero.b - f(&d1).b - f(&d2).b).abs() < 1e-12);
        }
    }
}
