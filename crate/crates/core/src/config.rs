//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, section prefixes are dotted
//! (`solver.dt = 1e-3`) and lists are comma separated. Unknown or repeated keys are
//! errors, and every error names the key it concerns.
//!
//! ```
//! use pnpf::config::RunConfig;
//!
//! let cfg = RunConfig::parse("
//!     coefficients.nu = 1.334, 2.032
//!     equilibrium.delta = 0.5, 0.5
//!     solver.dt = 1e-3
//! ").unwrap();
//! assert_eq!(cfg.coeffs.nu, vec![1.334, 2.032]);
//! assert_eq!(cfg.solver.dt, 1e-3);
//!
//! let err = RunConfig::parse("solver.dt = fast").unwrap_err();
//! assert!(err.to_string().contains("solver.dt"));
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::admissibility::Certificate;
use crate::dynamics::{Scheme, DEFAULT_BLOWUP_FACTOR};
use crate::error::{Error, Result};
use crate::model::PhysicalCoefficients;
use crate::spectral::Grid;

/// Parsed `key -> (value, line)` table.
#[derive(Debug, Clone, Default)]
pub struct Table {
    entries: BTreeMap<String, (String, usize)>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::config(format!("line {}", i + 1), format!("bad key `{key}`")));
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.trim().to_string(), i + 1)) {
                return Err(Error::config(key, format!("repeated on lines {first} and {}", i + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| parse_float(key, v)).transpose()
    }

    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                if v.is_empty() {
                    return Err(Error::config(key, "empty list"));
                }
                v.split(',').map(|x| parse_float(key, x.trim())).collect()
            })
            .transpose()
    }

    pub fn uint(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::config(key, format!("expected a nonnegative integer, got `{v}`")))
            })
            .transpose()
    }

    pub fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
            })
            .transpose()
    }
}

fn parse_float(key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::config(key, format!("expected a finite number, got `{v}`"))),
    }
}

const KNOWN_KEYS: &[&str] = &[
    "coefficients.z",
    "coefficients.k_b",
    "coefficients.nu",
    "coefficients.k",
    "coefficients.eps",
    "coefficients.lambda0",
    "coefficients.rho0",
    "coefficients.c0",
    "coefficients.c",
    "coefficients.charge_factor",
    "equilibrium.delta",
    "equilibrium.kappa",
    "equilibrium.eps0",
    "equilibrium.lambda",
    "equilibrium.seed",
    "grid.dim",
    "grid.M",
    "grid.L",
    "solver.dt",
    "solver.T_end",
    "solver.scheme",
    "solver.s",
    "solver.output_every",
    "solver.energy_threshold",
    "solver.blowup_factor",
    "init.energy",
    "init.modes",
    "init.seed",
    "output.dir",
    "output.snapshots",
    "spectrum.xi_min",
    "spectrum.xi_max",
    "spectrum.points",
    "search.budget",
    "search.seed",
];

const CERT_VECTORS: [&str; 4] = ["chi", "eta", "eta_prime", "eta_phi_i"];
const CERT_SCALARS: [&str; 8] = [
    "chi_m",
    "chi_theta",
    "chi_phi",
    "eta_phi",
    "eta_m",
    "eta_m_prime",
    "eta_theta",
    "eta_theta_prime",
];

/// Where the equilibrium comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum EquilibriumSpec {
    /// Given densities.
    Fixed(Vec<f64>),
    /// One draw from the constructive window.
    Sampled { seed: u64 },
}

/// Parameters of the constructive certificate (also the sampling window).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionParams {
    pub kappa: f64,
    pub eps0: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub m: usize,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub s: u32,
    pub output_every: usize,
    pub energy_threshold: f64,
    pub blowup_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub energy: f64,
    pub modes: i64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub snapshots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSpec {
    pub xi_min: f64,
    pub xi_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub budget: usize,
    pub seed: u64,
}

/// Everything a subcommand needs, validated up front.
///
/// Missing keys take defaults: the all-ones binary electrolyte, a 1D grid of 64 points on
/// `[0, 2 pi)`, `imex2` with `dt = 1e-3` up to `T_end = 1`, `s = 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub coeffs: PhysicalCoefficients,
    pub equilibrium: EquilibriumSpec,
    pub construction: ConstructionParams,
    pub grid: GridSpec,
    pub solver: SolverSpec,
    pub init: InitSpec,
    /// Pinned certificate; when present it is verified instead of searched for.
    pub certificate: Option<Certificate>,
    pub output: OutputSpec,
    pub spectrum: SpectrumSpec,
    pub search: SearchSpec,
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_table(&Table::parse(text)?)
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        for key in t.keys() {
            let cert_key = key
                .strip_prefix("certificate.")
                .is_some_and(|f| CERT_VECTORS.contains(&f) || CERT_SCALARS.contains(&f));
            if !cert_key && !KNOWN_KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
        }

        let mut coeffs = PhysicalCoefficients::unit_binary();
        if let Some(v) = t.floats("coefficients.z")? {
            coeffs.z = v;
        }
        if let Some(v) = t.floats("coefficients.nu")? {
            coeffs.nu = v;
        }
        if let Some(v) = t.floats("coefficients.c")? {
            coeffs.c = v;
        }
        for (key, slot) in [
            ("coefficients.k_b", &mut coeffs.k_b),
            ("coefficients.k", &mut coeffs.k),
            ("coefficients.eps", &mut coeffs.eps),
            ("coefficients.lambda0", &mut coeffs.lambda0),
            ("coefficients.rho0", &mut coeffs.rho0),
            ("coefficients.c0", &mut coeffs.c0),
            ("coefficients.charge_factor", &mut coeffs.charge_factor),
        ] {
            if let Some(v) = t.float(key)? {
                *slot = v;
            }
        }
        let n = coeffs.species();
        if n < 2 {
            return Err(Error::config(
                "coefficients.z",
                format!("need at least 2 species, got {n}"),
            ));
        }
        for (key, len) in [("coefficients.nu", coeffs.nu.len()), ("coefficients.c", coeffs.c.len())] {
            if len != n {
                return Err(Error::config(
                    key,
                    format!("has {len} entries but coefficients.z has {n}"),
                ));
            }
        }

        let eps0 = t.float("equilibrium.eps0")?.unwrap_or(0.95);
        if !(eps0 > 0.0 && eps0 < 1.0) {
            return Err(Error::config(
                "equilibrium.eps0",
                format!("must lie in (0, 1), got {eps0}"),
            ));
        }
        let lambda = t
            .float("equilibrium.lambda")?
            .unwrap_or(0.5 * (1.0 / (2.0 * eps0) + 1.0));
        if !(lambda < 1.0 && 2.0 * lambda * eps0 > 1.0) {
            return Err(Error::config(
                "equilibrium.lambda",
                format!("must lie in (1/(2 eps0), 1), got {lambda}"),
            ));
        }
        let kappa = positive("equilibrium.kappa", t.float("equilibrium.kappa")?.unwrap_or(0.05))?;
        let construction = ConstructionParams { kappa, eps0, lambda };
        let equilibrium = match t.floats("equilibrium.delta")? {
            Some(d) => {
                if d.len() != n {
                    return Err(Error::config(
                        "equilibrium.delta",
                        format!("has {} entries, expected {n}", d.len()),
                    ));
                }
                EquilibriumSpec::Fixed(d)
            }
            None => EquilibriumSpec::Sampled {
                seed: t.uint("equilibrium.seed")?.unwrap_or(0),
            },
        };

        let dim = t.uint("grid.dim")?.unwrap_or(1) as usize;
        let m = t.uint("grid.M")?.unwrap_or(64) as usize;
        let l = t.float("grid.L")?.unwrap_or(2.0 * std::f64::consts::PI);
        if !(1..=3).contains(&dim) {
            return Err(Error::config("grid.dim", format!("must be 1, 2 or 3, got {dim}")));
        }
        positive("grid.L", l)?;
        Grid::new(dim, m, l).map_err(|e| Error::config("grid.M", e.to_string()))?;
        let grid = GridSpec { dim, m, l };

        let scheme = match t.raw("solver.scheme") {
            Some(s) => s.parse::<Scheme>().map_err(|e| Error::config("solver.scheme", e))?,
            None => Scheme::Imex2,
        };
        let dt = positive("solver.dt", t.float("solver.dt")?.unwrap_or(1e-3))?;
        let t_end = t.float("solver.T_end")?.unwrap_or(1.0);
        if t_end < 0.0 {
            return Err(Error::config(
                "solver.T_end",
                format!("must be nonnegative, got {t_end}"),
            ));
        }
        let output_every = t.uint("solver.output_every")?.unwrap_or(1) as usize;
        if output_every == 0 {
            return Err(Error::config("solver.output_every", "must be at least 1"));
        }
        let s = t.uint("solver.s")?.unwrap_or(3);
        let s = u32::try_from(s).map_err(|_| Error::config("solver.s", "too large"))?;
        let solver = SolverSpec {
            dt,
            t_end,
            scheme,
            s,
            output_every,
            energy_threshold: positive(
                "solver.energy_threshold",
                t.float("solver.energy_threshold")?.unwrap_or(1.0),
            )?,
            blowup_factor: positive(
                "solver.blowup_factor",
                t.float("solver.blowup_factor")?.unwrap_or(DEFAULT_BLOWUP_FACTOR),
            )?,
        };

        let energy = t.float("init.energy")?.unwrap_or(1e-4);
        if energy < 0.0 {
            return Err(Error::config(
                "init.energy",
                format!("must be nonnegative, got {energy}"),
            ));
        }
        let modes = t.uint("init.modes")?.unwrap_or(4) as i64;
        if modes < 1 || modes > (m / 3) as i64 {
            return Err(Error::config(
                "init.modes",
                format!("must lie in 1..={}, got {modes}", m / 3),
            ));
        }
        let init = InitSpec {
            energy,
            modes,
            seed: t.uint("init.seed")?.unwrap_or(0),
        };

        let certificate = parse_certificate_keys(t, n)?;

        let output = OutputSpec {
            dir: PathBuf::from(t.raw("output.dir").unwrap_or("out")),
            snapshots: t.boolean("output.snapshots")?.unwrap_or(false),
        };

        let points = t.uint("spectrum.points")?.unwrap_or(200) as usize;
        if points == 0 {
            return Err(Error::config("spectrum.points", "the |xi|^2 grid is empty"));
        }
        let xi_min = positive("spectrum.xi_min", t.float("spectrum.xi_min")?.unwrap_or(1e-4))?;
        let xi_max = t.float("spectrum.xi_max")?.unwrap_or(1e4);
        if !(xi_max >= xi_min) {
            return Err(Error::config(
                "spectrum.xi_max",
                format!("must be at least spectrum.xi_min = {xi_min}"),
            ));
        }
        let spectrum = SpectrumSpec { xi_min, xi_max, points };

        let budget = t.uint("search.budget")?.unwrap_or(20_000) as usize;
        if budget == 0 {
            return Err(Error::config("search.budget", "must be at least 1"));
        }
        let search = SearchSpec {
            budget,
            seed: t.uint("search.seed")?.unwrap_or(0),
        };

        Ok(Self {
            coeffs,
            equilibrium,
            construction,
            grid,
            solver,
            init,
            certificate,
            output,
            spectrum,
            search,
        })
    }

    /// Replaces every seed in the configuration.
    pub fn override_seed(&mut self, seed: u64) {
        if let EquilibriumSpec::Sampled { seed: s } = &mut self.equilibrium {
            *s = seed;
        }
        self.init.seed = seed;
        self.search.seed = seed;
    }
}

fn parse_certificate_keys(t: &Table, n: usize) -> Result<Option<Certificate>> {
    let present: Vec<&str> = t.keys().filter(|k| k.starts_with("certificate.")).collect();
    if present.is_empty() {
        return Ok(None);
    }
    let vector = |f: &str| -> Result<Vec<f64>> {
        let key = format!("certificate.{f}");
        let v = t
            .floats(&key)?
            .ok_or_else(|| Error::config(&key, "missing from the pinned certificate"))?;
        if v.len() != n {
            return Err(Error::config(&key, format!("has {} entries, expected {n}", v.len())));
        }
        Ok(v)
    };
    let scalar = |f: &str| -> Result<f64> {
        let key = format!("certificate.{f}");
        t.float(&key)?
            .ok_or_else(|| Error::config(&key, "missing from the pinned certificate"))
    };
    let cert = Certificate {
        chi: vector("chi")?,
        eta: vector("eta")?,
        eta_prime: vector("eta_prime")?,
        eta_phi_i: vector("eta_phi_i")?,
        chi_m: scalar("chi_m")?,
        chi_theta: scalar("chi_theta")?,
        chi_phi: scalar("chi_phi")?,
        eta_phi: scalar("eta_phi")?,
        eta_m: scalar("eta_m")?,
        eta_m_prime: scalar("eta_m_prime")?,
        eta_theta: scalar("eta_theta")?,
        eta_theta_prime: scalar("eta_theta_prime")?,
    };
    cert.validate(n)
        .map_err(|e| Error::config("certificate", e.to_string()))?;
    Ok(Some(cert))
}

/// Reads a certificate from `certificate.*` keys; other keys are ignored.
pub fn parse_certificate(text: &str, species: usize) -> Result<Certificate> {
    let t = Table::parse(text)?;
    parse_certificate_keys(&t, species)?.ok_or_else(|| Error::config("certificate", "no certificate keys found"))
}

pub(crate) fn fmt_float(x: f64) -> String {
    // adding zero turns -0 into 0
    format!("{:.16e}", x + 0.0)
}

pub(crate) fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(", ")
}

/// `certificate.*` lines, loadable by [`parse_certificate`] or pasted into a config.
pub fn format_certificate(cert: &Certificate) -> String {
    let mut out = String::new();
    for (name, v) in [
        ("chi", &cert.chi),
        ("eta", &cert.eta),
        ("eta_prime", &cert.eta_prime),
        ("eta_phi_i", &cert.eta_phi_i),
    ] {
        let _ = writeln!(out, "certificate.{name} = {}", fmt_list(v));
    }
    for (name, v) in cert.scalars() {
        let _ = writeln!(out, "certificate.{name} = {}", fmt_float(v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.coeffs, PhysicalCoefficients::unit_binary());
        assert_eq!(c.equilibrium, EquilibriumSpec::Sampled { seed: 0 });
        assert_eq!(
            c.grid,
            GridSpec {
                dim: 1,
                m: 64,
                l: 2.0 * std::f64::consts::PI
            }
        );
        assert_eq!(c.solver.scheme, Scheme::Imex2);
        assert!(c.certificate.is_none());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# header\n\n grid.M = 32   # trailing\n").unwrap();
        assert_eq!(c.grid.m, 32);
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("solver.dt = -1", "solver.dt"),
            ("solver.dt = nan", "solver.dt"),
            ("grid.M = 7", "grid.M"),
            ("grid.dim = 4", "grid.dim"),
            ("coefficients.nu = 1, 2, 3", "coefficients.nu"),
            ("equilibrium.delta = 1", "equilibrium.delta"),
            ("solver.scheme = rk4", "solver.scheme"),
            ("spectrum.points = 0", "spectrum.points"),
            ("bogus.key = 1", "bogus.key"),
            ("grid.M = 16\ngrid.M = 32", "grid.M"),
            ("certificate.chi = 1, 1", "certificate.eta"),
            ("init.modes = 40", "init.modes"),
        ] {
            let e = RunConfig::parse(text).unwrap_err();
            assert!(matches!(e, Error::Config { .. }), "{text}: {e}");
            assert!(e.to_string().contains(key), "{text}: {e}");
        }
        assert!(RunConfig::parse("no equals sign")
            .unwrap_err()
            .to_string()
            .contains("line 1"));
    }

    #[test]
    fn seed_override() {
        let mut c = RunConfig::parse("init.seed = 3\nsearch.seed = 4").unwrap();
        c.override_seed(9);
        assert_eq!((c.init.seed, c.search.seed), (9, 9));
        assert_eq!(c.equilibrium, EquilibriumSpec::Sampled { seed: 9 });
    }

    #[test]
    fn certificate_round_trip_is_exact() {
        let cert = Certificate {
            chi: vec![0.1, 1.0 / 3.0],
            chi_m: 0.7,
            chi_theta: 2.0f64.sqrt(),
            chi_phi: 1.0,
            eta: vec![0.95, 0.9],
            eta_prime: vec![1e-3, 7.5],
            eta_phi_i: vec![0.25, 0.125],
            eta_phi: 0.375,
            eta_m: 0.25,
            eta_m_prime: 0.25,
            eta_theta: 1.0 / 3.0,
            eta_theta_prime: 1.0 / 3.0,
        };
        let text = format_certificate(&cert);
        assert_eq!(parse_certificate(&text, 2).unwrap(), cert);
        assert!(parse_certificate(&text, 3).is_err());
    }
}
