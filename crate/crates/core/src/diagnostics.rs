//! Energy and dissipation functionals, decay audits and the integration-by-parts
//! identities behind the energy estimates.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::admissibility::{Certificate, DissipationCoefficients};
use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{self, inner_product, inner_product_vec, ScalarField, VectorField};

/// Multiplicative slack in the monotonicity check.
pub const AUDIT_RTOL: f64 = 1e-8;
/// Additive slack in the monotonicity check.
pub const AUDIT_ATOL: f64 = 1e-12;
/// Allowed overshoot of `E(t) + int D` over `E(0)`.
pub const INTEGRAL_SLACK: f64 = 0.05;

/// Weighted `H^s` energy:
/// `chi_phi eps |grad phi|^2 + sum chi_i |n_i|^2 + a chi_theta |theta|^2 + chi_m |m|^2`.
pub fn energy(state: &State, phi: &ScalarField, cert: &Certificate, model: &Model, s: u32) -> f64 {
    let mut e = cert.chi_phi * model.coeffs.eps * phi.spectrum().sobolev_norm_sq(s, 1);
    for (chi, n) in cert.chi.iter().zip(&state.n) {
        e += chi * n.spectrum().sobolev_norm_sq(s, 0);
    }
    e += model.derived.a * cert.chi_theta * state.theta.spectrum().sobolev_norm_sq(s, 0);
    e += cert.chi_m * state.m.spectrum().sobolev_norm_sq(s, 0);
    e
}

/// Weighted `H^s` dissipation rate.
pub fn dissipation(state: &State, phi: &ScalarField, u0: &VectorField, d: &DissipationCoefficients, s: u32) -> f64 {
    let mut out = 0.0;
    for (di, n) in d.d.iter().zip(&state.n) {
        out += di * n.spectrum().sobolev_norm_sq(s, 1);
    }
    out += d.d_theta * state.theta.spectrum().sobolev_norm_sq(s, 1);
    let m = state.m.spectrum();
    out += d.d_m * m.sobolev_norm_sq(s, 1);
    out += d.d_m_tilde * m.sobolev_norm_sq(s, 0);
    let p = phi.spectrum();
    out += d.d_phi * p.sobolev_norm_sq(s, 1);
    out += d.d_phi_tilde * p.sobolev_norm_sq(s, 2);
    out += u0
        .components
        .iter()
        .map(|c| c.spectrum().sobolev_norm_sq(s, 1))
        .sum::<f64>();
    out
}

/// Relative residuals of the three cancellation identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CancellationResiduals {
    /// `-(1/lambda0) <m grad phi, u0> + (eps/lambda0) <grad phi (x) grad phi, grad u0> = 0`.
    pub force_work: f64,
    /// `<u0 . grad Delta phi, phi> - <grad phi (x) grad phi, grad u0> = 0`.
    pub transport: f64,
    /// `<n_i Delta phi + grad n_i . grad phi, phi> + <n_i, |grad phi|^2> = 0`, worst species.
    pub density: f64,
}

impl CancellationResiduals {
    pub fn max(&self) -> f64 {
        self.force_work.max(self.transport).max(self.density)
    }
}

fn relative(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x + y).abs() / scale
    }
}

/// `<grad phi (x) grad phi, grad u0> = sum_{a,b} int d_a phi d_b phi d_a u0_b`.
fn stress_pairing(grad_phi: &VectorField, u0: &VectorField) -> f64 {
    let mut total = 0.0;
    for (b, ub) in u0.components.iter().enumerate() {
        let gu = spectral::grad(ub);
        for (a, dau) in gu.components.iter().enumerate() {
            total += inner_product(&grad_phi.components[a].mul(&grad_phi.components[b]), dau);
        }
    }
    total
}

/// Evaluates the identities by grid quadrature (exact for band-limited fields).
pub fn cancellation_tests(state: &State, phi: &ScalarField, u0: &VectorField, model: &Model) -> CancellationResiduals {
    let c = &model.coeffs;
    let gphi = spectral::grad(phi);
    let stress = stress_pairing(&gphi, u0);

    let work = inner_product_vec(&gphi.mul_scalar(&state.m), u0);
    let force_work = relative(-work / c.lambda0, c.eps / c.lambda0 * stress);

    let grad_lap_phi = spectral::grad(&spectral::laplacian(phi));
    let advect = inner_product(&u0.dot(&grad_lap_phi), phi);
    let transport = relative(advect, -stress);

    let lap_phi = spectral::laplacian(phi);
    let gphi_sq = gphi.dot(&gphi);
    let mut density = 0.0f64;
    for n in &state.n {
        let flux = n.mul(&lap_phi).add(&spectral::grad(n).dot(&gphi));
        density = density.max(relative(inner_product(&flux, phi), inner_product(n, &gphi_sq)));
    }
    CancellationResiduals {
        force_work,
        transport,
        density,
    }
}

/// One monitor line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub dedt: f64,
    pub consistency: f64,
    pub max_n: f64,
    pub max_theta: f64,
    pub max_re_symbol: f64,
}

pub const MONITOR_HEADER: &str = "t,E_s,D_s,dEdt_est,consistency,max_abs_n,max_abs_theta,max_re_symbol";

/// Fills `dedt` by centered differences, one-sided at the ends.
pub fn fill_energy_rate(rows: &mut [MonitorRow]) {
    let k = rows.len();
    if k < 2 {
        rows.iter_mut().for_each(|r| r.dedt = 0.0);
        return;
    }
    let slope = |a: &MonitorRow, b: &MonitorRow| {
        let dt = b.t - a.t;
        if dt > 0.0 {
            (b.energy - a.energy) / dt
        } else {
            0.0
        }
    };
    let rates: Vec<f64> = (0..k)
        .map(|j| match j {
            0 => slope(&rows[0], &rows[1]),
            j if j == k - 1 => slope(&rows[k - 2], &rows[k - 1]),
            j => slope(&rows[j - 1], &rows[j + 1]),
        })
        .collect();
    rows.iter_mut().zip(rates).for_each(|(r, d)| r.dedt = d);
}

pub fn format_monitor(rows: &[MonitorRow]) -> String {
    let mut out = String::from(MONITOR_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t + 0.0,
            r.energy + 0.0,
            r.dissipation + 0.0,
            r.dedt + 0.0,
            r.consistency + 0.0,
            r.max_n + 0.0,
            r.max_theta + 0.0,
            r.max_re_symbol + 0.0
        ));
    }
    out
}

pub fn write_monitor(path: &Path, rows: &[MonitorRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(format_monitor(rows).as_bytes())?;
    Ok(())
}

pub fn read_monitor(path: &Path) -> Result<Vec<MonitorRow>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::validation(format!("{}:{}: bad number", path.display(), lineno + 1)))?;
        if v.len() != 8 {
            return Err(Error::validation(format!(
                "{}:{}: expected 8 columns",
                path.display(),
                lineno + 1
            )));
        }
        rows.push(MonitorRow {
            t: v[0],
            energy: v[1],
            dissipation: v[2],
            dedt: v[3],
            consistency: v[4],
            max_n: v[5],
            max_theta: v[6],
            max_re_symbol: v[7],
        });
    }
    Ok(rows)
}

/// Outcome of [`decay_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Energy nonincreasing at every recorded step within the slack.
    pub pass: bool,
    /// Row indices `k` where `E_{k+1}` exceeded `E_k (1 + 1e-8) + 1e-12`.
    pub violations: Vec<usize>,
    /// `max_k (E_k + sum_{j<k} D_j (t_{j+1} - t_j)) / E_0`; 0 for a zero trajectory.
    pub integral_ratio: f64,
    /// `integral_ratio <= 1.05`.
    pub integral_ok: bool,
    /// Median of `-dEdt / D_s` over rows with `D_s > 0`.
    pub rate_ratio_median: f64,
    /// Smallest `-dEdt / D_s` over rows with `D_s > 0`.
    pub rate_ratio_min: f64,
}

/// Checks monotone decay of the recorded energy and the integrated dissipation bound.
pub fn decay_audit(rows: &[MonitorRow]) -> Result<AuditReport> {
    if rows.len() < 3 {
        return Err(Error::validation(format!(
            "decay audit needs at least 3 monitor rows, got {}",
            rows.len()
        )));
    }
    let violations: Vec<usize> = rows
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].energy > w[0].energy * (1.0 + AUDIT_RTOL) + AUDIT_ATOL)
        .map(|(k, _)| k)
        .collect();

    let e0 = rows[0].energy;
    let mut integral = 0.0;
    let mut worst = 0.0f64;
    for k in 0..rows.len() {
        if k > 0 {
            integral += rows[k - 1].dissipation * (rows[k].t - rows[k - 1].t);
        }
        worst = worst.max(rows[k].energy + integral);
    }
    let integral_ratio = if e0 > 0.0 {
        worst / e0
    } else if worst > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    let mut ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.dissipation > 0.0)
        .map(|r| -r.dedt / r.dissipation)
        .collect();
    ratios.sort_by(f64::total_cmp);
    let (median, min) = if ratios.is_empty() {
        (0.0, 0.0)
    } else {
        (ratios[ratios.len() / 2], ratios[0])
    };

    Ok(AuditReport {
        pass: violations.is_empty(),
        violations,
        integral_ratio,
        integral_ok: integral_ratio <= 1.0 + INTEGRAL_SLACK,
        rate_ratio_median: median,
        rate_ratio_min: min,
    })
}

/// Verdict of an audit with failure classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayVerdict {
    Pass,
    /// Failed at `dt`, passed at `dt/10`.
    SchemeArtifact,
    /// Failed at both `dt` and `dt/10`, or the run aborted.
    Instability,
}

/// Audits `run(dt)`; on failure reruns at `dt/10` to tell a time-step artifact from
/// genuine growth. `run` returns the monitor rows or an error (abort counts as failure).
pub fn classify_decay(dt: f64, run: impl Fn(f64) -> Result<Vec<MonitorRow>>) -> DecayVerdict {
    let ok = |rows: Result<Vec<MonitorRow>>| rows.and_then(|r| decay_audit(&r)).map(|a| a.pass).unwrap_or(false);
    if ok(run(dt)) {
        DecayVerdict::Pass
    } else if ok(run(dt / 10.0)) {
        DecayVerdict::SchemeArtifact
    } else {
        DecayVerdict::Instability
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, e: f64, d: f64) -> MonitorRow {
        MonitorRow {
            t,
            energy: e,
            dissipation: d,
            dedt: 0.0,
            consistency: 0.0,
            max_n: 0.0,
            max_theta: 0.0,
            max_re_symbol: 0.0,
        }
    }

    #[test]
    fn audit_zero_trajectory() {
        let rows = vec![row(0.0, 0.0, 0.0), row(1.0, 0.0, 0.0), row(2.0, 0.0, 0.0)];
        let a = decay_audit(&rows).unwrap();
        assert!(a.pass && a.integral_ok);
    }

    #[test]
    fn audit_detects_growth() {
        let rows = vec![row(0.0, 1.0, 0.0), row(1.0, 0.9, 0.0), row(2.0, 1.0, 0.0)];
        let a = decay_audit(&rows).unwrap();
        assert!(!a.pass);
        assert_eq!(a.violations, vec![1]);
    }

    #[test]
    fn audit_integral_bound() {
        // exact exponential decay with D = -dE/dt
        let rows: Vec<MonitorRow> = (0..101)
            .map(|k| {
                let t = k as f64 * 0.01;
                row(t, (-t).exp(), (-t).exp())
            })
            .collect();
        let a = decay_audit(&rows).unwrap();
        assert!(a.pass && a.integral_ok, "{a:?}");
        // left sums overestimate the integral by about dt/2
        assert!(a.integral_ratio > 1.0 && a.integral_ratio < 1.01);
    }

    #[test]
    fn audit_needs_three_rows() {
        assert!(decay_audit(&[row(0.0, 1.0, 0.0), row(1.0, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn energy_rate_differences() {
        let mut rows: Vec<MonitorRow> = (0..5).map(|k| row(k as f64, (k * k) as f64, 0.0)).collect();
        fill_energy_rate(&mut rows);
        assert_eq!(rows[0].dedt, 1.0);
        assert_eq!(rows[2].dedt, 4.0);
        assert_eq!(rows[4].dedt, 7.0);
    }

    #[test]
    fn classification() {
        let good = vec![row(0.0, 1.0, 0.0), row(1.0, 0.5, 0.0), row(2.0, 0.25, 0.0)];
        let bad = vec![row(0.0, 1.0, 0.0), row(1.0, 2.0, 0.0), row(2.0, 4.0, 0.0)];
        assert_eq!(classify_decay(1.0, |_| Ok(good.clone())), DecayVerdict::Pass);
        assert_eq!(
            classify_decay(1.0, |dt| Ok(if dt < 0.5 { good.clone() } else { bad.clone() })),
            DecayVerdict::SchemeArtifact
        );
        assert_eq!(classify_decay(1.0, |_| Ok(bad.clone())), DecayVerdict::Instability);
    }

    #[test]
    fn monitor_round_trip() {
        let mut rows: Vec<MonitorRow> = (0..4).map(|k| row(k as f64 * 0.1, 1.0 / (k + 1) as f64, 0.3)).collect();
        fill_energy_rate(&mut rows);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_monitor(&p, &rows).unwrap();
        assert_eq!(read_monitor(&p).unwrap(), rows);
    }
}
