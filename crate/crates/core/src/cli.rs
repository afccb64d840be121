//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (failed assumptions, no certificate,
//! unstable spectrum, aborted or non-decaying run), 2 usage or configuration error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::admissibility::{
    construct_certificate, evaluate_H_conditions, sample_equilibria, search_certificate, AdmissibilityReport,
    Certificate,
};
use crate::config::{fmt_float, fmt_list, format_certificate, EquilibriumSpec, RunConfig};
use crate::diagnostics::{decay_audit, write_monitor};
use crate::dynamics::{default_xi_grid, random_initial_state, simulate, RunOutcome, SimulationOptions, State};
use crate::error::{Error, Result};
use crate::model::{check_global_assumptions, electroneutrality_residual, EquilibriumState, Model, NEUTRALITY_RTOL};
use crate::spectral::Grid;

/// Largest real part accepted as linearly stable.
pub const SPECTRUM_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "pnpf",
    about = "Stability certificates and pseudo-spectral runs for the PNPF system",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random draw; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the human-readable report on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the standing assumptions on the coefficients (and the equilibrium, if given).
    Check,
    /// Find and verify a stability certificate.
    Certify,
    /// Scan the linearized spectrum over |xi|^2.
    Spectrum,
    /// Run the nonlinear solver and audit the energy decay.
    Simulate,
}

/// What a command produced: exit code, human-readable report, files written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
    pub files: Vec<PathBuf>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Parses arguments, runs the command, prints the report and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let quiet = cli.quiet;
    match run(&cli) {
        Ok(out) => {
            if !quiet {
                print!("{}", out.report);
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Loads the configuration named by the flags and runs the command.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = cli.seed {
        cfg.override_seed(s);
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    run_command(cli.command, &cfg)
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    match cmd {
        Command::Check => cmd_check(cfg),
        Command::Certify => cmd_certify(cfg),
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, contents)?;
    files.push(p);
    Ok(())
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let c = &cfg.coeffs;
    let r = check_global_assumptions(c);
    let mut csv = String::from("check,value,status\n");
    let mut rep = String::new();
    let _ = writeln!(csv, "valence_ordering,,{}", pass(r.valence_ordering));
    let _ = writeln!(csv, "positivity,,{}", pass(r.positivity));
    let _ = writeln!(rep, "valence ordering: {}", r.valence_detail.as_deref().unwrap_or("ok"));
    let _ = writeln!(rep, "positivity: {}", r.positivity_detail.as_deref().unwrap_or("ok"));
    for (i, d) in r.deviations.iter().enumerate() {
        let _ = writeln!(csv, "deviation_{},{},", i + 1, fmt_float(*d));
        let _ = writeln!(rep, "(1 - nu_{}/nu)^2 = {d:.6}", i + 1);
    }
    let _ = writeln!(csv, "max_deviation,{},", fmt_float(r.max_dev));
    let _ = writeln!(csv, "key_margin,{},{}", fmt_float(r.key_margin), pass(r.key_assumption));
    let _ = writeln!(
        rep,
        "max deviation {:.6} < 1/2: {} (margin {:.6})",
        r.max_dev,
        pass(r.key_assumption),
        r.key_margin
    );
    let mut ok = r.all_pass();
    if let EquilibriumSpec::Fixed(delta) = &cfg.equilibrium {
        let res = electroneutrality_residual(&c.z, delta)?;
        let scale = c.z.iter().zip(delta).map(|(z, d)| (z * d).abs()).fold(0.0, f64::max);
        let positive = delta.iter().all(|d| *d > 0.0);
        let neutral = res.abs() <= NEUTRALITY_RTOL * scale;
        let _ = writeln!(
            csv,
            "electroneutrality,{},{}",
            fmt_float(res),
            pass(neutral && positive)
        );
        let _ = writeln!(rep, "sum z_i delta_i = {res:e}: {}", pass(neutral && positive));
        ok &= neutral && positive;
    }
    let mut files = Vec::new();
    write(&cfg.output.dir, "check.csv", &csv, &mut files)?;
    let _ = writeln!(
        rep,
        "{}",
        if ok {
            "all assumptions hold"
        } else {
            "assumptions FAILED"
        }
    );
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        report: rep,
        files,
    })
}

/// The configured equilibrium, given or sampled from the constructive window.
pub fn resolve_equilibrium(cfg: &RunConfig) -> Result<EquilibriumState> {
    match &cfg.equilibrium {
        EquilibriumSpec::Fixed(d) => EquilibriumState::new(&cfg.coeffs, d.clone()),
        EquilibriumSpec::Sampled { seed } => {
            let p = cfg.construction;
            let mut v = sample_equilibria(&cfg.coeffs, p.kappa, p.eps0, p.lambda, 1, *seed)?;
            Ok(v.remove(0))
        }
    }
}

/// How the certificate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateSource {
    Pinned,
    Constructed,
    Searched,
}

/// The pinned certificate if there is one, otherwise the constructive one, otherwise a
/// search. The result is always verified against the conditions.
pub fn resolve_certificate(
    cfg: &RunConfig,
    eq: &EquilibriumState,
) -> Result<(Certificate, AdmissibilityReport, CertificateSource)> {
    let c = &cfg.coeffs;
    if let Some(cert) = &cfg.certificate {
        let report = evaluate_H_conditions(c, eq, cert)?;
        if !report.admissible {
            return Err(Error::Inadmissible(Box::new(report)));
        }
        return Ok((cert.clone(), report, CertificateSource::Pinned));
    }
    let p = cfg.construction;
    let (cert, source) = match construct_certificate(c, eq, p.kappa, p.eps0, p.lambda) {
        Ok(cert) => (cert, CertificateSource::Constructed),
        Err(Error::Construction(_)) => (
            search_certificate(c, eq, cfg.search.budget, cfg.search.seed)?,
            CertificateSource::Searched,
        ),
        Err(e) => return Err(e),
    };
    let report = evaluate_H_conditions(c, eq, &cert)?;
    Ok((cert, report, source))
}

fn margins_csv(r: &AdmissibilityReport) -> String {
    let mut s = String::from("condition,absolute,normalized\n");
    for (name, m) in [("H1", &r.h1), ("H2", &r.h2), ("H3", &r.h3)] {
        let _ = writeln!(s, "{name},{},{}", fmt_float(m.absolute), fmt_float(m.normalized));
    }
    for (i, m) in r.h4.iter().enumerate() {
        let _ = writeln!(s, "H4_{},{},{}", i + 1, fmt_float(m.absolute), fmt_float(m.normalized));
    }
    s
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<Outcome> {
    let eq = resolve_equilibrium(cfg)?;
    let mut files = Vec::new();
    let dir = &cfg.output.dir;
    let (cert, report, source) = match resolve_certificate(cfg, &eq) {
        Ok(x) => x,
        Err(Error::SearchExhausted(best)) | Err(Error::Inadmissible(best)) => {
            write(dir, "admissibility.csv", &margins_csv(&best), &mut files)?;
            let report = format!("no admissible certificate; best margins: {}\n", best.summary());
            return Ok(Outcome { code: 1, report, files });
        }
        Err(e) => return Err(e),
    };
    let mut text = format!("equilibrium.delta = {}\n", fmt_list(&eq.delta));
    text.push_str(&format_certificate(&cert));
    write(dir, "certificate.txt", &text, &mut files)?;
    write(dir, "admissibility.csv", &margins_csv(&report), &mut files)?;
    let how = match source {
        CertificateSource::Pinned => "pinned certificate verified",
        CertificateSource::Constructed => "certificate constructed",
        CertificateSource::Searched => "certificate found by search",
    };
    let rep = format!(
        "delta = [{}]\n{how}: {}\nsmallest normalized margin {:e}\n",
        fmt_list(&eq.delta),
        report.summary(),
        report.min_normalized_margin()
    );
    Ok(Outcome {
        code: if report.admissible { 0 } else { 1 },
        report: rep,
        files,
    })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let eq = resolve_equilibrium(cfg)?;
    let model = Model::new(cfg.coeffs.clone(), eq.delta)?;
    let sp = cfg.spectrum;
    let xi = default_xi_grid(sp.points, sp.xi_min, sp.xi_max);
    let scan = crate::dynamics::spectral_stability_scan(&model, &xi)?;
    let nvar = model.species() + 2;
    let mut csv = String::from("xi_sq,max_re");
    for j in 1..=nvar {
        let _ = write!(csv, ",re_{j},im_{j}");
    }
    csv.push('\n');
    for (q, ev) in &scan.rows {
        let _ = write!(csv, "{},{}", fmt_float(*q), fmt_float(ev[0].re));
        for z in ev {
            let _ = write!(csv, ",{},{}", fmt_float(z.re), fmt_float(z.im));
        }
        csv.push('\n');
    }
    let mut files = Vec::new();
    write(&cfg.output.dir, "spectrum.csv", &csv, &mut files)?;
    let stable = scan.max_re <= SPECTRUM_TOL;
    let rep = format!(
        "max Re lambda = {:e} at |xi|^2 = {:e} over {} points: {}\n",
        scan.max_re,
        scan.at_xi_sq,
        xi.len(),
        if stable { "stable" } else { "UNSTABLE" }
    );
    Ok(Outcome {
        code: if stable { 0 } else { 1 },
        report: rep,
        files,
    })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let eq = resolve_equilibrium(cfg)?;
    let (cert, _, _) = match resolve_certificate(cfg, &eq) {
        Ok(x) => x,
        Err(Error::SearchExhausted(best)) => {
            let report = format!("refusing to run: no admissible certificate ({})\n", best.summary());
            return Ok(Outcome {
                code: 1,
                report,
                files: vec![],
            });
        }
        Err(e) => return Err(e),
    };
    let model = Model::new(cfg.coeffs.clone(), eq.delta)?;
    let g = cfg.grid;
    let grid = Grid::new(g.dim, g.m, g.l)?;
    let s = cfg.solver;
    let init = if cfg.init.energy == 0.0 {
        State::zeros(&grid, model.species())
    } else {
        random_initial_state(
            &model,
            &grid,
            &cert,
            s.s,
            cfg.init.energy,
            cfg.init.modes,
            cfg.init.seed,
        )?
    };
    let mut opts = SimulationOptions::new(s.dt, s.t_end, s.scheme);
    opts.s = s.s;
    opts.output_every = s.output_every;
    opts.energy_threshold = s.energy_threshold;
    opts.blowup_factor = s.blowup_factor;
    if cfg.output.snapshots {
        opts.snapshot_dir = Some(cfg.output.dir.join("snapshots"));
    }
    let traj = match simulate(&init, &model, &cert, &opts) {
        Ok(t) => t,
        Err(Error::Refused(msg)) => {
            return Ok(Outcome {
                code: 1,
                report: format!("aborted: {msg}\n"),
                files: vec![],
            })
        }
        Err(e) => return Err(e),
    };
    let mut files = Vec::new();
    let monitor = cfg.output.dir.join("monitor.csv");
    write_monitor(&monitor, &traj.rows)?;
    files.push(monitor);
    files.extend(traj.snapshots.iter().cloned());

    let mut rep = String::new();
    let mut ok = true;
    match &traj.outcome {
        RunOutcome::Completed => {
            let _ = writeln!(
                rep,
                "completed {} steps to t = {}",
                traj.steps,
                fmt_float(traj.last_good.t)
            );
        }
        RunOutcome::Instability { t, energy } => {
            ok = false;
            let _ = writeln!(
                rep,
                "INSTABILITY: energy {energy:e} at t = {t} exceeds {:e} times the initial energy",
                s.blowup_factor
            );
        }
        RunOutcome::Degenerate { t, message } => {
            ok = false;
            let _ = writeln!(rep, "DEGENERATE at t = {t}: {message}");
        }
    }
    if traj.completed() && traj.rows.len() >= 3 {
        let a = decay_audit(&traj.rows)?;
        ok &= a.pass && a.integral_ok;
        let _ = writeln!(
            rep,
            "decay audit: {} (monotone violations {}, integral ratio {}, median -dE/dt / D {})",
            if a.pass && a.integral_ok { "PASS" } else { "FAIL" },
            a.violations.len(),
            fmt_float(a.integral_ratio),
            fmt_float(a.rate_ratio_median)
        );
    }
    let last = traj.rows.last().expect("monitor has the initial row");
    let _ = writeln!(
        rep,
        "E_s(0) = {}, E_s(end) = {}",
        fmt_float(traj.rows[0].energy),
        fmt_float(last.energy)
    );
    write(&cfg.output.dir, "report.txt", &rep, &mut files)?;
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        report: rep,
        files,
    })
}
