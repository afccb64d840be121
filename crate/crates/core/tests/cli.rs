use std::path::Path;
use std::process::{Command, Output};

use pnpf::admissibility::evaluate_H_conditions;
use pnpf::config::{parse_certificate, Table};
use pnpf::diagnostics::read_monitor;
use pnpf::model::{EquilibriumState, PhysicalCoefficients};
use tempfile::TempDir;

fn pnpf(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pnpf"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

const CERTIFIED: &str = "equilibrium.delta = 0.05, 0.05\nequilibrium.kappa = 0.05\n";

#[test]
fn check_accepts_sodium_chloride_viscosities() {
    let d = TempDir::new().unwrap();
    let o = pnpf(
        d.path(),
        "check",
        "coefficients.nu = 1.334, 2.032\nequilibrium.delta = 1, 1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(read(d.path(), "check.csv").contains("key_margin,4.31"));
}

#[test]
fn check_rejects_wide_viscosity_spread() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "check", "coefficients.nu = 1, 10\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    let csv = read(d.path(), "check.csv");
    let line = csv.lines().find(|l| l.starts_with("key_margin")).unwrap();
    let margin: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
    // nu = 20/11, (1 - 10/nu)^2 = 20.25
    assert!((margin - (0.5 - 20.25)).abs() < 1e-12);
    assert!(line.ends_with("fail"));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    for text in [
        "grid.M = \n",
        "this line has no assignment\n",
        "coefficients.z = -1, one\n",
        "nope = 1\n",
    ] {
        let o = pnpf(d.path(), "check", text, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains("config error"), "{}", stderr(&o));
    }
    let o = Command::new(env!("CARGO_BIN_EXE_pnpf"))
        .arg("frobnicate")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_pnpf"))
        .args(["check", "--config", "/nonexistent/x.cfg"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certificate_survives_reload() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "certify", CERTIFIED, &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = read(d.path(), "certificate.txt");
    let cert = parse_certificate(&text, 2).unwrap();
    let delta: Vec<f64> = Table::parse(&text)
        .unwrap()
        .floats("equilibrium.delta")
        .unwrap()
        .unwrap();
    let coeffs = PhysicalCoefficients::unit_binary();
    let eq = EquilibriumState::new(&coeffs, delta).unwrap();
    assert!(evaluate_H_conditions(&coeffs, &eq, &cert).unwrap().admissible);

    // pinning it skips the search and only verifies
    let pinned = format!("{text}\n");
    let o = pnpf(d.path(), "certify", &pinned, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pinned certificate verified"));
}

#[test]
fn pinned_inadmissible_certificate_fails() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "certify", CERTIFIED, &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = read(d.path(), "certificate.txt");
    // a tiny temperature weight breaks the temperature condition
    let broken: String = text
        .lines()
        .map(|l| {
            if l.starts_with("certificate.chi_theta") {
                "certificate.chi_theta = 1e-9".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let o = pnpf(d.path(), "certify", &broken, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("best margins"));
}

#[test]
fn certify_rejects_charged_equilibrium() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "certify", "equilibrium.delta = 0.5, 0.4\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("electroneutrality"));
}

#[test]
fn spectrum_of_certified_state() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "spectrum", CERTIFIED, &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = read(d.path(), "spectrum.csv");
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r[1] <= 1e-10));
    // |xi|^2 = 0: three zeros and -(1/eps) sum z_i^2 delta_i / nu_i = -0.1
    let first = &rows[0];
    assert_eq!(first[0], 0.0);
    let mut re: Vec<f64> = first[2..].chunks(2).map(|c| c[0]).collect();
    re.sort_by(f64::total_cmp);
    assert!((re[0] + 0.1).abs() < 1e-12);
    assert!(re[1..].iter().all(|x| x.abs() < 1e-12));

    let o = pnpf(d.path(), "spectrum", &format!("{CERTIFIED}spectrum.points = 0\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_initial_data_gives_zero_monitor() {
    let d = TempDir::new().unwrap();
    let o = pnpf(
        d.path(),
        "simulate",
        &format!("{CERTIFIED}init.energy = 0\nsolver.T_end = 0.05\ngrid.M = 32\n"),
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let rows = read_monitor(&d.path().join("out/monitor.csv")).unwrap();
    assert_eq!(rows.len(), 51);
    assert!(rows
        .iter()
        .all(|r| r.energy == 0.0 && r.dissipation == 0.0 && r.max_n == 0.0 && r.max_theta == 0.0));
}

#[test]
fn small_data_run_passes_audit() {
    let d = TempDir::new().unwrap();
    let cfg =
        format!("{CERTIFIED}grid.M = 64\nsolver.T_end = 0.5\nsolver.output_every = 10\noutput.snapshots = true\n");
    let o = pnpf(d.path(), "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(read(d.path(), "report.txt").contains("decay audit: PASS"));
    // one snapshot per field per monitor row
    let snaps = std::fs::read_dir(d.path().join("out/snapshots")).unwrap().count();
    assert_eq!(snaps, 4 * 51);
}

#[test]
fn large_data_is_refused() {
    let d = TempDir::new().unwrap();
    let o = pnpf(d.path(), "simulate", &format!("{CERTIFIED}init.energy = 10\n"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("aborted"));
}

#[test]
fn energy_growth_trips_the_abort() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{CERTIFIED}init.energy = 1e-4\nsolver.blowup_factor = 1e-3\nsolver.T_end = 0.1\n");
    let o = pnpf(d.path(), "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("INSTABILITY"));
}

#[test]
fn runs_are_deterministic() {
    let d = TempDir::new().unwrap();
    let cfg = format!("{CERTIFIED}solver.T_end = 0.1\ninit.seed = 5\n");
    let mut outs = Vec::new();
    for _ in 0..2 {
        let o = pnpf(d.path(), "simulate", &cfg, &["--quiet"]);
        assert_eq!(o.status.code(), Some(0));
        assert!(o.stdout.is_empty());
        outs.push(std::fs::read(d.path().join("out/monitor.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let o = pnpf(d.path(), "simulate", &cfg, &["--quiet", "--seed", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(std::fs::read(d.path().join("out/monitor.csv")).unwrap(), outs[0]);
}
