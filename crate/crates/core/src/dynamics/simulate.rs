//! Fixed-step runs with energy monitoring.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::flow::solvent_velocity;
use super::stepper::{Scheme, Stepper};
use super::symbol::spectral_stability_scan;
use super::{charge_of, State};
use crate::admissibility::{dissipation_coefficients, Certificate, DissipationCoefficients};
use crate::diagnostics::{dissipation, energy, fill_energy_rate, MonitorRow};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spectral::{self, random_band_limited, Grid, ScalarField};

/// A run aborts once the energy exceeds this multiple of its initial value.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOptions {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Sobolev index of the monitored energy.
    pub s: u32,
    /// Record a monitor row every this many steps (the final step is always recorded).
    pub output_every: usize,
    /// Initial energies above this are refused.
    pub energy_threshold: f64,
    pub blowup_factor: f64,
    /// Write field snapshots at every monitor row into this directory.
    pub snapshot_dir: Option<PathBuf>,
}

impl SimulationOptions {
    pub fn new(dt: f64, t_end: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            scheme,
            s: 3,
            output_every: 1,
            energy_threshold: 1.0,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            snapshot_dir: None,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Energy left the small-data regime.
    Instability {
        t: f64,
        energy: f64,
    },
    /// A density or the heat capacity stopped being positive.
    Degenerate {
        t: f64,
        message: String,
    },
}

/// Monitor rows plus the last state that passed every check.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<MonitorRow>,
    pub last_good: State,
    pub outcome: RunOutcome,
    pub steps: usize,
    pub snapshots: Vec<PathBuf>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.outcome == RunOutcome::Completed
    }

    /// Converts an aborted run into the matching error.
    pub fn into_result(self, blowup_factor: f64) -> Result<Self> {
        match &self.outcome {
            RunOutcome::Completed => Ok(self),
            RunOutcome::Instability { t, energy } => Err(Error::Instability {
                t: *t,
                energy: *energy,
                factor: blowup_factor,
            }),
            RunOutcome::Degenerate { message, .. } => Err(Error::Refused(message.clone())),
        }
    }
}

struct Monitor<'a> {
    model: &'a Model,
    cert: &'a Certificate,
    dcoef: DissipationCoefficients,
    s: u32,
    max_re: f64,
}

impl Monitor<'_> {
    fn row(&self, state: &State) -> Result<MonitorRow> {
        let c = &self.model.coeffs;
        let m0 = state.m.map({
            let mean = state.m.mean();
            move |v| v - mean
        });
        let phi = spectral::inv_neg_laplacian(&m0)?.scale(1.0 / c.eps);
        let u0 = solvent_velocity(&spectral::grad(&phi).mul_scalar(&state.m).dealias(), c.lambda0)?;
        Ok(MonitorRow {
            t: state.t,
            energy: energy(state, &phi, self.cert, self.model, self.s),
            dissipation: dissipation(state, &phi, &u0, &self.dcoef, self.s),
            dedt: 0.0,
            consistency: state.m.sub(&charge_of(&state.n, &c.z)).norm(),
            max_n: state.n.iter().map(|f| f.max_abs()).fold(0.0, f64::max),
            max_theta: state.theta.max_abs(),
            max_re_symbol: self.max_re,
        })
    }
}

/// Integrates from `init` to `t_end`, recording monitor rows.
///
/// Refuses if the certificate is not admissible or the initial energy is above
/// `energy_threshold`. A blow-up or a degenerate state stops the run early; the
/// trajectory then carries the last good state and the reason.
pub fn simulate(init: &State, model: &Model, cert: &Certificate, opts: &SimulationOptions) -> Result<Trajectory> {
    if !(opts.t_end >= 0.0) || !opts.t_end.is_finite() {
        return Err(Error::validation(format!("T_end = {} must be nonnegative", opts.t_end)));
    }
    if opts.output_every == 0 {
        return Err(Error::validation("output_every must be at least 1"));
    }
    if init.species() != model.species() {
        return Err(Error::validation(format!(
            "state has {} species, model {}",
            init.species(),
            model.species()
        )));
    }
    let grid = init.grid().clone();
    let dcoef = dissipation_coefficients(&model.coeffs, &model.eq, cert)?;
    // symbol scan over the distinct resolved wavenumbers of this grid
    let mut xis: Vec<f64> = (0..grid.len())
        .filter(|k| grid.is_resolved(*k))
        .map(|k| grid.xi_sq(k))
        .collect();
    xis.sort_by(f64::total_cmp);
    xis.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let max_re = spectral_stability_scan(model, &xis)?.max_re;

    let monitor = Monitor {
        model,
        cert,
        dcoef,
        s: opts.s,
        max_re,
    };
    let stepper = Stepper::new(model, &grid, opts.dt, opts.scheme)?;

    let mut state = init.clone();
    let first = monitor.row(&state)?;
    if first.energy > opts.energy_threshold {
        return Err(Error::Refused(format!(
            "initial energy {:e} exceeds the threshold {:e}",
            first.energy, opts.energy_threshold
        )));
    }
    let e0 = first.energy;
    let mut rows = vec![first];
    let mut snapshots = Vec::new();
    let snap = |state: &State, idx: usize, snapshots: &mut Vec<PathBuf>| -> Result<()> {
        if let Some(dir) = &opts.snapshot_dir {
            std::fs::create_dir_all(dir)?;
            let mut named: Vec<(String, &ScalarField)> = state
                .n
                .iter()
                .enumerate()
                .map(|(i, f)| (format!("n{}", i + 1), f))
                .collect();
            named.push(("theta".into(), &state.theta));
            named.push(("m".into(), &state.m));
            for (name, f) in named {
                let p = dir.join(format!("{name}_{idx:06}.csv"));
                spectral::write_snapshot(&p, f, &name, state.t)?;
                snapshots.push(p);
            }
        }
        Ok(())
    };
    snap(&state, 0, &mut snapshots)?;

    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut outcome = RunOutcome::Completed;
    let mut done = 0;
    for k in 1..=steps {
        let next = match stepper.step(&state) {
            Ok(s) => s,
            Err(Error::Degenerate { field, index, value }) => {
                outcome = RunOutcome::Degenerate {
                    t: state.t,
                    message: format!("{field} = {value:e} at grid point {index}"),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        // keep time exact rather than accumulated
        let mut next = next;
        next.t = k as f64 * opts.dt;
        if !next.is_finite() {
            outcome = RunOutcome::Instability {
                t: next.t,
                energy: f64::INFINITY,
            };
            break;
        }
        done = k;
        if k % opts.output_every == 0 || k == steps {
            let r = monitor.row(&next)?;
            if r.energy > opts.blowup_factor * e0 && r.energy > 0.0 {
                outcome = RunOutcome::Instability {
                    t: r.t,
                    energy: r.energy,
                };
                rows.push(r);
                break;
            }
            rows.push(r);
            snap(&next, rows.len() - 1, &mut snapshots)?;
        }
        state = next;
    }
    fill_energy_rate(&mut rows);
    Ok(Trajectory {
        rows,
        last_good: state,
        outcome,
        steps: done,
        snapshots,
    })
}

/// Band-limited random perturbation with `|k|_inf <= modes`, zero-mean species, a random
/// temperature, `m = sum z_i n_i`, scaled so that its energy equals `target_energy`.
pub fn random_initial_state(
    model: &Model,
    grid: &Grid,
    cert: &Certificate,
    s: u32,
    target_energy: f64,
    modes: i64,
    seed: u64,
) -> Result<State> {
    if modes < 1 {
        return Err(Error::validation(format!("init.modes = {modes} must be at least 1")));
    }
    if modes > (grid.m() / 3) as i64 {
        return Err(Error::validation(format!(
            "init.modes = {modes} exceeds the resolved band M/3 = {}",
            grid.m() / 3
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: Vec<ScalarField> = (0..model.species())
        .map(|_| random_band_limited(grid, modes, &mut rng))
        .collect();
    let theta = random_band_limited(grid, modes, &mut rng);
    let state = State::from_species(n, theta, &model.coeffs.z)?;
    if target_energy == 0.0 {
        return Ok(State::zeros(grid, model.species()));
    }
    let phi = spectral::inv_neg_laplacian(&state.m)?.scale(1.0 / model.coeffs.eps);
    let e = energy(&state, &phi, cert, model, s);
    if !(e > 0.0) {
        return Err(Error::validation("random initial state has zero energy"));
    }
    Ok(state.scale((target_energy / e).sqrt()))
}
