//! Run orchestration: turns a validated [`RunConfig`] into artifacts on disk
//! (canonical config echo, diagnostics time series, summary, checkpoints),
//! classifies the trajectory against the threshold dichotomy, executes
//! parameter sweeps in parallel, and exports per-panel plot data.
//!
//! Artifact layout under the configured output directory:
//!
//! ```text
//! resolved_config.toml      canonical echo of the configuration (hash input)
//! series.csv                one row per diagnostics record
//! summary.json              RunSummary (deterministic bytes; wall time excluded)
//! checkpoints/              checkpoint_<step>.ckpt, final.ckpt, lowref.bin
//! plot/                     written on demand by `emit_plot_data`
//! sweep.csv                 written by `sweep` in the base output directory
//! ```
//!
//! Reruns of one configuration produce byte-identical `series.csv` and
//! `summary.json`; a resumed run continues the numbers of the uninterrupted
//! one bit-exactly (see `lowref.bin` notes on [`run`]).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, InitialData, Pulse, RunConfig};
use crate::diagnostics::{
    self, classify_run, collect_record, free_profile_converged, free_pullback,
    prepare_lowfreq_reference, state_diff_energy_norm, state_energy_norm, Behavior,
    DiagnosticsRecord, LowFreqRef, Verdict,
};
use crate::evolution::{
    self, read_checkpoint, Checkpoint, CheckpointPlan, EvolveConfig, SpongeConfig, SystemState,
    Termination,
};
use crate::functionals::{self, NormKind, VarIndex};
use crate::grid::{make_grid, RadialField, RadialGrid, SpectralField};
use crate::ground_state::{self, GroundState};
use crate::{Error, Result};

/// Fixed CSV columns, in order, before the optional local-virial columns.
pub const CSV_COLUMNS: [&str; 20] = [
    "step",
    "t",
    "E",
    "J_of_u",
    "K0",
    "K2",
    "I_virial",
    "I_rate_analytic",
    "I1",
    "I1_deriv",
    "I1_rhs",
    "I2",
    "I2_deriv",
    "L4_of_u",
    "H1_of_u",
    "L2_of_u",
    "N_L2",
    "Ndot_Hm1",
    "defect_L2",
    "scattering_residual",
];

/// Everything `summary.json` records about a finished run.  Serialization is
/// deterministic (fixed field order, shortest round-trip floats); the wall
/// time is measured but deliberately kept out of the file so that reruns of
/// one configuration are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// SHA-256 of the canonical configuration echo.
    pub config_sha256: String,
    /// Domain radius.
    pub r_max: f64,
    /// Grid intervals.
    pub n: usize,
    /// Ion sound speed.
    pub alpha: f64,
    /// Step size.
    pub dt: f64,
    /// Horizon time.
    pub t_max: f64,
    /// Threshold J(Q) certified on the run grid.
    pub j_q: f64,
    /// Energy E at the run's starting state.
    pub e0: f64,
    /// K₀(u) at the starting state.
    pub k0_initial: f64,
    /// K₂(u) at the starting state.
    pub k2_initial: f64,
    /// E / J(Q): below 1 the dichotomy applies.
    pub e0_over_jq: f64,
    /// Dyadic exponent of the low-frequency reference P_{≤−k}n₀.
    pub lowfreq_k: u32,
    /// Achieved reference norm ε₀.
    pub lowfreq_eps0: f64,
    /// How the evolution ended.
    pub termination: Termination,
    /// Time of the final state.
    pub termination_time: f64,
    /// Completed steps.
    pub steps_completed: u64,
    /// Number of diagnostics records written.
    pub records: u64,
    /// Peak ‖u‖_{H¹} along the trajectory.
    pub peak_h1: f64,
    /// Energy norm of the first free-flow pullback sample.
    pub scattering_initial_norm: Option<f64>,
    /// Successive pullback differences in the energy norm.
    pub scattering_residuals: Vec<f64>,
    /// Last pullback difference, if any were sampled.
    pub final_scattering_residual: Option<f64>,
    /// Whether the pullback samples satisfied the convergence criterion
    /// (monotone tail, final below 1 % of the initial norm); `None` when the
    /// proxy was unavailable (sponge active or nothing sampled).
    pub scattering_converged: Option<bool>,
    /// Blow-up crossing time at the configured dt.
    pub blowup_crossing_time: Option<f64>,
    /// Crossing time of the dt/2 confirmation rerun.
    pub blowup_crossing_time_half_dt: Option<f64>,
    /// Crossing times agree within 5 %?  `None` when confirmation was
    /// disabled, impossible (resumed run), or no blow-up occurred.
    pub blowup_confirmed: Option<bool>,
    /// All second differences of I₂^{−1/4} nonpositive (≤ 1e−6) over the
    /// final quarter of the records?  Evaluated for blow-up runs.
    pub i2_concave_final_quarter: Option<bool>,
    /// Dichotomy verdict.
    pub verdict: Verdict,
    /// Wall-clock seconds (measured, not serialized).
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// In-memory result of [`run`]: the summary, the records, and where the
/// artifacts went.
#[derive(Debug)]
pub struct RunOutput {
    /// Summary as written to `summary.json`.
    pub summary: RunSummary,
    /// All diagnostics records, in order.
    pub records: Vec<DiagnosticsRecord>,
    /// Output directory holding the artifacts.
    pub out_dir: PathBuf,
    /// Advisory messages produced while running (e.g. a resumed run that had
    /// to rebuild its low-frequency reference).
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// initial data
// ---------------------------------------------------------------------------

fn gaussian_field(grid: &Arc<RadialGrid>, p: Pulse) -> RadialField {
    RadialField::from_profile(grid, |r| p.amplitude * (-r * r / (p.width * p.width)).exp())
}

fn gaussian_state(
    grid: &Arc<RadialGrid>,
    alpha: f64,
    amplitude: f64,
    width: f64,
    udot: Option<Pulse>,
    n: Option<Pulse>,
    ndot: Option<Pulse>,
) -> Result<SystemState> {
    let u = gaussian_field(grid, Pulse { amplitude, width });
    let udot = match udot {
        Some(p) => gaussian_field(grid, p),
        None => RadialField::zeros(grid),
    };
    let n = match n {
        Some(p) => gaussian_field(grid, p),
        None => {
            // default density n₀ = u₀²; reduced form r·(w/r)² = w²/r
            let wn: Vec<f64> = u
                .values()
                .iter()
                .zip(grid.nodes())
                .map(|(&w, &r)| w * w / r)
                .collect();
            RadialField::from_reduced(grid, wn)?
        }
    };
    let ndot = match ndot {
        Some(p) => gaussian_field(grid, p),
        None => RadialField::zeros(grid),
    };
    SystemState::new(0.0, u, udot, n, ndot, alpha)
}

enum Start {
    Fresh(SystemState),
    Resume(Box<Checkpoint>, PathBuf),
}

fn synthesize_start(cfg: &RunConfig, grid: &Arc<RadialGrid>, gs: &GroundState) -> Result<Start> {
    match &cfg.initial {
        InitialData::GroundStateScaled { lambda, sign } => Ok(Start::Fresh(
            ground_state::ground_state_data(gs, *lambda, *sign, cfg.alpha)?,
        )),
        InitialData::Gaussian { amplitude, width, udot, n, ndot } => Ok(Start::Fresh(
            gaussian_state(grid, cfg.alpha, *amplitude, *width, *udot, *n, *ndot)?,
        )),
        InitialData::FromCheckpoint { path } => {
            let ck = read_checkpoint(path)?;
            ck.grid.check_same(grid, "checkpoint vs configured grid")?;
            if ck.alpha != cfg.alpha {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint carries alpha = {}, configuration says {}",
                    ck.alpha, cfg.alpha
                )));
            }
            if ck.dt != cfg.dt {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint was advanced with dt = {}, configuration says {}; \
                     resuming with a different step cannot reproduce the trajectory",
                    ck.dt, cfg.dt
                )));
            }
            let dir = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok(Start::Resume(Box::new(ck), dir))
        }
    }
}

// ---------------------------------------------------------------------------
// run-level reference file (low-frequency reference + scattering baseline)
// ---------------------------------------------------------------------------

const RUNREF_MAGIC: &[u8; 8] = b"KGZRREF1";

/// Run-level reference data that must survive a checkpoint/resume cycle for
/// the resumed diagnostics to be bit-exact: the frozen low-frequency
/// reference P_{≤−k}n₀ behind I₂, and the energy norm of the first free-flow
/// pullback sample behind the scattering verdict.
struct RunReference {
    lowref: LowFreqRef,
    scatter_initial_norm: Option<f64>,
}

fn write_run_reference(path: &Path, rf: &RunReference) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(RUNREF_MAGIC);
    buf.extend_from_slice(&rf.lowref.k.to_le_bytes());
    buf.extend_from_slice(&rf.lowref.eps0.to_le_bytes());
    match rf.scatter_initial_norm {
        Some(v) => {
            buf.push(1);
            buf.extend_from_slice(&v.to_le_bytes());
        }
        None => {
            buf.push(0);
            buf.extend_from_slice(&0.0f64.to_le_bytes());
        }
    }
    let coeffs = rf.lowref.reference.coeffs();
    buf.extend_from_slice(&(coeffs.len() as u64).to_le_bytes());
    for &c in coeffs {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_run_reference(path: &Path, grid: &Arc<RadialGrid>) -> Result<RunReference> {
    let data = fs::read(path)?;
    let fixed = RUNREF_MAGIC.len() + 4 + 8 + 1 + 8 + 8;
    if data.len() < fixed + 32 {
        return Err(Error::Checkpoint(format!(
            "{}: too short to be a run reference",
            path.display()
        )));
    }
    let (body, tail) = data.split_at(data.len() - 32);
    if Sha256::digest(body).as_slice() != tail {
        return Err(Error::Checkpoint(format!(
            "{}: checksum mismatch",
            path.display()
        )));
    }
    if &body[..8] != RUNREF_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a run reference file",
            path.display()
        )));
    }
    let k = u32::from_le_bytes(body[8..12].try_into().unwrap());
    let eps0 = f64::from_le_bytes(body[12..20].try_into().unwrap());
    let has_norm = body[20] != 0;
    let norm_v = f64::from_le_bytes(body[21..29].try_into().unwrap());
    let len = u64::from_le_bytes(body[29..37].try_into().unwrap()) as usize;
    if body.len() != fixed + 8 * len {
        return Err(Error::Checkpoint(format!(
            "{}: length mismatch",
            path.display()
        )));
    }
    if len != grid.len() {
        return Err(Error::Checkpoint(format!(
            "{}: reference holds {len} coefficients, grid wants {}",
            path.display(),
            grid.len()
        )));
    }
    let coeffs: Vec<f64> = body[37..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RunReference {
        lowref: LowFreqRef {
            k,
            eps0,
            reference: SpectralField::from_coeffs(grid, coeffs)?,
        },
        scatter_initial_norm: has_norm.then_some(norm_v),
    })
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

fn fmt_cell(x: f64) -> String {
    format!("{x}")
}

fn csv_header(radii: &[f64]) -> String {
    let mut h = CSV_COLUMNS.join(",");
    for &rc in radii {
        h.push_str(&format!(",local_virial_Rc{rc}"));
    }
    h.push('\n');
    h
}

fn csv_row(
    rec: &DiagnosticsRecord,
    scattering: Option<f64>,
    locals: &[f64],
) -> String {
    let mut cells: Vec<String> = vec![
        rec.step.to_string(),
        fmt_cell(rec.t),
        fmt_cell(rec.energy),
        fmt_cell(rec.j_u),
        fmt_cell(rec.k0_u),
        fmt_cell(rec.k2_u),
        fmt_cell(rec.virial),
        fmt_cell(rec.virial_rate),
        fmt_cell(rec.i1),
        fmt_cell(rec.i1_rate),
        fmt_cell(rec.i1_curvature),
        fmt_cell(rec.i2),
        fmt_cell(rec.i2_rate),
        fmt_cell(rec.u_l4),
        fmt_cell(rec.u_h1),
        fmt_cell(rec.u_l2),
        fmt_cell(rec.n_l2),
        fmt_cell(rec.ndot_hm1),
        fmt_cell(rec.defect_l2),
        scattering.map(fmt_cell).unwrap_or_default(),
    ];
    for &v in locals {
        cells.push(fmt_cell(v));
    }
    let mut line = cells.join(",");
    line.push('\n');
    line
}

// ---------------------------------------------------------------------------
// observer
// ---------------------------------------------------------------------------

struct Observer<'a> {
    csv: &'a mut Vec<u8>,
    lowref: &'a LowFreqRef,
    radii: &'a [f64],
    sample_every: u64,
    proxy_active: bool,
    prev_sample: Option<SystemState>,
    scatter_initial_norm: Option<f64>,
    increments: Vec<f64>,
    records: Vec<DiagnosticsRecord>,
    err: Option<Error>,
}

impl Observer<'_> {
    fn observe(&mut self, s: &SystemState, k: u64) {
        if self.err.is_some() {
            return;
        }
        if let Err(e) = self.try_observe(s, k) {
            self.err = Some(e);
        }
    }

    fn try_observe(&mut self, s: &SystemState, k: u64) -> Result<()> {
        let rec = collect_record(s, k, self.lowref)?;
        let mut scattering = None;
        if self.proxy_active && k % self.sample_every == 0 {
            let pulled = free_pullback(s);
            if let Some(prev) = &self.prev_sample {
                let incr = state_diff_energy_norm(&pulled, prev)?;
                self.increments.push(incr);
                scattering = Some(incr);
            } else if self.scatter_initial_norm.is_none() {
                self.scatter_initial_norm = Some(state_energy_norm(&pulled));
            }
            self.prev_sample = Some(pulled);
        }
        let mut locals = Vec::with_capacity(self.radii.len());
        for &rc in self.radii {
            locals.push(diagnostics::local_virial(s, rc)?);
        }
        self.csv.extend_from_slice(csv_row(&rec, scattering, &locals).as_bytes());
        self.records.push(rec);
        Ok(())
    }
}

/// Scattering samples must land on observed records: round the raw cadence
/// up to the next multiple of the observer cadence.
fn sample_cadence(dt: f64, interval: f64, observe_every: u64) -> u64 {
    let raw = (interval / dt).round().max(1.0) as u64;
    raw.div_ceil(observe_every).max(1) * observe_every
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Executes one configured run and writes its artifacts.
///
/// A detected blow-up is a successful outcome (recorded in the summary), not
/// an error; I/O problems and invalid inputs are errors.  When periodic
/// checkpoints are enabled the run also stores `lowref.bin` next to them so
/// that a resumed run reproduces the I₂ column and the scattering residuals
/// bit-exactly; resuming without that file falls back to rebuilding the
/// reference from the resume state (noted in [`RunOutput::notes`]).
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let wall = Instant::now();
    let mut notes = Vec::new();
    let grid = make_grid(cfg.r_max, cfg.n)?;

    fs::create_dir_all(&cfg.output)?;
    let echo = config::to_toml_string(cfg);
    fs::write(cfg.output.join("resolved_config.toml"), echo.as_bytes())?;
    let config_hash = config::config_sha256(cfg);

    // Ground state on the run grid: both the threshold J(Q) and (possibly)
    // the initial profile.
    let gs = ground_state::load_or_compute(&cfg.gs_cache, &grid, cfg.gs_tol)?;
    let j_q = gs.j_q;

    let start = synthesize_start(cfg, &grid, &gs)?;
    let start_state = match &start {
        Start::Fresh(s) => s.clone(),
        Start::Resume(ck, _) => ck.to_state(),
    };

    let e0 = functionals::energy_e(&start_state)?;
    let k0_initial = functionals::functional_k(VarIndex::Zero, &start_state.u);
    let k2_initial = functionals::functional_k(VarIndex::Two, &start_state.u);

    // Low-frequency reference: frozen from t = 0 data on fresh runs; on
    // resumed runs recovered from the sibling lowref.bin when present.
    if let Some(eps) = cfg.eps_target {
        let bound = 0.01 * (1.0 + functionals::norm(&start_state.n, NormKind::L2));
        if eps > bound {
            return Err(Error::InvalidConfig(format!(
                "eps_target = {eps} exceeds 0.01·(1 + ‖n₀‖) = {bound}: the low-frequency \
                 reference would not be small against the data"
            )));
        }
    }
    let proxy_active = cfg.sponge.is_none();
    let sample_every = sample_cadence(cfg.dt, cfg.scattering_interval, cfg.observe_every);
    let (lowref, resumed_scatter_norm) = match &start {
        Start::Fresh(s) => (prepare_lowfreq_reference(&s.n, cfg.eps_target)?, None),
        Start::Resume(ck, dir) => {
            let ref_path = dir.join("lowref.bin");
            match read_run_reference(&ref_path, &grid) {
                Ok(rf) => (rf.lowref, rf.scatter_initial_norm),
                Err(_) => {
                    notes.push(format!(
                        "no usable run reference at {}; rebuilding the low-frequency \
                         reference from the resume state (I₂ and scattering columns \
                         restart rather than continue the original run's)",
                        ref_path.display()
                    ));
                    (prepare_lowfreq_reference(&ck.to_state().n, cfg.eps_target)?, None)
                }
            }
        }
    };

    // Evolution configuration and checkpoint plan.
    let ck_dir = cfg.output.join("checkpoints");
    let checkpoint_plan = cfg.checkpoint_every.map(|every| CheckpointPlan {
        every: Some(every),
        dir: ck_dir.clone(),
    });
    if checkpoint_plan.is_some() {
        fs::create_dir_all(&ck_dir)?;
    }
    let ecfg = EvolveConfig {
        dt: cfg.dt,
        t_max: cfg.t_max,
        observe_every: cfg.observe_every as usize,
        blowup_threshold: cfg.blowup_threshold,
        dealias: cfg.dealias,
        sponge: cfg.sponge.map(|strength| SpongeConfig { strength }),
        time_base: None,
        checkpoint: checkpoint_plan,
    };

    // Stream the CSV into memory (records are sparse — cadence-limited), so
    // a failed run leaves no truncated series behind.
    let mut csv: Vec<u8> = csv_header(&cfg.local_virial_radii).into_bytes();
    let mut obs = Observer {
        csv: &mut csv,
        lowref: &lowref,
        radii: &cfg.local_virial_radii,
        sample_every,
        proxy_active,
        prev_sample: None,
        scatter_initial_norm: resumed_scatter_norm,
        increments: Vec::new(),
        records: Vec::new(),
        err: None,
    };
    // A resumed run whose resume step sits on the sampling cadence continues
    // the pullback increments exactly where the original run left off.
    if let Start::Resume(ck, _) = &start {
        if proxy_active && ck.step_index % sample_every == 0 {
            let pulled = free_pullback(&start_state);
            if obs.scatter_initial_norm.is_none() {
                obs.scatter_initial_norm = Some(state_energy_norm(&pulled));
            }
            obs.prev_sample = Some(pulled);
        }
    }

    let outcome = match &start {
        Start::Fresh(s) => evolution::evolve(s, &ecfg, |s, k| obs.observe(s, k))?,
        Start::Resume(ck, _) => {
            evolution::evolve_from_checkpoint(ck, &ecfg, |s, k| obs.observe(s, k))?
        }
    };
    if let Some(e) = obs.err.take() {
        return Err(e);
    }
    let increments = std::mem::take(&mut obs.increments);
    let records = std::mem::take(&mut obs.records);
    let scatter_initial_norm = obs.scatter_initial_norm;
    drop(obs);
    fs::write(cfg.output.join("series.csv"), &csv)?;

    // Persist the run-level reference for future resumes.
    if cfg.checkpoint_every.is_some() {
        write_run_reference(
            &ck_dir.join("lowref.bin"),
            &RunReference { lowref: lowref.clone(), scatter_initial_norm },
        )?;
    }

    // Observed behavior: blow-up from the termination (optionally confirmed
    // at dt/2), scattering from the pullback residuals.
    let blowup_crossing_time = match outcome.termination {
        Termination::BlowupThreshold { t } | Termination::BlowupSignal { t } => Some(t),
        Termination::Horizon => None,
    };
    let mut blowup_crossing_time_half_dt = None;
    let mut blowup_confirmed = None;
    let mut observed = match blowup_crossing_time {
        Some(_) => Behavior::Blowup,
        None => Behavior::Undetermined,
    };
    if let Some(t1) = blowup_crossing_time {
        if cfg.confirm_blowup {
            match &start {
                Start::Fresh(s) => {
                    let half = EvolveConfig {
                        dt: cfg.dt / 2.0,
                        checkpoint: None,
                        ..ecfg.clone()
                    };
                    let confirm = evolution::evolve(s, &half, |_, _| {})?;
                    let t2 = match confirm.termination {
                        Termination::BlowupThreshold { t } | Termination::BlowupSignal { t } => {
                            Some(t)
                        }
                        Termination::Horizon => None,
                    };
                    blowup_crossing_time_half_dt = t2;
                    let ok = t2.is_some_and(|t2| (t1 - t2).abs() <= 0.05 * t1.max(t2));
                    blowup_confirmed = Some(ok);
                    if !ok {
                        // The detection did not survive refinement: withhold
                        // the blow-up verdict rather than overclaim.
                        observed = Behavior::Undetermined;
                    }
                }
                Start::Resume(..) => {
                    // A dt/2 rerun of a resumed segment cannot start from the
                    // checkpoint (its trajectory is dt-specific); confirmation
                    // is only meaningful for full runs.
                    notes.push(
                        "blow-up confirmation skipped: resumed runs cannot be \
                         re-integrated at dt/2 from the checkpoint"
                            .to_string(),
                    );
                }
            }
        }
    }
    let scattering_converged = if observed == Behavior::Blowup || !proxy_active {
        None
    } else {
        match scatter_initial_norm {
            Some(norm0) if !increments.is_empty() => {
                Some(free_profile_converged(&increments, norm0))
            }
            _ => None,
        }
    };
    if observed == Behavior::Undetermined && scattering_converged == Some(true) {
        observed = Behavior::Scattering;
    }

    let verdict = classify_run(e0, k0_initial, j_q, observed);
    let i2_concave_final_quarter = if observed == Behavior::Blowup {
        i2_quarter_concavity(&records)
    } else {
        None
    };

    let termination_time = outcome.final_state.t;
    let summary = RunSummary {
        config_sha256: config_hash,
        r_max: cfg.r_max,
        n: cfg.n,
        alpha: cfg.alpha,
        dt: cfg.dt,
        t_max: cfg.t_max,
        j_q,
        e0,
        k0_initial,
        k2_initial,
        e0_over_jq: e0 / j_q,
        lowfreq_k: lowref.k,
        lowfreq_eps0: lowref.eps0,
        termination: outcome.termination,
        termination_time,
        steps_completed: outcome.steps_completed,
        records: records.len() as u64,
        peak_h1: outcome.peak_h1,
        scattering_initial_norm: scatter_initial_norm,
        final_scattering_residual: increments.last().copied(),
        scattering_residuals: increments,
        scattering_converged,
        blowup_crossing_time,
        blowup_crossing_time_half_dt,
        blowup_confirmed,
        i2_concave_final_quarter,
        verdict,
        wall_seconds: wall.elapsed().as_secs_f64(),
    };
    let mut json = serde_json::to_vec_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?;
    json.push(b'\n');
    fs::write(cfg.output.join("summary.json"), &json)?;

    Ok(RunOutput {
        summary,
        records,
        out_dir: cfg.output.clone(),
        notes,
    })
}

/// Nonpositivity (up to +1e−6) of every uniformly spaced second difference
/// of I₂^{−1/4} over the final quarter of the records; `None` when the
/// window has no valid triple or I₂ is not positive throughout.
fn i2_quarter_concavity(records: &[DiagnosticsRecord]) -> Option<bool> {
    let m = records.len();
    if m < 4 {
        return None;
    }
    let start = (3 * m) / 4;
    let window = &records[start.saturating_sub(1)..];
    if window.iter().any(|r| !(r.i2 > 0.0)) {
        return None;
    }
    let f: Vec<f64> = window.iter().map(|r| r.i2.powf(-0.25)).collect();
    let t: Vec<f64> = window.iter().map(|r| r.t).collect();
    let mut checked = false;
    for j in 1..f.len() - 1 {
        let dl = t[j] - t[j - 1];
        let dr = t[j + 1] - t[j];
        if (dl - dr).abs() > 1e-9 * dl.abs().max(dr.abs()) {
            continue; // the terminal record may break the cadence
        }
        checked = true;
        if f[j + 1] - 2.0 * f[j] + f[j - 1] > 1e-6 {
            return Some(false);
        }
    }
    checked.then_some(true)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Parameter axis of a sweep.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    /// Vary the ground-state scaling λ (initial data becomes scaled ground
    /// states; a non-ground-state base initial selection keeps sign +1).
    Lambda(Vec<f64>),
    /// Vary the ion sound speed α.
    Alpha(Vec<f64>),
}

impl SweepAxis {
    /// Column label of the axis.
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Lambda(_) => "lambda",
            SweepAxis::Alpha(_) => "alpha",
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Lambda(v) | SweepAxis::Alpha(v) => v,
        }
    }
}

/// One sweep entry: the axis value and either the run summary or the error
/// message of an isolated failure.
#[derive(Debug)]
pub struct SweepEntry {
    /// Axis value of this run.
    pub value: f64,
    /// Run result; failures are isolated per entry.
    pub result: std::result::Result<RunSummary, String>,
}

/// Aggregated sweep result.
#[derive(Debug)]
pub struct SweepReport {
    /// Axis label ("lambda" or "alpha").
    pub axis: &'static str,
    /// Entries in axis order.
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// True when every run finished and carried a consistent verdict.
    pub fn all_consistent(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.result.as_ref().is_ok_and(|s| s.verdict.consistent))
    }

    /// True when any run failed outright.
    pub fn any_failed(&self) -> bool {
        self.entries.iter().any(|e| e.result.is_err())
    }

    /// Fixed-width human-readable table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>10}  {:>12}  {:>8}  {:>12}  {:>12}  {:>10}\n",
            self.axis, "E/J(Q)", "sign K0", "predicted", "observed", "consistent"
        ));
        for e in &self.entries {
            match &e.result {
                Ok(s) => out.push_str(&format!(
                    "{:>10}  {:>12.6}  {:>8}  {:>12}  {:>12}  {:>10}\n",
                    e.value,
                    s.e0_over_jq,
                    sign_label(s.k0_initial),
                    prediction_label(s.verdict.predicted),
                    behavior_label(s.verdict.observed),
                    s.verdict.consistent,
                )),
                Err(msg) => {
                    out.push_str(&format!("{:>10}  failed: {msg}\n", e.value));
                }
            }
        }
        out
    }

    /// CSV form of the aggregate (quoted error messages).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,value,e0_over_jq,k0_sign,predicted,observed,consistent,termination,error\n",
        );
        for e in &self.entries {
            match &e.result {
                Ok(s) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},\n",
                    self.axis,
                    e.value,
                    s.e0_over_jq,
                    sign_label(s.k0_initial),
                    prediction_label(s.verdict.predicted),
                    behavior_label(s.verdict.observed),
                    s.verdict.consistent,
                    s.termination,
                )),
                Err(msg) => out.push_str(&format!(
                    "{},{},,,,,,,\"{}\"\n",
                    self.axis,
                    e.value,
                    msg.replace('"', "\"\"")
                )),
            }
        }
        out
    }
}

/// Sign of an initial functional, as printed in sweep tables.
pub fn sign_label(x: f64) -> &'static str {
    if x > 0.0 {
        "+"
    } else if x < 0.0 {
        "-"
    } else {
        "0"
    }
}

/// Stable lowercase label of a prediction.
pub fn prediction_label(p: diagnostics::Prediction) -> &'static str {
    match p {
        diagnostics::Prediction::Scattering => "scattering",
        diagnostics::Prediction::Blowup => "blowup",
        diagnostics::Prediction::OutOfScope => "out_of_scope",
    }
}

/// Stable lowercase label of an observed behavior.
pub fn behavior_label(b: Behavior) -> &'static str {
    match b {
        Behavior::Scattering => "scattering",
        Behavior::Blowup => "blowup",
        Behavior::Undetermined => "undetermined",
    }
}

fn derived_config(base: &RunConfig, axis: &SweepAxis, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Lambda(_) => {
            let sign = match &base.initial {
                InitialData::GroundStateScaled { sign, .. } => *sign,
                _ => 1.0,
            };
            cfg.initial = InitialData::GroundStateScaled { lambda: value, sign };
            cfg.output = base.output.join(format!("lambda_{value}"));
        }
        SweepAxis::Alpha(_) => {
            cfg.alpha = value;
            cfg.output = base.output.join(format!("alpha_{value}"));
        }
    }
    // Re-validate the derived configuration through the canonical echo: the
    // axis may have violated a cross-field constraint (e.g. a larger α
    // shrinking the reflection horizon below t_max).
    let (checked, _) = config::parse_and_validate(&config::to_toml_string(&cfg))
        .map_err(|e| Error::InvalidConfig(format!("derived run ({} = {value}): {e}", axis.name())))?;
    Ok(checked)
}

/// Runs one configuration per axis value (in parallel, each run internally
/// single-threaded), writes `sweep.csv` under the base output directory, and
/// returns the aggregate.  All derived configurations are validated before
/// anything runs; individual run failures after that are isolated into their
/// entries.  An empty axis yields an empty (successful) report.
pub fn sweep(base: &RunConfig, axis: &SweepAxis, jobs: Option<usize>) -> Result<SweepReport> {
    let values = axis.values().to_vec();
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| derived_config(base, axis, v))
        .collect::<Result<_>>()?;

    // Warm the ground-state cache once, sequentially: every derived run
    // shares the grid, and concurrent first-time writes would race.
    if !configs.is_empty() {
        let grid = make_grid(base.r_max, base.n)?;
        ground_state::load_or_compute(&base.gs_cache, &grid, base.gs_tol)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<RunSummary, String>> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .map(|cfg| run(cfg).map(|out| out.summary).map_err(|e| e.to_string()))
            .collect()
    });

    let entries: Vec<SweepEntry> = values
        .into_iter()
        .zip(results)
        .map(|(value, result)| SweepEntry { value, result })
        .collect();
    let report = SweepReport { axis: axis.name(), entries };

    fs::create_dir_all(&base.output)?;
    fs::write(base.output.join("sweep.csv"), report.to_csv().as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// plot data
// ---------------------------------------------------------------------------

fn read_series_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Serde(format!("{}: empty series file", path.display())))?;
    let cols: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != cols.len() {
            return Err(Error::Serde(format!(
                "{}: row has {} cells, header has {}",
                path.display(),
                cells.len(),
                cols.len()
            )));
        }
        rows.push(cells);
    }
    Ok((cols, rows))
}

/// Exports whitespace-delimited per-panel files from a run directory's
/// `series.csv` into `<run>/plot/`: one `<column>.dat` per diagnostic column
/// (t in the first column), a second-difference companion for I₁, and an
/// `index.txt` listing every panel.  Returns the written file names.
///
/// A zero-duration run (header-only CSV) produces header-only panels.
pub fn emit_plot_data(run_dir: &Path) -> Result<Vec<String>> {
    let (cols, rows) = read_series_csv(&run_dir.join("series.csv"))?;
    let t_idx = cols
        .iter()
        .position(|c| c == "t")
        .ok_or_else(|| Error::Serde("series.csv lacks a t column".to_string()))?;
    let plot_dir = run_dir.join("plot");
    fs::create_dir_all(&plot_dir)?;

    let mut written = Vec::new();
    for (idx, name) in cols.iter().enumerate() {
        if name == "step" || name == "t" {
            continue;
        }
        let mut body = format!("# t {name}\n");
        for row in &rows {
            if row[idx].is_empty() {
                continue;
            }
            body.push_str(&format!("{} {}\n", row[t_idx], row[idx]));
        }
        let fname = format!("{name}.dat");
        fs::write(plot_dir.join(&fname), body.as_bytes())?;
        written.push(fname);
    }

    // Companion panel: uniformly spaced second-difference quotients of I₁,
    // the convexity witness of blow-up runs.
    if let Some(i1_idx) = cols.iter().position(|c| c == "I1") {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| !row[i1_idx].is_empty())
            .map(|row| {
                let t: f64 = row[t_idx].parse().map_err(|e| {
                    Error::Serde(format!("bad t value {:?}: {e}", row[t_idx]))
                })?;
                let v: f64 = row[i1_idx].parse().map_err(|e| {
                    Error::Serde(format!("bad I1 value {:?}: {e}", row[i1_idx]))
                })?;
                Ok((t, v))
            })
            .collect::<Result<_>>()?;
        let mut body = String::from("# t d2_I1_dt2\n");
        for j in 1..pts.len().saturating_sub(1) {
            let dl = pts[j].0 - pts[j - 1].0;
            let dr = pts[j + 1].0 - pts[j].0;
            if dl <= 0.0 || (dl - dr).abs() > 1e-9 * dl.abs().max(dr.abs()) {
                continue;
            }
            let d2 = (pts[j + 1].1 - 2.0 * pts[j].1 + pts[j - 1].1) / (dl * dl);
            body.push_str(&format!("{} {}\n", pts[j].0, d2));
        }
        let fname = "I1_second_diff.dat".to_string();
        fs::write(plot_dir.join(&fname), body.as_bytes())?;
        written.push(fname);
    }

    let mut index = String::new();
    for f in &written {
        index.push_str(f);
        index.push('\n');
    }
    fs::write(plot_dir.join("index.txt"), index.as_bytes())?;
    Ok(written)
}
