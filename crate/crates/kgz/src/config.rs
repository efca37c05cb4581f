//! Run configuration: TOML parsing, validation, defaults, and a canonical
//! echo used both as the on-disk record of a run and as the input to the
//! configuration hash.
//!
//! A configuration file may specify as little as
//!
//! ```toml
//! alpha = 0.5
//! lambda = 1.2
//! ```
//!
//! Every omitted key takes a documented default (see [`RunConfig`]).  The
//! top-level `lambda` key is shorthand for a rescaled-ground-state initial
//! condition; it conflicts with an explicit `[initial]` table.  Unknown keys
//! are rejected rather than ignored so that typos cannot silently change a
//! run.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::evolution::validate_alpha;
use crate::grid::make_grid;
use crate::{Error, Result};

/// Environment variable naming the directory for cached ground states.
pub const CACHE_DIR_ENV: &str = "KGZ_CACHE_DIR";

/// A radial Gaussian pulse `A·exp(−r²/σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    /// Peak amplitude A.
    pub amplitude: f64,
    /// Width σ.
    pub width: f64,
}

/// Fully resolved initial data selection.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `u₀ = sign·λQ`, `u̇₀ = 0`, `n₀ = λ²Q²`, `ṅ₀ = 0`, with Q the ground
    /// state on the run grid.  λ = 1 is the exact standing wave; λ < 1 sits
    /// on the scattering side of the dichotomy and λ > 1 on the blow-up side.
    GroundStateScaled { lambda: f64, sign: f64 },
    /// `u₀ = A·exp(−r²/σ²)` with, by default, `u̇₀ = 0`, `n₀ = u₀²`,
    /// `ṅ₀ = 0`.  Each of the other three fields may be overridden by its
    /// own pulse.
    Gaussian {
        amplitude: f64,
        width: f64,
        udot: Option<Pulse>,
        n: Option<Pulse>,
        ndot: Option<Pulse>,
    },
    /// Resume from a binary checkpoint written by an earlier run.  The grid
    /// and α in the checkpoint must match the configuration.
    FromCheckpoint { path: PathBuf },
}

/// Fully resolved run configuration.  Every field is concrete; defaults have
/// been applied and validated.
///
/// Defaults: `r_max = 30`, `n = 4096`, `alpha = 0.5`, `dt = 1e-3`,
/// `t_max = 20`, `seed = 0`, `observe_every = 100`, `blowup_threshold = 10`,
/// `dealias = true`, sponge off (`strength = 5` when enabled),
/// `confirm_blowup = true`, `scattering_interval = 1`, no local virial radii,
/// automatic low-frequency target, no periodic checkpoints,
/// `output = "kgz-out"`, `gs_tol = 1e-12`, cache dir from `KGZ_CACHE_DIR`
/// else `<output>/gs-cache`, initial data `ground_state_scaled` with
/// `lambda = 0.9`, `sign = +1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Domain radius R of the ball (0, R).
    pub r_max: f64,
    /// Number of grid intervals N (power of two; N−1 interior nodes).
    pub n: usize,
    /// Ion sound speed α (must be positive and ≠ 1).
    pub alpha: f64,
    /// Time step.
    pub dt: f64,
    /// Final time of the evolution.
    pub t_max: f64,
    /// Seed for any randomized auxiliary sampling.
    pub seed: u64,
    /// Record diagnostics every this many steps.
    pub observe_every: u64,
    /// Declare blow-up when ‖u‖_{H¹} exceeds this multiple of its initial value.
    pub blowup_threshold: f64,
    /// Apply the 2/3-rule spectral dealiasing projection.
    pub dealias: bool,
    /// Outer absorbing layer strength; `None` disables the sponge.
    pub sponge: Option<f64>,
    /// Re-run detected blow-ups at dt/2 and require crossing-time agreement.
    pub confirm_blowup: bool,
    /// Time interval between scattering-residual samples.
    pub scattering_interval: f64,
    /// Cutoff radii for localized virial columns (each in (0, R/2]).
    pub local_virial_radii: Vec<f64>,
    /// Low-frequency reference target ε; `None` selects `1e-3·(1+‖n₀‖)`.
    pub eps_target: Option<f64>,
    /// Write a checkpoint every this many steps; `None` disables periodic
    /// checkpoints (a final checkpoint is still written when set).
    pub checkpoint_every: Option<u64>,
    /// Output directory for run artifacts.
    pub output: PathBuf,
    /// Bisection tolerance for the ground-state amplitude.
    pub gs_tol: f64,
    /// Directory for cached ground states.
    pub gs_cache: PathBuf,
    /// Initial data selection.
    pub initial: InitialData,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    amplitude: Option<f64>,
    width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Option<String>,
    lambda: Option<f64>,
    sign: Option<f64>,
    amplitude: Option<f64>,
    width: Option<f64>,
    udot: Option<RawPulse>,
    n: Option<RawPulse>,
    ndot: Option<RawPulse>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    r_max: Option<f64>,
    n: Option<usize>,
    alpha: Option<f64>,
    dt: Option<f64>,
    t_max: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    observe_every: Option<u64>,
    blowup_threshold: Option<f64>,
    dealias: Option<bool>,
    sponge: Option<bool>,
    sponge_strength: Option<f64>,
    confirm_blowup: Option<bool>,
    scattering_interval: Option<f64>,
    local_virial_radii: Option<Vec<f64>>,
    eps_target: Option<f64>,
    checkpoint_every: Option<u64>,
    output: Option<String>,
    gs_tol: Option<f64>,
    gs_cache: Option<String>,
    initial: Option<RawInitial>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn require_finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(format!("{name} must be finite, got {x}")))
    }
}

fn resolve_pulse(which: &str, raw: &RawPulse) -> Result<Pulse> {
    let amplitude = require_finite(
        &format!("initial.{which}.amplitude"),
        raw.amplitude
            .ok_or_else(|| bad(format!("initial.{which} needs an amplitude")))?,
    )?;
    let width = require_finite(
        &format!("initial.{which}.width"),
        raw.width
            .ok_or_else(|| bad(format!("initial.{which} needs a width")))?,
    )?;
    if width <= 0.0 {
        return Err(bad(format!("initial.{which}.width must be positive, got {width}")));
    }
    Ok(Pulse { amplitude, width })
}

fn resolve_initial(raw: RawInitial) -> Result<InitialData> {
    let kind = raw.kind.as_deref().unwrap_or("ground_state_scaled");
    match kind {
        "ground_state_scaled" => {
            for (present, key) in [
                (raw.amplitude.is_some(), "amplitude"),
                (raw.width.is_some(), "width"),
                (raw.udot.is_some(), "udot"),
                (raw.n.is_some(), "n"),
                (raw.ndot.is_some(), "ndot"),
                (raw.path.is_some(), "path"),
            ] {
                if present {
                    return Err(bad(format!(
                        "initial.{key} does not apply to kind \"ground_state_scaled\""
                    )));
                }
            }
            let lambda = require_finite("initial.lambda", raw.lambda.unwrap_or(0.9))?;
            if lambda <= 0.0 {
                return Err(bad(format!("initial.lambda must be positive, got {lambda}")));
            }
            let sign = raw.sign.unwrap_or(1.0);
            if sign != 1.0 && sign != -1.0 {
                return Err(bad(format!("initial.sign must be 1 or -1, got {sign}")));
            }
            Ok(InitialData::GroundStateScaled { lambda, sign })
        }
        "gaussian" => {
            for (present, key) in [
                (raw.lambda.is_some(), "lambda"),
                (raw.sign.is_some(), "sign"),
                (raw.path.is_some(), "path"),
            ] {
                if present {
                    return Err(bad(format!("initial.{key} does not apply to kind \"gaussian\"")));
                }
            }
            let amplitude = require_finite("initial.amplitude", raw.amplitude.unwrap_or(1.0))?;
            let width = require_finite("initial.width", raw.width.unwrap_or(2.0))?;
            if width <= 0.0 {
                return Err(bad(format!("initial.width must be positive, got {width}")));
            }
            let udot = raw.udot.as_ref().map(|p| resolve_pulse("udot", p)).transpose()?;
            let n = raw.n.as_ref().map(|p| resolve_pulse("n", p)).transpose()?;
            let ndot = raw.ndot.as_ref().map(|p| resolve_pulse("ndot", p)).transpose()?;
            Ok(InitialData::Gaussian { amplitude, width, udot, n, ndot })
        }
        "checkpoint" => {
            for (present, key) in [
                (raw.lambda.is_some(), "lambda"),
                (raw.sign.is_some(), "sign"),
                (raw.amplitude.is_some(), "amplitude"),
                (raw.width.is_some(), "width"),
                (raw.udot.is_some(), "udot"),
                (raw.n.is_some(), "n"),
                (raw.ndot.is_some(), "ndot"),
            ] {
                if present {
                    return Err(bad(format!("initial.{key} does not apply to kind \"checkpoint\"")));
                }
            }
            let path = raw
                .path
                .ok_or_else(|| bad("initial kind \"checkpoint\" needs a path"))?;
            Ok(InitialData::FromCheckpoint { path: PathBuf::from(path) })
        }
        other => Err(bad(format!(
            "unknown initial kind {other:?} (expected \"ground_state_scaled\", \"gaussian\", or \"checkpoint\")"
        ))),
    }
}

/// Maximum evolution duration (without a sponge) that keeps boundary
/// reflections from re-entering the diagnostics window.
pub fn reflection_horizon(r_max: f64, alpha: f64) -> f64 {
    0.8 * r_max / alpha.max(1.0)
}

fn resolve(raw: RawConfig) -> Result<(RunConfig, Vec<String>)> {
    let mut warnings = Vec::new();

    let r_max = require_finite("r_max", raw.r_max.unwrap_or(30.0))?;
    let n = raw.n.unwrap_or(4096);
    let grid = make_grid(r_max, n)?; // validates r_max > 0 and n a power of two ≥ 8

    let alpha = require_finite("alpha", raw.alpha.unwrap_or(0.5))?;
    validate_alpha(alpha)?;
    if alpha > 1.0 {
        warnings.push(format!(
            "alpha = {alpha} > 1: density waves outrun the Klein-Gordon cone; \
             supported, but outside the usual subsonic regime"
        ));
    }

    let dt = require_finite("dt", raw.dt.unwrap_or(1e-3))?;
    if dt <= 0.0 {
        return Err(bad(format!("dt must be positive, got {dt}")));
    }
    let t_max = require_finite("t_max", raw.t_max.unwrap_or(20.0))?;
    if t_max < 0.0 {
        return Err(bad(format!("t_max must be nonnegative, got {t_max}")));
    }

    let seed = raw.seed.unwrap_or(0);
    let observe_every = raw.observe_every.unwrap_or(100);
    if observe_every == 0 {
        return Err(bad("observe_every must be at least 1"));
    }
    let blowup_threshold = require_finite("blowup_threshold", raw.blowup_threshold.unwrap_or(10.0))?;
    if blowup_threshold <= 1.0 {
        return Err(bad(format!(
            "blowup_threshold is a growth factor for ‖u‖_H1 and must exceed 1, got {blowup_threshold}"
        )));
    }
    let dealias = raw.dealias.unwrap_or(true);

    let sponge_on = raw.sponge.unwrap_or(false);
    let sponge_strength = require_finite("sponge_strength", raw.sponge_strength.unwrap_or(5.0))?;
    if raw.sponge_strength.is_some() && !sponge_on {
        return Err(bad("sponge_strength given but sponge = false; set sponge = true"));
    }
    if sponge_strength <= 0.0 {
        return Err(bad(format!("sponge_strength must be positive, got {sponge_strength}")));
    }
    let sponge = sponge_on.then_some(sponge_strength);

    let confirm_blowup = raw.confirm_blowup.unwrap_or(true);

    let scattering_interval =
        require_finite("scattering_interval", raw.scattering_interval.unwrap_or(1.0))?;
    if scattering_interval <= 0.0 {
        return Err(bad(format!(
            "scattering_interval must be positive, got {scattering_interval}"
        )));
    }

    let local_virial_radii = raw.local_virial_radii.unwrap_or_default();
    for &rc in &local_virial_radii {
        require_finite("local_virial_radii entry", rc)?;
        if rc <= 0.0 || rc > r_max / 2.0 {
            return Err(bad(format!(
                "local virial cutoff {rc} outside (0, r_max/2] = (0, {}]",
                r_max / 2.0
            )));
        }
    }

    let eps_target = raw.eps_target.map(|e| require_finite("eps_target", e)).transpose()?;
    if let Some(e) = eps_target {
        if e <= 0.0 {
            return Err(bad(format!("eps_target must be positive, got {e}")));
        }
    }

    let checkpoint_every = raw.checkpoint_every;
    if checkpoint_every == Some(0) {
        return Err(bad("checkpoint_every must be at least 1; omit it to disable checkpoints"));
    }

    let output = PathBuf::from(raw.output.unwrap_or_else(|| "kgz-out".to_string()));

    let gs_tol = require_finite("gs_tol", raw.gs_tol.unwrap_or(1e-12))?;
    if gs_tol <= 0.0 {
        return Err(bad(format!("gs_tol must be positive, got {gs_tol}")));
    }
    let gs_cache = match raw.gs_cache {
        Some(dir) => PathBuf::from(dir),
        None => match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => output.join("gs-cache"),
        },
    };

    if raw.lambda.is_some() && raw.initial.is_some() {
        return Err(bad(
            "top-level lambda is shorthand for an [initial] table; specify one or the other",
        ));
    }
    let initial = match raw.lambda {
        Some(lambda) => resolve_initial(RawInitial { lambda: Some(lambda), ..RawInitial::default() })?,
        None => resolve_initial(raw.initial.unwrap_or_default())?,
    };

    // Accuracy advisory: the splitting is unconditionally stable, but once a
    // step rotates the fastest retained mode by more than a radian the kick
    // term is badly sampled in time.
    let omega_max = grid.max_freq() * alpha.max(1.0);
    if dt * omega_max > 1.0 {
        warnings.push(format!(
            "dt = {dt} advances the fastest mode by {:.2} radians per step; \
             results remain stable but lose O(dt²) accuracy",
            dt * omega_max
        ));
    }

    // Without an absorbing layer, radiation reflected by the Dirichlet wall
    // re-enters the observation region after t ≈ 0.8·R/max(1, α).
    let horizon = reflection_horizon(r_max, alpha);
    let from_checkpoint = matches!(initial, InitialData::FromCheckpoint { .. });
    if sponge.is_none() && !from_checkpoint && t_max > horizon * (1.0 + 1e-12) {
        return Err(bad(format!(
            "t_max = {t_max} exceeds the reflection horizon {horizon:.3} for r_max = {r_max}, \
             alpha = {alpha}; waves reflect off the outer wall and contaminate the run \
             (enlarge r_max, shorten t_max, or enable the sponge)"
        )));
    }

    Ok((
        RunConfig {
            r_max,
            n,
            alpha,
            dt,
            t_max,
            seed,
            observe_every,
            blowup_threshold,
            dealias,
            sponge,
            confirm_blowup,
            scattering_interval,
            local_virial_radii,
            eps_target,
            checkpoint_every,
            output,
            gs_tol,
            gs_cache,
            initial,
        },
        warnings,
    ))
}

/// Parse a TOML configuration and validate it into a [`RunConfig`] plus any
/// advisory warnings.  Unknown keys, out-of-range values, and conflicting
/// selections are errors.
pub fn parse_and_validate(text: &str) -> Result<(RunConfig, Vec<String>)> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| bad(format!("configuration parse error: {e}")))?;
    resolve(raw)
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_and_validate(&text)
}

/// Format a float so TOML re-reads it as a float (always keeps a `.` or
/// exponent), using the shortest round-trip decimal representation.
fn fmt_f64(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

fn fmt_toml_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical TOML echo of a resolved configuration.  Keys appear in a fixed
/// order with every default materialized, so the echo doubles as the byte
/// stream behind [`config_sha256`] and re-parses to an identical `RunConfig`.
pub fn to_toml_string(cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("alpha = {}\n", fmt_f64(cfg.alpha)));
    s.push_str(&format!("blowup_threshold = {}\n", fmt_f64(cfg.blowup_threshold)));
    if let Some(every) = cfg.checkpoint_every {
        s.push_str(&format!("checkpoint_every = {every}\n"));
    }
    s.push_str(&format!("confirm_blowup = {}\n", cfg.confirm_blowup));
    s.push_str(&format!("dealias = {}\n", cfg.dealias));
    s.push_str(&format!("dt = {}\n", fmt_f64(cfg.dt)));
    if let Some(e) = cfg.eps_target {
        s.push_str(&format!("eps_target = {}\n", fmt_f64(e)));
    }
    s.push_str(&format!("gs_cache = {}\n", fmt_toml_string(&cfg.gs_cache.to_string_lossy())));
    s.push_str(&format!("gs_tol = {}\n", fmt_f64(cfg.gs_tol)));
    let radii: Vec<String> = cfg.local_virial_radii.iter().map(|&r| fmt_f64(r)).collect();
    s.push_str(&format!("local_virial_radii = [{}]\n", radii.join(", ")));
    s.push_str(&format!("n = {}\n", cfg.n));
    s.push_str(&format!("observe_every = {}\n", cfg.observe_every));
    s.push_str(&format!("output = {}\n", fmt_toml_string(&cfg.output.to_string_lossy())));
    s.push_str(&format!("r_max = {}\n", fmt_f64(cfg.r_max)));
    s.push_str(&format!("scattering_interval = {}\n", fmt_f64(cfg.scattering_interval)));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    match cfg.sponge {
        Some(strength) => {
            s.push_str("sponge = true\n");
            s.push_str(&format!("sponge_strength = {}\n", fmt_f64(strength)));
        }
        None => s.push_str("sponge = false\n"),
    }
    s.push_str(&format!("t_max = {}\n", fmt_f64(cfg.t_max)));
    s.push('\n');
    s.push_str("[initial]\n");
    match &cfg.initial {
        InitialData::GroundStateScaled { lambda, sign } => {
            s.push_str("kind = \"ground_state_scaled\"\n");
            s.push_str(&format!("lambda = {}\n", fmt_f64(*lambda)));
            s.push_str(&format!("sign = {}\n", fmt_f64(*sign)));
        }
        InitialData::Gaussian { amplitude, width, udot, n, ndot } => {
            s.push_str("kind = \"gaussian\"\n");
            s.push_str(&format!("amplitude = {}\n", fmt_f64(*amplitude)));
            s.push_str(&format!("width = {}\n", fmt_f64(*width)));
            for (name, pulse) in [("udot", udot), ("n", n), ("ndot", ndot)] {
                if let Some(p) = pulse {
                    s.push_str(&format!("\n[initial.{name}]\n"));
                    s.push_str(&format!("amplitude = {}\n", fmt_f64(p.amplitude)));
                    s.push_str(&format!("width = {}\n", fmt_f64(p.width)));
                }
            }
        }
        InitialData::FromCheckpoint { path } => {
            s.push_str("kind = \"checkpoint\"\n");
            s.push_str(&format!("path = {}\n", fmt_toml_string(&path.to_string_lossy())));
        }
    }
    s
}

/// Hex SHA-256 of the canonical configuration echo.
pub fn config_sha256(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(to_toml_string(cfg).as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let (cfg, warnings) = parse_and_validate("alpha = 0.5\nlambda = 1.2\n").unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg.r_max, 30.0);
        assert_eq!(cfg.n, 4096);
        assert_eq!(cfg.alpha, 0.5);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.t_max, 20.0);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.observe_every, 100);
        assert_eq!(cfg.blowup_threshold, 10.0);
        assert!(cfg.dealias);
        assert!(cfg.sponge.is_none());
        assert!(cfg.confirm_blowup);
        assert_eq!(cfg.scattering_interval, 1.0);
        assert!(cfg.local_virial_radii.is_empty());
        assert!(cfg.eps_target.is_none());
        assert!(cfg.checkpoint_every.is_none());
        assert_eq!(cfg.output, PathBuf::from("kgz-out"));
        assert_eq!(cfg.gs_tol, 1e-12);
        assert_eq!(cfg.initial, InitialData::GroundStateScaled { lambda: 1.2, sign: 1.0 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_and_validate("alpa = 0.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpa"), "error should name the offending key: {msg}");

        let err = parse_and_validate("[initial]\nkind = \"gaussian\"\nwidht = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("widht"));
    }

    #[test]
    fn alpha_validation_matches_the_model_assumptions() {
        let err = parse_and_validate("alpha = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("alpha"));

        let err = parse_and_validate("alpha = -0.5\n").unwrap_err();
        assert!(err.to_string().contains("alpha"));

        let (_, warnings) = parse_and_validate("alpha = 2.0\nt_max = 12.0\n").unwrap();
        assert!(warnings.iter().any(|w| w.contains("alpha")), "expected a supersonic warning");
    }

    #[test]
    fn negative_dt_is_rejected() {
        let err = parse_and_validate("dt = -1e-3\n").unwrap_err();
        assert!(err.to_string().contains("dt"));
    }

    #[test]
    fn lambda_shorthand_conflicts_with_initial_table() {
        let err =
            parse_and_validate("lambda = 1.2\n\n[initial]\nkind = \"gaussian\"\n").unwrap_err();
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn initial_kind_fields_are_cross_checked() {
        // Checkpoint without a path.
        let err = parse_and_validate("[initial]\nkind = \"checkpoint\"\n").unwrap_err();
        assert!(err.to_string().contains("path"));

        // Gaussian with a ground-state key.
        let err =
            parse_and_validate("[initial]\nkind = \"gaussian\"\nlambda = 1.1\n").unwrap_err();
        assert!(err.to_string().contains("lambda"));

        // Unknown kind.
        let err = parse_and_validate("[initial]\nkind = \"bump\"\n").unwrap_err();
        assert!(err.to_string().contains("bump"));

        // Sign restricted to ±1.
        let err = parse_and_validate("[initial]\nlambda = 1.0\nsign = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("sign"));
    }

    #[test]
    fn reflection_horizon_guard_respects_the_sponge() {
        let err = parse_and_validate("t_max = 30.0\n").unwrap_err();
        assert!(err.to_string().contains("reflect"));

        let (cfg, _) = parse_and_validate("t_max = 30.0\nsponge = true\n").unwrap();
        assert_eq!(cfg.sponge, Some(5.0));

        // Faster ambient speed tightens the horizon: α = 2 halves it.
        assert!(parse_and_validate("alpha = 2.0\nt_max = 20.0\n").is_err());
        assert!(parse_and_validate("alpha = 2.0\nt_max = 12.0\n").is_ok());
    }

    #[test]
    fn coarse_time_step_draws_a_warning() {
        let (_, warnings) = parse_and_validate("dt = 0.1\nt_max = 10.0\n").unwrap();
        assert!(warnings.iter().any(|w| w.contains("dt")), "expected an accuracy warning");
    }

    #[test]
    fn local_virial_radii_must_sit_inside_the_half_domain() {
        let err = parse_and_validate("local_virial_radii = [16.0]\n").unwrap_err();
        assert!(err.to_string().contains("virial"));
        assert!(parse_and_validate("local_virial_radii = [4.0, 15.0]\n").is_ok());
    }

    #[test]
    fn canonical_echo_round_trips() {
        let samples = [
            "alpha = 0.5\nlambda = 1.2\n",
            "t_max = 8.0\nsponge = true\nsponge_strength = 3.0\nlocal_virial_radii = [4.0]\n\
             eps_target = 1e-4\ncheckpoint_every = 500\nseed = 7\n",
            "[initial]\nkind = \"gaussian\"\namplitude = 2.0\nwidth = 1.5\n\
             [initial.udot]\namplitude = 0.1\nwidth = 3.0\n",
        ];
        for text in samples {
            let (cfg, _) = parse_and_validate(text).unwrap();
            let echo = to_toml_string(&cfg);
            let (cfg2, _) = parse_and_validate(&echo).unwrap();
            assert_eq!(cfg, cfg2, "echo failed to round-trip:\n{echo}");
            assert_eq!(echo, to_toml_string(&cfg2));
            assert_eq!(config_sha256(&cfg), config_sha256(&cfg2));
        }
    }

    #[test]
    fn checkpoint_initial_skips_the_horizon_guard() {
        let (cfg, _) =
            parse_and_validate("t_max = 40.0\n[initial]\nkind = \"checkpoint\"\npath = \"x.ckpt\"\n")
                .unwrap();
        assert_eq!(cfg.initial, InitialData::FromCheckpoint { path: PathBuf::from("x.ckpt") });
    }
}
