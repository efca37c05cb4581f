//! Time evolution of the coupled system by symmetric Strang splitting.
//!
//! The flow is split into an exactly solvable linear part and an exactly
//! solvable nonlinear kick:
//!
//! ```text
//!     A (linear):  ü = Δu − u            ṅ evolves by  n̈ = α²Δn
//!     B (kick):    u̇ += dt·n·u           ṅ += dt·α²(−Δ)(−u²)  … i.e.
//!                  (u, n frozen during the kick, so B is exactly integrable)
//! ```
//!
//! In the sine basis part A is a per-mode rotation with angles t·⟨ξ⟩ and
//! t·αξ, and part B only changes the momenta (u̇, ṅ), so one step is the
//! palindromic composition  L(dt/2) ∘ K(dt) ∘ L(dt/2). Both flows are exact
//! symplectic maps, hence the composition is a symplectic, time-reversible,
//! second-order integrator: energy error stays bounded and O(dt²), and
//! stepping with −dt undoes stepping with +dt to roundoff.
//!
//! The internal state is *spectral* (coefficient vectors for u, u̇, n, ṅ);
//! each step performs four transforms: two syntheses to form the node-space
//! products n·u and u², and two analyses to bring them back. Products are
//! de-aliased by the 2/3 rule (modes above ⌊2(N−1)/3⌋ zeroed, and the
//! initial data projected onto the kept band), which makes the kick the
//! exact Hamiltonian kick of the spectrally truncated system — energy
//! conservation is preserved, aliasing feedback is not possible.
//!
//! Termination: at the horizon t_max, when ‖u(t)‖_{H¹} exceeds
//! `blowup_threshold` times its initial value (threshold crossing is the
//! primary blow-up detector; crossing times are compared across dt and dt/2
//! reruns), or when any coefficient goes non-finite ([`BlowupSignal`]; the
//! state is reverted to the last finite step).
//!
//! Checkpoints store the *spectral* state plus the time base
//! (t_origin, step_index): every timestamp is always computed as the single
//! expression t_origin + k·dt, never re-based, so a resumed run replays the
//! exact floating-point trajectory of an uninterrupted one — checkpoint
//! and CSV artifacts are bitwise reproducible across interruptions.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::grid::{make_grid, RadialField, RadialGrid};
use crate::spectral::{lp_cutoff, SineTransform};
use crate::{Error, Result};

/// Full state of the coupled system at one instant.
#[derive(Debug, Clone)]
pub struct SystemState {
    /// Current time.
    pub t: f64,
    /// Scalar (Klein–Gordon) field u.
    pub u: RadialField,
    /// Velocity u̇.
    pub udot: RadialField,
    /// Wave (density) field n.
    pub n: RadialField,
    /// Velocity ṅ.
    pub ndot: RadialField,
    /// Ion sound speed α (> 0, ≠ 1).
    pub alpha: f64,
}

/// Validates the ion sound speed: finite, positive, and not equal to one.
///
/// At α = 1 the density waves and the Klein–Gordon characteristics share a
/// propagation speed; the Klein–Gordon–Zakharov model analysis (and the
/// dichotomy this laboratory probes) requires the two speeds to differ, so
/// α = 1 is rejected outright rather than warned about.
pub fn validate_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "alpha must be finite and positive, got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Err(Error::InvalidConfig(
            "alpha = 1 makes the density-wave speed coincide with the \
             Klein-Gordon characteristic speed; the Klein-Gordon-Zakharov \
             model requires alpha != 1 (alpha < 1 is the physical regime)"
                .to_string(),
        ));
    }
    Ok(())
}

impl SystemState {
    /// Builds a state, checking that all four fields share one grid and
    /// that α is admissible.
    pub fn new(
        t: f64,
        u: RadialField,
        udot: RadialField,
        n: RadialField,
        ndot: RadialField,
        alpha: f64,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        u.grid().check_same(udot.grid(), "state fields u/udot")?;
        u.grid().check_same(n.grid(), "state fields u/n")?;
        u.grid().check_same(ndot.grid(), "state fields u/ndot")?;
        Ok(SystemState {
            t,
            u,
            udot,
            n,
            ndot,
            alpha,
        })
    }

    /// Grid shared by the four fields.
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    /// True when every node value of every field is finite.
    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.udot.is_finite() && self.n.is_finite() && self.ndot.is_finite()
    }
}

/// Exponential damping layer covering the outer 10 % of the ball.
///
/// Opt-in: each step multiplies all four fields by exp(−dt·σ(r)) with
/// σ(r) = strength · s((r − 0.9R)/(0.1R)) and s the cubic smoothstep.
/// Absorbs outgoing radiation before it reflects off the Dirichlet wall —
/// and deliberately breaks exact energy conservation, which is why the
/// horizon guard only yields to configurations that enable it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpongeConfig {
    /// Peak damping rate σ at the outer boundary.
    pub strength: f64,
}

impl Default for SpongeConfig {
    fn default() -> Self {
        SpongeConfig { strength: 5.0 }
    }
}

/// Absolute time base of a trajectory: timestamps are always the single
/// expression t_origin + k·dt with k the absolute step index. Resumed runs
/// keep the original base so their floating-point timestamps are bitwise
/// identical to an uninterrupted run's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBase {
    /// Time of absolute step 0.
    pub t_origin: f64,
    /// Absolute index of the first step of this evolve call.
    pub step_offset: u64,
}

/// Checkpoint cadence and destination directory.
#[derive(Debug, Clone)]
pub struct CheckpointPlan {
    /// Write `checkpoint_{step:08}.ckpt` every this many absolute steps.
    pub every: Option<u64>,
    /// Directory receiving checkpoint files (plus `final.ckpt` at the end).
    pub dir: PathBuf,
}

/// Evolution parameters.
#[derive(Debug, Clone)]
pub struct EvolveConfig {
    /// Step size (> 0).
    pub dt: f64,
    /// Absolute horizon time.
    pub t_max: f64,
    /// Observer cadence in steps.
    pub observe_every: usize,
    /// Blow-up declared when ‖u‖_{H¹} exceeds this multiple (> 1) of the
    /// initial wave-pair size √(‖u₀‖²_{H¹} + ‖u̇₀‖²), which equals the
    /// initial ‖u₀‖_{H¹} whenever u̇₀ = 0 and stays a meaningful yardstick
    /// for kick-started runs where u₀ = 0.
    pub blowup_threshold: f64,
    /// 2/3-rule de-aliasing of the nonlinear products (default on).
    pub dealias: bool,
    /// Optional absorbing layer.
    pub sponge: Option<SpongeConfig>,
    /// Optional absolute time base (set when resuming mid-trajectory).
    pub time_base: Option<TimeBase>,
    /// Optional checkpoint writing.
    pub checkpoint: Option<CheckpointPlan>,
}

impl EvolveConfig {
    /// Config with conventional defaults for everything but (dt, t_max).
    pub fn new(dt: f64, t_max: f64) -> Self {
        EvolveConfig {
            dt,
            t_max,
            observe_every: 100,
            blowup_threshold: 10.0,
            dealias: true,
            sponge: None,
            time_base: None,
            checkpoint: None,
        }
    }
}

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Reached the horizon t_max.
    Horizon,
    /// ‖u‖_{H¹} crossed the blow-up threshold at time t.
    BlowupThreshold {
        /// Crossing time.
        t: f64,
    },
    /// A non-finite value appeared during the step ending at time t; the
    /// reported final state is the last finite one.
    BlowupSignal {
        /// Detection time (the failed step's end time).
        t: f64,
    },
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::Horizon => write!(f, "horizon"),
            Termination::BlowupThreshold { t } => write!(f, "blowup_threshold at t = {t}"),
            Termination::BlowupSignal { t } => write!(f, "blowup_signal at t = {t}"),
        }
    }
}

/// Error carrier of [`step`]: a non-finite value appeared; `last_finite`
/// is the state before the failing step.
#[derive(Debug)]
pub struct BlowupSignal {
    /// End time of the step in which the overflow occurred.
    pub t: f64,
    /// Last finite state.
    pub last_finite: SystemState,
}

/// Result of an [`evolve`] call.
#[derive(Debug)]
pub struct EvolveOutcome {
    /// State at termination (last finite state for [`Termination::BlowupSignal`]).
    pub final_state: SystemState,
    /// Why the run ended.
    pub termination: Termination,
    /// Number of completed (finite) steps in this call.
    pub steps_completed: u64,
    /// Peak ‖u‖_{H¹} observed along the trajectory.
    pub peak_h1: f64,
}

// ---------------------------------------------------------------------------
// stepper
// ---------------------------------------------------------------------------

struct Stepper {
    grid: Arc<RadialGrid>,
    alpha: f64,
    dt: f64,
    plan: SineTransform,
    // half-step rotation tables: (u with ω = ⟨ξ⟩, n with ω = αξ)
    cos_u: Vec<f64>,
    sinc_u: Vec<f64>,
    msin_u: Vec<f64>,
    cos_n: Vec<f64>,
    sinc_n: Vec<f64>,
    msin_n: Vec<f64>,
    // kick weight α²ξ² for the ṅ equation
    kick_n: Vec<f64>,
    // H¹ weights (1 + ξ²)
    h1_w: Vec<f64>,
    // number of low modes kept by the 2/3 rule (usize::MAX = no dealias)
    keep: usize,
    // node damping factors exp(−dt σ(r_j)) when a sponge is active
    sponge: Option<Vec<f64>>,
    // spectral state
    au: Vec<f64>,
    audot: Vec<f64>,
    an: Vec<f64>,
    andot: Vec<f64>,
    // last finite spectral state (rollback target)
    prev: [Vec<f64>; 4],
    // node/mode scratch
    wu: Vec<f64>,
    wn: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
    fa: Vec<f64>,
    fb: Vec<f64>,
}

impl Stepper {
    fn new(grid: &Arc<RadialGrid>, alpha: f64, dt: f64, cfg: &EvolveConfig) -> Stepper {
        let m = grid.len();
        let tau = 0.5 * dt;
        let mut cos_u = vec![0.0; m];
        let mut sinc_u = vec![0.0; m];
        let mut msin_u = vec![0.0; m];
        let mut cos_n = vec![0.0; m];
        let mut sinc_n = vec![0.0; m];
        let mut msin_n = vec![0.0; m];
        let mut kick_n = vec![0.0; m];
        let mut h1_w = vec![0.0; m];
        for (k, &xi) in grid.freqs().iter().enumerate() {
            let om_u = (1.0 + xi * xi).sqrt();
            let (s, c) = (tau * om_u).sin_cos();
            cos_u[k] = c;
            sinc_u[k] = s / om_u;
            msin_u[k] = -om_u * s;
            let om_n = alpha * xi;
            let (sn, cn) = (tau * om_n).sin_cos();
            cos_n[k] = cn;
            sinc_n[k] = sn / om_n;
            msin_n[k] = -om_n * sn;
            kick_n[k] = alpha * alpha * xi * xi;
            h1_w[k] = 1.0 + xi * xi;
        }
        let keep = if cfg.dealias {
            2 * (grid.n() - 1) / 3
        } else {
            usize::MAX
        };
        let sponge = cfg.sponge.map(|sp| {
            let r_max = grid.r_max();
            grid.nodes()
                .iter()
                .map(|&r| {
                    let x = (r - 0.9 * r_max) / (0.1 * r_max);
                    // cubic smoothstep ramp reusing the spectral cutoff bridge
                    let ramp = 1.0 - lp_cutoff(1.0 + x.clamp(0.0, 1.0));
                    (-dt * sp.strength * ramp).exp()
                })
                .collect()
        });
        Stepper {
            grid: Arc::clone(grid),
            alpha,
            dt,
            plan: SineTransform::new(grid),
            cos_u,
            sinc_u,
            msin_u,
            cos_n,
            sinc_n,
            msin_n,
            kick_n,
            h1_w,
            keep,
            sponge,
            au: vec![0.0; m],
            audot: vec![0.0; m],
            an: vec![0.0; m],
            andot: vec![0.0; m],
            prev: [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            wu: vec![0.0; m],
            wn: vec![0.0; m],
            p1: vec![0.0; m],
            p2: vec![0.0; m],
            fa: vec![0.0; m],
            fb: vec![0.0; m],
        }
    }

    fn seed_from_state(&mut self, s: &SystemState) {
        self.plan.forward_values(s.u.values(), &mut self.au);
        self.plan.forward_values(s.udot.values(), &mut self.audot);
        self.plan.forward_values(s.n.values(), &mut self.an);
        self.plan.forward_values(s.ndot.values(), &mut self.andot);
        self.project();
    }

    fn seed_from_spectra(&mut self, au: &[f64], audot: &[f64], an: &[f64], andot: &[f64]) {
        self.au.copy_from_slice(au);
        self.audot.copy_from_slice(audot);
        self.an.copy_from_slice(an);
        self.andot.copy_from_slice(andot);
        self.project();
    }

    /// Projects the state onto the kept band (no-op without de-aliasing;
    /// idempotent, so re-projection at resume is bit-exact).
    fn project(&mut self) {
        if self.keep == usize::MAX {
            return;
        }
        for v in [&mut self.au, &mut self.audot, &mut self.an, &mut self.andot] {
            for c in v.iter_mut().skip(self.keep) {
                *c = 0.0;
            }
        }
    }

    fn snapshot(&mut self) {
        self.prev[0].copy_from_slice(&self.au);
        self.prev[1].copy_from_slice(&self.audot);
        self.prev[2].copy_from_slice(&self.an);
        self.prev[3].copy_from_slice(&self.andot);
    }

    fn rollback(&mut self) {
        self.au.copy_from_slice(&self.prev[0]);
        self.audot.copy_from_slice(&self.prev[1]);
        self.an.copy_from_slice(&self.prev[2]);
        self.andot.copy_from_slice(&self.prev[3]);
    }

    fn half_linear(&mut self) {
        for k in 0..self.au.len() {
            let (u, v) = (self.au[k], self.audot[k]);
            self.au[k] = self.cos_u[k] * u + self.sinc_u[k] * v;
            self.audot[k] = self.msin_u[k] * u + self.cos_u[k] * v;
            let (nn, m) = (self.an[k], self.andot[k]);
            self.an[k] = self.cos_n[k] * nn + self.sinc_n[k] * m;
            self.andot[k] = self.msin_n[k] * nn + self.cos_n[k] * m;
        }
    }

    fn kick(&mut self) {
        self.plan.inverse_values(&self.au, &mut self.wu);
        self.plan.inverse_values(&self.an, &mut self.wn);
        let nodes = self.grid.nodes();
        for j in 0..self.wu.len() {
            let r = nodes[j];
            self.p1[j] = self.wu[j] * self.wn[j] / r; // reduced n·u
            self.p2[j] = self.wu[j] * self.wu[j] / r; // reduced u²
        }
        self.plan.forward_values(&self.p1, &mut self.fa);
        self.plan.forward_values(&self.p2, &mut self.fb);
        if self.keep != usize::MAX {
            for c in self.fa.iter_mut().skip(self.keep) {
                *c = 0.0;
            }
            for c in self.fb.iter_mut().skip(self.keep) {
                *c = 0.0;
            }
        }
        for k in 0..self.audot.len() {
            self.audot[k] += self.dt * self.fa[k];
            self.andot[k] += self.dt * self.kick_n[k] * self.fb[k];
        }
    }

    fn apply_sponge(&mut self) {
        let damp = match &self.sponge {
            Some(d) => d.clone(),
            None => return,
        };
        for (spec, node) in [
            (&mut self.au, &mut self.wu),
            (&mut self.audot, &mut self.wn),
            (&mut self.an, &mut self.p1),
            (&mut self.andot, &mut self.p2),
        ] {
            self.plan.inverse_values(spec, node);
            for (v, d) in node.iter_mut().zip(&damp) {
                *v *= d;
            }
            self.plan.forward_values(node, spec);
        }
    }

    /// One full Strang step L(dt/2) K(dt) L(dt/2) (plus optional sponge).
    fn advance(&mut self) {
        self.half_linear();
        self.kick();
        self.half_linear();
        if self.sponge.is_some() {
            self.apply_sponge();
        }
    }

    fn all_finite(&self) -> bool {
        self.au.iter().all(|v| v.is_finite())
            && self.audot.iter().all(|v| v.is_finite())
            && self.an.iter().all(|v| v.is_finite())
            && self.andot.iter().all(|v| v.is_finite())
    }

    /// Spectral ‖u‖²_{H¹} = 2πR Σ (1+ξ²) a².
    fn h1_sq(&self) -> f64 {
        let s: f64 = self
            .au
            .iter()
            .zip(&self.h1_w)
            .map(|(&a, &w)| w * a * a)
            .sum();
        2.0 * std::f64::consts::PI * self.grid.r_max() * s
    }

    /// Free-flow-invariant size of the wave pair:
    /// ‖u‖²_{H¹} + ‖u̇‖²_{L²} = 2πR Σ [(1+ξ²) a² + ȧ²].
    fn wave_pair_sq(&self) -> f64 {
        let s: f64 = self
            .au
            .iter()
            .zip(&self.audot)
            .zip(&self.h1_w)
            .map(|((&a, &ad), &w)| w * a * a + ad * ad)
            .sum();
        2.0 * std::f64::consts::PI * self.grid.r_max() * s
    }

    fn materialize(&mut self, t: f64) -> SystemState {
        let m = self.grid.len();
        let mk = |coeffs: &[f64], plan: &mut SineTransform| {
            let mut w = vec![0.0; m];
            plan.inverse_values(coeffs, &mut w);
            RadialField::from_reduced(&self.grid, w).expect("length fixed by grid")
        };
        let u = mk(&self.au, &mut self.plan);
        let udot = mk(&self.audot, &mut self.plan);
        let n = mk(&self.an, &mut self.plan);
        let ndot = mk(&self.andot, &mut self.plan);
        SystemState::new(t, u, udot, n, ndot, self.alpha)
            .expect("stepper state is internally consistent")
    }

    fn checkpoint(&self, dt: f64, t_origin: f64, step_index: u64, base_size_sq: f64) -> Checkpoint {
        Checkpoint {
            grid: Arc::clone(&self.grid),
            alpha: self.alpha,
            dt,
            t_origin,
            step_index,
            base_size_sq,
            au: self.au.clone(),
            audot: self.audot.clone(),
            an: self.an.clone(),
            andot: self.andot.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// public stepping
// ---------------------------------------------------------------------------

/// One Strang step of size dt (may be negative: the method is symmetric,
/// so stepping back undoes stepping forward to roundoff).
///
/// Convenience wrapper that plans transforms on each call; use [`evolve`]
/// for trajectories.
pub fn step(
    s: &SystemState,
    dt: f64,
    dealias: bool,
) -> std::result::Result<SystemState, Box<BlowupSignal>> {
    let mut cfg = EvolveConfig::new(dt.abs().max(f64::MIN_POSITIVE), 0.0);
    cfg.dealias = dealias;
    let mut st = Stepper::new(s.grid(), s.alpha, dt, &cfg);
    st.seed_from_state(s);
    st.advance();
    if !st.all_finite() {
        return Err(Box::new(BlowupSignal {
            t: s.t + dt,
            last_finite: s.clone(),
        }));
    }
    Ok(st.materialize(s.t + dt))
}

/// Exact free (linear) flow by time t: per-mode rotations with angles
/// t·⟨ξ⟩ for (u, u̇) and t·αξ for (n, ṅ). U(−t) inverts U(t) to roundoff.
pub fn free_flow(s: &SystemState, t: f64) -> SystemState {
    let grid = s.grid();
    let au = crate::spectral::sine_transform(&s.u);
    let audot = crate::spectral::sine_transform(&s.udot);
    let an = crate::spectral::sine_transform(&s.n);
    let andot = crate::spectral::sine_transform(&s.ndot);
    let m = grid.len();
    let mut bu = vec![0.0; m];
    let mut budot = vec![0.0; m];
    let mut bn = vec![0.0; m];
    let mut bndot = vec![0.0; m];
    for (k, &xi) in grid.freqs().iter().enumerate() {
        let om_u = (1.0 + xi * xi).sqrt();
        let (su, cu) = (t * om_u).sin_cos();
        bu[k] = cu * au.coeffs()[k] + su / om_u * audot.coeffs()[k];
        budot[k] = -om_u * su * au.coeffs()[k] + cu * audot.coeffs()[k];
        let om_n = s.alpha * xi;
        let (sn, cn) = (t * om_n).sin_cos();
        bn[k] = cn * an.coeffs()[k] + sn / om_n * andot.coeffs()[k];
        bndot[k] = -om_n * sn * an.coeffs()[k] + cn * andot.coeffs()[k];
    }
    let mut plan = SineTransform::new(grid);
    let mut mk = |a: &[f64]| {
        let mut w = vec![0.0; m];
        plan.inverse_values(a, &mut w);
        RadialField::from_reduced(grid, w).expect("length fixed by grid")
    };
    let u = mk(&bu);
    let udot = mk(&budot);
    let n = mk(&bn);
    let ndot = mk(&bndot);
    SystemState::new(s.t + t, u, udot, n, ndot, s.alpha).expect("free flow preserves validity")
}

fn validate_evolve_config(grid: &RadialGrid, alpha: f64, cfg: &EvolveConfig) -> Result<()> {
    if !cfg.dt.is_finite() || cfg.dt <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "dt must be finite and positive, got {}",
            cfg.dt
        )));
    }
    if !cfg.t_max.is_finite() || cfg.t_max < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "t_max must be finite and nonnegative, got {}",
            cfg.t_max
        )));
    }
    if cfg.observe_every == 0 {
        return Err(Error::InvalidConfig(
            "observe_every must be at least 1".to_string(),
        ));
    }
    if !(cfg.blowup_threshold > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "blowup_threshold must exceed 1, got {}",
            cfg.blowup_threshold
        )));
    }
    let t_origin = cfg.time_base.map_or(0.0, |tb| tb.t_origin);
    let duration = cfg.t_max - t_origin;
    let limit = 0.8 * grid.r_max() / alpha.max(1.0);
    if cfg.sponge.is_none() && duration > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "duration {duration} exceeds 0.8·R/max(1,α) = {limit}: waves would \
             reflect off the Dirichlet wall and re-enter; shorten the run, \
             enlarge the ball, or enable the sponge layer"
        )));
    }
    Ok(())
}

/// Evolves an initial state to the horizon (or blow-up), reporting states
/// to `observer` at the configured cadence: the initial state (fresh runs
/// only), every `observe_every`-th step, and the terminal state. A zero-step
/// run reports nothing.
pub fn evolve(
    s0: &SystemState,
    cfg: &EvolveConfig,
    observer: impl FnMut(&SystemState, u64),
) -> Result<EvolveOutcome> {
    validate_alpha(s0.alpha)?;
    validate_evolve_config(s0.grid(), s0.alpha, cfg)?;
    let tb = cfg.time_base.unwrap_or(TimeBase {
        t_origin: s0.t,
        step_offset: 0,
    });
    let implied_t = tb.t_origin + tb.step_offset as f64 * cfg.dt;
    if (implied_t - s0.t).abs() > 1e-9 * (1.0 + s0.t.abs()) {
        return Err(Error::InvalidConfig(format!(
            "time base implies t = {implied_t} but the state carries t = {}",
            s0.t
        )));
    }
    let mut st = Stepper::new(s0.grid(), s0.alpha, cfg.dt, cfg);
    st.seed_from_state(s0);
    evolve_inner(st, s0.alpha, tb, cfg, observer)
}

/// Resumes a trajectory from a checkpoint, bit-exactly: the stepper is
/// seeded with the stored spectral state and the stored time base, and dt
/// must match the checkpoint's dt exactly.
pub fn evolve_from_checkpoint(
    ck: &Checkpoint,
    cfg: &EvolveConfig,
    observer: impl FnMut(&SystemState, u64),
) -> Result<EvolveOutcome> {
    if cfg.dt != ck.dt {
        return Err(Error::InvalidConfig(format!(
            "resume requires the checkpoint's dt = {} (got {}); a different \
             step size cannot reproduce the same trajectory",
            ck.dt, cfg.dt
        )));
    }
    validate_alpha(ck.alpha)?;
    let mut cfg2 = cfg.clone();
    cfg2.time_base = Some(TimeBase {
        t_origin: ck.t_origin,
        step_offset: ck.step_index,
    });
    validate_evolve_config(&ck.grid, ck.alpha, &cfg2)?;
    let mut st = Stepper::new(&ck.grid, ck.alpha, ck.dt, &cfg2);
    st.seed_from_spectra(&ck.au, &ck.audot, &ck.an, &ck.andot);
    let tb = cfg2.time_base.unwrap();
    evolve_inner_with_base(st, ck.alpha, tb, &cfg2, observer, Some(ck.base_size_sq))
}

fn evolve_inner(
    st: Stepper,
    alpha: f64,
    tb: TimeBase,
    cfg: &EvolveConfig,
    observer: impl FnMut(&SystemState, u64),
) -> Result<EvolveOutcome> {
    evolve_inner_with_base(st, alpha, tb, cfg, observer, None)
}

fn evolve_inner_with_base(
    mut st: Stepper,
    _alpha: f64,
    tb: TimeBase,
    cfg: &EvolveConfig,
    mut observer: impl FnMut(&SystemState, u64),
    base_override: Option<f64>,
) -> Result<EvolveOutcome> {
    let dt = cfg.dt;
    let time_of = |k: u64| tb.t_origin + k as f64 * dt;
    let steps_total = ((cfg.t_max - tb.t_origin) / dt).round() as i64;
    if steps_total < tb.step_offset as i64 {
        return Err(Error::InvalidConfig(format!(
            "horizon t_max = {} lies before the resume point t = {}",
            cfg.t_max,
            time_of(tb.step_offset)
        )));
    }
    let remaining = steps_total as u64 - tb.step_offset;
    if remaining == 0 {
        // zero-duration run: no steps, no records
        let final_state = st.materialize(time_of(tb.step_offset));
        return Ok(EvolveOutcome {
            peak_h1: st.h1_sq().sqrt(),
            final_state,
            termination: Termination::Horizon,
            steps_completed: 0,
        });
    }

    let base_size_sq = base_override.unwrap_or_else(|| st.wave_pair_sq());
    let thr_sq = cfg.blowup_threshold * cfg.blowup_threshold * base_size_sq;
    let m = cfg.observe_every as u64;
    let mut peak_h1_sq = st.h1_sq();
    let mut last_observed: Option<u64> = None;

    if tb.step_offset == 0 {
        let s = st.materialize(time_of(0));
        observer(&s, 0);
        last_observed = Some(0);
    }

    let mut k_abs = tb.step_offset;
    let mut termination = Termination::Horizon;
    let mut steps_completed = 0u64;

    while k_abs < tb.step_offset + remaining {
        st.snapshot();
        st.advance();
        let k_next = k_abs + 1;
        if !st.all_finite() {
            st.rollback();
            termination = Termination::BlowupSignal { t: time_of(k_next) };
            break;
        }
        k_abs = k_next;
        steps_completed += 1;
        let h1_sq = st.h1_sq();
        peak_h1_sq = peak_h1_sq.max(h1_sq);
        if let Some(plan) = &cfg.checkpoint {
            if plan.every.map_or(false, |e| e > 0 && k_abs % e == 0) {
                let ck = st.checkpoint(dt, tb.t_origin, k_abs, base_size_sq);
                write_checkpoint(
                    &plan.dir.join(format!("checkpoint_{k_abs:08}.ckpt")),
                    &ck,
                )?;
            }
        }
        if h1_sq > thr_sq {
            termination = Termination::BlowupThreshold { t: time_of(k_abs) };
            break;
        }
        if k_abs % m == 0 {
            let s = st.materialize(time_of(k_abs));
            observer(&s, k_abs);
            last_observed = Some(k_abs);
        }
    }

    // k_abs now indexes the last finite state (the failed step was rolled back)
    let final_state = st.materialize(time_of(k_abs));
    if last_observed != Some(k_abs) {
        observer(&final_state, k_abs);
    }
    if let Some(plan) = &cfg.checkpoint {
        let ck = st.checkpoint(dt, tb.t_origin, k_abs, base_size_sq);
        write_checkpoint(&plan.dir.join("final.ckpt"), &ck)?;
    }
    Ok(EvolveOutcome {
        final_state,
        termination,
        steps_completed,
        peak_h1: peak_h1_sq.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"KGZCKPT1";
const CHECKPOINT_VERSION: u32 = 1;

/// Bit-exact snapshot of a trajectory: the spectral state, the absolute
/// time base, and the blow-up reference ‖u₀‖²_{H¹}.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    /// Grid of the stored trajectory.
    pub grid: Arc<RadialGrid>,
    /// Ion sound speed.
    pub alpha: f64,
    /// Step size the trajectory was (and must keep being) advanced with.
    pub dt: f64,
    /// Time of absolute step 0.
    pub t_origin: f64,
    /// Absolute step index of the stored state.
    pub step_index: u64,
    /// Blow-up reference of the whole run: the initial wave-pair size
    /// ‖u₀‖²_{H¹} + ‖u̇₀‖²_{L²}. The free flow preserves this quantity, so
    /// it is the natural yardstick for later H¹ growth, and it is nonzero
    /// whenever the wave subsystem carries any data at all (a bare ‖u₀‖²
    /// reference degenerates to zero for kick-started runs with u₀ = 0 and
    /// would flag them as blown up on the first step).
    pub base_size_sq: f64,
    /// Sine coefficients of u.
    pub au: Vec<f64>,
    /// Sine coefficients of u̇.
    pub audot: Vec<f64>,
    /// Sine coefficients of n.
    pub an: Vec<f64>,
    /// Sine coefficients of ṅ.
    pub andot: Vec<f64>,
}

impl Checkpoint {
    /// Time of the stored state: always t_origin + step_index·dt.
    pub fn state_time(&self) -> f64 {
        self.t_origin + self.step_index as f64 * self.dt
    }

    /// Materializes the stored state into node space.
    pub fn to_state(&self) -> SystemState {
        let mut plan = SineTransform::new(&self.grid);
        let m = self.grid.len();
        let mut mk = |a: &[f64]| {
            let mut w = vec![0.0; m];
            plan.inverse_values(a, &mut w);
            RadialField::from_reduced(&self.grid, w).expect("length fixed by grid")
        };
        let u = mk(&self.au);
        let udot = mk(&self.audot);
        let n = mk(&self.an);
        let ndot = mk(&self.andot);
        SystemState::new(self.state_time(), u, udot, n, ndot, self.alpha)
            .expect("checkpoint passed validation on read")
    }

    /// Builds a checkpoint directly from a node-space state (absolute step 0).
    ///
    /// Used to freeze initial data; trajectories written by [`evolve`]
    /// checkpoint their internal spectral state instead.
    pub fn from_state(s: &SystemState, dt: f64) -> Checkpoint {
        let au = crate::spectral::sine_transform(&s.u);
        let audot = crate::spectral::sine_transform(&s.udot);
        let an = crate::spectral::sine_transform(&s.n);
        let andot = crate::spectral::sine_transform(&s.ndot);
        let base_size_sq =
            crate::functionals::h1_sq_modes(&au) + crate::functionals::l2_sq_modes(&audot);
        Checkpoint {
            grid: Arc::clone(s.grid()),
            alpha: s.alpha,
            dt,
            t_origin: s.t,
            step_index: 0,
            base_size_sq,
            au: au.coeffs().to_vec(),
            audot: audot.coeffs().to_vec(),
            an: an.coeffs().to_vec(),
            andot: andot.coeffs().to_vec(),
        }
    }
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_slice(buf: &mut Vec<u8>, v: &[f64]) {
    for &x in v {
        push_f64(buf, x);
    }
}

/// Serializes a checkpoint (little-endian, sha256-authenticated tail).
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let m = ck.grid.len();
    for (name, v) in [
        ("u", &ck.au),
        ("udot", &ck.audot),
        ("n", &ck.an),
        ("ndot", &ck.andot),
    ] {
        if v.len() != m {
            return Err(Error::Checkpoint(format!(
                "field {name} has {} coefficients, grid wants {m}",
                v.len()
            )));
        }
    }
    let mut buf = Vec::with_capacity(64 + 4 * m * 8 + 32);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    push_f64(&mut buf, ck.grid.r_max());
    buf.extend_from_slice(&(ck.grid.n() as u64).to_le_bytes());
    push_f64(&mut buf, ck.alpha);
    push_f64(&mut buf, ck.dt);
    push_f64(&mut buf, ck.t_origin);
    buf.extend_from_slice(&ck.step_index.to_le_bytes());
    push_f64(&mut buf, ck.base_size_sq);
    push_slice(&mut buf, &ck.au);
    push_slice(&mut buf, &ck.audot);
    push_slice(&mut buf, &ck.an);
    push_slice(&mut buf, &ck.andot);
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.data.len() {
            return Err(Error::Checkpoint("file truncated".to_string()));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64_vec(&mut self, len: usize) -> Result<Vec<f64>> {
        let raw = self.take(len * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Reads and authenticates a checkpoint file.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let data = fs::read(path)?;
    if data.len() < CHECKPOINT_MAGIC.len() + 32 {
        return Err(Error::Checkpoint(format!(
            "{}: too short to be a checkpoint",
            path.display()
        )));
    }
    let (body, tail) = data.split_at(data.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != tail {
        return Err(Error::Checkpoint(format!(
            "{}: checksum mismatch (corrupt or tampered file)",
            path.display()
        )));
    }
    let mut rd = Reader { data: body, pos: 0 };
    if rd.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic (not a checkpoint file)",
            path.display()
        )));
    }
    let version = rd.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let r_max = rd.f64()?;
    let n = rd.u64()? as usize;
    let alpha = rd.f64()?;
    let dt = rd.f64()?;
    let t_origin = rd.f64()?;
    let step_index = rd.u64()?;
    let base_size_sq = rd.f64()?;
    let grid = make_grid(r_max, n).map_err(|e| Error::Checkpoint(format!("{e}")))?;
    validate_alpha(alpha).map_err(|e| Error::Checkpoint(format!("{e}")))?;
    let m = grid.len();
    let au = rd.f64_vec(m)?;
    let audot = rd.f64_vec(m)?;
    let an = rd.f64_vec(m)?;
    let andot = rd.f64_vec(m)?;
    if rd.pos != body.len() {
        return Err(Error::Checkpoint(format!(
            "{}: {} trailing bytes",
            path.display(),
            body.len() - rd.pos
        )));
    }
    Ok(Checkpoint {
        grid,
        alpha,
        dt,
        t_origin,
        step_index,
        base_size_sq,
        au,
        audot,
        an,
        andot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{self, NormKind};
    use crate::grid::make_grid;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_state(seed: u64, amp: f64) -> SystemState {
        let grid = make_grid(20.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sampling::random_state(&grid, 0.5, &mut rng, amp)
    }

    #[test]
    fn alpha_validation_enforces_the_model_assumptions() {
        assert!(validate_alpha(0.5).is_ok());
        assert!(validate_alpha(2.0).is_ok());
        assert!(validate_alpha(1.0).is_err());
        assert!(validate_alpha(0.0).is_err());
        assert!(validate_alpha(-0.5).is_err());
        assert!(validate_alpha(f64::NAN).is_err());
    }

    #[test]
    fn free_flow_is_invertible_and_conserves_mode_energy() {
        let s = small_state(31, 0.5);
        let fwd = free_flow(&s, 2.5);
        let back = free_flow(&fwd, -2.5);
        for (f0, f1) in [
            (&s.u, &back.u),
            (&s.udot, &back.udot),
            (&s.n, &back.n),
            (&s.ndot, &back.ndot),
        ] {
            for (a, b) in f0.values().iter().zip(f1.values()) {
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
        // the linear quadratic form ‖u̇‖² + ‖u‖²_{H¹} is invariant
        let q0 = functionals::norm(&s.u, NormKind::H1).powi(2)
            + functionals::norm(&s.udot, NormKind::L2).powi(2);
        let q1 = functionals::norm(&fwd.u, NormKind::H1).powi(2)
            + functionals::norm(&fwd.udot, NormKind::L2).powi(2);
        assert!((q0 - q1).abs() < 1e-11 * (1.0 + q0));
    }

    #[test]
    fn strang_stepping_is_time_reversible() {
        let s0 = small_state(32, 0.3);
        let mut s = s0.clone();
        for _ in 0..50 {
            s = step(&s, 1e-2, true).expect("small data stays finite");
        }
        for _ in 0..50 {
            s = step(&s, -1e-2, true).expect("reverse steps stay finite");
        }
        let scale = functionals::norm(&s0.u, NormKind::H1);
        for (f0, f1) in [
            (&s0.u, &s.u),
            (&s0.udot, &s.udot),
            (&s0.n, &s.n),
            (&s0.ndot, &s.ndot),
        ] {
            for (a, b) in f0.values().iter().zip(f1.values()) {
                assert!(
                    (a - b).abs() < 1e-10 * (1.0 + scale),
                    "reversal defect {}",
                    (a - b).abs()
                );
            }
        }
        assert!((s.t - s0.t).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved_to_second_order_over_a_short_run() {
        let s0 = small_state(33, 0.4);
        let e0 = functionals::energy_e(&s0).unwrap();
        let mut cfg = EvolveConfig::new(1e-3, 1.0);
        cfg.observe_every = 200;
        let mut drift: f64 = 0.0;
        let out = evolve(&s0, &cfg, |s, _| {
            let e = functionals::energy_e(s).unwrap();
            drift = drift.max((e - e0).abs() / (1.0 + e0.abs()));
        })
        .unwrap();
        assert_eq!(out.termination, Termination::Horizon);
        assert_eq!(out.steps_completed, 1000);
        assert!(drift < 1e-6, "energy drift {drift}");
    }

    #[test]
    fn observer_cadence_covers_start_interior_and_final_states() {
        let s0 = small_state(34, 0.2);
        let mut cfg = EvolveConfig::new(0.1, 1.0);
        cfg.observe_every = 3;
        let mut seen = Vec::new();
        evolve(&s0, &cfg, |s, k| seen.push((k, s.t))).unwrap();
        let ks: Vec<u64> = seen.iter().map(|p| p.0).collect();
        assert_eq!(ks, vec![0, 3, 6, 9, 10]);
        assert!((seen[1].1 - 0.3).abs() < 1e-12);
        assert!((seen[4].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_duration_run_produces_no_records() {
        let s0 = small_state(35, 0.2);
        let cfg = EvolveConfig::new(1e-3, 0.0);
        let mut count = 0;
        let out = evolve(&s0, &cfg, |_, _| count += 1).unwrap();
        assert_eq!(count, 0, "zero-step run must not record");
        assert_eq!(out.steps_completed, 0);
        assert_eq!(out.termination, Termination::Horizon);
    }

    #[test]
    fn dealiasing_keeps_the_state_inside_the_kept_band() {
        let grid = make_grid(20.0, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let s0 = sampling::random_state(&grid, 0.5, &mut rng, 0.5);
        let s1 = step(&s0, 1e-2, true).unwrap();
        let keep = 2 * (grid.n() - 1) / 3;
        for f in [&s1.u, &s1.udot, &s1.n, &s1.ndot] {
            let a = crate::spectral::sine_transform(f);
            for (idx, &c) in a.coeffs().iter().enumerate() {
                if idx >= keep {
                    assert!(
                        c.abs() < 1e-12,
                        "mode {} leaked through the 2/3 cutoff: {c}",
                        idx + 1
                    );
                }
            }
        }
    }

    #[test]
    fn overflowing_data_raises_the_blowup_signal_with_a_finite_state() {
        let grid = make_grid(10.0, 64).unwrap();
        let huge = crate::grid::RadialField::from_profile(&grid, |r| 1e160 * (-r * r).exp());
        let s0 = SystemState::new(
            0.0,
            huge.clone(),
            crate::grid::RadialField::zeros(&grid),
            huge.clone(),
            crate::grid::RadialField::zeros(&grid),
            0.5,
        )
        .unwrap();
        let mut cfg = EvolveConfig::new(0.5, 8.0);
        cfg.blowup_threshold = 1e30;
        let out = evolve(&s0, &cfg, |_, _| {}).unwrap();
        match out.termination {
            Termination::BlowupSignal { t } => assert!(t > 0.0),
            other => panic!("expected a blow-up signal, got {other:?}"),
        }
        assert!(out.final_state.is_finite(), "reported state must be finite");
    }

    #[test]
    fn horizon_guard_rejects_reflected_wave_territory_unless_sponged() {
        let s0 = small_state(37, 0.2);
        // R = 20, α = 0.5 → limit 0.8·20 = 16
        let cfg = EvolveConfig::new(1e-3, 17.0);
        match evolve(&s0, &cfg, |_, _| {}) {
            Err(Error::InvalidConfig(msg)) => assert!(msg.contains("reflect")),
            other => panic!("expected horizon guard, got {other:?}"),
        }
        let mut cfg2 = EvolveConfig::new(1e-2, 17.0);
        cfg2.sponge = Some(SpongeConfig::default());
        assert!(evolve(&s0, &cfg2, |_, _| {}).is_ok());
    }

    #[test]
    fn sponge_drains_energy_from_outgoing_waves() {
        let grid = make_grid(20.0, 256).unwrap();
        // Oscillatory pulse in u̇ (carrier ξ₀ = 3): group speed
        // ξ/⟨ξ⟩ ≈ 0.95, so both the outgoing half and the half that first
        // crosses the origin reach the absorbing layer well before t = 30.
        // (An unmodulated Gaussian pulse would be a poor probe: most of its
        // energy sits at ξ ≲ 1 where the group speed is ≤ 0.7, and the
        // slow bulk never arrives by any reasonable horizon.)
        let s0 = SystemState::new(
            0.0,
            crate::grid::RadialField::zeros(&grid),
            crate::grid::RadialField::from_profile(&grid, |r| {
                (-(r - 3.0) * (r - 3.0)).exp() * (3.0 * r).cos()
            }),
            crate::grid::RadialField::zeros(&grid),
            crate::grid::RadialField::zeros(&grid),
            0.5,
        )
        .unwrap();
        let e0 = functionals::energy_e(&s0).unwrap();
        let mut cfg = EvolveConfig::new(2e-3, 30.0);
        cfg.sponge = Some(SpongeConfig::default());
        let out = evolve(&s0, &cfg, |_, _| {}).unwrap();
        assert!(matches!(out.termination, Termination::Horizon));
        let e1 = functionals::energy_e(&out.final_state).unwrap();
        // measured drain ≈ 83% (remainder: slow spectral sidebands still in
        // transit); assert 75% with margin
        assert!(
            e1 < 0.25 * e0,
            "sponge should absorb the pulse: E {e0} -> {e1}"
        );
    }

    #[test]
    fn checkpoint_files_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let s = small_state(38, 0.3);
        let ck = Checkpoint::from_state(&s, 1e-3);
        let path = dir.path().join("state.ckpt");
        write_checkpoint(&path, &ck).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(ck.au, back.au);
        assert_eq!(ck.audot, back.audot);
        assert_eq!(ck.an, back.an);
        assert_eq!(ck.andot, back.andot);
        assert_eq!(ck.step_index, back.step_index);
        assert_eq!(ck.t_origin.to_bits(), back.t_origin.to_bits());
        assert_eq!(ck.base_size_sq.to_bits(), back.base_size_sq.to_bits());

        // corruption must be detected
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        match read_checkpoint(&path) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("checksum")),
            other => panic!("expected checksum failure, got {other:?}"),
        }
    }

    #[test]
    fn resumed_runs_replay_the_exact_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let s0 = small_state(39, 0.35);

        // uninterrupted reference: 100 steps, checkpoints every 25
        let mut cfg = EvolveConfig::new(1e-2, 1.0);
        cfg.observe_every = 10;
        cfg.checkpoint = Some(CheckpointPlan {
            every: Some(25),
            dir: dir.path().join("a"),
        });
        let mut rows_a = Vec::new();
        evolve(&s0, &cfg, |s, k| rows_a.push((k, s.t, s.u.values().to_vec()))).unwrap();

        // interrupted at step 50, then resumed to the same horizon
        let mut cfg_b1 = cfg.clone();
        cfg_b1.t_max = 0.5;
        cfg_b1.checkpoint = Some(CheckpointPlan {
            every: Some(25),
            dir: dir.path().join("b"),
        });
        evolve(&s0, &cfg_b1, |_, _| {}).unwrap();
        let ck = read_checkpoint(&dir.path().join("b").join("checkpoint_00000050.ckpt")).unwrap();
        let mut cfg_b2 = cfg.clone();
        cfg_b2.checkpoint = Some(CheckpointPlan {
            every: Some(25),
            dir: dir.path().join("b2"),
        });
        let mut rows_b = Vec::new();
        evolve_from_checkpoint(&ck, &cfg_b2, |s, k| {
            rows_b.push((k, s.t, s.u.values().to_vec()))
        })
        .unwrap();

        // suffix rows must agree bitwise with the uninterrupted run
        let suffix: Vec<_> = rows_a.iter().filter(|r| r.0 > 50).collect();
        let resumed: Vec<_> = rows_b.iter().filter(|r| r.0 > 50).collect();
        assert_eq!(suffix.len(), resumed.len());
        for (a, b) in suffix.iter().zip(&resumed) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.to_bits(), b.1.to_bits(), "timestamps must match bitwise");
            for (x, y) in a.2.iter().zip(&b.2) {
                assert_eq!(x.to_bits(), y.to_bits(), "field values must match bitwise");
            }
        }

        // final checkpoints byte-identical
        let fa = std::fs::read(dir.path().join("a").join("final.ckpt")).unwrap();
        let fb = std::fs::read(dir.path().join("b2").join("final.ckpt")).unwrap();
        assert_eq!(fa, fb, "final checkpoints must be bitwise identical");
    }

    #[test]
    fn blowup_threshold_detection_reports_the_crossing_time() {
        // strongly supercritical data on a small grid blows up quickly
        let grid = make_grid(12.0, 128).unwrap();
        let u = crate::grid::RadialField::from_profile(&grid, |r| 6.0 * (-r * r / 2.0).exp());
        let n = crate::grid::RadialField::from_profile(&grid, |r| {
            let q = 6.0 * (-r * r / 2.0).exp();
            q * q
        });
        let s0 = SystemState::new(
            0.0,
            u,
            crate::grid::RadialField::zeros(&grid),
            n,
            crate::grid::RadialField::zeros(&grid),
            0.5,
        )
        .unwrap();
        let cfg = EvolveConfig::new(5e-4, 9.0);
        let out = evolve(&s0, &cfg, |_, _| {}).unwrap();
        match out.termination {
            Termination::BlowupThreshold { t } => {
                assert!(t > 0.0 && t < 9.0, "crossing time {t}");
                let h1_final = functionals::norm(&out.final_state.u, NormKind::H1);
                let h1_initial = functionals::norm(&s0.u, NormKind::H1);
                assert!(h1_final > 10.0 * h1_initial);
            }
            other => panic!("expected threshold crossing, got {other:?}"),
        }
        assert!(out.peak_h1 > 0.0);
    }
}
