//! Numerical laboratory for the radial Klein-Gordon-Zakharov system on ℝ³:
//!
//! ```text
//!     ü − Δu + u = n·u
//!     n̈/α² − Δn  = −Δ(u²)          (ion sound speed α > 0, α ≠ 1)
//! ```
//!
//! The crate computes the cubic ground state Q (−ΔQ + Q = Q³) and the
//! threshold value J(Q), evolves radial initial data with a symplectic
//! Strang splitting on a sine-spectral grid, evaluates the variational and
//! virial functionals that control the global dynamics, and classifies each
//! trajectory as scattering or blow-up — the two sides of the below-threshold
//! dichotomy that the functionals predict from the sign of K₀ at t = 0.
//!
//! Module map:
//!
//! * [`grid`] — radial Dirichlet grid on (0, R); fields stored in reduced
//!   form w(r) = r·f(r), which turns the 3-D radial Laplacian into w ↦ w″.
//! * [`spectral`] — sine transform (DST-I via FFT), Fourier multipliers
//!   m(|∇|), and Littlewood–Paley projections.
//! * [`functionals`] — norms and the static/dynamic functionals
//!   J, K₀, K₂, G₀, G₂, E.
//! * [`ground_state`] — shooting + bisection for Q, certification
//!   (PDE residual, Pohozaev identities), and the standing-wave state.
//! * [`evolution`] — Strang-split evolution, free flow, blow-up detection,
//!   bit-exact checkpointing.
//! * [`diagnostics`] — virial and auxiliary identities along trajectories,
//!   low-frequency reference for the damped functional I₂, variational
//!   inequality margins, scattering residuals, run classification.
//! * [`sampling`] — seeded random fields and states for property suites.
//! * [`verify`] — batteries of invariant checks shared by `kgz verify` and
//!   the test suites.
//! * [`config`] / [`runner`] — TOML-driven runs, sweeps, artifacts.

pub mod config;
pub mod diagnostics;
pub mod evolution;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod runner;
pub mod sampling;
pub mod spectral;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI maps them to exit codes:
/// configuration/usage problems (exit 1), detected inconsistencies between
/// predicted and observed dynamics or failed invariants (exit 2), and
/// runtime/I-O failures (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction rejected the requested parameters.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A Fourier-multiplier identifier was not recognized.
    #[error("unknown symbol id: {0}")]
    UnknownSymbol(String),

    /// The ground-state search could not establish or keep a valid bracket.
    #[error("ground-state search failed: {0}")]
    GroundState(String),

    /// Certification of a computed object failed a tolerance.
    #[error("certification failed: {0}")]
    Certification(String),

    /// The low-frequency reference search exhausted its cap.
    #[error("low-frequency reference: {0}")]
    LowFreq(String),

    /// A checkpoint file is malformed, corrupt, or incompatible.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Predicted and observed behaviour disagree, or an invariant failed.
    #[error("inconsistency detected: {0}")]
    Inconsistent(String),

    /// Underlying I/O failure.
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// Artifact (de)serialization failure.
    #[error("serialization: {0}")]
    Serde(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
