//! Sine-spectral transforms and Fourier multipliers on the radial grid.
//!
//! With fields stored in reduced form w = r·f (see [`crate::grid`]), the
//! operator −Δ acts as −∂²_r on w with Dirichlet ends, so the orthogonal
//! sine basis
//!
//! ```text
//!     w(r) = Σ_{k=1}^{N−1} a_k sin(ξ_k r),      ξ_k = kπ/R,
//! ```
//!
//! diagonalizes every radial constant-coefficient operator m(|∇|): it simply
//! multiplies a_k by m(ξ_k).
//!
//! # Transform realization
//!
//! The analysis/synthesis pair is the self-inverse DST-I kernel
//! S_k(w) = Σ_j w_j sin(πjk/N), realized through one complex FFT of length
//! 2N on the odd extension
//!
//! ```text
//!     v = (0, w_1, .., w_{N−1}, 0, −w_{N−1}, .., −w_1)   ⇒   V_k = −2i·S_k ,
//! ```
//!
//! so S_k = −Im(V_k)/2. With the normalization
//!
//! ```text
//!     forward:  a = (2/N)·S(w),         inverse:  w = S(a),
//! ```
//!
//! the pair is exactly mutually inverse (S² = (N/2)·Id) and Parseval reads
//! Σ_j w_j² Δr = (R/2) Σ_k a_k². Cosine sums Σ_k b_k cos(πjk/N) — needed for
//! radial derivatives w′(r_j) = Σ_k a_k ξ_k cos(ξ_k r_j) — come from the same
//! FFT plan applied to the even extension, V_j = 2·Σ b_k cos(πjk/N).
//!
//! # Multiplier catalog
//!
//! [`Symbol`] covers the operators used by the dynamics and diagnostics:
//! |∇|, |∇|⁻¹, ⟨∇⟩ = (1−Δ)^{1/2} and its inverse, −Δ, and the propagator
//! entries cos(tα|∇|), sin(tα|∇|)/(α|∇|), cos(t⟨∇⟩), sin(t⟨∇⟩)/⟨∇⟩.
//! All are safe pointwise because the grid's lowest frequency ξ₁ = π/R is
//! strictly positive (no division by ξ = 0 can occur).
//!
//! # Littlewood–Paley projections
//!
//! The dyadic cutoff is the cubic bridge
//!
//! ```text
//!     ψ(x) = 1 (x ≤ 1),   1 − s²(3−2s) with s = x−1 (1 < x < 2),   0 (x ≥ 2),
//! ```
//!
//! which is C¹ and monotone. `P_{≤k}` multiplies by ψ(ξ/2^k) and
//! `P_k = P_{≤k} − P_{≤k−1}` by ψ(ξ/2^k) − ψ(ξ/2^{k−1}); negative k reaches
//! below-unit scales (P_{≤−K} multiplies by ψ(2^K ξ)). Because ψ is smooth
//! rather than sharp, projections are idempotent only on modes where
//! ψ ∈ {0, 1}; on the open bridge 2^k < ξ < 2^{k+1} applying P_{≤k} twice
//! squares the bridge weights. Callers needing exact idempotence must stay
//! off the bridge (the property suite does exactly that).

use std::cell::RefCell;
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{RadialField, RadialGrid, SpectralField};
use crate::{Error, Result};

/// Reusable DST-I engine: one length-2N complex FFT plan plus buffers.
struct RawPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RawPlan {
    fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        RawPlan {
            n,
            fft,
            buf: vec![Complex64::default(); 2 * n],
            scratch,
        }
    }

    /// Unnormalized sine sum out_k = Σ_j x_j sin(πjk/N), k = 1..N−1.
    fn sine_sum(&mut self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n - 1);
        debug_assert_eq!(out.len(), n - 1);
        self.buf[0] = Complex64::default();
        self.buf[n] = Complex64::default();
        for j in 1..n {
            let v = x[j - 1];
            self.buf[j] = Complex64::new(v, 0.0);
            self.buf[2 * n - j] = Complex64::new(-v, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for k in 1..n {
            out[k - 1] = -0.5 * self.buf[k].im;
        }
    }

    /// Cosine sum out_j = Σ_k b_k cos(πjk/N), j = 1..N−1.
    fn cosine_sum(&mut self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n - 1);
        debug_assert_eq!(out.len(), n - 1);
        self.buf[0] = Complex64::default();
        self.buf[n] = Complex64::default();
        for k in 1..n {
            let v = b[k - 1];
            self.buf[k] = Complex64::new(v, 0.0);
            self.buf[2 * n - k] = Complex64::new(v, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for j in 1..n {
            out[j - 1] = 0.5 * self.buf[j].re;
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, RawPlan>> = RefCell::new(HashMap::new());
}

fn with_plan<T>(n: usize, f: impl FnOnce(&mut RawPlan) -> T) -> T {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        let plan = map.entry(n).or_insert_with(|| RawPlan::new(n));
        f(plan)
    })
}

/// Owned transform plan for hot loops (the evolution stepper keeps one per
/// worker); the free functions below use a thread-local plan cache instead.
pub struct SineTransform {
    grid: Arc<RadialGrid>,
    plan: RawPlan,
}

impl SineTransform {
    /// Builds a plan for `grid` (one length-2N FFT plus buffers).
    pub fn new(grid: &Arc<RadialGrid>) -> Self {
        SineTransform {
            grid: Arc::clone(grid),
            plan: RawPlan::new(grid.n()),
        }
    }

    /// Grid the plan was built for.
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Analysis on raw reduced values: a = (2/N)·S(w).
    pub fn forward_values(&mut self, w: &[f64], a: &mut [f64]) {
        self.plan.sine_sum(w, a);
        let scale = 2.0 / self.grid.n() as f64;
        for v in a.iter_mut() {
            *v *= scale;
        }
    }

    /// Synthesis on raw coefficients: w = S(a).
    pub fn inverse_values(&mut self, a: &[f64], w: &mut [f64]) {
        self.plan.sine_sum(a, w);
    }

    /// Evaluates the cosine series Σ_k b_k cos(πjk/N) at the interior nodes.
    /// With b_k = a_k ξ_k this is the radial derivative w′(r_j) of the sine
    /// series with coefficients a.
    pub fn cosine_values(&mut self, b: &[f64], out: &mut [f64]) {
        self.plan.cosine_sum(b, out);
    }

    /// Analysis of a field into sine coefficients.
    pub fn forward(&mut self, f: &RadialField) -> Result<SpectralField> {
        self.grid.check_same(f.grid(), "sine transform")?;
        let mut a = vec![0.0; self.grid.len()];
        self.forward_values(f.values(), &mut a);
        SpectralField::from_coeffs(&self.grid, a)
    }

    /// Synthesis of sine coefficients into a field.
    pub fn inverse(&mut self, f: &SpectralField) -> Result<RadialField> {
        self.grid.check_same(f.grid(), "inverse sine transform")?;
        let mut w = vec![0.0; self.grid.len()];
        self.inverse_values(f.coeffs(), &mut w);
        RadialField::from_reduced(&self.grid, w)
    }
}

/// Analysis w ↦ a with a_k = (2/N) Σ_j w_j sin(πjk/N), via cached plans.
pub fn sine_transform(f: &RadialField) -> SpectralField {
    let grid = f.grid();
    let mut a = vec![0.0; grid.len()];
    with_plan(grid.n(), |p| p.sine_sum(f.values(), &mut a));
    let scale = 2.0 / grid.n() as f64;
    for v in a.iter_mut() {
        *v *= scale;
    }
    SpectralField::from_coeffs(grid, a).expect("length fixed by grid")
}

/// Synthesis a ↦ w with w_j = Σ_k a_k sin(ξ_k r_j), via cached plans.
pub fn inverse_sine_transform(f: &SpectralField) -> RadialField {
    let grid = f.grid();
    let mut w = vec![0.0; grid.len()];
    with_plan(grid.n(), |p| p.sine_sum(f.coeffs(), &mut w));
    RadialField::from_reduced(grid, w).expect("length fixed by grid")
}

/// Node values of the radial derivative w′(r_j) = Σ_k a_k ξ_k cos(ξ_k r_j).
pub fn derivative_values(f: &SpectralField) -> Vec<f64> {
    let grid = f.grid();
    let b: Vec<f64> = f
        .coeffs()
        .iter()
        .zip(grid.freqs())
        .map(|(&a, &xi)| a * xi)
        .collect();
    let mut out = vec![0.0; grid.len()];
    with_plan(grid.n(), |p| p.cosine_sum(&b, &mut out));
    out
}

/// Radial Fourier multiplier m(|∇|) acting mode-wise in the sine basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symbol {
    /// |∇| : multiply by ξ.
    D,
    /// |∇|⁻¹ : multiply by 1/ξ (safe: the grid has ξ ≥ π/R > 0).
    DInv,
    /// ⟨∇⟩ = (1 − Δ)^{1/2} : multiply by √(1+ξ²).
    Bracket,
    /// ⟨∇⟩⁻¹ : multiply by 1/√(1+ξ²).
    BracketInv,
    /// −Δ : multiply by ξ².
    MinusLaplacian,
    /// Free-wave propagator entry cos(tα|∇|).
    WaveCos { t: f64, alpha: f64 },
    /// Free-wave propagator entry sin(tα|∇|)/(α|∇|).
    WaveSinc { t: f64, alpha: f64 },
    /// Klein–Gordon propagator entry cos(t⟨∇⟩).
    KgCos { t: f64 },
    /// Klein–Gordon propagator entry sin(t⟨∇⟩)/⟨∇⟩.
    KgSinc { t: f64 },
}

impl Symbol {
    /// Scalar symbol value m(ξ).
    pub fn eval(self, xi: f64) -> f64 {
        match self {
            Symbol::D => xi,
            Symbol::DInv => 1.0 / xi,
            Symbol::Bracket => (1.0 + xi * xi).sqrt(),
            Symbol::BracketInv => 1.0 / (1.0 + xi * xi).sqrt(),
            Symbol::MinusLaplacian => xi * xi,
            Symbol::WaveCos { t, alpha } => (t * alpha * xi).cos(),
            Symbol::WaveSinc { t, alpha } => (t * alpha * xi).sin() / (alpha * xi),
            Symbol::KgCos { t } => {
                let om = (1.0 + xi * xi).sqrt();
                (t * om).cos()
            }
            Symbol::KgSinc { t } => {
                let om = (1.0 + xi * xi).sqrt();
                (t * om).sin() / om
            }
        }
    }

    /// Resolves a symbol identifier, attaching parameters where required.
    ///
    /// Parameter-free ids: `d`, `d_inv`, `bracket`, `bracket_inv`,
    /// `minus_laplacian`. Propagator entries: `wave_cos`/`wave_sinc`
    /// (need `t` and `alpha`) and `kg_cos`/`kg_sinc` (need `t`).
    pub fn parse(id: &str, t: Option<f64>, alpha: Option<f64>) -> Result<Symbol> {
        let need_t = || {
            t.ok_or_else(|| Error::InvalidConfig(format!("symbol `{id}` requires a time t")))
        };
        let need_alpha = || {
            alpha.ok_or_else(|| {
                Error::InvalidConfig(format!("symbol `{id}` requires a wave speed alpha"))
            })
        };
        match id {
            "d" => Ok(Symbol::D),
            "d_inv" => Ok(Symbol::DInv),
            "bracket" => Ok(Symbol::Bracket),
            "bracket_inv" => Ok(Symbol::BracketInv),
            "minus_laplacian" => Ok(Symbol::MinusLaplacian),
            "wave_cos" => Ok(Symbol::WaveCos {
                t: need_t()?,
                alpha: need_alpha()?,
            }),
            "wave_sinc" => Ok(Symbol::WaveSinc {
                t: need_t()?,
                alpha: need_alpha()?,
            }),
            "kg_cos" => Ok(Symbol::KgCos { t: need_t()? }),
            "kg_sinc" => Ok(Symbol::KgSinc { t: need_t()? }),
            other => Err(Error::UnknownSymbol(other.to_string())),
        }
    }
}

impl FromStr for Symbol {
    type Err = Error;

    /// Parses a parameter-free symbol id (see [`Symbol::parse`]).
    fn from_str(s: &str) -> Result<Self> {
        Symbol::parse(s, None, None)
    }
}

/// Applies m(|∇|) mode-wise: a_k ↦ m(ξ_k)·a_k.
pub fn apply_symbol(f: &SpectralField, sym: Symbol) -> SpectralField {
    let grid = f.grid();
    let a = f
        .coeffs()
        .iter()
        .zip(grid.freqs())
        .map(|(&a, &xi)| a * sym.eval(xi))
        .collect();
    SpectralField::from_coeffs(grid, a).expect("length fixed by grid")
}

/// Smooth dyadic cutoff: 1 on (−∞,1], 0 on [2,∞), cubic bridge between.
///
/// The bridge 1 − s²(3−2s), s = x−1, is monotone decreasing and matches
/// value and first derivative at both ends (C¹).
pub fn lp_cutoff(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

/// Littlewood–Paley projection selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMode {
    /// P_{≤k}: multiplier ψ(ξ/2^k). Negative k selects sub-unit scales.
    LowPass(i32),
    /// P_k = P_{≤k} − P_{≤k−1}: multiplier ψ(ξ/2^k) − ψ(ξ/2^{k−1}).
    Band(i32),
}

/// Multiplier weight of `mode` at frequency ξ.
pub fn lp_weight(mode: LpMode, xi: f64) -> f64 {
    match mode {
        LpMode::LowPass(k) => lp_cutoff(xi * (-k as f64).exp2()),
        LpMode::Band(k) => {
            lp_cutoff(xi * (-k as f64).exp2()) - lp_cutoff(xi * (1.0 - k as f64).exp2())
        }
    }
}

/// Applies a Littlewood–Paley projection to a node-space field.
pub fn lp_project(f: &RadialField, mode: LpMode) -> RadialField {
    let mut a = sine_transform(f);
    for (c, &xi) in a.coeffs_mut().iter_mut().zip(f.grid().freqs()) {
        *c *= lp_weight(mode, xi);
    }
    inverse_sine_transform(&a)
}
