//! Seeded random fields and states for the property and acceptance suites.
//!
//! Every generator takes the RNG by `&mut` so call sites control seeding
//! (ChaCha streams make runs reproducible across platforms); nothing here
//! touches global randomness. Fields are built either from a smooth random
//! spectrum (low-pass Gaussian envelope, so norms of all orders are
//! well-behaved) or from a few random radial bumps, then rescaled to a
//! target H¹ size — tests that need amplitude control get it deterministically.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::evolution::SystemState;
use crate::functionals::{self, NormKind, VarIndex};
use crate::grid::{RadialField, RadialGrid, SpectralField};
use crate::spectral::inverse_sine_transform;

/// Random field with a smooth spectrum: a_k ∝ g_k·exp(−(ξ_k/ξ_c)²) with
/// g_k uniform and a random cutoff ξ_c ∈ [1, 3], rescaled so that
/// ‖f‖_{H¹} = amplitude·ρ with ρ ∈ [0.5, 1.5].
pub fn random_smooth_field(
    grid: &Arc<RadialGrid>,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> RadialField {
    let xi_c: f64 = rng.gen_range(1.0..3.0);
    let coeffs: Vec<f64> = grid
        .freqs()
        .iter()
        .map(|&xi| {
            let g: f64 = rng.gen_range(-1.0..1.0);
            g * (-(xi / xi_c) * (xi / xi_c)).exp()
        })
        .collect();
    let a = SpectralField::from_coeffs(grid, coeffs).expect("length fixed by grid");
    let mut f = inverse_sine_transform(&a);
    let h1 = functionals::norm(&f, NormKind::H1);
    let target = amplitude * rng.gen_range(0.5..1.5);
    if h1 > 0.0 {
        f.scale(target / h1);
    }
    f
}

/// Random field made of up to three radial bumps c·r·exp(−((r−ρ)/σ)²)
/// (in reduced storage), rescaled like [`random_smooth_field`].
pub fn random_bump_field(
    grid: &Arc<RadialGrid>,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> RadialField {
    let n_bumps = rng.gen_range(1..=3);
    let params: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..grid.r_max() / 3.0),
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();
    let w = grid
        .nodes()
        .iter()
        .map(|&r| {
            params
                .iter()
                .map(|&(c, rho, sigma)| {
                    let s = (r - rho) / sigma;
                    c * r * (-s * s).exp()
                })
                .sum()
        })
        .collect();
    let mut f = RadialField::from_reduced(grid, w).expect("length fixed by grid");
    let h1 = functionals::norm(&f, NormKind::H1);
    let target = amplitude * rng.gen_range(0.5..1.5);
    if h1 > 0.0 {
        f.scale(target / h1);
    }
    f
}

/// Random full state (u, u̇, n, ṅ) with independent smooth components.
pub fn random_state(
    grid: &Arc<RadialGrid>,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> SystemState {
    SystemState::new(
        0.0,
        random_smooth_field(grid, rng, amplitude),
        random_smooth_field(grid, rng, amplitude),
        random_smooth_field(grid, rng, amplitude),
        random_smooth_field(grid, rng, amplitude),
        alpha,
    )
    .expect("components share the grid and alpha is validated by caller")
}

/// Damps a field by the smooth radial envelope exp(−16·(r/R)⁴), which is
/// ≈ 10⁻⁷ at the boundary.
///
/// Identities that integrate by parts on the ball (dilation pairings and
/// space-rescaling families) pick up O(1) boundary terms unless the fields
/// vanish at r = R; whole-ball random spectra do not, enveloped ones do.
pub fn damp_to_interior(f: &RadialField) -> RadialField {
    let grid = f.grid();
    let w: Vec<f64> = f
        .values()
        .iter()
        .zip(grid.nodes())
        .map(|(&w, &r)| {
            let x = r / grid.r_max();
            w * (-16.0 * x * x * x * x).exp()
        })
        .collect();
    RadialField::from_reduced(grid, w).expect("length fixed by grid")
}

/// Random field localized to the interior: [`random_smooth_field`] damped
/// by [`damp_to_interior`].
pub fn random_interior_field(
    grid: &Arc<RadialGrid>,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> RadialField {
    damp_to_interior(&random_smooth_field(grid, rng, amplitude))
}

/// Random state with every component damped by [`damp_to_interior`].
pub fn random_interior_state(
    grid: &Arc<RadialGrid>,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> SystemState {
    let mut s = random_state(grid, alpha, rng, amplitude);
    for f in [&mut s.u, &mut s.udot, &mut s.n, &mut s.ndot] {
        *f = damp_to_interior(f);
    }
    s
}

/// Random state with energy strictly below a threshold: smooth components
/// scaled down (deterministically) until E < fraction·threshold, with the
/// fraction drawn from [0.3, 0.9].
pub fn random_below_threshold_state(
    grid: &Arc<RadialGrid>,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    threshold: f64,
) -> SystemState {
    let fraction = rng.gen_range(0.3..0.9);
    let mut s = random_state(grid, alpha, rng, 1.0);
    for _ in 0..200 {
        let e = functionals::energy_e(&s).expect("fields share one grid");
        if e < fraction * threshold {
            break;
        }
        s.u.scale(0.8);
        s.udot.scale(0.8);
        s.n.scale(0.8);
        s.ndot.scale(0.8);
    }
    s
}

/// Random admissible pair (φ, ν) for the variational inequalities:
/// J(φ) + ν²/4 ≤ J(Q) with ν = ρ·ν_max, ρ ∈ [0, 0.95].
///
/// ν_max = 2√(J(Q) − J(φ)) is the largest admissible ν; the scaled
/// ground-state family touches the inequalities exactly at ν = ν_max, so
/// staying at ρ ≤ 0.95 keeps true margins above quadrature roundoff.
/// Draws alternate between scaled ground states λ·Q (λ ∈ [0.2, 1.6], which
/// covers both signs of K) and smooth random fields rescaled below the
/// threshold.
pub fn random_variational_pair(
    q_profile: &RadialField,
    jq: f64,
    rng: &mut ChaCha8Rng,
) -> (RadialField, f64) {
    let grid = q_profile.grid();
    let phi = if rng.gen_bool(0.5) {
        let lambda = rng.gen_range(0.2..1.6);
        let mut f = q_profile.clone();
        f.scale(lambda);
        f
    } else {
        let amplitude = rng.gen_range(0.5..6.0);
        let mut f = random_smooth_field(grid, rng, amplitude);
        // J is unbounded below but we need J(φ) ≤ J(Q); shrink until inside
        for _ in 0..200 {
            if functionals::static_energy_j(&f) <= 0.98 * jq {
                break;
            }
            f.scale(0.85);
        }
        f
    };
    let j_phi = functionals::static_energy_j(&phi);
    debug_assert!(j_phi <= jq);
    let nu_max = 2.0 * (jq - j_phi).max(0.0).sqrt();
    let nu = nu_max * rng.gen_range(0.0..0.95);
    (phi, nu)
}

/// K₀ and K₂ of a field, bundled for samplers that branch on signs.
pub fn k_pair(f: &RadialField) -> (f64, f64) {
    (
        functionals::functional_k(VarIndex::Zero, f),
        functionals::functional_k(VarIndex::Two, f),
    )
}
