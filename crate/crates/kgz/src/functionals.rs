//! Norms, inner products, and the variational functionals.
//!
//! All ℝ³ integrals reduce to radial ones: with w = r·f,
//!
//! ```text
//!     ‖f‖²_{L²}  = 4π Σ_j w_j² Δr                       (node sum)
//!                = 2πR Σ_k a_k²                          (Parseval)
//!     ‖∇f‖²_{L²} = 2πR Σ_k ξ_k² a_k²
//!     ‖f‖⁴_{L⁴}  = 4π Σ_j w_j⁴ / r_j² Δr
//!     ‖f‖²_{Ḣ⁻¹} = 2πR Σ_k a_k² / ξ_k²
//! ```
//!
//! The gradient identity uses ∫₀^R (f′)² r² dr = ∫₀^R (w′ − w/r)² dr
//! = ∫₀^R (w′)² − (w²)′/r dr, whose boundary terms vanish on the Dirichlet
//! ball, leaving Σ ξ² a² by Parseval. Trapezoid sums of products of
//! band-limited sine series are alias-free, so the functional identities
//! below hold to roundoff in the discrete arithmetic, not just to
//! quadrature order.
//!
//! Static functionals of a single field φ:
//!
//! ```text
//!     J(φ)  = ½‖φ‖²_{H¹} − ¼‖φ‖⁴_{L⁴}
//!     K₀(φ) = ∂_λ J(λφ)|_{λ=1}            = ‖φ‖²_{H¹} − ‖φ‖⁴_{L⁴}
//!     K₂(φ) = ∂_λ J(λ^{3/2}φ(λ·))|_{λ=1}  = ‖∇φ‖²    − ¾‖φ‖⁴_{L⁴}
//!     G₀ = J − K₀/4 = ¼‖φ‖²_{H¹}
//!     G₂ = J − K₂/3 = ½‖φ‖²_{L²} + ⅙‖∇φ‖²
//! ```
//!
//! G₀ and G₂ are the positive-definite combinations that make J coercive on
//! the sets {K_i ≥ 0}: minimizing J at the threshold is equivalent to
//! minimizing G_i, which is why they appear in the trapping arguments.
//!
//! Conserved energy of the full system (u, u̇, n, ṅ):
//!
//! ```text
//!     E = ∫ ½(|u|² + |∇u|² + |u̇|²) + ¼(|∇|⁻¹ṅ/α)² + ¼n² − ½n·u²
//!       = J(u) + ½‖u̇‖² + (1/4α²)‖ṅ‖²_{Ḣ⁻¹} + ¼‖n − u²‖² ,
//! ```
//!
//! two arrangements of the same discrete sums; [`energy_e`] evaluates both
//! and asserts their agreement (a live check on quadrature consistency)
//! before returning the positive-definite split, which is the better
//! conditioned form near the ground-state threshold.

use crate::evolution::SystemState;
use crate::grid::{RadialField, SpectralField};
use crate::spectral::sine_transform;
use crate::Result;

/// The two energy routes are the same sums rearranged; disagreement beyond
/// this level, relative to the magnitude of the summands, means a
/// quadrature convention got out of sync.
pub const ENERGY_ROUTE_TOL: f64 = 1e-10;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Norm selector for [`norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// ‖f‖_{L²(ℝ³)}
    L2,
    /// ‖∇f‖_{L²(ℝ³)}
    GradL2,
    /// (‖f‖² + ‖∇f‖²)^{1/2}
    H1,
    /// ‖f‖_{L⁴(ℝ³)}
    L4,
    /// ‖f‖_{Ḣ⁻¹(ℝ³)} = ‖|∇|⁻¹f‖_{L²}
    HDotMinusOne,
}

/// Variational scaling index: K₀/G₀ (amplitude scaling) or K₂/G₂
/// (L²-invariant rescaling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarIndex {
    Zero,
    Two,
}

// ---------------------------------------------------------------------------
// quadrature kernels (node and mode sums)
// ---------------------------------------------------------------------------

/// ‖f‖²_{L²} from node values: 4π Σ w² Δr.
pub fn l2_sq_nodes(f: &RadialField) -> f64 {
    let s: f64 = f.values().iter().map(|w| w * w).sum();
    FOUR_PI * s * f.grid().dr()
}

/// ‖f‖²_{L²} from sine coefficients: 2πR Σ a².
pub fn l2_sq_modes(a: &SpectralField) -> f64 {
    let s: f64 = a.coeffs().iter().map(|c| c * c).sum();
    2.0 * std::f64::consts::PI * a.grid().r_max() * s
}

/// ‖∇f‖²_{L²} from sine coefficients: 2πR Σ ξ² a².
pub fn grad_sq_modes(a: &SpectralField) -> f64 {
    let s: f64 = a
        .coeffs()
        .iter()
        .zip(a.grid().freqs())
        .map(|(&c, &xi)| xi * xi * c * c)
        .sum();
    2.0 * std::f64::consts::PI * a.grid().r_max() * s
}

/// ‖f‖²_{H¹} from sine coefficients: 2πR Σ (1+ξ²) a².
pub fn h1_sq_modes(a: &SpectralField) -> f64 {
    let s: f64 = a
        .coeffs()
        .iter()
        .zip(a.grid().freqs())
        .map(|(&c, &xi)| (1.0 + xi * xi) * c * c)
        .sum();
    2.0 * std::f64::consts::PI * a.grid().r_max() * s
}

/// ‖f‖²_{Ḣ⁻¹} from sine coefficients: 2πR Σ a²/ξ².
pub fn hm1_sq_modes(a: &SpectralField) -> f64 {
    let s: f64 = a
        .coeffs()
        .iter()
        .zip(a.grid().freqs())
        .map(|(&c, &xi)| c * c / (xi * xi))
        .sum();
    2.0 * std::f64::consts::PI * a.grid().r_max() * s
}

/// ‖f‖⁴_{L⁴} from node values: 4π Σ w⁴/r² Δr.
pub fn l4_quartic_nodes(f: &RadialField) -> f64 {
    let s: f64 = f
        .values()
        .iter()
        .zip(f.grid().nodes())
        .map(|(&w, &r)| {
            let w2 = w * w;
            w2 * w2 / (r * r)
        })
        .sum();
    FOUR_PI * s * f.grid().dr()
}

/// L² pairing of two coefficient vectors: 2πR Σ a b.
pub fn inner_l2_modes(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    a.grid().check_same(b.grid(), "L2 pairing")?;
    let s: f64 = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(&x, &y)| x * y)
        .sum();
    Ok(2.0 * std::f64::consts::PI * a.grid().r_max() * s)
}

/// Ḣ⁻¹ pairing ⟨|∇|⁻¹f, |∇|⁻¹g⟩_{L²}: 2πR Σ a b / ξ².
pub fn inner_hm1_modes(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    a.grid().check_same(b.grid(), "H^-1 pairing")?;
    let s: f64 = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .zip(a.grid().freqs())
        .map(|((&x, &y), &xi)| x * y / (xi * xi))
        .sum();
    Ok(2.0 * std::f64::consts::PI * a.grid().r_max() * s)
}

// ---------------------------------------------------------------------------
// public norms and pairings
// ---------------------------------------------------------------------------

/// Evaluates the selected norm of a field.
pub fn norm(f: &RadialField, kind: NormKind) -> f64 {
    match kind {
        NormKind::L2 => l2_sq_nodes(f).sqrt(),
        NormKind::GradL2 => grad_sq_modes(&sine_transform(f)).sqrt(),
        NormKind::H1 => {
            let a = sine_transform(f);
            h1_sq_modes(&a).sqrt()
        }
        NormKind::L4 => l4_quartic_nodes(f).powf(0.25),
        NormKind::HDotMinusOne => hm1_sq_modes(&sine_transform(f)).sqrt(),
    }
}

/// L²(ℝ³) inner product of two fields on a shared grid: 4π Σ w_f w_g Δr.
pub fn inner_l2(f: &RadialField, g: &RadialField) -> Result<f64> {
    f.grid().check_same(g.grid(), "L2 inner product")?;
    let s: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(&a, &b)| a * b)
        .sum();
    Ok(FOUR_PI * s * f.grid().dr())
}

// ---------------------------------------------------------------------------
// static functionals
// ---------------------------------------------------------------------------

/// Static energy J(φ) = ½‖φ‖²_{H¹} − ¼‖φ‖⁴_{L⁴}.
pub fn static_energy_j(f: &RadialField) -> f64 {
    let a = sine_transform(f);
    0.5 * h1_sq_modes(&a) - 0.25 * l4_quartic_nodes(f)
}

/// Scaling derivative K_i(φ) of J along the i-indexed family.
pub fn functional_k(i: VarIndex, f: &RadialField) -> f64 {
    let a = sine_transform(f);
    match i {
        VarIndex::Zero => h1_sq_modes(&a) - l4_quartic_nodes(f),
        VarIndex::Two => grad_sq_modes(&a) - 0.75 * l4_quartic_nodes(f),
    }
}

/// Positive-definite combination G_i = J − K_i / μ̄_i (μ̄₀ = 4, μ̄₂ = 3),
/// evaluated through its closed form.
pub fn functional_g(i: VarIndex, f: &RadialField) -> f64 {
    let a = sine_transform(f);
    match i {
        VarIndex::Zero => 0.25 * h1_sq_modes(&a),
        VarIndex::Two => 0.5 * l2_sq_modes(&a) + grad_sq_modes(&a) / 6.0,
    }
}

/// Energy decomposition E = J(u) + ½‖u̇‖² + (1/4α²)‖ṅ‖²_{Ḣ⁻¹} + ¼‖n−u²‖².
#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown {
    /// Total conserved energy.
    pub total: f64,
    /// Static part J(u).
    pub j_of_u: f64,
    /// ½‖u̇‖²_{L²}.
    pub kinetic_u: f64,
    /// (1/4α²)‖ṅ‖²_{Ḣ⁻¹}.
    pub kinetic_n: f64,
    /// ¼‖n − u²‖²_{L²}: distance of the wave field from the slaved value.
    pub coupling_defect: f64,
}

/// Reduced node values of n − u²: w_n − w_u²/r.
pub fn coupling_difference(u: &RadialField, n: &RadialField) -> Result<RadialField> {
    u.grid().check_same(n.grid(), "coupling difference")?;
    let w = u
        .values()
        .iter()
        .zip(n.values())
        .zip(u.grid().nodes())
        .map(|((&wu, &wn), &r)| wn - wu * wu / r)
        .collect();
    RadialField::from_reduced(u.grid(), w)
}

/// Splits the conserved energy into its nonnegative-definite pieces
/// (plus J(u), which carries the sign information).
pub fn energy_breakdown(s: &SystemState) -> Result<EnergyBreakdown> {
    let j_of_u = static_energy_j(&s.u);
    let kinetic_u = 0.5 * l2_sq_nodes(&s.udot);
    let kinetic_n = hm1_sq_modes(&sine_transform(&s.ndot)) / (4.0 * s.alpha * s.alpha);
    let defect = coupling_difference(&s.u, &s.n)?;
    let coupling_defect = 0.25 * l2_sq_nodes(&defect);
    Ok(EnergyBreakdown {
        total: j_of_u + kinetic_u + kinetic_n + coupling_defect,
        j_of_u,
        kinetic_u,
        kinetic_n,
        coupling_defect,
    })
}

/// Conserved energy E of a system state.
///
/// Evaluates both the direct integrand route and the split route and, when
/// both are finite, asserts their agreement to [`ENERGY_ROUTE_TOL`] — the
/// two are rearrangements of identical sums, so any larger discrepancy
/// indicates an internal quadrature inconsistency. The comparison is
/// relative to the magnitudes actually summed, not to the total: on a
/// focusing trajectory the quadratic and coupling terms grow without bound
/// and cancel, while the conserved total stays small, so roundoff in either
/// route is proportional to the summands.
pub fn energy_e(s: &SystemState) -> Result<f64> {
    let split = energy_breakdown(s)?;

    // direct route: ½‖u‖²_{H¹} + ½‖u̇‖² + (1/4α²)‖ṅ‖²_{Ḣ⁻¹} + ¼‖n‖² − ½⟨n,u²⟩
    let au = sine_transform(&s.u);
    let grad_mass = 0.5 * h1_sq_modes(&au);
    let n_mass = 0.25 * l2_sq_nodes(&s.n);
    let mut direct = grad_mass;
    direct += 0.5 * l2_sq_nodes(&s.udot);
    direct += hm1_sq_modes(&sine_transform(&s.ndot)) / (4.0 * s.alpha * s.alpha);
    direct += n_mass;
    let pair_nu2: f64 = s
        .u
        .values()
        .iter()
        .zip(s.n.values())
        .zip(s.u.grid().nodes())
        .map(|((&wu, &wn), &r)| wn * wu * wu / r)
        .sum::<f64>()
        * FOUR_PI
        * s.u.grid().dr();
    direct -= 0.5 * pair_nu2;

    if split.total.is_finite() && direct.is_finite() {
        let scale = 1.0
            + split.j_of_u.abs()
            + split.kinetic_u
            + split.kinetic_n
            + split.coupling_defect
            + grad_mass
            + n_mass
            + 0.5 * pair_nu2.abs();
        assert!(
            (split.total - direct).abs() <= ENERGY_ROUTE_TOL * scale,
            "energy route disagreement: split {} vs direct {}",
            split.total,
            direct
        );
    }
    Ok(split.total)
}

// ---------------------------------------------------------------------------
// scaling-derivative cross-check
// ---------------------------------------------------------------------------

/// Evaluates the sine interpolant of a reduced field at an arbitrary
/// argument: w(x) = Σ_k a_k sin(ξ_k x). Each mode is its own odd-periodic
/// extension, so the sum continues the interpolant smoothly past r = R —
/// exactly what a rescaling family needs near the boundary.
fn sine_series_at(a: &SpectralField, x: f64) -> f64 {
    a.coeffs()
        .iter()
        .zip(a.grid().freqs())
        .map(|(&c, &xi)| c * (xi * x).sin())
        .sum()
}

/// L²-invariant rescaling φ ↦ λ^{3/2} φ(λ·) in reduced storage:
/// w_λ(r) = √λ · w(λr), evaluated by exact summation of the sine series
/// (O(N²), used only in derivative cross-checks).
fn rescale_l2_invariant(f: &RadialField, lambda: f64) -> RadialField {
    let grid = f.grid();
    let a = sine_transform(f);
    let sq = lambda.sqrt();
    let w = grid
        .nodes()
        .iter()
        .map(|&r| sq * sine_series_at(&a, lambda * r))
        .collect();
    RadialField::from_reduced(grid, w).expect("length fixed by grid")
}

/// Residual of the central-difference check K_i(φ) ≈ ∂_λ J(φ_λ)|_{λ=1}.
///
/// For i = 0 the family λφ is evaluated exactly (J(λφ) is polynomial in λ;
/// the residual is h²·‖φ‖⁴_{L⁴} from the λ⁴ term alone). For i = 2 the
/// family rescales space, so the identity it checks integrates by parts:
/// on the ball that step is exact only for fields that decay before r = R,
/// and callers should pass interior-localized φ.
pub fn scaling_derivative_residual(f: &RadialField, i: VarIndex, h: f64) -> f64 {
    let j_at = |lam: f64| -> f64 {
        match i {
            VarIndex::Zero => {
                let mut g = f.clone();
                g.scale(lam);
                static_energy_j(&g)
            }
            VarIndex::Two => static_energy_j(&rescale_l2_invariant(f, lam)),
        }
    };
    let diff = (j_at(1.0 + h) - j_at(1.0 - h)) / (2.0 * h);
    (diff - functional_k(i, f)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Gaussian closed forms are met to this relative accuracy on a grid
    /// that resolves the profile (trapezoid error is superalgebraic here).
    const GAUSSIAN_TOL: f64 = 1e-10;

    #[test]
    fn gaussian_norms_match_closed_forms() {
        // for f = e^{−r²} on ℝ³ (recomputed symbolically):
        //   ‖f‖²_{L²} = (π/2)^{3/2},  ‖∇f‖² = 3(π/2)^{3/2},  ‖f‖⁴_{L⁴} = π^{3/2}/8
        let grid = make_grid(30.0, 2048).unwrap();
        let f = RadialField::from_profile(&grid, |r| (-r * r).exp());
        let l2sq = (std::f64::consts::PI / 2.0).powf(1.5);
        let grad = 3.0 * l2sq;
        let l4q = std::f64::consts::PI.powf(1.5) / 8.0;

        let got_l2 = norm(&f, NormKind::L2).powi(2);
        let got_grad = norm(&f, NormKind::GradL2).powi(2);
        let got_l4 = norm(&f, NormKind::L4).powi(4);
        let got_h1 = norm(&f, NormKind::H1).powi(2);

        assert!((got_l2 - l2sq).abs() < GAUSSIAN_TOL * l2sq, "{got_l2} vs {l2sq}");
        assert!((got_grad - grad).abs() < GAUSSIAN_TOL * grad, "{got_grad} vs {grad}");
        assert!((got_l4 - l4q).abs() < GAUSSIAN_TOL * l4q, "{got_l4} vs {l4q}");
        assert!((got_h1 - (l2sq + grad)).abs() < GAUSSIAN_TOL * (l2sq + grad));
    }

    #[test]
    fn hminus1_inverts_the_gradient_weight() {
        // ‖|∇|⁻¹ f‖ with f a single mode is 1/ξ times its L² norm
        let grid = make_grid(20.0, 256).unwrap();
        let xi = grid.freqs()[6];
        let f = RadialField::from_profile(&grid, |r| (xi * r).sin() / r);
        let l2 = norm(&f, NormKind::L2);
        let hm1 = norm(&f, NormKind::HDotMinusOne);
        assert!((hm1 - l2 / xi).abs() < 1e-12 * (1.0 + l2));
    }

    #[test]
    fn norms_are_absolutely_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let grid = make_grid(25.0, 256).unwrap();
        for _ in 0..25 {
            let f = sampling::random_smooth_field(&grid, &mut rng, 1.0);
            let mut g = f.clone();
            let c = -2.7;
            g.scale(c);
            for kind in [
                NormKind::L2,
                NormKind::GradL2,
                NormKind::H1,
                NormKind::L4,
                NormKind::HDotMinusOne,
            ] {
                let a = norm(&f, kind);
                let b = norm(&g, kind);
                assert!((b - c.abs() * a).abs() < 1e-11 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn inner_product_satisfies_cauchy_schwarz_and_bilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let grid = make_grid(25.0, 256).unwrap();
        for _ in 0..50 {
            let f = sampling::random_smooth_field(&grid, &mut rng, 1.0);
            let g = sampling::random_smooth_field(&grid, &mut rng, 1.0);
            let fg = inner_l2(&f, &g).unwrap();
            let nf = norm(&f, NormKind::L2);
            let ng = norm(&g, NormKind::L2);
            assert!(fg.abs() <= nf * ng * (1.0 + 1e-12));
            // bilinearity against a random combination
            let mut h = f.clone();
            h.add_scaled(&g, 0.5).unwrap();
            let lhs = inner_l2(&h, &g).unwrap();
            let rhs = fg + 0.5 * ng * ng;
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn g_functionals_equal_their_defining_combinations() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let grid = make_grid(25.0, 256).unwrap();
        for _ in 0..25 {
            let f = sampling::random_smooth_field(&grid, &mut rng, 1.5);
            let j = static_energy_j(&f);
            let g0 = functional_g(VarIndex::Zero, &f);
            let g2 = functional_g(VarIndex::Two, &f);
            let k0 = functional_k(VarIndex::Zero, &f);
            let k2 = functional_k(VarIndex::Two, &f);
            let scale = 1.0 + j.abs() + k0.abs() + k2.abs();
            assert!((g0 - (j - k0 / 4.0)).abs() < 1e-12 * scale);
            assert!((g2 - (j - k2 / 3.0)).abs() < 1e-12 * scale);
            assert!(g0 >= 0.0 && g2 >= 0.0, "G functionals are nonnegative");
        }
    }

    #[test]
    fn amplitude_scaling_derivative_matches_k0_with_quadratic_error() {
        let grid = make_grid(30.0, 1024).unwrap();
        let f = RadialField::from_profile(&grid, |r| 0.5 * (-r * r).exp());
        let k0 = functional_k(VarIndex::Zero, &f);
        let h = 1e-3;
        let res = scaling_derivative_residual(&f, VarIndex::Zero, h);
        assert!(
            res < 1e-6 * (1.0 + k0.abs()),
            "residual {res} exceeds contract at h={h}"
        );
        // the λ-family is an exact quartic, so the residual is h²·‖φ‖⁴_{L⁴}
        let predicted = h * h * l4_quartic_nodes(&f);
        assert!(
            (res - predicted).abs() < 0.02 * predicted + 1e-14,
            "residual {res} vs predicted {predicted}"
        );
    }

    #[test]
    fn rescaling_derivative_matches_k2_on_a_resolved_profile() {
        let grid = make_grid(30.0, 1024).unwrap();
        let f = RadialField::from_profile(&grid, |r| 0.5 * (-r * r).exp());
        let k2 = functional_k(VarIndex::Two, &f);
        let res = scaling_derivative_residual(&f, VarIndex::Two, 1e-3);
        assert!(
            res < 1e-4 * (1.0 + k2.abs()),
            "residual {res} exceeds contract"
        );
    }

    #[test]
    fn l2_invariant_rescaling_preserves_the_l2_norm() {
        let grid = make_grid(30.0, 1024).unwrap();
        let f = RadialField::from_profile(&grid, |r| 0.8 * (-0.7 * r * r).exp());
        for &lam in &[0.9, 1.0, 1.1] {
            let g = rescale_l2_invariant(&f, lam);
            let a = norm(&f, NormKind::L2);
            let b = norm(&g, NormKind::L2);
            assert!(
                (a - b).abs() < 1e-6 * a,
                "λ={lam}: L² drifted from {a} to {b}"
            );
        }
    }
}
