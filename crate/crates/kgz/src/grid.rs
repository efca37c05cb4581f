//! Radial grid and field storage for the Dirichlet ball.
//!
//! A radial function f(r) on the ball 0 < r < R is stored through its
//! *reduced* form
//!
//! ```text
//!     w(r) = r · f(r),        w(0) = w(R) = 0,
//! ```
//!
//! because in three dimensions the radial Laplacian collapses to a second
//! derivative of w:  Δf = (1/r)·w″.  On the uniform interior nodes
//! r_j = j·Δr (j = 1..N−1, Δr = R/N) the sine basis sin(ξ_k r) with
//! ξ_k = kπ/R, k = 1..N−1, diagonalizes −Δ with eigenvalue ξ_k², so every
//! constant-coefficient operator becomes a per-mode multiplier (see
//! [`crate::spectral`]).
//!
//! Quadrature convention: all ℝ³ integrals of radial integrands reduce to
//! 4π ∫₀^R (·) r² dr, and with g = w²/r² type integrands the trapezoid rule
//! on the interior nodes (endpoint values vanish) is used throughout:
//!
//! ```text
//!     ∫_{ℝ³} f² = 4π ∫₀^R w² dr ≈ 4π Σ_j w_j² Δr .
//! ```
//!
//! For products of band-limited sine series the trapezoid rule is *exact*
//! (the aliasing sum Σ_j sin(πjm/N)sin(πjk/N) vanishes for m+k < 2N), which
//! is what makes the discrete functional identities in this crate hold to
//! roundoff rather than to quadrature order.

use std::sync::Arc;

use crate::{Error, Result};

/// Uniform radial Dirichlet grid on (0, R) with N subintervals.
///
/// Holds the interior nodes r_j = j·R/N (j = 1..N−1) and the dual sine
/// frequencies ξ_k = kπ/R (k = 1..N−1). N must be a power of two (the sine
/// transform runs through a length-2N FFT) and at least 8.
#[derive(Debug)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    dr: f64,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.r_max == other.r_max && self.n == other.n
    }
}

/// Builds a radial grid with radius `r_max` and `n` subintervals.
///
/// Rejects non-positive or non-finite radii, and any `n` that is not a
/// power of two ≥ 8.
pub fn make_grid(r_max: f64, n: usize) -> Result<Arc<RadialGrid>> {
    if !r_max.is_finite() || r_max <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "radius must be finite and positive, got {r_max}"
        )));
    }
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "node count must be a power of two >= 8, got {n}"
        )));
    }
    let dr = r_max / n as f64;
    let nodes = (1..n).map(|j| j as f64 * dr).collect();
    let freqs = (1..n)
        .map(|k| k as f64 * std::f64::consts::PI / r_max)
        .collect();
    Ok(Arc::new(RadialGrid {
        r_max,
        n,
        dr,
        nodes,
        freqs,
    }))
}

impl RadialGrid {
    /// Ball radius R.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Subinterval count N (grid has N−1 interior nodes).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of interior nodes / sine modes, N−1.
    pub fn len(&self) -> usize {
        self.n - 1
    }

    /// True when the grid is degenerate (cannot happen post-validation).
    pub fn is_empty(&self) -> bool {
        self.n <= 1
    }

    /// Node spacing Δr = R/N.
    pub fn dr(&self) -> f64 {
        self.dr
    }

    /// Interior nodes r_j = j·Δr, j = 1..N−1.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Sine frequencies ξ_k = kπ/R, k = 1..N−1.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Largest resolvable frequency ξ_{N−1}.
    pub fn max_freq(&self) -> f64 {
        *self.freqs.last().expect("grid has at least 7 modes")
    }

    /// Checks that two grids are interchangeable (same R and N).
    pub fn check_same(&self, other: &RadialGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (R = {}, N = {}) vs (R = {}, N = {})",
                self.r_max, self.n, other.r_max, other.n
            )))
        }
    }
}

/// Radial field in reduced node storage: `values()[j-1]` = w(r_j) = r_j·f(r_j).
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    w: Vec<f64>,
}

impl RadialField {
    /// The zero field.
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        RadialField {
            grid: Arc::clone(grid),
            w: vec![0.0; grid.len()],
        }
    }

    /// Samples a *physical* profile f(r) onto the grid, storing w = r·f(r).
    pub fn from_profile<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, f: F) -> Self {
        let w = grid.nodes().iter().map(|&r| r * f(r)).collect();
        RadialField {
            grid: Arc::clone(grid),
            w,
        }
    }

    /// Wraps already-reduced node values w(r_j), j = 1..N−1.
    pub fn from_reduced(grid: &Arc<RadialGrid>, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "reduced data has {} values, grid has {} interior nodes",
                w.len(),
                grid.len()
            )));
        }
        Ok(RadialField {
            grid: Arc::clone(grid),
            w,
        })
    }

    /// Grid this field lives on.
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Reduced node values w(r_j).
    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// Mutable reduced node values.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    /// Physical point values f(r_j) = w(r_j)/r_j.
    pub fn physical_values(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .zip(&self.w)
            .map(|(&r, &w)| w / r)
            .collect()
    }

    /// In-place scaling w ← c·w.
    pub fn scale(&mut self, c: f64) {
        for w in &mut self.w {
            *w *= c;
        }
    }

    /// In-place w ← w + c·other, requiring a shared grid.
    pub fn add_scaled(&mut self, other: &RadialField, c: f64) -> Result<()> {
        self.grid.check_same(&other.grid, "field sum")?;
        for (w, o) in self.w.iter_mut().zip(&other.w) {
            *w += c * o;
        }
        Ok(())
    }

    /// True when every node value is finite.
    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
    }
}

/// Sine-coefficient storage: `coeffs()[k-1]` = a_k in w(r) = Σ a_k sin(ξ_k r).
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<RadialGrid>,
    a: Vec<f64>,
}

impl SpectralField {
    /// The zero spectrum.
    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        SpectralField {
            grid: Arc::clone(grid),
            a: vec![0.0; grid.len()],
        }
    }

    /// Wraps a raw coefficient vector a_k, k = 1..N−1.
    pub fn from_coeffs(grid: &Arc<RadialGrid>, a: Vec<f64>) -> Result<Self> {
        if a.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "coefficient data has {} modes, grid has {}",
                a.len(),
                grid.len()
            )));
        }
        Ok(SpectralField {
            grid: Arc::clone(grid),
            a,
        })
    }

    /// Grid this spectrum belongs to.
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Coefficients a_k.
    pub fn coeffs(&self) -> &[f64] {
        &self.a
    }

    /// Mutable coefficients.
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.a
    }

    /// True when every coefficient is finite.
    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation_rejects_bad_parameters() {
        assert!(make_grid(30.0, 7).is_err(), "non power of two must fail");
        assert!(make_grid(30.0, 0).is_err());
        assert!(make_grid(30.0, 4).is_err(), "below minimum size");
        assert!(make_grid(0.0, 64).is_err());
        assert!(make_grid(-1.0, 64).is_err());
        assert!(make_grid(f64::NAN, 64).is_err());
        assert!(make_grid(30.0, 8).is_ok());
    }

    #[test]
    fn unit_radius_grid_has_integer_pi_frequencies() {
        let g = make_grid(1.0, 8).unwrap();
        assert_eq!(g.len(), 7);
        for (k, &xi) in g.freqs().iter().enumerate() {
            let expect = (k + 1) as f64 * std::f64::consts::PI;
            assert!((xi - expect).abs() < 1e-15 * expect);
        }
        for (j, &r) in g.nodes().iter().enumerate() {
            assert!((r - (j + 1) as f64 / 8.0).abs() < 1e-16);
        }
        assert!((g.dr() - 0.125).abs() < 1e-16);
    }

    #[test]
    fn reduced_storage_round_trips_physical_profiles() {
        let g = make_grid(10.0, 64).unwrap();
        let f = RadialField::from_profile(&g, |r| (-r * r).exp());
        let phys = f.physical_values();
        for (&r, &v) in g.nodes().iter().zip(&phys) {
            assert!((v - (-r * r).exp()).abs() < 1e-15);
        }
        // reduced values really carry the factor r
        for ((&r, &w), &v) in g.nodes().iter().zip(f.values()).zip(&phys) {
            assert!((w - r * v).abs() < 1e-15 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = make_grid(10.0, 64).unwrap();
        let g2 = make_grid(10.0, 128).unwrap();
        let mut a = RadialField::zeros(&g1);
        let b = RadialField::zeros(&g2);
        assert!(a.add_scaled(&b, 1.0).is_err());
        assert!(RadialField::from_reduced(&g1, vec![0.0; 5]).is_err());
        assert!(SpectralField::from_coeffs(&g1, vec![0.0; 5]).is_err());
    }
}
