//! Analytic Lévy measure descriptions and the integrals operator builders
//! consume: small-ball second moments, cell masses and tail masses.
//!
//! All built-in kinds are symmetric. The fractional kind uses the
//! normalization `c_{N,α} = 2^α Γ((N+α)/2) / (π^{N/2} |Γ(-α/2)|)`, which makes
//! the associated Lévy operator equal to `-(-Δ)^{α/2}`. This constant is a
//! convention and can be overridden with [`LevyMeasureSpec::with_normalization`].

use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::quadrature::{
    integrate, integrate_box, integrate_to_infinity, integrate_with_breaks, BallRegion, Tolerance,
};
use crate::special::{fractional_normalization, unit_sphere_area};

pub type RadialDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointDensity = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MeasureKind {
    /// `c |z|^{-N-α}`.
    Fractional {
        alpha: f64,
    },
    /// `c g(|z|)` for a user supplied profile `g`.
    Radial(RadialDensity),
    /// Symmetric but not radial density with compact support in the ball
    /// of radius `support`.
    Custom {
        density: PointDensity,
        support: f64,
    },
    Zero,
}

impl fmt::Debug for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::Fractional { alpha } => write!(f, "Fractional {{ alpha: {alpha} }}"),
            MeasureKind::Radial(_) => write!(f, "Radial(..)"),
            MeasureKind::Custom { support, .. } => write!(f, "Custom {{ support: {support} }}"),
            MeasureKind::Zero => write!(f, "Zero"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevyMeasureSpec {
    kind: MeasureKind,
    dim: usize,
    normalization: f64,
    tol: Tolerance,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(param(format!("dimension must be >= 1, got {dim}")));
    }
    Ok(())
}

impl LevyMeasureSpec {
    /// The fractional Laplace measure of order `alpha` in `dim` dimensions.
    pub fn fractional(alpha: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(param(format!("fractional order must lie in (0, 2), got {alpha}")));
        }
        Ok(Self {
            kind: MeasureKind::Fractional { alpha },
            dim,
            normalization: fractional_normalization(alpha, dim),
            tol: Tolerance::default(),
        })
    }

    /// Radially symmetric density `g(|z|)`.
    pub fn radial(dim: usize, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: MeasureKind::Radial(Arc::new(profile)),
            dim,
            normalization: 1.0,
            tol: Tolerance::default(),
        })
    }

    /// A symmetric, compactly supported, possibly anisotropic density.
    /// The caller promises `density(z) == density(-z)` and that the density
    /// vanishes for `|z| > support`.
    pub fn custom(dim: usize, support: f64, density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_dim(dim)?;
        if !(support > 0.0 && support.is_finite()) {
            return Err(param("custom measure needs a finite positive support radius"));
        }
        Ok(Self {
            kind: MeasureKind::Custom {
                density: Arc::new(density),
                support,
            },
            dim,
            normalization: 1.0,
            tol: Tolerance::default(),
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: MeasureKind::Zero,
            dim,
            normalization: 0.0,
            tol: Tolerance::default(),
        })
    }

    pub fn with_normalization(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(param(format!("normalization must be positive, got {c}")));
        }
        if !matches!(self.kind, MeasureKind::Zero) {
            self.normalization = c;
        }
        Ok(self)
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            MeasureKind::Fractional { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, MeasureKind::Zero)
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, MeasureKind::Custom { .. })
    }

    /// Radial profile value at distance `rho > 0` (radial kinds only).
    pub fn radial_density(&self, rho: f64) -> Option<f64> {
        match &self.kind {
            MeasureKind::Fractional { alpha } => Some(self.normalization * rho.powf(-(self.dim as f64) - alpha)),
            MeasureKind::Radial(g) => Some(self.normalization * g(rho)),
            MeasureKind::Zero => Some(0.0),
            MeasureKind::Custom { .. } => None,
        }
    }

    /// Density at `z ≠ 0`.
    pub fn density(&self, z: &[f64]) -> f64 {
        match &self.kind {
            MeasureKind::Custom { density, .. } => self.normalization * density(z),
            _ => {
                let rho = norm(z);
                self.radial_density(rho).unwrap_or(0.0)
            }
        }
    }

    /// `∫_{|z|<r} |z|² dμ(z)`.
    pub fn small_ball_second_moment(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(param(format!("radius must be nonnegative, got {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let n = self.dim as f64;
        match &self.kind {
            MeasureKind::Zero => Ok(0.0),
            MeasureKind::Fractional { alpha } => {
                Ok(unit_sphere_area(self.dim) * self.normalization * r.powf(2.0 - alpha) / (2.0 - alpha))
            }
            MeasureKind::Radial(g) => {
                let c = self.normalization;
                let f = |rho: f64| if rho == 0.0 { 0.0 } else { rho.powf(n + 1.0) * g(rho) };
                let v = integrate(&f, 0.0, r, self.tol).map_err(|e| e.context("small-ball second moment"))?;
                Ok(unit_sphere_area(self.dim) * c * v)
            }
            MeasureKind::Custom { density, .. } => {
                let c = self.normalization;
                let f = |z: &[f64]| {
                    let s: f64 = z.iter().map(|v| v * v).sum();
                    if s == 0.0 {
                        0.0
                    } else {
                        s * density(z)
                    }
                };
                let lo = vec![-r; self.dim];
                let hi = vec![r; self.dim];
                let v = integrate_box(&f, &lo, &hi, BallRegion::Inside(r), self.tol)
                    .map_err(|e| e.context("small-ball second moment"))?;
                Ok(c * v)
            }
        }
    }

    /// `μ({|z| > r})` for `r > 0`.
    pub fn mass_outside_ball(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(param(format!("radius must be positive, got {r}")));
        }
        let n = self.dim as f64;
        match &self.kind {
            MeasureKind::Zero => Ok(0.0),
            MeasureKind::Fractional { alpha } => {
                Ok(unit_sphere_area(self.dim) * self.normalization * r.powf(-alpha) / alpha)
            }
            MeasureKind::Radial(g) => {
                let f = |rho: f64| rho.powf(n - 1.0) * g(rho);
                let v = integrate_to_infinity(&f, r, self.tol).map_err(|e| e.context("tail mass"))?;
                Ok(unit_sphere_area(self.dim) * self.normalization * v)
            }
            MeasureKind::Custom { support, .. } => {
                if r >= *support {
                    return Ok(0.0);
                }
                let lo = vec![-support; self.dim];
                let hi = vec![*support; self.dim];
                let f = |z: &[f64]| self.density(z);
                integrate_box(&f, &lo, &hi, BallRegion::Outside(r), self.tol).map_err(|e| e.context("tail mass"))
            }
        }
    }

    /// `μ((center + [-half_width, half_width]^N) ∩ {|z| > cutoff})`.
    pub fn cell_mass(&self, center: &[f64], half_width: f64, cutoff: f64) -> Result<f64> {
        let lo: Vec<f64> = center.iter().map(|c| c - half_width).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + half_width).collect();
        self.box_mass(&lo, &hi, cutoff)
    }

    /// Measure of the box `[lo, hi]` intersected with `{|z| > cutoff}`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64], cutoff: f64) -> Result<f64> {
        if lo.len() != self.dim || hi.len() != self.dim {
            return Err(param("box dimension does not match the measure"));
        }
        if !(cutoff >= 0.0) {
            return Err(param("cutoff must be nonnegative"));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        // farthest point of the box from the origin
        let far2: f64 = lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum();
        if far2 <= cutoff * cutoff {
            return Ok(0.0);
        }
        let touches_origin = lo.iter().zip(hi).all(|(a, b)| *a <= 0.0 && *b >= 0.0);
        if touches_origin && cutoff == 0.0 {
            return Err(Error::Singularity(format!("box {lo:?}..{hi:?} with zero cutoff")));
        }
        if let (MeasureKind::Fractional { alpha }, 1) = (&self.kind, self.dim) {
            return Ok(fractional_interval_mass(
                self.normalization,
                *alpha,
                lo[0],
                hi[0],
                cutoff,
            ));
        }
        if let MeasureKind::Custom { support, .. } = &self.kind {
            // nothing beyond the support
            let near2: f64 = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| {
                    if *a <= 0.0 && *b >= 0.0 {
                        0.0
                    } else {
                        a.abs().min(b.abs()).powi(2)
                    }
                })
                .sum();
            if near2 >= support * support {
                return Ok(0.0);
            }
        }
        let f = |z: &[f64]| self.density(z);
        integrate_box(&f, lo, hi, BallRegion::Outside(cutoff), self.tol).map_err(|e| e.context("cell mass"))
    }

    /// `∫_{box ∩ {|z|>cutoff}} w(z) dμ(z)` for a bounded weight `w`.
    pub fn weighted_box_integral<W: Fn(&[f64]) -> f64>(
        &self,
        weight: &W,
        lo: &[f64],
        hi: &[f64],
        cutoff: f64,
    ) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let far2: f64 = lo.iter().zip(hi).map(|(a, b)| a.abs().max(b.abs()).powi(2)).sum();
        if far2 <= cutoff * cutoff {
            return Ok(0.0);
        }
        let touches_origin = lo.iter().zip(hi).all(|(a, b)| *a <= 0.0 && *b >= 0.0);
        if touches_origin && cutoff == 0.0 {
            return Err(Error::Singularity(format!("box {lo:?}..{hi:?} with zero cutoff")));
        }
        let f = |z: &[f64]| weight(z) * self.density(z);
        if self.dim == 1 {
            let g = |t: f64| f(&[t]);
            let mut total = 0.0;
            for (a, b) in clip_interval(lo[0], hi[0], cutoff) {
                total +=
                    integrate_with_breaks(&g, a, b, &[], self.tol).map_err(|e| e.context("weighted cell integral"))?;
            }
            return Ok(total);
        }
        integrate_box(&f, lo, hi, BallRegion::Outside(cutoff), self.tol)
            .map_err(|e| e.context("weighted cell integral"))
    }

    /// Mass outside the cube `[-half, half]^N` and outside the ball of
    /// radius `cutoff`.
    pub fn mass_outside_cube(&self, half: f64, cutoff: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let n = self.dim;
        let rad = half.max(cutoff);
        if n == 1 {
            return self.mass_outside_ball(rad);
        }
        if let MeasureKind::Custom { support, .. } = &self.kind {
            if half >= *support {
                return Ok(0.0);
            }
        }
        // outside the circumscribed ball, plus the corners between cube and ball
        let big = (half * half * n as f64).sqrt().max(cutoff);
        let far = self.mass_outside_ball(big)?;
        let mut corners = 0.0;
        let f = |z: &[f64]| {
            let inside_cube = z.iter().all(|v| v.abs() <= half);
            if inside_cube {
                0.0
            } else {
                self.density(z)
            }
        };
        // off-centre cells lie outside the cube, hence outside the cutoff ball
        let region = BallRegion::Inside(big);
        // integrate shell pieces box by box so the cube faces are break points
        let edges = [-big, -half, half, big];
        let mut idx = vec![0usize; n];
        loop {
            let cell_lo: Vec<f64> = idx.iter().map(|&i| edges[i]).collect();
            let cell_hi: Vec<f64> = idx.iter().map(|&i| edges[i + 1]).collect();
            let central = idx.iter().all(|&i| i == 1);
            if !central && cell_lo.iter().zip(&cell_hi).all(|(a, b)| b > a) {
                corners += integrate_box(&f, &cell_lo, &cell_hi, region, self.tol)
                    .map_err(|e| e.context("cube complement mass"))?;
            }
            let mut d = 0;
            loop {
                if d == n {
                    return Ok(far + corners);
                }
                idx[d] += 1;
                if idx[d] < 3 {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

pub(crate) fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Split `[a, b]` into the pieces lying in `{|t| > cutoff}`.
pub(crate) fn clip_interval(a: f64, b: f64, cutoff: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(2);
    if a < -cutoff {
        out.push((a, b.min(-cutoff)));
    }
    if b > cutoff {
        out.push((a.max(cutoff), b));
    }
    out.retain(|(p, q)| q > p);
    out
}

/// `∫ c |t|^{-1-α} dt` over `[a, b] ∩ {|t| > cutoff}` via the antiderivative.
fn fractional_interval_mass(c: f64, alpha: f64, a: f64, b: f64, cutoff: f64) -> f64 {
    let prim = |t: f64| -t.powf(-alpha) / alpha; // antiderivative on t > 0
    let mut total = 0.0;
    for (p, q) in clip_interval(a, b, cutoff) {
        let (p, q) = if q <= 0.0 { (-q, -p) } else { (p, q) };
        total += prim(q) - prim(p);
    }
    c * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fractional_parameter_checks() {
        assert!(LevyMeasureSpec::fractional(2.0, 1).is_err());
        assert!(LevyMeasureSpec::fractional(0.0, 1).is_err());
        assert!(LevyMeasureSpec::fractional(1.0, 0).is_err());
        let s = LevyMeasureSpec::fractional(0.5, 2).unwrap();
        let z1 = [0.3, 0.4];
        let z2 = [0.6, 0.8];
        // density ∝ |z|^{-2.5}
        let ratio = s.density(&z1) / s.density(&z2);
        assert!((ratio - 2f64.powf(2.5)).abs() < 1e-12);
    }

    #[test]
    fn cauchy_normalization() {
        let s = LevyMeasureSpec::fractional(1.0, 1).unwrap();
        assert!((s.normalization() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn second_moment_closed_form() {
        let s = LevyMeasureSpec::fractional(1.0, 1).unwrap();
        let v = s.small_ball_second_moment(0.1).unwrap();
        assert!((v - 2.0 / PI * 0.1).abs() < 1e-15);
        assert!((v - 0.06366).abs() < 1e-5);
        assert_eq!(s.small_ball_second_moment(0.0).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_custom_radial() {
        let s = LevyMeasureSpec::radial(1, |r| (-r).exp() / (r * r)).unwrap();
        let v = s.small_ball_second_moment(1.0).unwrap();
        // ∫_{-1}^{1} e^{-|z|} dz
        assert!((v - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn divergent_custom_density_reports_integration_error() {
        let s = LevyMeasureSpec::radial(1, |r| r.powf(-4.5)).unwrap();
        match s.small_ball_second_moment(1.0) {
            Err(Error::Integration { .. }) => {}
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn cell_mass_one_dimensional_closed_form() {
        let s = LevyMeasureSpec::fractional(1.0, 1).unwrap();
        let m = s.cell_mass(&[2.0], 0.5, 1.0).unwrap();
        assert!((m - (1.0 / PI) * (1.0 / 1.5 - 1.0 / 2.5)).abs() < 1e-15);
        assert!((m - 0.08488).abs() < 1e-5);
        // entirely inside the cutoff ball
        assert_eq!(s.cell_mass(&[0.5], 0.25, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn singular_cell_is_refused() {
        let s = LevyMeasureSpec::fractional(1.0, 2).unwrap();
        assert!(matches!(s.cell_mass(&[0.0, 0.0], 0.5, 0.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn partially_cut_cell_matches_quadrature() {
        let s = LevyMeasureSpec::fractional(0.7, 1).unwrap();
        let c = s.normalization();
        let m = s.cell_mass(&[1.0], 0.5, 0.8).unwrap();
        let oracle = integrate(&|t: f64| c * t.powf(-1.7), 0.8, 1.5, Tolerance::new(1e-15, 1e-14)).unwrap();
        assert!((m - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn two_dimensional_cell_additivity_and_symmetry() {
        let s = LevyMeasureSpec::fractional(1.2, 2).unwrap();
        let parent = s.cell_mass(&[0.75, 0.25], 0.25, 0.6).unwrap();
        let mut kids = 0.0;
        for dx in [-0.125, 0.125] {
            for dy in [-0.125, 0.125] {
                kids += s.cell_mass(&[0.75 + dx, 0.25 + dy], 0.125, 0.6).unwrap();
            }
        }
        assert!((parent - kids).abs() < 1e-9 * parent, "{parent} vs {kids}");
        let mirrored = s.cell_mass(&[-0.75, -0.25], 0.25, 0.6).unwrap();
        assert!((parent - mirrored).abs() < 1e-12 * parent);
    }

    #[test]
    fn cube_complement_matches_radial_formula_in_one_dimension() {
        let s = LevyMeasureSpec::fractional(0.5, 1).unwrap();
        let m = s.mass_outside_cube(3.0, 0.1).unwrap();
        assert!((m - s.mass_outside_ball(3.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cube_complement_two_dimensional() {
        // μ(|z|>r) = mass inside cube minus ball + mass outside cube
        let s = LevyMeasureSpec::fractional(1.0, 2).unwrap();
        let half = 1.5;
        let r = 0.5;
        let outside = s.mass_outside_cube(half, r).unwrap();
        let inside = s.box_mass(&[-half, -half], &[half, half], r).unwrap();
        let total = s.mass_outside_ball(r).unwrap();
        assert!(
            (outside + inside - total).abs() < 1e-8 * total,
            "{outside} + {inside} vs {total}"
        );
    }
}
