//! High-accuracy evaluation of `𝔏^{σ,μ}[ψ](x) = tr(σσᵀD²ψ) + ∫(ψ(x+z) − ψ(x) − z·Dψ 1_{|z|≤1}) dμ`
//! for symmetric `μ` and smooth, rapidly decaying `ψ`.
//!
//! The integral is split at `|z| = ρ`. Inside, the symmetrized integrand
//! `½(ψ(x+z)+ψ(x−z)) − ψ(x)` has its quadratic Taylor term removed and
//! added back through the second moment; the ball of radius `ρ_min` around
//! the origin contributes `O(ρ_min^{4−α})` and is dropped. Outside, `ψ(x+z)` is
//! integrated over its effective support and `ψ(x)μ(|z|>ρ)` subtracted.

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::levy::{LevyMeasureSpec, MeasureKind};
use crate::quadrature::{integrate_box, integrate_with_breaks, BallRegion, Tolerance};

/// A smooth test function with its Hessian.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Row-major `N × N`.
    fn hessian(&self, x: &[f64]) -> Vec<f64>;
    /// Outside the centered ball of this radius `|ψ|` is below `1e-17`.
    fn support_radius(&self) -> f64;

    /// `½(ψ(x+z) + ψ(x−z)) − ψ(x) − ½zᵀD²ψ(x)z`. Override when the naive
    /// difference loses too many digits for small `z`.
    fn symmetric_remainder(&self, x: &[f64], z: &[f64]) -> f64 {
        let n = self.dim();
        let p: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let m: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        let hess = self.hessian(x);
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += z[i] * hess[i * n + j] * z[j];
            }
        }
        0.5 * (self.value(&p) + self.value(&m)) - self.value(x) - 0.5 * quad
    }
}

/// `e^{-|x|²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub dim: usize,
}

impl SmoothFunction for Gaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (-x.iter().map(|v| v * v).sum::<f64>()).exp()
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let g = self.value(x);
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * n + j] = (4.0 * x[i] * x[j] - 2.0 * delta) * g;
            }
        }
        out
    }

    fn support_radius(&self) -> f64 {
        6.3
    }

    fn symmetric_remainder(&self, x: &[f64], z: &[f64]) -> f64 {
        // e^{-|x|²} [cosh(a) e^{-|z|²} − 1 − a²/2 + |z|²] with a = 2x·z
        let a: f64 = 2.0 * x.iter().zip(z).map(|(p, q)| p * q).sum::<f64>();
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let sh = (0.5 * a).sinh();
        let c = 2.0 * sh * sh; // cosh(a) − 1
        let even = if a.abs() < 0.1 {
            // cosh(a) − 1 − a²/2 by its series
            let a2 = a * a;
            let mut term = a2 * a2 / 24.0;
            let mut sum = term;
            for k in 3..12 {
                term *= a2 / ((2 * k - 1) * (2 * k)) as f64;
                sum += term;
            }
            sum
        } else {
            c - 0.5 * a * a
        };
        let decay = (-z2).exp_m1();
        let tail = if z2 < 0.1 {
            let mut term = 0.5 * z2 * z2;
            let mut sum = term;
            for k in 3..12 {
                term *= -z2 / k as f64;
                sum += term;
            }
            sum
        } else {
            decay + z2
        };
        self.value(x) * (even + c * decay + tail)
    }
}

/// The continuous operator: optional Lévy measure plus local part
/// `tr(σσᵀD²ψ)` with `σ` given by its columns.
#[derive(Debug, Clone)]
pub struct ReferenceOperator {
    pub dim: usize,
    pub measure: Option<LevyMeasureSpec>,
    pub sigma: Vec<Vec<f64>>,
}

impl ReferenceOperator {
    pub fn levy(spec: LevyMeasureSpec) -> Self {
        Self {
            dim: spec.dim(),
            measure: Some(spec),
            sigma: Vec::new(),
        }
    }

    pub fn local(dim: usize, sigma: Vec<Vec<f64>>) -> Self {
        Self {
            dim,
            measure: None,
            sigma,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::local(dim, Vec::new())
    }

    fn local_part(&self, psi: &dyn SmoothFunction, x: &[f64]) -> f64 {
        if self.sigma.is_empty() {
            return 0.0;
        }
        let n = self.dim;
        let hess = psi.hessian(x);
        self.sigma
            .iter()
            .map(|s| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += s[i] * hess[i * n + j] * s[j];
                    }
                }
                acc
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Level {
    tol: Tolerance,
    rho_min: f64,
}

const INNER_RADIUS: f64 = 1.0;

fn nonlocal_part(spec: &LevyMeasureSpec, psi: &dyn SmoothFunction, x: &[f64], level: Level) -> Result<f64> {
    if spec.is_zero() {
        return Ok(0.0);
    }
    let n = spec.dim();
    let rho = INNER_RADIUS;
    let psi_x = psi.value(x);
    let hess = psi.hessian(x);
    let remainder = |z: &[f64]| -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 < level.rho_min * level.rho_min {
            return 0.0;
        }
        psi.symmetric_remainder(x, z) * spec.density(z)
    };

    // second-moment compensation
    let compensation = match spec.kind() {
        MeasureKind::Custom { .. } => {
            let mut acc = 0.0;
            let lo = vec![-rho; n];
            let hi = vec![rho; n];
            for i in 0..n {
                for j in 0..n {
                    let hij = hess[i * n + j];
                    if hij == 0.0 {
                        continue;
                    }
                    let w = |z: &[f64]| z[i] * z[j] * spec.density(z);
                    acc += 0.5
                        * hij
                        * integrate_box(&w, &lo, &hi, BallRegion::Inside(rho), level.tol)
                            .map_err(|e| e.context("oracle second moment"))?;
                }
            }
            acc
        }
        _ => {
            let trace: f64 = (0..n).map(|i| hess[i * n + i]).sum();
            0.5 * trace * spec.small_ball_second_moment(rho)? / n as f64
        }
    };

    let (inner, outer_plus) = if n == 1 {
        let f1 = |t: f64| psi.symmetric_remainder(x, &[t]) * spec.density(&[t]);
        let inner = 2.0
            * integrate_with_breaks(&f1, level.rho_min, rho, &[1e-4, 1e-3, 0.01, 0.1], level.tol)
                .map_err(|e| e.context("oracle inner integral"))?;
        let reach = psi.support_radius();
        let g = |t: f64| psi.value(&[x[0] + t]) * spec.density(&[t]);
        let (a, b) = (-reach - x[0], reach - x[0]);
        let mut outer = 0.0;
        for (p, q) in crate::levy::clip_interval(a, b, rho) {
            let mut breaks: Vec<f64> = (-8..=8).map(|k| -x[0] + 0.5 * k as f64).collect();
            breaks.retain(|v| *v > p && *v < q);
            outer +=
                integrate_with_breaks(&g, p, q, &breaks, level.tol).map_err(|e| e.context("oracle outer integral"))?;
        }
        (inner, outer)
    } else {
        let lo = vec![-rho; n];
        let hi = vec![rho; n];
        let inner = integrate_box(&remainder, &lo, &hi, BallRegion::Inside(rho), level.tol)
            .map_err(|e| e.context("oracle inner integral"))?;
        let reach = psi.support_radius();
        let g = |z: &[f64]| {
            let p: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
            psi.value(&p) * spec.density(z)
        };
        let lo: Vec<f64> = x.iter().map(|v| -reach - v).collect();
        let hi: Vec<f64> = x.iter().map(|v| reach - v).collect();
        let outer = integrate_box(&g, &lo, &hi, BallRegion::Outside(rho), level.tol)
            .map_err(|e| e.context("oracle outer integral"))?;
        (inner, outer)
    };
    let far_mass = spec.mass_outside_ball(rho)?;
    Ok(inner + compensation + outer_plus - psi_x * far_mass)
}

/// `𝔏[ψ]` at each point, computed at two accuracy levels that must agree to
/// `1e-9` (relative to `max(1, |value|)`).
pub fn reference_operator_apply(
    op: &ReferenceOperator,
    psi: &dyn SmoothFunction,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if psi.dim() != op.dim {
        return Err(param("test function and operator dimensions differ"));
    }
    if let Some(spec) = &op.measure {
        if spec.dim() != op.dim {
            return Err(param("measure dimension differs from the operator"));
        }
    }
    let coarse = Level {
        tol: Tolerance::new(1e-11, 1e-11).with_max_intervals(20_000),
        rho_min: 1e-6,
    };
    let fine = Level {
        tol: Tolerance::new(1e-13, 1e-13).with_max_intervals(50_000),
        rho_min: 1e-8,
    };
    points
        .par_iter()
        .map(|x| {
            if x.len() != op.dim {
                return Err(param("point dimension differs from the operator"));
            }
            let local = op.local_part(psi, x);
            let (a, b) = match &op.measure {
                Some(spec) => (nonlocal_part(spec, psi, x, coarse)?, nonlocal_part(spec, psi, x, fine)?),
                None => (0.0, 0.0),
            };
            if (a - b).abs() > 1e-9 * b.abs().max(1.0) {
                return Err(Error::Oracle(format!(
                    "refinement levels disagree at {x:?}: {a:e} vs {b:e}"
                )));
            }
            Ok(local + b)
        })
        .collect()
}
