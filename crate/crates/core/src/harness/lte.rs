use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::grid::{Field, UniformGrid};
use crate::levy::LevyMeasureSpec;
use crate::operator::{
    discrete_fractional_laplacian, lagrange_operator, local_laplacian_operator, midpoint_operator,
    multilinear_operator, vanishing_viscosity_operator, zero_operator, DiscreteOperator,
};

use super::oracle::{reference_operator_apply, ReferenceOperator, SmoothFunction};

/// Named discretization recipes, parameterized by `(h, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    Zero,
    LocalLaplacian,
    Midpoint,
    Multilinear,
    Lagrange(usize),
    /// Vanishing viscosity on `|z| < r`, midpoint rule outside.
    ViscousMidpoint,
    FractionalLaplacian,
}

impl Recipe {
    pub fn name(&self) -> String {
        match self {
            Recipe::Zero => "zero".into(),
            Recipe::LocalLaplacian => "local_laplacian".into(),
            Recipe::Midpoint => "midpoint".into(),
            Recipe::Multilinear => "multilinear".into(),
            Recipe::Lagrange(k) => format!("lagrange{k}"),
            Recipe::ViscousMidpoint => "viscous_midpoint".into(),
            Recipe::FractionalLaplacian => "fractional_laplacian".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Recipe::Zero,
            "local_laplacian" => Recipe::LocalLaplacian,
            "midpoint" => Recipe::Midpoint,
            "multilinear" => Recipe::Multilinear,
            "viscous_midpoint" => Recipe::ViscousMidpoint,
            "fractional_laplacian" => Recipe::FractionalLaplacian,
            other => match other.strip_prefix("lagrange").map(str::parse::<usize>) {
                Some(Ok(k)) => Recipe::Lagrange(k),
                _ => return Err(param(format!("unknown discretization '{other}'"))),
            },
        })
    }

    /// Build the operator for spacing `h`, inner radius `r` and stencil
    /// reach `r_tail`.
    pub fn build(&self, spec: &LevyMeasureSpec, h: f64, r: f64, r_tail: f64) -> Result<DiscreteOperator> {
        let dim = spec.dim();
        match self {
            Recipe::Zero => zero_operator(dim, h),
            Recipe::LocalLaplacian => local_laplacian_operator(h, dim),
            Recipe::Midpoint => midpoint_operator(spec, r, h, r_tail),
            Recipe::Multilinear => multilinear_operator(spec, r, h, r_tail),
            Recipe::Lagrange(k) => lagrange_operator(spec, *k, r, h, r_tail),
            Recipe::ViscousMidpoint => {
                midpoint_operator(spec, r, h, r_tail)?.add(&vanishing_viscosity_operator(spec, r, h)?)
            }
            Recipe::FractionalLaplacian => {
                let alpha = spec.alpha().ok_or_else(|| {
                    Error::UnsupportedMeasure("the discrete fractional Laplacian needs a fractional measure".into())
                })?;
                let standard = LevyMeasureSpec::fractional(alpha, dim)?.normalization();
                let scale = spec.normalization() / standard;
                let op = discrete_fractional_laplacian(alpha, h, dim, 1e-12, r_tail)?;
                if (scale - 1.0).abs() < 1e-15 {
                    Ok(op)
                } else {
                    op.scaled(scale)
                }
            }
        }
    }

    /// Expected LTE order when `r = h^γ`, for a fractional measure of
    /// order `α`.
    pub fn predicted_order(&self, alpha: f64, gamma: f64) -> Option<f64> {
        match self {
            Recipe::Zero | Recipe::Lagrange(_) => None,
            Recipe::LocalLaplacian | Recipe::FractionalLaplacian => Some(2.0),
            Recipe::Midpoint => Some((gamma * (2.0 - alpha)).min(1.0)),
            Recipe::Multilinear => Some((gamma * (2.0 - alpha)).min(2.0 - gamma * alpha)),
            Recipe::ViscousMidpoint => Some((gamma * (4.0 - alpha)).min(2.0 + gamma * (2.0 - alpha)).min(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LteLevel {
    pub h: f64,
    pub r: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LteReport {
    pub name: String,
    pub alpha: Option<f64>,
    pub levels: Vec<LteLevel>,
    /// Least-squares slope of `log E` against `log h` over the finest four
    /// levels; `None` when some error vanishes.
    pub observed_order: Option<f64>,
    /// Root-mean-square residual of that fit.
    pub fit_residual: f64,
    pub predicted_order: Option<f64>,
}

impl LteReport {
    pub fn is_degenerate(&self) -> bool {
        self.observed_order.is_none()
    }

    /// Errors decrease along the schedule, with at most `exceptions`
    /// non-decreasing steps.
    pub fn decreases(&self, exceptions: usize) -> bool {
        self.levels.windows(2).filter(|w| w[1].error >= w[0].error).count() <= exceptions
    }

    pub const CSV_HEADER: &'static str = "builder,alpha,h,r,error,observed_order";

    pub fn csv_rows(&self) -> Vec<String> {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        let order = self.observed_order.map(|o| format!("{o:.6}")).unwrap_or_default();
        self.levels
            .iter()
            .map(|l| format!("{},{},{},{},{:.10e},{}", self.name, alpha, l.h, l.r, l.error, order))
            .collect()
    }
}

impl fmt::Display for LteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if let Some(a) = self.alpha {
            write!(f, " (α = {a})")?;
        }
        write!(f, ": errors")?;
        for l in &self.levels {
            write!(f, " {:.3e}", l.error)?;
        }
        match self.observed_order {
            Some(o) => write!(f, "; order {o:.3} ± {:.3}", self.fit_residual)?,
            None => write!(f, "; degenerate")?,
        }
        if let Some(p) = self.predicted_order {
            write!(f, " (predicted {p:.3})")?;
        }
        Ok(())
    }
}

/// Slope and RMS residual of the least-squares line through `(x, y)`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (my + slope * (a - mx));
            e * e
        })
        .sum();
    (slope, (rss / n).sqrt())
}

/// Observed order from `(h, error)` pairs over the finest four levels.
pub fn observed_order(hs: &[f64], errors: &[f64]) -> Option<(f64, f64)> {
    if hs.len() < 2 || errors.iter().any(|e| !(*e > 0.0)) {
        return None;
    }
    let k = hs.len().saturating_sub(4);
    let x: Vec<f64> = hs[k..].iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors[k..].iter().map(|e| e.ln()).collect();
    Some(least_squares_slope(&x, &y))
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// `L¹` truncation errors `h^N Σ_β |𝓛^h[ψ](x_β) − 𝔏[ψ](x_β)|` on grids
/// covering `[-extent, extent]^N`, one per `(h, r)` in `schedule`.
/// `build(h, r)` supplies the discrete operator; its tail mass is included.
pub fn lte_study(
    name: &str,
    reference: &ReferenceOperator,
    psi: &dyn SmoothFunction,
    schedule: &[(f64, f64)],
    extent: f64,
    build: &dyn Fn(f64, f64) -> Result<DiscreteOperator>,
) -> Result<LteReport> {
    if schedule.len() < 4 {
        return Err(param("an LTE study needs at least four levels"));
    }
    if schedule.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(param("LTE schedule must have strictly decreasing h"));
    }
    let dim = reference.dim;
    let grids: Vec<UniformGrid> = schedule
        .iter()
        .map(|&(h, _)| UniformGrid::covering(dim, h, extent))
        .collect::<Result<_>>()?;

    let mut wanted: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    for g in &grids {
        for c in g.centers() {
            wanted.entry(key(&c)).or_insert(c);
        }
    }
    let points: Vec<Vec<f64>> = wanted.into_values().collect();
    let values = reference_operator_apply(reference, psi, &points)?;
    let oracle: HashMap<Vec<u64>, f64> = points.iter().map(|p| key(p)).zip(values).collect();

    let mut levels = Vec::with_capacity(schedule.len());
    for (g, &(h, r)) in grids.iter().zip(schedule) {
        let op = build(h, r)?;
        let samples = Field::from_fn(*g, |x| psi.value(x));
        let discrete = op.apply_including_tail(&samples)?;
        let centers: Vec<Vec<f64>> = g.centers().collect();
        let error: f64 = centers
            .par_iter()
            .zip(discrete.values().par_iter())
            .map(|(c, d)| (d - oracle[&key(c)]).abs())
            .sum::<f64>()
            * g.cell_volume();
        levels.push(LteLevel { h, r, error });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let errs: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let fit = observed_order(&hs, &errs);
    Ok(LteReport {
        name: name.to_string(),
        alpha: reference.measure.as_ref().and_then(|m| m.alpha()),
        levels,
        observed_order: fit.map(|f| f.0),
        fit_residual: fit.map(|f| f.1).unwrap_or(0.0),
        predicted_order: None,
    })
}

/// `lte_study` for a recipe with `r = r_of_h(h)` on the given spacings;
/// the stencil reaches across the whole box.
pub fn recipe_lte_study(
    recipe: Recipe,
    spec: &LevyMeasureSpec,
    psi: &dyn SmoothFunction,
    hs: &[f64],
    gamma: f64,
) -> Result<LteReport> {
    let extent = psi.support_radius();
    let schedule: Vec<(f64, f64)> = hs.iter().map(|&h| (h, h.powf(gamma).max(h))).collect();
    let reference = ReferenceOperator::levy(spec.clone());
    let build = |h: f64, r: f64| {
        let r_tail = 2.0 * extent + 2.0 * h;
        recipe.build(spec, h, r, r_tail)
    };
    let mut report = lte_study(&recipe.name(), &reference, psi, &schedule, extent, &build)?;
    if let Some(alpha) = spec.alpha() {
        report.predicted_order = recipe.predicted_order(alpha, gamma);
    }
    Ok(report)
}
