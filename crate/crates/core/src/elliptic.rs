//! The implicit step: solve `w − L[φ(w)] = ρ` for a discrete operator `L`
//! of total mass `ν`.
//!
//! With `Φ(w) = w + νφ(w)` the equation reads `Φ(w) = Σ_β ω_β φ(w(·+z_β)) + ρ`,
//! and the map `𝒲 ↦ Σ ω_β φ(Φ^{-1}(𝒲(·+z_β))) + ρ` is an `L¹` contraction
//! with factor `1 − 1/(1 + νc)` when `φ` has slope at most `c`. The
//! iteration below is that map written in terms of `w`; the residual of the
//! current iterate equals the change of `𝒲`, so it is available for free.

use log::debug;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::grid::Field;
use crate::nonlinearity::{Monotone, Nonlinearity};
use crate::operator::DiscreteOperator;

/// Diagnostics of one elliptic solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// `h^N ‖w − L[φ(w)] − ρ‖_{ℓ¹}` before each update, and for the
    /// returned iterate last.
    pub residual_history: Vec<f64>,
    /// Largest ratio of consecutive residuals above round-off level.
    pub contraction_estimate: f64,
    /// Final regularization parameter (0 when φ was used as is).
    pub delta_used: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Regularization levels `δ_k = δ_0 2^{-k}`, `k < levels`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSchedule {
    pub delta0: f64,
    pub levels: usize,
}

impl DeltaSchedule {
    pub fn for_spacing(h: f64) -> Self {
        Self {
            delta0: h.max(1e-3),
            levels: 20,
        }
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels).map(move |k| self.delta0 * 0.5f64.powi(k as i32))
    }
}

fn iteration_budget(mass: f64, slope: Option<f64>, scale: f64, tol: f64) -> usize {
    match slope {
        Some(c) => {
            let stiff = 1.0 + mass * c;
            let decades = (scale.max(tol) / tol).ln().max(1.0);
            (10_000.0 + 4.0 * stiff * decades).min(5e7) as usize
        }
        None => 200_000,
    }
}

/// Fixed-point iteration for `w − L[φ(w)] = ρ` with `φ` strictly increasing
/// or Lipschitz. Stops when the scaled `ℓ¹` residual is at most `tol`.
pub fn fixed_point_solve(
    op: &DiscreteOperator,
    phi: &dyn Monotone,
    rho: &Field,
    tol: f64,
    initial: Option<&Field>,
) -> Result<(Field, SolveReport)> {
    fixed_point_solve_with_budget(op, phi, rho, tol, initial, None)
}

/// [`fixed_point_solve`] with an explicit iteration cap. `None` picks a cap
/// from the contraction factor.
pub fn fixed_point_solve_with_budget(
    op: &DiscreteOperator,
    phi: &dyn Monotone,
    rho: &Field,
    tol: f64,
    initial: Option<&Field>,
    max_iterations: Option<usize>,
) -> Result<(Field, SolveReport)> {
    if !(tol > 0.0) {
        return Err(param("elliptic tolerance must be positive"));
    }
    let grid = *rho.grid();
    op.check(&grid)?;
    if let Some(w0) = initial {
        rho.check_grid(w0)?;
    }
    let vol = grid.cell_volume();
    let nu = op.total_mass();
    let r = rho.values();
    let slope = phi.lipschitz_bound(rho.linf_norm()).finite();
    let budget = max_iterations.unwrap_or_else(|| iteration_budget(nu, slope, rho.l1_norm() + vol, tol));

    let mut w: Vec<f64> = match initial {
        Some(w0) => w0.values().to_vec(),
        None => r.par_iter().map(|&y| phi.shifted_inverse(nu, y)).collect(),
    };
    let mut report = SolveReport::default();
    let mut floor = 0.0f64;
    loop {
        let p: Vec<f64> = w.par_iter().map(|&v| phi.eval(v)).collect();
        let s = op.shift_sum(&grid, &p);
        let target: Vec<f64> = s.iter().zip(r).map(|(a, b)| a + b).collect();
        let residual: f64 = w
            .iter()
            .zip(&p)
            .zip(&target)
            .map(|((wv, pv), t)| (wv + nu * pv - t).abs())
            .sum::<f64>()
            * vol;
        if let Some(&prev) = report.residual_history.last() {
            // ratios are meaningless once both residuals sit at round-off
            if prev > floor {
                report.contraction_estimate = report.contraction_estimate.max(residual / prev);
            }
        } else {
            let scale: f64 = target.iter().map(|t| t.abs()).sum::<f64>() * vol;
            floor = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        }
        report.residual_history.push(residual);
        if residual <= tol {
            return Ok((Field::from_values(grid, w)?, report));
        }
        if report.iterations >= budget || !residual.is_finite() {
            debug!(
                "elliptic solve stalled at residual {residual:e} after {} iterations",
                report.iterations
            );
            return Err(Error::EllipticConvergence(Box::new(report)));
        }
        w = target.par_iter().map(|&y| phi.shifted_inverse(nu, y)).collect();
        report.iterations += 1;
    }
}

/// Solve `w − L[φ(w)] = ρ` for any continuous nondecreasing `φ`. When `φ` is
/// Lipschitz on `[-‖ρ‖_∞, ‖ρ‖_∞]` (the range of `w`) it is used directly;
/// otherwise `φ` is replaced by its regularizations along `schedule` until
/// two consecutive levels agree to `tol` in `ℓ¹`.
pub fn solve_implicit(
    op: &DiscreteOperator,
    phi: &Nonlinearity,
    rho: &Field,
    tol: f64,
    schedule: DeltaSchedule,
    initial: Option<&Field>,
) -> Result<(Field, SolveReport)> {
    if op.is_zero() {
        op.check(rho.grid())?;
        return Ok((
            rho.clone(),
            SolveReport {
                residual_history: vec![0.0],
                ..SolveReport::default()
            },
        ));
    }
    if phi.lipschitz_bound(rho.linf_norm()).is_finite() {
        return fixed_point_solve(op, phi, rho, tol, initial);
    }
    let mut prev: Option<Field> = None;
    let mut last_change = f64::INFINITY;
    let mut total_iterations = 0;
    for delta in schedule.deltas() {
        let reg = phi.regularize(delta)?;
        let start = prev.as_ref().or(initial);
        let (w, mut report) = fixed_point_solve(op, &reg, rho, 0.1 * tol, start)?;
        total_iterations += report.iterations;
        if let Some(p) = &prev {
            last_change = w.l1_distance(p)?;
            if last_change <= tol {
                report.iterations = total_iterations;
                report.delta_used = delta;
                return Ok((w, report));
            }
        }
        prev = Some(w);
    }
    Err(Error::Convergence {
        what: "regularized implicit solve".into(),
        detail: format!(
            "change between the last two δ levels is {last_change:e} (tolerance {tol:e}) after {} levels",
            schedule.levels
        ),
    })
}

/// Damped Newton on the dense system `w − A φ(w) − ρ = 0` with
/// backtracking line search. Test oracle for small grids.
pub fn dense_oracle_solve(op: &DiscreteOperator, phi: &dyn Monotone, rho: &Field) -> Result<Field> {
    let grid = *rho.grid();
    let n = grid.len();
    if n > 512 {
        return Err(param(format!("dense oracle limited to 512 cells, got {n}")));
    }
    let a = op.dense_matrix(&grid)?;
    let rho_v = DVector::from_column_slice(rho.values());
    let residual = |w: &DVector<f64>| -> DVector<f64> {
        let p = w.map(|v| phi.eval(v));
        w - &a * p - &rho_v
    };
    let target = 1e-14 * (1.0 + rho.linf_norm());
    let mut w = rho_v.clone();
    let mut f = residual(&w);
    for _ in 0..200 {
        let norm = f.norm();
        if f.amax() <= target {
            return Field::from_values(grid, w.as_slice().to_vec());
        }
        let d = DVector::from_iterator(n, w.iter().map(|v| phi.derivative(*v)));
        let jac = DMatrix::identity(n, n) - &a * DMatrix::from_diagonal(&d);
        let step = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::Oracle("singular Newton matrix".into()))?;
        let mut lambda = 1.0;
        loop {
            let trial = &w - lambda * &step;
            let ft = residual(&trial);
            if ft.norm() < (1.0 - 1e-4 * lambda) * norm || lambda < 1e-10 {
                w = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
        }
        if lambda < 1e-10 {
            return Err(Error::Oracle(format!("Newton stalled at residual {:e}", f.amax())));
        }
    }
    if f.amax() <= 1e3 * target {
        return Field::from_values(grid, w.as_slice().to_vec());
    }
    Err(Error::Oracle(format!(
        "Newton did not converge, residual {:e}",
        f.amax()
    )))
}
