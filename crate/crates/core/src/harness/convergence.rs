use std::fmt;

use crate::error::{param, Result};
use crate::grid::{overlay_distances, Field, TimeGrid, UniformGrid};
use crate::levy::LevyMeasureSpec;
use crate::nonlinearity::Nonlinearity;
use crate::operator::{local_laplacian_operator, midpoint_operator};
use crate::stepper::{run, SchemeConfig, Trajectory};

use super::lte::least_squares_slope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub l1: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub name: String,
    pub levels: Vec<ConvergenceLevel>,
    /// Least-squares slopes of `log error` against `log h`; `None` with
    /// fewer than two levels or a vanishing error.
    pub l1_rate: Option<f64>,
    pub linf_rate: Option<f64>,
}

impl ConvergenceReport {
    fn new(name: &str, levels: Vec<ConvergenceLevel>) -> Self {
        let rate = |pick: fn(&ConvergenceLevel) -> f64| {
            if levels.len() < 2 || levels.iter().any(|l| !(pick(l) > 0.0)) {
                return None;
            }
            let x: Vec<f64> = levels.iter().map(|l| l.h.ln()).collect();
            let y: Vec<f64> = levels.iter().map(|l| pick(l).ln()).collect();
            Some(least_squares_slope(&x, &y).0)
        };
        Self {
            name: name.to_string(),
            l1_rate: rate(|l| l.l1),
            linf_rate: rate(|l| l.linf),
            levels,
        }
    }

    /// `L¹` errors strictly decrease along the levels.
    pub fn l1_strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].l1 < w[0].l1)
    }

    pub const CSV_HEADER: &'static str = "study,h,l1,linf,l1_rate,linf_rate";

    pub fn csv_rows(&self) -> Vec<String> {
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.6}")).unwrap_or_default();
        self.levels
            .iter()
            .map(|l| {
                format!(
                    "{},{},{:.10e},{:.10e},{},{}",
                    self.name,
                    l.h,
                    l.l1,
                    l.linf,
                    fmt_rate(self.l1_rate),
                    fmt_rate(self.linf_rate)
                )
            })
            .collect()
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name)?;
        for l in &self.levels {
            write!(f, " [h={} L1={:.3e} Linf={:.3e}]", l.h, l.l1, l.linf)?;
        }
        if let (Some(a), Some(b)) = (self.l1_rate, self.linf_rate) {
            write!(f, " rates L1 {a:.3} Linf {b:.3}")?;
        }
        Ok(())
    }
}

fn matching_knot(fine: &TimeGrid, t: f64) -> Option<usize> {
    let k = fine.knots();
    let j = k.partition_point(|&s| s < t - 1e-9 * (1.0 + t.abs()));
    (j < k.len() && (k[j] - t).abs() <= 1e-9 * (1.0 + t.abs())).then_some(j)
}

/// `max_j` distances between the piecewise-constant coarse and fine
/// solutions at the coarse time knots.
pub fn trajectory_distance(coarse: &Trajectory, fine: &Trajectory) -> Result<(f64, f64)> {
    let mut l1 = 0.0f64;
    let mut linf = 0.0f64;
    for (field, &t) in coarse.fields.iter().zip(coarse.time.knots()) {
        let other = match matching_knot(&fine.time, t) {
            Some(j) if j < fine.fields.len() => fine.fields[j].clone(),
            _ => crate::grid::time_interpolant(&fine.time, &fine.fields, t)?,
        };
        let (a, b) = overlay_distances(field, &other)?;
        l1 = l1.max(a);
        linf = linf.max(b);
    }
    Ok((l1, linf))
}

/// Run `run_at(h)` for each spacing and compare consecutive levels:
/// level `k` holds `⦀U_{h_k} − U_{h_{k+1}}⦀` in `L¹` and `L∞`.
pub fn self_convergence_study(
    name: &str,
    hs: &[f64],
    run_at: &dyn Fn(f64) -> Result<Trajectory>,
) -> Result<ConvergenceReport> {
    if hs.len() < 2 {
        return Err(param("self-convergence needs at least two spacings"));
    }
    let runs: Vec<Trajectory> = hs.iter().map(|&h| run_at(h)).collect::<Result<_>>()?;
    let mut levels = Vec::with_capacity(hs.len() - 1);
    for (k, w) in runs.windows(2).enumerate() {
        let (l1, linf) = trajectory_distance(&w[0], &w[1])?;
        levels.push(ConvergenceLevel { h: hs[k], l1, linf });
    }
    Ok(ConvergenceReport::new(name, levels))
}

/// Time-step rule `Δt = c h^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub factor: f64,
    pub power: f64,
}

impl StepRule {
    pub fn linear() -> Self {
        Self {
            factor: 1.0,
            power: 1.0,
        }
    }

    pub fn quadratic() -> Self {
        Self {
            factor: 1.0,
            power: 2.0,
        }
    }

    pub fn dt(&self, h: f64) -> f64 {
        self.factor * h.powf(self.power)
    }
}

/// Exact heat solution from `u₀ = e^{-x²}`: `(1+4t)^{-1/2} e^{-x²/(1+4t)}`.
pub fn heat_solution(x: &[f64], t: f64) -> f64 {
    let s = 1.0 + 4.0 * t;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    s.powf(-0.5 * x.len() as f64) * (-r2 / s).exp()
}

/// Implicit linear heat equation `u_t = Δu` in one dimension on
/// `[-extent, extent]` with Gaussian data. Errors are
/// `h Σ |U^J_β − ū_β(T)|` (and the max norm) against exact cell averages
/// at the final time.
pub fn heat_kernel_check(hs: &[f64], rule: StepRule, t_end: f64, extent: f64, tol: f64) -> Result<ConvergenceReport> {
    let mut levels = Vec::with_capacity(hs.len());
    for &h in hs {
        let grid = UniformGrid::covering(1, h, extent)?;
        let u0 = Field::cell_average(grid, |x| heat_solution(x, 0.0))?;
        let exact = Field::cell_average(grid, |x| heat_solution(x, t_end))?;
        let last = if t_end == 0.0 {
            u0
        } else {
            let time = TimeGrid::with_max_step(t_end, rule.dt(h))?;
            let cfg = SchemeConfig::implicit(local_laplacian_operator(h, 1)?, Nonlinearity::identity(), time)?
                .with_tolerance(tol);
            run(&cfg, &u0)?.last().clone()
        };
        levels.push(ConvergenceLevel {
            h,
            l1: last.l1_distance(&exact)?,
            linf: last.linf_distance(&exact)?,
        });
    }
    Ok(ConvergenceReport::new("heat", levels))
}

/// Parameters of the nonlocal one-phase Stefan run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StefanParams {
    pub alpha: f64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Box `[-extent, extent]`.
    pub extent: f64,
    /// Stencil reach of the midpoint operator.
    pub r_tail: f64,
    pub tol: f64,
}

impl StefanParams {
    /// `α = 1`, box `[-8, 8]`, `T = 1`, `Δt = h`.
    pub fn standard(h: f64) -> Self {
        Self {
            alpha: 1.0,
            h,
            dt: h,
            t_end: 1.0,
            extent: 8.0,
            r_tail: 4.0,
            tol: 1e-10,
        }
    }
}

/// `e^{-1/(4-x²)}` on `(-2, 2)`, zero elsewhere.
pub fn stefan_initial(x: &[f64]) -> f64 {
    let s = 4.0 - x[0] * x[0];
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct StefanRun {
    pub params: StefanParams,
    pub trajectory: Trajectory,
    pub initial_max: f64,
    /// `max_j ‖U^j‖_∞`.
    pub max_linf: f64,
    pub mass_drift: f64,
}

/// `u_t + (-Δ)^{α/2} max(0, u − 1/2) = 0` with the midpoint operator
/// (`r = h`) and the implicit scheme.
pub fn stefan_experiment(p: StefanParams) -> Result<StefanRun> {
    let grid = UniformGrid::covering(1, p.h, p.extent)?;
    let spec = LevyMeasureSpec::fractional(p.alpha, 1)?;
    let op = midpoint_operator(&spec, p.h, p.h, p.r_tail)?;
    let time = TimeGrid::with_max_step(p.t_end, p.dt)?;
    let cfg = SchemeConfig::implicit(op, Nonlinearity::stefan(1.0, 0.5)?, time)?.with_tolerance(p.tol);
    let u0 = Field::cell_average(grid, stefan_initial)?;
    let trajectory = run(&cfg, &u0)?;
    Ok(StefanRun {
        params: p,
        initial_max: u0.linf_norm(),
        max_linf: trajectory.fields.iter().map(Field::linf_norm).fold(0.0, f64::max),
        mass_drift: trajectory.relative_mass_drift(),
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_at_time_zero_has_no_error() {
        let rep = heat_kernel_check(&[0.25, 0.125], StepRule::linear(), 0.0, 8.0, 1e-12).unwrap();
        assert!(rep.levels.iter().all(|l| l.l1 == 0.0));
    }

    #[test]
    fn identical_runs_have_zero_distance() {
        let rep = self_convergence_study("same", &[0.2, 0.2], &|h| {
            Ok(stefan_experiment(StefanParams {
                t_end: 0.4,
                ..StefanParams::standard(h)
            })?
            .trajectory)
        })
        .unwrap();
        assert_eq!(rep.levels[0].l1, 0.0);
        assert_eq!(rep.levels[0].linf, 0.0);
    }

    #[test]
    fn short_stefan_run_is_bounded_and_conservative() {
        let run = stefan_experiment(StefanParams {
            t_end: 0.3,
            ..StefanParams::standard(0.1)
        })
        .unwrap();
        assert!(run.max_linf <= run.initial_max + 1e-12);
        assert!(run.mass_drift < 1e-8);
        assert!(stefan_initial(&[2.0]) == 0.0 && (stefan_initial(&[0.0]) - (-0.25f64).exp()).abs() < 1e-15);
    }
}
