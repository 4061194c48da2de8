//! Time stepping `U^j = T^imp[T^exp[U^{j-1}] + Δt_j F^j]`.
//!
//! `T^exp[ψ] = ψ + Δt_j L₂[φ₂(ψ)]` and `T^imp` solves
//! `w − Δt_j L₁[φ₁(w)] = ρ`. Operators are stored unscaled and multiplied by
//! `Δt_j` when the step is taken, so nonuniform time grids need no rebuild.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;

use crate::elliptic::{solve_implicit, DeltaSchedule, SolveReport};
use crate::error::{param, Error, Result};
use crate::grid::{Field, TimeGrid, UniformGrid};
use crate::nonlinearity::{LipschitzBound, Monotone, Nonlinearity};
use crate::operator::DiscreteOperator;
use crate::quadrature::{integrate_box, BallRegion, Tolerance};

pub type SourceFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Right-hand side `f`.
#[derive(Clone, Default)]
pub enum Source {
    #[default]
    Zero,
    /// `f(x, t)`, averaged over each space-time slab.
    Function(SourceFn),
    /// Precomputed slab averages `F^1..F^J`.
    Steps(Vec<Field>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Zero => write!(f, "Zero"),
            Source::Function(_) => write!(f, "Function(..)"),
            Source::Steps(v) => write!(f, "Steps({} fields)", v.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CflPolicy {
    #[default]
    Enforce,
    Warn,
    Off,
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub implicit_op: DiscreteOperator,
    pub implicit_phi: Nonlinearity,
    pub explicit_op: DiscreteOperator,
    pub explicit_phi: Nonlinearity,
    pub time: TimeGrid,
    pub source: Source,
    pub elliptic_tol: f64,
    pub cfl: CflPolicy,
    /// Regularization levels for non-Lipschitz `φ₁`; defaults from `h`.
    pub delta_schedule: Option<DeltaSchedule>,
}

impl SchemeConfig {
    /// Pure implicit scheme (explicit part zero).
    pub fn implicit(op: DiscreteOperator, phi: Nonlinearity, time: TimeGrid) -> Result<Self> {
        let zero = op.scaled(0.0)?;
        Ok(Self {
            implicit_op: op,
            implicit_phi: phi,
            explicit_op: zero,
            explicit_phi: Nonlinearity::identity(),
            time,
            source: Source::Zero,
            elliptic_tol: 1e-10,
            cfl: CflPolicy::Enforce,
            delta_schedule: None,
        })
    }

    /// Pure explicit scheme (implicit part zero).
    pub fn explicit(op: DiscreteOperator, phi: Nonlinearity, time: TimeGrid) -> Result<Self> {
        let mut c = Self::implicit(op.scaled(0.0)?, Nonlinearity::identity(), time)?;
        c.explicit_op = op;
        c.explicit_phi = phi;
        Ok(c)
    }

    pub fn with_explicit(mut self, op: DiscreteOperator, phi: Nonlinearity) -> Self {
        self.explicit_op = op;
        self.explicit_phi = phi;
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.elliptic_tol = tol;
        self
    }

    pub fn with_cfl_policy(mut self, policy: CflPolicy) -> Self {
        self.cfl = policy;
        self
    }

    pub fn with_delta_schedule(mut self, schedule: DeltaSchedule) -> Self {
        self.delta_schedule = Some(schedule);
        self
    }

    /// Whether `φ₁` is Lipschitz on `[-range, range]`, the case in which
    /// the scheme conserves mass.
    pub fn implicit_phi_lipschitz(&self, range: f64) -> bool {
        self.implicit_phi.lipschitz_bound(range).is_finite()
    }

    fn check(&self, grid: &UniformGrid) -> Result<()> {
        self.implicit_op.check(grid)?;
        self.explicit_op.check(grid)?;
        if !(self.elliptic_tol > 0.0) {
            return Err(param("elliptic tolerance must be positive"));
        }
        if let Source::Steps(v) = &self.source {
            if v.len() != self.time.steps() {
                return Err(param(format!(
                    "{} source fields for {} time steps",
                    v.len(),
                    self.time.steps()
                )));
            }
            for f in v {
                if !f.grid().same_as(grid) {
                    return Err(Error::GridMismatch(
                        "source field grid differs from the solution grid".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `F^j`, `1 <= j <= J`.
    pub fn source_field(&self, grid: UniformGrid, j: usize) -> Result<Field> {
        if j == 0 || j > self.time.steps() {
            return Err(param(format!("step {j} outside 1..={}", self.time.steps())));
        }
        let k = self.time.knots();
        match &self.source {
            Source::Zero => Ok(Field::zeros(grid)),
            Source::Function(f) => source_slab_average(f.as_ref(), k[j - 1], k[j], grid),
            Source::Steps(v) => Ok(v[j - 1].clone()),
        }
    }
}

/// Largest admissible `Δt` for the explicit part: `1 / (L_{φ₂} ν₂)` with the
/// Lipschitz constant taken on `[-range, range]`.
pub fn cfl_bound(phi2: &dyn Monotone, nu2_mass: f64, range: f64) -> Result<f64> {
    if nu2_mass == 0.0 {
        return Ok(f64::INFINITY);
    }
    match phi2.lipschitz_bound(range) {
        LipschitzBound::Finite(l) if l > 0.0 => Ok(1.0 / (l * nu2_mass)),
        LipschitzBound::Finite(_) => Ok(f64::INFINITY),
        LipschitzBound::Unbounded => Err(Error::CflImpossible { range, mass: nu2_mass }),
    }
}

/// Default step `min(0.9 · bound, h)`.
pub fn default_time_step(h: f64, cfl: f64) -> f64 {
    (0.9 * cfl).min(h)
}

/// Split `L` into `(θL, (1−θ)L)`, the implicit and explicit parts of a
/// θ-method.
pub fn theta_split(op: &DiscreteOperator, theta: f64) -> Result<(DiscreteOperator, DiscreteOperator)> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(param(format!("theta must lie in [0, 1], got {theta}")));
    }
    Ok((op.scaled(theta)?, op.scaled(1.0 - theta)?))
}

/// `ψ + L[φ(ψ)]` with `L` already scaled by the step.
pub fn explicit_step(op2: &DiscreteOperator, phi2: &dyn Monotone, u: &Field) -> Result<Field> {
    if op2.is_zero() {
        op2.check(u.grid())?;
        return Ok(u.clone());
    }
    let p = u.map(|v| phi2.eval(v));
    let lp = op2.apply(&p)?;
    u.zip_map(&lp, |a, b| a + b)
}

/// `(1/Δt) ∫_{t_prev}^{t_cur} f(x, t) dt`, averaged over each cell.
pub fn source_slab_average(
    f: &(dyn Fn(&[f64], f64) -> f64 + Send + Sync),
    t_prev: f64,
    t_cur: f64,
    grid: UniformGrid,
) -> Result<Field> {
    if !(t_cur > t_prev) {
        return Err(param(format!("empty time slab [{t_prev}, {t_cur}]")));
    }
    let n = grid.dim();
    let hh = 0.5 * grid.h();
    let dt = t_cur - t_prev;
    let measure = grid.cell_volume() * dt;
    let tol = Tolerance::new(1e-10 * measure, 1e-10);
    let g = |z: &[f64]| f(&z[..n], z[n]);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let c = grid.center(k);
            let mut lo: Vec<f64> = c.iter().map(|x| x - hh).collect();
            let mut hi: Vec<f64> = c.iter().map(|x| x + hh).collect();
            lo.push(t_prev);
            hi.push(t_cur);
            integrate_box(&g, &lo, &hi, BallRegion::Outside(0.0), tol)
                .map(|v| v / measure)
                .map_err(|e| e.context("source slab average"))
        })
        .collect::<Result<Vec<f64>>>()?;
    Field::from_values(grid, values)
}

/// Mass bookkeeping after each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEntry {
    pub time: f64,
    pub mass: f64,
    /// `h^N Σ U^0 + Σ_l Δt_l h^N Σ F^l`.
    pub expected: f64,
}

impl MassEntry {
    /// Mass lost through the box boundary (or gained by solver error).
    pub fn leakage(&self) -> f64 {
        self.expected - self.mass
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub time: TimeGrid,
    /// Fields at the knots reached so far; `fields[0]` is the initial data.
    pub fields: Vec<Field>,
    pub reports: Vec<SolveReport>,
    pub ledger: Vec<MassEntry>,
    /// `h^N Σ |F^l|` per completed step.
    pub source_l1: Vec<f64>,
    /// `max |F^l|` per completed step.
    pub source_linf: Vec<f64>,
    /// `F^l` per completed step; empty for a zero source.
    pub sources: Vec<Field>,
}

impl Trajectory {
    pub fn grid(&self) -> &UniformGrid {
        self.fields[0].grid()
    }

    pub fn initial(&self) -> &Field {
        &self.fields[0]
    }

    pub fn last(&self) -> &Field {
        self.fields.last().expect("trajectory holds the initial field")
    }

    pub fn is_complete(&self) -> bool {
        self.fields.len() == self.time.knots().len()
    }

    /// Largest `|mass − expected| / max(|expected|, h^N)` along the run.
    pub fn relative_mass_drift(&self) -> f64 {
        let floor = self.grid().cell_volume();
        self.ledger
            .iter()
            .map(|e| e.leakage().abs() / e.expected.abs().max(floor))
            .fold(0.0, f64::max)
    }

    /// Write `U^j` for every `cadence`-th step (and the last) into `dir`.
    pub fn write_snapshots(&self, dir: &Path, cadence: usize) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let cadence = cadence.max(1);
        let last = self.fields.len() - 1;
        let mut written = Vec::new();
        for (j, f) in self.fields.iter().enumerate() {
            if j % cadence == 0 || j == last {
                let path = dir.join(format!("snapshot_{j:05}.txt"));
                f.save_snapshot(&path, self.time.knots()[j])?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

/// A run that stopped early, with what was computed before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub step: usize,
    pub error: Error,
    pub partial: Box<Trajectory>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted at step {}: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

struct Stepper<'a> {
    config: &'a SchemeConfig,
    schedule: DeltaSchedule,
    cached_dt: f64,
    op1: DiscreteOperator,
    op2: DiscreteOperator,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a SchemeConfig) -> Self {
        Self {
            config,
            schedule: config
                .delta_schedule
                .unwrap_or_else(|| DeltaSchedule::for_spacing(config.implicit_op.h())),
            cached_dt: f64::NAN,
            op1: config.implicit_op.clone(),
            op2: config.explicit_op.clone(),
        }
    }

    fn step(&mut self, prev: &Field, j: usize, source: &Field) -> Result<(Field, SolveReport)> {
        let dt = self.config.time.dt(j);
        if dt != self.cached_dt {
            self.op1 = self.config.implicit_op.scaled(dt)?;
            self.op2 = self.config.explicit_op.scaled(dt)?;
            self.cached_dt = dt;
        }
        let explicit = explicit_step(&self.op2, &self.config.explicit_phi, prev)?;
        let rho = explicit.zip_map(source, |a, b| a + dt * b)?;
        solve_implicit(
            &self.op1,
            &self.config.implicit_phi,
            &rho,
            self.config.elliptic_tol,
            self.schedule,
            Some(prev),
        )
    }
}

/// One full step from `U^{j-1}` to `U^j`.
pub fn advance(prev: &Field, config: &SchemeConfig, j: usize) -> Result<(Field, SolveReport)> {
    config.check(prev.grid())?;
    let source = config.source_field(*prev.grid(), j)?;
    Stepper::new(config).step(prev, j, &source)
}

/// Check the CFL condition for every step against the a priori range
/// `‖u₀‖_∞ + Σ Δt_l ‖F^l‖_∞`.
pub fn check_cfl(config: &SchemeConfig, range: f64) -> Result<()> {
    if config.explicit_op.is_zero() || config.cfl == CflPolicy::Off {
        return Ok(());
    }
    let bound = match cfl_bound(&config.explicit_phi, config.explicit_op.total_mass(), range) {
        Ok(b) => b,
        Err(e) if config.cfl == CflPolicy::Warn => {
            warn!("{e}");
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    for j in 1..=config.time.steps() {
        let dt = config.time.dt(j);
        if dt > bound * (1.0 + 1e-12) {
            match config.cfl {
                CflPolicy::Enforce => return Err(Error::CflViolation { step: j, dt, bound }),
                _ => {
                    warn!("CFL violated at step {j}: dt = {dt:e} > {bound:e}");
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Run the scheme from cell data `u0` over the whole time grid.
pub fn run(config: &SchemeConfig, u0: &Field) -> std::result::Result<Trajectory, RunFailure> {
    let grid = *u0.grid();
    let mut traj = Trajectory {
        time: config.time.clone(),
        fields: vec![u0.clone()],
        reports: Vec::new(),
        ledger: Vec::new(),
        source_l1: Vec::new(),
        source_linf: Vec::new(),
        sources: Vec::new(),
    };
    let fail = |step: usize, error: Error, traj: &Trajectory| RunFailure {
        step,
        error,
        partial: Box::new(traj.clone()),
    };
    if let Err(e) = config.check(&grid) {
        return Err(fail(0, e, &traj));
    }
    let steps = config.time.steps();
    let sources: Vec<Field> = match (1..=steps).map(|j| config.source_field(grid, j)).collect() {
        Ok(v) => v,
        Err(e) => return Err(fail(0, e, &traj)),
    };
    let range = u0.linf_norm()
        + sources
            .iter()
            .enumerate()
            .map(|(i, f)| config.time.dt(i + 1) * f.linf_norm())
            .sum::<f64>();
    if let Err(e) = check_cfl(config, range) {
        return Err(fail(0, e, &traj));
    }

    let mut stepper = Stepper::new(config);
    let mut expected = u0.integral();
    for (i, source) in sources.iter().enumerate() {
        let j = i + 1;
        let dt = config.time.dt(j);
        let (next, report) = match stepper.step(traj.last(), j, source) {
            Ok(r) => r,
            Err(e) => return Err(fail(j, e, &traj)),
        };
        expected += dt * source.integral();
        let entry = MassEntry {
            time: config.time.knots()[j],
            mass: next.integral(),
            expected,
        };
        debug!(
            "step {j}: t = {:.6}, {} iterations, leakage {:e}",
            entry.time,
            report.iterations,
            entry.leakage()
        );
        traj.source_l1.push(source.l1_norm());
        traj.source_linf.push(source.linf_norm());
        if !matches!(config.source, Source::Zero) {
            traj.sources.push(source.clone());
        }
        traj.ledger.push(entry);
        traj.reports.push(report);
        traj.fields.push(next);
    }
    Ok(traj)
}
